use thiserror::Error;

/// Errors raised by the samplers and the model layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} lies outside the admissible range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("p-coin undecided after {iterations} refinements (ceiling reached)")]
    CoinCeiling { iterations: usize },

    #[error(
        "p-coin error bound {eps:e} fell below floating-point resolution while U={u} is still \
         undecided around {p_hat}; insufficient numeric headroom"
    )]
    FloatHeadroom { u: f64, p_hat: f64, eps: f64 },

    #[error("series evaluation produced a non-finite value: {0}")]
    NonFinite(String),

    #[error("{sampler}: {attempts} consecutive rejections; {hint}")]
    Starvation {
        sampler: &'static str,
        attempts: u64,
        hint: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("run budget exhausted after {attempts} attempts")]
    BudgetExhausted { attempts: u64 },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
