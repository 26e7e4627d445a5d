//! Exact Bernoulli draws ("p-coins") from sequences of certified approximations.
//!
//! A single uniform `U` is drawn and compared against successively tighter
//! intervals `(p_hat - eps, p_hat + eps)` until it falls outside one of them.

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_COIN_CEILING: usize = 10_000;

/// Yields `(p_hat, eps)` pairs with `|p - p_hat| < eps` and `eps -> 0`.
pub trait PCoinApproximator {
    fn next_bound(&mut self) -> Result<(f64, f64)>;
}

impl<F> PCoinApproximator for F
where
    F: FnMut() -> (f64, f64),
{
    fn next_bound(&mut self) -> Result<(f64, f64)> {
        Ok(self())
    }
}

/// Tosses a coin with success probability equal to the limit of `approx`.
pub fn toss_p_coin(
    stream: &mut RngStream,
    approx: &mut dyn PCoinApproximator,
    ceiling: usize,
) -> Result<bool> {
    let u = stream.uniform();
    toss_with_uniform(u, approx, ceiling)
}

/// Deterministic core of [`toss_p_coin`] for an externally supplied `u`.
pub fn toss_with_uniform(
    u: f64,
    approx: &mut dyn PCoinApproximator,
    ceiling: usize,
) -> Result<bool> {
    for _ in 0..ceiling.max(1) {
        let (p_hat, eps) = approx.next_bound()?;
        if !p_hat.is_finite() || !(eps >= 0.0) {
            return Err(Error::NonFinite(format!("p_hat={p_hat}, eps={eps}")));
        }
        // Below this width the interval endpoints round onto p_hat itself.
        if eps > 0.0 && eps < f64::EPSILON * p_hat.abs().max(u).max(f64::MIN_POSITIVE) {
            return Err(Error::FloatHeadroom { u, p_hat, eps });
        }
        if u < p_hat - eps {
            return Ok(true);
        }
        if u >= p_hat + eps {
            return Ok(false);
        }
    }
    Err(Error::CoinCeiling {
        iterations: ceiling,
    })
}

/// A coin whose probability is known in closed form.
pub fn toss_exact(stream: &mut RngStream, p: f64) -> bool {
    stream.uniform() < p
}
