//! Unit-volatility diffusion models `dY = alpha(Y) dt + dW` and the checks
//! that make them admissible for path-space rejection sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::rng::RngStream;
use rand::Rng;
use rand_distr::StudentT;

/// Drift of a unit-volatility SDE together with its derivative and antiderivative.
pub trait Drift: Send + Sync {
    fn alpha(&self, y: f64) -> f64;
    fn alpha_prime(&self, y: f64) -> f64;
    /// An antiderivative `A` of `alpha`; only differences of `A` matter.
    fn potential(&self, y: f64) -> f64;

    /// A draw from the normalised invariant law `exp(2A) / Z`, if it is finite
    /// and the model knows how to sample it.
    fn sample_invariant(&self, _stream: &mut RngStream) -> Option<f64> {
        None
    }

    /// An upper bound on `alpha'` over the real line, if one is known.
    fn alpha_prime_sup(&self) -> Option<f64> {
        None
    }

    /// `true` when the speed density `exp(2A)` is constant.
    fn flat_speed(&self) -> bool {
        false
    }
}

/// A drift together with the bounds `Phi <= phi <= Phi + Psi` and `A <= a_sup`.
#[derive(Clone)]
pub struct DiffusionSpec {
    drift: Arc<dyn Drift>,
    pub phi_lower: f64,
    pub psi: f64,
    pub a_sup: f64,
    pub speed_finite: bool,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("phi_lower", &self.phi_lower)
            .field("psi", &self.psi)
            .field("a_sup", &self.a_sup)
            .field("speed_finite", &self.speed_finite)
            .finish_non_exhaustive()
    }
}

impl DiffusionSpec {
    pub fn new(
        drift: Arc<dyn Drift>,
        phi_lower: f64,
        psi: f64,
        a_sup: f64,
        speed_finite: bool,
    ) -> Result<Self> {
        if !phi_lower.is_finite() {
            return Err(invalid("phi_lower", "must be finite"));
        }
        if !(psi >= 0.0) || !psi.is_finite() {
            return Err(invalid("psi", format!("must be finite and >= 0, got {psi}")));
        }
        if !a_sup.is_finite() {
            return Err(invalid("a_sup", "must be finite"));
        }
        Ok(Self {
            drift,
            phi_lower,
            psi,
            a_sup,
            speed_finite,
        })
    }

    #[inline]
    pub fn alpha(&self, y: f64) -> f64 {
        self.drift.alpha(y)
    }

    #[inline]
    pub fn alpha_prime(&self, y: f64) -> f64 {
        self.drift.alpha_prime(y)
    }

    #[inline]
    pub fn potential(&self, y: f64) -> f64 {
        self.drift.potential(y)
    }

    pub fn sample_invariant(&self, stream: &mut RngStream) -> Option<f64> {
        self.drift.sample_invariant(stream)
    }

    pub fn flat_speed(&self) -> bool {
        self.drift.flat_speed()
    }

    pub fn alpha_prime_sup(&self) -> Option<f64> {
        self.drift.alpha_prime_sup()
    }

    /// `phi = (alpha^2 + alpha') / 2`.
    #[inline]
    pub fn phi(&self, y: f64) -> f64 {
        let a = self.drift.alpha(y);
        0.5 * (a * a + self.drift.alpha_prime(y))
    }

    /// Default segment length for piecewise rejection sampling on `[0, t_end]`.
    pub fn default_delta_max(&self, t_end: f64) -> f64 {
        t_end.min(1.0 / self.psi.max(1.0))
    }
}

/// Where the auxiliary path starts at time 0.
///
/// The proposal law is the bridge law reweighted by the chance that an
/// auxiliary path started from the speed measure meets it, so `Invariant` is
/// the start under which the corrected chain targets the bridge. `FromEnd`
/// runs the model from `x_T` over `[-T, 0]` instead; that law only matches
/// the speed measure as `T` grows, and leaves a bias at moderate `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AuxStart {
    #[default]
    Invariant,
    FromEnd,
}

/// Half-width, in units of `sqrt(T)`, of the window used for flat speed measures.
pub const FLAT_WINDOW_SDS: f64 = 10.0;

/// Starting point of an auxiliary path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxOrigin {
    /// Start at time 0 from this value.
    At(f64),
    /// Start at time `-T` from this value and run forward to 0.
    Propagate(f64),
}

impl AuxStart {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "invariant" => Ok(Self::Invariant),
            "from-end" => Ok(Self::FromEnd),
            _ => Err(Error::UnknownName { kind: "auxiliary start", name: name.to_string() }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Invariant => "invariant",
            Self::FromEnd => "from-end",
        }
    }

    /// Draws the auxiliary origin for the bridge `x0 -> x_t` over `[0, t_end]`.
    ///
    /// A flat speed measure is improper; it is truncated to a window reaching
    /// `FLAT_WINDOW_SDS * sqrt(T)` beyond both endpoints. Paths started outside
    /// it reach a typical bridge with negligible probability.
    pub fn origin(self, stream: &mut RngStream, spec: &DiffusionSpec, x0: f64, x_t: f64, t_end: f64) -> Result<AuxOrigin> {
        match self {
            Self::FromEnd => Ok(AuxOrigin::Propagate(x_t)),
            Self::Invariant => {
                if let Some(y) = spec.sample_invariant(stream) {
                    Ok(AuxOrigin::At(y))
                } else if spec.flat_speed() {
                    let w = FLAT_WINDOW_SDS * t_end.sqrt();
                    let lo = x0.min(x_t) - w;
                    let hi = x0.max(x_t) + w;
                    Ok(AuxOrigin::At(lo + (hi - lo) * stream.uniform()))
                } else {
                    Err(invalid("aux_start", "model has no samplable invariant law; use from-end"))
                }
            }
        }
    }
}

/// Free function form of [`DiffusionSpec::phi`].
pub fn phi(spec: &DiffusionSpec, y: f64) -> f64 {
    spec.phi(y)
}

/// Langevin diffusion whose invariant law is Student-t with `v` degrees of freedom.
#[derive(Debug, Clone, Copy)]
pub struct LangevinT {
    pub dof: f64,
}

impl LangevinT {
    /// Location of the maxima of `phi`.
    pub fn phi_argmax(&self) -> f64 {
        let v = self.dof;
        ((7.0 * v + v * v) / (v + 3.0)).sqrt()
    }

    pub fn phi_max(&self) -> f64 {
        let v = self.dof;
        (v + 1.0) * (v + 3.0).powi(2) / (32.0 * (v * v + 5.0 * v))
    }

    pub fn phi_min(&self) -> f64 {
        -(self.dof + 1.0) / (4.0 * self.dof)
    }

    /// Closed form of `phi`.
    pub fn phi_closed(&self, x: f64) -> f64 {
        let v = self.dof;
        let q = v + x * x;
        (v + 1.0) * (-2.0 * v + x * x * (v + 3.0)) / (8.0 * q * q)
    }
}

impl Drift for LangevinT {
    fn alpha(&self, x: f64) -> f64 {
        let v = self.dof;
        -(v + 1.0) * x / (2.0 * (v + x * x))
    }

    fn alpha_prime(&self, x: f64) -> f64 {
        let v = self.dof;
        let q = v + x * x;
        (v + 1.0) * (x * x - v) / (2.0 * q * q)
    }

    fn potential(&self, x: f64) -> f64 {
        let v = self.dof;
        -0.25 * (v + 1.0) * (x * x / v).ln_1p()
    }

    fn alpha_prime_sup(&self) -> Option<f64> {
        // alpha' peaks at y^2 = 3v.
        Some((self.dof + 1.0) / (16.0 * self.dof))
    }

    fn sample_invariant(&self, stream: &mut RngStream) -> Option<f64> {
        StudentT::new(self.dof).ok().map(|d| stream.sample(d))
    }
}

pub fn langevin_t_spec(v: f64) -> Result<DiffusionSpec> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid("dof", format!("must be finite and > 0, got {v}")));
    }
    let model = LangevinT { dof: v };
    let lower = model.phi_min();
    DiffusionSpec::new(Arc::new(model), lower, model.phi_max() - lower, 0.0, true)
}

/// `alpha = 0`: plain Brownian motion. The speed measure is infinite, but the
/// bridge target is the Gaussian Brownian bridge.
#[derive(Debug, Clone, Copy)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn alpha(&self, _: f64) -> f64 {
        0.0
    }
    fn alpha_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn potential(&self, _: f64) -> f64 {
        0.0
    }
    fn alpha_prime_sup(&self) -> Option<f64> {
        Some(0.0)
    }
    fn flat_speed(&self) -> bool {
        true
    }
}

pub fn brownian_spec() -> DiffusionSpec {
    DiffusionSpec::new(Arc::new(ZeroDrift), 0.0, 0.0, 0.0, false).expect("constant bounds")
}

/// Drift assembled from user closures.
pub struct FnDrift<A, D, P> {
    pub alpha: A,
    pub alpha_prime: D,
    pub potential: P,
}

impl<A, D, P> Drift for FnDrift<A, D, P>
where
    A: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
    P: Fn(f64) -> f64 + Send + Sync,
{
    fn alpha(&self, y: f64) -> f64 {
        (self.alpha)(y)
    }
    fn alpha_prime(&self, y: f64) -> f64 {
        (self.alpha_prime)(y)
    }
    fn potential(&self, y: f64) -> f64 {
        (self.potential)(y)
    }
}

/// An SDE `dX = b(X) dt + sigma(X) dW` before the Lamperti change of variables.
pub struct RawSde<'a> {
    pub b: &'a dyn Fn(f64) -> f64,
    pub sigma: &'a dyn Fn(f64) -> f64,
    pub sigma_prime: &'a dyn Fn(f64) -> f64,
}

/// Lamperti transform of `x` relative to `reference`:
/// returns `y = int_reference^x du / sigma(u)` and the unit-volatility drift at `y`.
pub fn lamperti(raw: &RawSde<'_>, x: f64, reference: f64) -> Result<(f64, f64)> {
    let (lo, hi) = if reference <= x { (reference, x) } else { (x, reference) };
    let probes = 64;
    for i in 0..=probes {
        let u = lo + (hi - lo) * i as f64 / probes as f64;
        let s = (raw.sigma)(u);
        if !(s > 0.0) {
            return Err(Error::Domain(format!("sigma({u}) = {s} is not positive")));
        }
    }
    let y = quad::integrate(|u| 1.0 / (raw.sigma)(u), reference, x, 1e-12);
    let s = (raw.sigma)(x);
    let alpha = (raw.b)(x) / s - 0.5 * (raw.sigma_prime)(x);
    Ok((y, alpha))
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Grid point with the largest violation (or the largest slack when passing).
    pub worst_point: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Uniform validation grid on `[lo, hi]` with `points` nodes.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Checks differentiability consistency, integrability, the bounds on `phi`,
/// the bound on `A`, and finiteness of the speed measure on `grid`.
pub fn validate_assumptions(spec: &DiffusionSpec, grid: &[f64]) -> Result<AssumptionReport> {
    if grid.is_empty() {
        return Err(invalid("grid", "must not be empty"));
    }
    let mut checks = Vec::new();

    // A1: alpha' against central differences.
    let mut worst = (0.0f64, grid[0]);
    for &y in grid {
        let h = 1e-5 * y.abs().max(1.0);
        let fd = (spec.alpha(y + h) - spec.alpha(y - h)) / (2.0 * h);
        let ap = spec.alpha_prime(y);
        let err = (fd - ap).abs() / ap.abs().max(1.0);
        if !(err <= worst.0) {
            worst = (err, y);
        }
    }
    checks.push(AssumptionCheck {
        name: "A1",
        passed: worst.0 <= 1e-6,
        worst_point: Some(worst.1),
        detail: format!("max relative finite-difference error {:.3e}", worst.0),
    });

    // A_sup bound, which also makes exp{A(u) - (u-x)^2/2T} integrable.
    let mut worst = (f64::NEG_INFINITY, grid[0]);
    for &y in grid {
        let excess = spec.potential(y) - spec.a_sup;
        if !(excess <= worst.0) {
            worst = (excess, y);
        }
    }
    checks.push(AssumptionCheck {
        name: "A_sup",
        passed: worst.0 <= 1e-12,
        worst_point: Some(worst.1),
        detail: format!("max A(y) - A_sup = {:.3e}", worst.0),
    });

    // A2: the tilted Gaussian integrand has finite, positive mass at a few anchors.
    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let anchors = [lo, 0.5 * (lo + hi), hi];
    let mut a2_ok = true;
    let mut a2_bad = None;
    for &x in &anchors {
        let mass = quad::integrate(
            |u| (spec.potential(u) - spec.a_sup - (u - x) * (u - x) / 2.0).exp(),
            x - 40.0,
            x + 40.0,
            1e-10,
        );
        if !(mass.is_finite() && mass > 0.0) {
            a2_ok = false;
            a2_bad = Some(x);
        }
    }
    checks.push(AssumptionCheck {
        name: "A2",
        passed: a2_ok && worst.0 <= 1e-12,
        worst_point: a2_bad,
        detail: "tilted Gaussian mass finite at grid anchors (T = 1)".into(),
    });

    // A3 / A4: Phi <= phi <= Phi + Psi.
    let mut low = (f64::INFINITY, grid[0]);
    let mut high = (f64::NEG_INFINITY, grid[0]);
    for &y in grid {
        let p = spec.phi(y);
        if !(p >= low.0) {
            low = (p, y);
        }
        if !(p <= high.0) {
            high = (p, y);
        }
    }
    let tol = 1e-12 * (1.0 + spec.psi.abs() + spec.phi_lower.abs());
    checks.push(AssumptionCheck {
        name: "A3",
        passed: low.0 >= spec.phi_lower - tol,
        worst_point: Some(low.1),
        detail: format!("min phi = {:.6} vs Phi = {:.6}", low.0, spec.phi_lower),
    });
    checks.push(AssumptionCheck {
        name: "A4",
        passed: high.0 - spec.phi_lower <= spec.psi + tol,
        worst_point: Some(high.1),
        detail: format!(
            "max phi - Phi = {:.6} vs Psi = {:.6}",
            high.0 - spec.phi_lower,
            spec.psi
        ),
    });

    // A5: speed density exp{2A} integrates and has decayed at the grid edges.
    let z = 0.5 * (lo + hi);
    let m = |y: f64| (2.0 * (spec.potential(y) - spec.potential(z))).exp();
    let mass = quad::integrate(m, lo, hi, 1e-10);
    let peak = grid.iter().map(|&y| m(y)).fold(0.0, f64::max);
    let edge = m(lo).max(m(hi));
    let a5 = mass.is_finite() && edge <= 1e-3 * peak && spec.speed_finite;
    checks.push(AssumptionCheck {
        name: "A5",
        passed: a5,
        worst_point: Some(if m(lo) >= m(hi) { lo } else { hi }),
        detail: format!("speed mass on grid {mass:.4e}, edge/peak ratio {:.3e}", edge / peak),
    });

    Ok(AssumptionReport { checks })
}

/// Parameters a registered model factory may consume.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelParams {
    pub dof: Option<f64>,
}

type ModelFactory = fn(&ModelParams) -> Result<DiffusionSpec>;

/// Built-in models selectable by name.
pub struct ModelRegistry {
    entries: BTreeMap<&'static str, ModelFactory>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("langevin-t", |p| {
            langevin_t_spec(p.dof.ok_or_else(|| invalid("dof", "required for langevin-t"))?)
        });
        r.register("brownian", |_| Ok(brownian_spec()));
        r
    }
}

impl ModelRegistry {
    pub fn register(&mut self, name: &'static str, factory: ModelFactory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn build(&self, name: &str, params: &ModelParams) -> Result<DiffusionSpec> {
        let factory = self.entries.get(name).ok_or_else(|| Error::UnknownName {
            kind: "model",
            name: name.to_string(),
        })?;
        factory(params)
    }
}
