//! Crossing coins for the auxiliary path: the closed-form regime-A probability
//! and the series-based regime-B and regime-C coins, with the threshold
//! fallback used when the series is numerically out of reach.

use std::f64::consts::PI;

use libm::lgamma;

use crate::brownian::PAIR_SIGMA2;
use crate::error::{invalid, Error, Result};
use crate::pcoin::{toss_p_coin, PCoinApproximator};
use crate::rng::RngStream;

/// Which conditioning the regime coin carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Interval left of the confluence time: first difference does not hit zero.
    B,
    /// Interval ending at the confluence time: first difference first hits zero
    /// exactly at the right end.
    C,
}

/// Values of the two difference processes at the ends of one interval.
/// `g.0` is the forward path minus the reversed backward path, `g.1` the
/// forward path minus the auxiliary path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeCoinInput {
    pub g0: (f64, f64),
    pub g_t: (f64, f64),
    pub len: f64,
}

impl RegimeCoinInput {
    pub fn new(g0: (f64, f64), g_t: (f64, f64), len: f64) -> Self {
        Self { g0, g_t, len }
    }

    /// Sign-pattern index of `g0`: 1 = (+,+), 2 = (+,-), 3 = (-,+), 4 = (-,-).
    pub fn k(&self) -> u8 {
        match (self.g0.0 > 0.0, self.g0.1 > 0.0) {
            (true, true) => 1,
            (true, false) => 2,
            (false, true) => 3,
            (false, false) => 4,
        }
    }

    /// Patterns 3 and 4 map onto 2 and 1 by negating both coordinates at both ends.
    pub fn reflected(&self) -> Self {
        if self.g0.0 < 0.0 {
            Self {
                g0: (-self.g0.0, -self.g0.1),
                g_t: (-self.g_t.0, -self.g_t.1),
                len: self.len,
            }
        } else {
            *self
        }
    }

    pub fn validate(&self, regime: Regime) -> Result<()> {
        if !(self.len > 0.0) || !self.len.is_finite() {
            return Err(invalid("len", format!("must be finite and > 0, got {}", self.len)));
        }
        let (a, b) = (self.g0, self.g_t);
        if ![a.0, a.1, b.0, b.1].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("coin input {self:?}")));
        }
        if !(a.1 * b.1 > 0.0) {
            return Err(invalid("g[2]", "second difference must keep a nonzero sign at both ends"));
        }
        match regime {
            Regime::B if !(a.0 * b.0 > 0.0) => {
                Err(invalid("g[1]", "regime B needs a nonzero same-signed first difference"))
            }
            Regime::C if b.0 != 0.0 || a.0 == 0.0 => {
                Err(invalid("g[1]", "regime C needs g0[1] != 0 and gT[1] = 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Skew polar coordinates of a difference pair inside its wedge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCoords {
    pub r: f64,
    pub theta: f64,
    pub alpha: f64,
    pub upsilon: f64,
}

/// Wedge multiplier: 2 for pattern 1, 1 for pattern 2.
fn upsilon(k: u8) -> f64 {
    if k == 1 {
        2.0
    } else {
        1.0
    }
}

/// Radius, angle and wedge opening for `g` under sign pattern `k` (1 or 2).
pub fn polar_reparam(g: (f64, f64), k: u8) -> Result<PolarCoords> {
    if !(k == 1 || k == 2) {
        return Err(invalid("k", "reflect patterns 3 and 4 before the polar map"));
    }
    let (g1, g2) = g;
    if g1 == 0.0 && g2 == 0.0 {
        return Err(invalid("g", "the origin has no angle"));
    }
    let r = ((2.0 / 3.0) * (g1 * g1 + g2 * g2 - g1 * g2)).max(0.0).sqrt();
    let denom = 2.0 * g1 - g2;
    let num = 3f64.sqrt() * g2.abs();
    let theta = if denom > 0.0 {
        (num / denom).atan()
    } else if denom == 0.0 {
        PI / 2.0
    } else {
        PI + (num / denom).atan()
    };
    let ups = upsilon(k);
    Ok(PolarCoords { r, theta, alpha: ups * PI / 3.0, upsilon: ups })
}

#[derive(Debug, Clone, Copy)]
enum SineFactor {
    /// `sin(n pi thetaT / alpha) sin(n pi theta0 / alpha)`
    B { theta0: f64, theta_t: f64 },
    /// `n sin(n pi (alpha - theta0) / alpha)`
    C { theta0: f64 },
}

/// The series `c * sum_n s_n I_{nu_n}(2x)` with `nu_n = n * 3 / upsilon`.
#[derive(Debug, Clone, Copy)]
pub struct SeriesTerms {
    pub log_c: f64,
    /// `r_0 r_T / (2 len)`.
    pub x: f64,
    pub alpha: f64,
    pub upsilon: f64,
    sine: SineFactor,
}

impl SeriesTerms {
    pub fn c(&self) -> f64 {
        self.log_c.exp()
    }

    pub fn nu(&self, n: usize) -> f64 {
        n as f64 * 3.0 / self.upsilon
    }

    pub fn s(&self, n: usize) -> f64 {
        let w = n as f64 * PI / self.alpha;
        match self.sine {
            SineFactor::B { theta0, theta_t } => (w * theta_t).sin() * (w * theta0).sin(),
            SineFactor::C { theta0 } => n as f64 * (w * (self.alpha - theta0)).sin(),
        }
    }

    /// Bound on `|s_n|`.
    fn s_bound(&self, n: usize) -> f64 {
        match self.sine {
            SineFactor::B { .. } => 1.0,
            SineFactor::C { .. } => n as f64,
        }
    }

    fn linear_sine(&self) -> bool {
        matches!(self.sine, SineFactor::C { .. })
    }
}

/// `ln(1 - exp(-a))` for `a > 0`.
fn ln_one_minus_exp_neg(a: f64) -> f64 {
    (-(-a).exp_m1()).ln()
}

/// Quadratic form `d' [[2,-1],[-1,2]] d`.
fn skew_quadratic(d: (f64, f64)) -> f64 {
    2.0 * d.0 * d.0 - 2.0 * d.0 * d.1 + 2.0 * d.1 * d.1
}

pub fn regime_b_series_terms(input: &RegimeCoinInput) -> Result<SeriesTerms> {
    input.validate(Regime::B)?;
    let inp = input.reflected();
    let k = inp.k();
    let p0 = polar_reparam(inp.g0, k)?;
    let pt = polar_reparam(inp.g_t, k)?;
    let t = inp.len;
    let d = (inp.g_t.0 - inp.g0.0, inp.g_t.1 - inp.g0.1);
    let log_c = skew_quadratic(d) / (6.0 * t) - ln_one_minus_exp_neg(inp.g0.0 * inp.g_t.0 / t)
        + (4.0 * PI / p0.alpha).ln()
        - (pt.r * pt.r + p0.r * p0.r) / (2.0 * t);
    if !log_c.is_finite() {
        return Err(Error::NonFinite(format!("log c_B = {log_c}")));
    }
    Ok(SeriesTerms {
        log_c,
        x: p0.r * pt.r / (2.0 * t),
        alpha: p0.alpha,
        upsilon: p0.upsilon,
        sine: SineFactor::B { theta0: p0.theta, theta_t: pt.theta },
    })
}

pub fn regime_c_series_terms(input: &RegimeCoinInput) -> Result<SeriesTerms> {
    input.validate(Regime::C)?;
    let inp = input.reflected();
    let k = inp.k();
    let p0 = polar_reparam(inp.g0, k)?;
    let t = inp.len;
    let r_t = (2.0f64 / 3.0).sqrt() * inp.g_t.1.abs();
    let d = (-inp.g0.0, inp.g_t.1 - inp.g0.1);
    let alpha = p0.alpha;
    let log_c = skew_quadratic(d) / (6.0 * t)
        + (4.0 * PI * PI * t / (alpha * alpha * r_t * inp.g0.0 * 2f64.sqrt())).ln()
        - (r_t * r_t + p0.r * p0.r) / (2.0 * t);
    if !log_c.is_finite() {
        return Err(Error::NonFinite(format!("log c_C = {log_c}")));
    }
    Ok(SeriesTerms {
        log_c,
        x: p0.r * r_t / (2.0 * t),
        alpha,
        upsilon: p0.upsilon,
        sine: SineFactor::C { theta0: p0.theta },
    })
}

pub fn series_terms(input: &RegimeCoinInput, regime: Regime) -> Result<SeriesTerms> {
    match regime {
        Regime::B => regime_b_series_terms(input),
        Regime::C => regime_c_series_terms(input),
    }
}

/// `ln` of the `(n, m)` summand of `I_{nu_n}(2x)` without the sine factor.
fn log_term(x_ln: f64, nu: f64, m: usize) -> f64 {
    let m = m as f64;
    (2.0 * m + nu) * x_ln - lgamma(m + 1.0) - lgamma(m + nu + 1.0)
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Partial sum over `n <= n_max`, `m <= m_max`, plus a bound on its rounding error.
fn partial_sum(terms: &SeriesTerms, n_max: usize, m_max: usize) -> Result<(f64, f64)> {
    if terms.x == 0.0 {
        return Ok((0.0, 0.0));
    }
    let x_ln = terms.x.ln();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut floor = 0.0;
    for n in 1..=n_max {
        let nu = terms.nu(n);
        let s = terms.s(n);
        for m in 0..=m_max {
            let lt = log_term(x_ln, nu, m);
            let v = (terms.log_c + lt).exp();
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("series term ({n}, {m}) overflows")));
            }
            let mag = terms.log_c.abs()
                + ((2 * m) as f64 + nu) * x_ln.abs()
                + lgamma(m as f64 + 1.0)
                + lgamma(m as f64 + nu + 1.0).abs();
            sum += s * v;
            abs_sum += (s * v).abs();
            floor += (s * v).abs() * f64::EPSILON * (4.0 * mag + 8.0 + 4.0 * n as f64);
        }
    }
    let count = (n_max * (m_max + 1)) as f64;
    floor += abs_sum * f64::EPSILON * (count + 4.0);
    Ok((sum, floor))
}

/// Truncation bound in closed form: `c (y^{N+1}/(N+1)! + x^{2M+2} y / ((M+1)!(M+2)!)) e^{y + x^2}`.
fn paper_bound(terms: &SeriesTerms, n_max: usize, m_max: usize) -> f64 {
    if terms.x == 0.0 {
        return 0.0;
    }
    let x_ln = terms.x.ln();
    let y_ln = 3.0 / terms.upsilon * x_ln;
    let y = y_ln.exp();
    let nf = n_max as f64;
    let mf = m_max as f64;
    let a = (nf + 1.0) * y_ln - lgamma(nf + 2.0);
    let b = (2.0 * mf + 2.0) * x_ln + y_ln - lgamma(mf + 2.0) - lgamma(mf + 3.0);
    (terms.log_c + log_add(a, b) + y + terms.x * terms.x).exp()
}

/// A sharper truncation bound from geometric majorants of both tails; infinite
/// when the majorants do not contract yet.
fn tight_bound(terms: &SeriesTerms, n_max: usize, m_max: usize) -> f64 {
    if terms.x == 0.0 {
        return 0.0;
    }
    let x = terms.x;
    let x_ln = x.ln();
    let mf = m_max as f64;
    // Inner tails, m > M: ratio of consecutive summands decreases in m and n.
    let q = x * x / ((mf + 2.0) * (mf + 2.0 + terms.nu(1)));
    if !(q < 1.0) {
        return f64::INFINITY;
    }
    let mut r1 = 0.0;
    for n in 1..=n_max {
        let lt = log_term(x_ln, terms.nu(n), m_max + 1);
        r1 += terms.s_bound(n) * (terms.log_c + lt).exp();
    }
    r1 /= 1.0 - q;
    // Outer tail, n > N, with I_nu(2x) <= x^nu e^{x^2/(nu+1)} / Gamma(nu+1).
    let step = 3.0 / terms.upsilon;
    let n1 = n_max + 1;
    let nu1 = terms.nu(n1);
    let growth = if terms.linear_sine() { (n1 as f64 + 1.0) / n1 as f64 } else { 1.0 };
    let rho = growth * (step * x_ln + lgamma(nu1 + 1.0) - lgamma(nu1 + 1.0 + step)).exp();
    if !(rho < 1.0) {
        return f64::INFINITY;
    }
    let w1 = terms.s_bound(n1)
        * (terms.log_c + nu1 * x_ln + x * x / (nu1 + 1.0) - lgamma(nu1 + 1.0)).exp();
    r1 + w1 / (1.0 - rho)
}

/// Partial sum `p_hat^(N,M)` and the closed-form truncation bound `eps^(N,M)`.
pub fn p_hat_eps(input: &RegimeCoinInput, regime: Regime, n: usize, m: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(invalid("N", "must be >= 1"));
    }
    let terms = series_terms(input, regime)?;
    let (p, _) = partial_sum(&terms, n, m)?;
    let eps = paper_bound(&terms, n, m);
    if !p.is_finite() || eps.is_nan() {
        return Err(Error::NonFinite(format!("p_hat = {p}, eps = {eps}")));
    }
    Ok((p, eps))
}

fn m_hat_terms(terms: &SeriesTerms, n: usize) -> usize {
    if terms.x == 0.0 {
        return 0;
    }
    let x_ln = terms.x.ln();
    let step = 3.0 / terms.upsilon;
    let y_ln = step * x_ln;
    let mut m = 0usize;
    for big_n in 1..=n {
        let lhs = (big_n as f64 + 1.0) * y_ln - lgamma(big_n as f64 + 2.0);
        loop {
            let mf = m as f64;
            let rhs = (2.0 * mf + 2.0 + step) * x_ln - lgamma(mf + 2.0) - lgamma(mf + 3.0);
            if lhs >= rhs {
                break;
            }
            m += 1;
        }
    }
    m
}

/// Inner truncation level balancing the two tail terms, non-decreasing in `n`.
pub fn m_hat(n: usize, input: &RegimeCoinInput, regime: Regime) -> Result<usize> {
    Ok(m_hat_terms(&series_terms(input, regime)?, n))
}

/// Successive certified approximations of a regime coin's probability.
pub struct RegimeApproximator {
    terms: SeriesTerms,
    step: usize,
    n: usize,
    m: usize,
    saturated: bool,
}

impl RegimeApproximator {
    pub fn new(input: &RegimeCoinInput, regime: Regime) -> Result<Self> {
        Ok(Self { terms: series_terms(input, regime)?, step: 0, n: 0, m: 0, saturated: false })
    }

    pub fn terms(&self) -> &SeriesTerms {
        &self.terms
    }
}

impl PCoinApproximator for RegimeApproximator {
    fn next_bound(&mut self) -> Result<(f64, f64)> {
        self.n = if self.step < 6 { self.step + 1 } else { (self.n * 3).div_ceil(2) };
        self.step += 1;
        let x = self.terms.x;
        let floor_m = 2 * self.n + (2.0 * x).ceil() as usize;
        self.m = self.m.max(m_hat_terms(&self.terms, self.n)).max(floor_m);
        let (p, rounding) = partial_sum(&self.terms, self.n, self.m)?;
        let tight = tight_bound(&self.terms, self.n, self.m);
        let trunc = if tight.is_finite() { tight } else { paper_bound(&self.terms, self.n, self.m) };
        // Once rounding dominates, a further refinement cannot shrink eps.
        if trunc.is_finite() && trunc < 0.25 * rounding {
            if self.saturated {
                return Err(Error::FloatHeadroom { u: f64::NAN, p_hat: p, eps: rounding });
            }
            self.saturated = true;
        }
        let eps = trunc + rounding + f64::MIN_POSITIVE;
        if !eps.is_finite() || !p.is_finite() {
            return Err(Error::NonFinite(format!("p_hat = {p}, eps = {eps}")));
        }
        Ok((p, eps))
    }
}

/// Crossing probability of two independent unit bridges whose difference goes
/// from `d_left` to `d_right` over `len`.
pub fn p_a_cross_prob(d_left: f64, d_right: f64, len: f64) -> Result<f64> {
    if !(d_left * d_right > 0.0) {
        return Err(invalid("d", "endpoints must be nonzero and same-signed"));
    }
    if !(len > 0.0) {
        return Err(invalid("len", "must be > 0"));
    }
    Ok((-2.0 * (d_left * d_right).abs() / (PAIR_SIGMA2 * len)).exp())
}

/// Which rule decided a regime coin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinBranch {
    /// Series coin tossed exactly.
    Exact,
    /// Second difference far from zero at both ends: no crossing.
    FarApart,
    /// First difference far from zero: its conditioning is dropped.
    DropConditioning,
    /// Series coin numerically out of reach: conditioning dropped instead.
    NumericFallback,
}

/// Tunables of the regime coins.
#[derive(Debug, Clone, Copy)]
pub struct CoinSettings {
    pub gamma: f64,
    pub ceiling: usize,
}

impl Default for CoinSettings {
    fn default() -> Self {
        Self { gamma: 3.0, ceiling: crate::pcoin::DEFAULT_COIN_CEILING }
    }
}

fn drop_conditioning(stream: &mut RngStream, inp: &RegimeCoinInput) -> Result<bool> {
    let cross = p_a_cross_prob(inp.g0.1, inp.g_t.1, inp.len)?;
    Ok(stream.uniform() >= cross)
}

/// Tosses a regime coin; `true` means the auxiliary path does not cross.
pub fn toss_regime_coin_traced(
    stream: &mut RngStream,
    input: &RegimeCoinInput,
    regime: Regime,
    settings: CoinSettings,
) -> Result<(bool, CoinBranch)> {
    if !(settings.gamma > 0.0) {
        return Err(invalid("gamma", "must be > 0"));
    }
    input.validate(regime)?;
    let inp = input.reflected();
    let s = settings.gamma * inp.len.sqrt();
    let (lo1, hi1) = (inp.g0.0.min(inp.g_t.0), inp.g0.0.max(inp.g_t.0));
    let (a, b) = (inp.g0.1.abs(), inp.g_t.1.abs());
    let (lo2, hi2) = (a.min(b), a.max(b));
    let bounded = lo1 < s && hi1 < 2.0 * s && lo2 < s && hi2 < 2.0 * s;
    if !bounded {
        if lo2 >= s {
            return Ok((true, CoinBranch::FarApart));
        }
        if lo1 >= s {
            return Ok((drop_conditioning(stream, &inp)?, CoinBranch::DropConditioning));
        }
    }
    let exact = RegimeApproximator::new(&inp, regime)
        .and_then(|mut approx| toss_p_coin(stream, &mut approx, settings.ceiling));
    match exact {
        Ok(bit) => Ok((bit, CoinBranch::Exact)),
        Err(Error::NonFinite(_) | Error::FloatHeadroom { .. } | Error::CoinCeiling { .. }) => {
            Ok((drop_conditioning(stream, &inp)?, CoinBranch::NumericFallback))
        }
        Err(e) => Err(e),
    }
}

pub fn toss_regime_coin(
    stream: &mut RngStream,
    input: &RegimeCoinInput,
    regime: Regime,
    settings: CoinSettings,
) -> Result<bool> {
    toss_regime_coin_traced(stream, input, regime, settings).map(|(bit, _)| bit)
}

/// Converged probability of a regime coin, for diagnostics and tests.
pub fn converged_probability(input: &RegimeCoinInput, regime: Regime, tol: f64) -> Result<(f64, f64)> {
    let mut approx = RegimeApproximator::new(input, regime)?;
    for _ in 0..200 {
        let (p, eps) = approx.next_bound()?;
        if eps < tol {
            return Ok((p, eps));
        }
    }
    Err(Error::CoinCeiling { iterations: 200 })
}

/// `(theta1 / theta2) * delta_star1`: step size at which a second
/// Ornstein-Uhlenbeck-like model switches samplers, given the first's.
pub fn switch_heuristic(theta1: f64, delta_star1: f64, theta2: f64) -> Result<f64> {
    if !(theta1 > 0.0 && delta_star1 > 0.0 && theta2 > 0.0) {
        return Err(invalid("theta", "all inputs must be > 0"));
    }
    Ok(theta1 / theta2 * delta_star1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_examples() {
        let p = polar_reparam((1.0, 1.0), 1).unwrap();
        assert!((p.r - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((p.theta - PI / 3.0).abs() < 1e-15);
        assert!((p.alpha - 2.0 * PI / 3.0).abs() < 1e-15);
        let p = polar_reparam((1.0, -1.0), 2).unwrap();
        assert!((p.r - 2f64.sqrt()).abs() < 1e-15);
        assert!((p.theta - PI / 6.0).abs() < 1e-15);
        assert!((p.alpha - PI / 3.0).abs() < 1e-15);
        assert_eq!(polar_reparam((1.0, 2.0), 1).unwrap().theta, PI / 2.0);
        assert!(polar_reparam((0.0, 0.0), 1).is_err());
        assert!(polar_reparam((1.0, 1.0), 3).is_err());
    }

    #[test]
    fn angles_stay_inside_the_wedge() {
        for &(g1, g2, k) in &[(0.1, 5.0, 1u8), (5.0, 0.1, 1), (0.1, -5.0, 2), (5.0, -0.1, 2)] {
            let p = polar_reparam((g1, g2), k).unwrap();
            assert!(p.theta > 0.0 && p.theta < p.alpha, "{g1},{g2}: {}", p.theta);
        }
    }

    #[test]
    fn sign_patterns_and_reflection() {
        let i = RegimeCoinInput::new((-1.0, 2.0), (-0.5, 1.0), 1.0);
        assert_eq!(i.k(), 3);
        let r = i.reflected();
        assert_eq!(r.k(), 2);
        assert_eq!(r.g_t, (0.5, -1.0));
        assert_eq!(RegimeCoinInput::new((-1.0, -2.0), (-1.0, -1.0), 1.0).reflected().k(), 1);
    }

    #[test]
    fn sine_factors() {
        // theta0 = thetaT = alpha/2 gives s_1 = 1.
        let t = SeriesTerms {
            log_c: 0.0,
            x: 1.0,
            alpha: PI / 3.0,
            upsilon: 1.0,
            sine: SineFactor::B { theta0: PI / 6.0, theta_t: PI / 6.0 },
        };
        assert!((t.s(1) - 1.0).abs() < 1e-15);
        let c = SeriesTerms { sine: SineFactor::C { theta0: PI / 3.0 }, ..t };
        for n in 1..20 {
            assert!(c.s(n).abs() < 1e-13);
            assert!(t.s(n).abs() <= 1.0);
        }
    }

    #[test]
    fn regime_validation() {
        let b = RegimeCoinInput::new((1.0, 1.0), (1.0, 1.0), 1.0);
        assert!(b.validate(Regime::B).is_ok());
        assert!(b.validate(Regime::C).is_err());
        assert!(RegimeCoinInput::new((1.0, 1.0), (-1.0, 1.0), 1.0).validate(Regime::B).is_err());
        assert!(RegimeCoinInput::new((1.0, 1.0), (0.0, 1.0), 1.0).validate(Regime::C).is_ok());
        assert!(RegimeCoinInput::new((1.0, 1.0), (0.0, -1.0), 1.0).validate(Regime::C).is_err());
    }

    #[test]
    fn converged_probabilities_are_probabilities() {
        let cases = [
            (RegimeCoinInput::new((1.0, 1.0), (1.0, 1.0), 1.0), Regime::B),
            (RegimeCoinInput::new((0.3, -0.7), (1.2, -0.2), 0.5), Regime::B),
            (RegimeCoinInput::new((1.0, 1.0), (0.0, 1.0), 1.0), Regime::C),
            (RegimeCoinInput::new((0.5, -1.5), (0.0, -0.4), 2.0), Regime::C),
        ];
        for (inp, regime) in cases {
            let (p, eps) = converged_probability(&inp, regime, 1e-10).unwrap();
            assert!(eps < 1e-10);
            assert!((-1e-9..=1.0 + 1e-9).contains(&p), "{inp:?}: {p}");
        }
    }

    #[test]
    fn reflection_identity() {
        let a = RegimeCoinInput::new((0.8, 0.4), (0.6, 1.1), 0.7);
        let b = RegimeCoinInput::new((-0.8, -0.4), (-0.6, -1.1), 0.7);
        let pa = converged_probability(&a, Regime::B, 1e-12).unwrap().0;
        let pb = converged_probability(&b, Regime::B, 1e-12).unwrap().0;
        assert!((pa - pb).abs() < 1e-10);
    }

    #[test]
    fn zero_radius_annihilates_the_series() {
        let t = SeriesTerms {
            log_c: 0.0,
            x: 0.0,
            alpha: PI / 3.0,
            upsilon: 1.0,
            sine: SineFactor::B { theta0: 0.1, theta_t: 0.2 },
        };
        assert_eq!(partial_sum(&t, 10, 10).unwrap(), (0.0, 0.0));
        assert_eq!(paper_bound(&t, 10, 10), 0.0);
    }

    #[test]
    fn bounds_hold_against_converged_value() {
        let inp = RegimeCoinInput::new((0.9, 0.5), (0.4, 0.8), 0.6);
        let (p, _) = converged_probability(&inp, Regime::B, 1e-12).unwrap();
        for n in 1..8 {
            let m = m_hat(n, &inp, Regime::B).unwrap();
            let (ph, eps) = p_hat_eps(&inp, Regime::B, n, m).unwrap();
            assert!((ph - p).abs() <= eps, "n={n}: |{ph} - {p}| > {eps}");
        }
    }

    #[test]
    fn m_hat_is_monotone() {
        let inp = RegimeCoinInput::new((2.0, 1.5), (1.0, 2.5), 0.5);
        let ms: Vec<usize> = (1..30).map(|n| m_hat(n, &inp, Regime::B).unwrap()).collect();
        assert!(ms.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn p_a_examples() {
        assert!((p_a_cross_prob(1.0, 1.0, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(p_a_cross_prob(1e3, 1e3, 1.0).unwrap(), 0.0);
        let nc = crate::brownian::no_cross_prob(0.7, 1.3, 0.4, 2.0).unwrap();
        assert!((p_a_cross_prob(0.7, 1.3, 0.4).unwrap() - (1.0 - nc)).abs() < 1e-15);
        assert!(p_a_cross_prob(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn fallback_branches() {
        let mut s = RngStream::new(1, 0);
        let set = CoinSettings::default();
        // Second difference at least gamma sqrt(len) at both ends.
        let far = RegimeCoinInput::new((0.1, 4.0), (0.2, 5.0), 1.0);
        assert_eq!(toss_regime_coin_traced(&mut s, &far, Regime::B, set).unwrap(), (true, CoinBranch::FarApart));
        // First difference far from zero, second close.
        let drop = RegimeCoinInput::new((4.0, 0.5), (5.0, 0.2), 1.0);
        assert_eq!(toss_regime_coin_traced(&mut s, &drop, Regime::B, set).unwrap().1, CoinBranch::DropConditioning);
        let inner = RegimeCoinInput::new((1.0, 1.0), (1.0, 1.0), 1.0);
        assert_eq!(toss_regime_coin_traced(&mut s, &inner, Regime::B, set).unwrap().1, CoinBranch::Exact);
    }

    #[test]
    fn exact_toss_frequency() {
        let inp = RegimeCoinInput::new((0.5, 0.6), (0.7, 0.3), 1.0);
        let (p, _) = converged_probability(&inp, Regime::B, 1e-12).unwrap();
        let mut s = RngStream::new(2, 0);
        let n = 100_000;
        let heads = (0..n)
            .filter(|_| toss_regime_coin(&mut s, &inp, Regime::B, CoinSettings::default()).unwrap())
            .count();
        let f = heads as f64 / n as f64;
        assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{f} vs {p}");
    }

    #[test]
    fn switch_heuristic_examples() {
        assert_eq!(switch_heuristic(1.0, 5.0, 2.0).unwrap(), 2.5);
        assert_eq!(switch_heuristic(3.0, 5.0, 3.0).unwrap(), 5.0);
        assert!(switch_heuristic(1.0, 5.0, 1e300).unwrap() < 1e-299);
        assert!(switch_heuristic(0.0, 5.0, 1.0).is_err());
    }
}
