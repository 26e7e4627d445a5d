//! Exact Brownian functionals: bridge reveals, first passage to zero, the
//! sum/difference decomposition of two bridges, the 3-d Bessel bridge and
//! pairs of bridges conditioned not to cross.

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// Infinitesimal variance of the sum or difference of two independent unit
/// Brownian motions.
pub const PAIR_SIGMA2: f64 = 2.0;

const CONDITIONED_PAIR_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSegment {
    pub t0: f64,
    pub x0: f64,
    pub t1: f64,
    pub x1: f64,
    pub sigma2: f64,
}

impl BridgeSegment {
    pub fn new(t0: f64, x0: f64, t1: f64, x1: f64, sigma2: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(invalid("t1", format!("need t1 > t0, got [{t0}, {t1}]")));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(invalid("sigma2", format!("must be finite and > 0, got {sigma2}")));
        }
        if !x0.is_finite() || !x1.is_finite() {
            return Err(Error::NonFinite(format!("bridge endpoints {x0}, {x1}")));
        }
        Ok(Self { t0, x0, t1, x1, sigma2 })
    }

    /// Unit-variance segment, the law of a single path between skeleton points.
    pub fn unit(t0: f64, x0: f64, t1: f64, x1: f64) -> Result<Self> {
        Self::new(t0, x0, t1, x1, 1.0)
    }

    pub fn len(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn mean_at(&self, t: f64) -> f64 {
        let w = (t - self.t0) / self.len();
        self.x0 + w * (self.x1 - self.x0)
    }

    pub fn variance_at(&self, t: f64) -> f64 {
        self.sigma2 * (t - self.t0) * (self.t1 - t) / self.len()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= self.t0 && t <= self.t1 {
            Ok(())
        } else {
            Err(Error::OutOfRange { t, lo: self.t0, hi: self.t1 })
        }
    }
}

/// Draws the bridge at `t`. The endpoints themselves are returned exactly.
pub fn bb_sample_at(stream: &mut RngStream, seg: &BridgeSegment, t: f64) -> Result<f64> {
    seg.check_time(t)?;
    if t == seg.t0 {
        return Ok(seg.x0);
    }
    if t == seg.t1 {
        return Ok(seg.x1);
    }
    let var = seg.variance_at(t).max(0.0);
    Ok(seg.mean_at(t) + var.sqrt() * stream.std_normal())
}

/// Probability that a bridge from `d0` to `d_t` never touches zero.
pub fn no_cross_prob(d0: f64, d_t: f64, len: f64, sigma2: f64) -> Result<f64> {
    if !(d0 * d_t > 0.0) {
        return Err(invalid(
            "d0*dT",
            format!("endpoints {d0}, {d_t} are not same-signed; crossing is certain"),
        ));
    }
    if !(len > 0.0) || !(sigma2 > 0.0) {
        return Err(invalid("len", "length and variance must be positive"));
    }
    Ok(-(-2.0 * d0 * d_t / (len * sigma2)).exp_m1())
}

/// First time a bridge reaches zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FptOutcome {
    Finite(f64),
    Infinite,
}

impl FptOutcome {
    pub fn time(self) -> Option<f64> {
        match self {
            FptOutcome::Finite(t) => Some(t),
            FptOutcome::Infinite => None,
        }
    }
}

/// Samples the first passage of the bridge `seg` through zero, or reports that it
/// stays clear of zero on the whole segment.
pub fn fpt_zero(stream: &mut RngStream, seg: &BridgeSegment) -> Result<FptOutcome> {
    let d0 = seg.x0;
    let dt = seg.x1;
    if d0 == 0.0 {
        return Ok(FptOutcome::Finite(seg.t0));
    }
    if d0 * dt > 0.0 {
        let p = no_cross_prob(d0, dt, seg.len(), seg.sigma2)?;
        if stream.uniform() < p {
            return Ok(FptOutcome::Infinite);
        }
    }
    let len = seg.len();
    let lambda = d0 * d0 / (len * seg.sigma2);
    // K = tau / (len - tau) in local time; inverse Gaussian, or its Levy limit
    // lambda / N^2 when the bridge ends at zero.
    let k = if dt == 0.0 {
        let n = stream.std_normal();
        lambda / (n * n)
    } else {
        stream.inverse_gaussian((d0 / dt).abs(), lambda)?
    };
    let offset = if k.is_infinite() { len } else { len * k / (1.0 + k) };
    let tau = (seg.t0 + offset).clamp(seg.t0, seg.t1);
    Ok(FptOutcome::Finite(tau))
}

/// Unnormalised density of the first passage time at local time `s` in `(0, len)`.
pub fn fpt_density_unnormalised(d0: f64, d_t: f64, len: f64, sigma2: f64, s: f64) -> f64 {
    if !(s > 0.0 && s < len) {
        return 0.0;
    }
    let a = d0.abs();
    a / s.powf(1.5)
        * (-(d0 * d0) / (2.0 * sigma2 * s)).exp()
        * (len - s).powf(-0.5)
        * (-(d_t * d_t) / (2.0 * sigma2 * (len - s))).exp()
}

/// Covariance of the sum (or the difference) process of two independent unit
/// bridges on `[0, t_end]` between times `s <= t`.
pub fn diff_sum_variance(t: f64, s: f64, t_end: f64) -> Result<f64> {
    if !(0.0 < s && s <= t && t <= t_end) {
        return Err(invalid("s,t", format!("need 0 < s <= t <= T, got s={s}, t={t}, T={t_end}")));
    }
    Ok(PAIR_SIGMA2 * (t_end - t) * s / t_end)
}

/// A scaled 3-d Bessel bridge `H_t = |mu_t e_1 + sqrt(2) B_t|` on `[0, length]`
/// from 0 to `terminal`, where `B` is a 3-d Brownian bridge pinned at zero.
/// The three component bridges are kept, so repeated reveals are mutually
/// consistent.
#[derive(Debug, Clone)]
pub struct Bessel3Bridge {
    length: f64,
    terminal: f64,
    times: Vec<f64>,
    components: Vec<[f64; 3]>,
}

impl Bessel3Bridge {
    pub fn new(length: f64, terminal: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(invalid("length", format!("must be > 0, got {length}")));
        }
        if !(terminal >= 0.0) {
            return Err(invalid("terminal", format!("must be >= 0, got {terminal}")));
        }
        Ok(Self {
            length,
            terminal,
            times: vec![0.0, length],
            components: vec![[0.0; 3], [0.0; 3]],
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    fn norm_at(&self, t: f64, c: &[f64; 3]) -> f64 {
        let mu = self.terminal * t / self.length;
        let a = mu + c[0];
        (a * a + c[1] * c[1] + c[2] * c[2]).sqrt()
    }

    pub fn at(&mut self, stream: &mut RngStream, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.length) {
            return Err(Error::OutOfRange { t, lo: 0.0, hi: self.length });
        }
        let i = self.times.partition_point(|&s| s < t);
        if self.times[i] == t {
            return Ok(self.norm_at(t, &self.components[i]));
        }
        let (ta, tb) = (self.times[i - 1], self.times[i]);
        let (ca, cb) = (self.components[i - 1], self.components[i]);
        let mut c = [0.0; 3];
        for j in 0..3 {
            let seg = BridgeSegment::new(ta, ca[j], tb, cb[j], PAIR_SIGMA2)?;
            c[j] = bb_sample_at(stream, &seg, t)?;
        }
        self.times.insert(i, t);
        self.components.insert(i, c);
        Ok(self.norm_at(t, &c))
    }
}

/// One-shot draw of the scaled 3-d Bessel bridge at `t`.
pub fn bessel3_bridge_at(stream: &mut RngStream, length: f64, terminal: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t < length) {
        return Err(Error::OutOfRange { t, lo: 0.0, hi: length });
    }
    Bessel3Bridge::new(length, terminal)?.at(stream, t)
}

/// Joint draw at `t` of two unit bridges on a common interval, conditioned on
/// their difference keeping the sign it has at both ends.
pub fn conditioned_pair_at(
    stream: &mut RngStream,
    seg1: &BridgeSegment,
    seg2: &BridgeSegment,
    t: f64,
) -> Result<(f64, f64)> {
    if seg1.t0 != seg2.t0 || seg1.t1 != seg2.t1 {
        return Err(invalid("seg2", "segments must share their time interval"));
    }
    let d0 = seg2.x0 - seg1.x0;
    let d1 = seg2.x1 - seg1.x1;
    if !(d0 * d1 > 0.0) {
        return Err(invalid(
            "segments",
            format!("endpoint differences {d0}, {d1} must be nonzero and same-signed"),
        ));
    }
    seg1.check_time(t)?;
    if t == seg1.t0 {
        return Ok((seg1.x0, seg2.x0));
    }
    if t == seg1.t1 {
        return Ok((seg1.x1, seg2.x1));
    }
    let s0 = seg1.x0 + seg2.x0;
    let s1 = seg1.x1 + seg2.x1;
    let dseg = BridgeSegment::new(seg1.t0, d0, seg1.t1, d1, PAIR_SIGMA2)?;
    let sseg = BridgeSegment::new(seg1.t0, s0, seg1.t1, s1, PAIR_SIGMA2)?;
    let (left, right) = (t - seg1.t0, seg1.t1 - t);
    for _ in 0..CONDITIONED_PAIR_BUDGET {
        let d = bb_sample_at(stream, &dseg, t)?;
        if !(d * d0 > 0.0) {
            continue;
        }
        let p = no_cross_prob(d0, d, left, PAIR_SIGMA2)? * no_cross_prob(d, d1, right, PAIR_SIGMA2)?;
        if stream.uniform() < p {
            let s = bb_sample_at(stream, &sseg, t)?;
            return Ok(((s - d) / 2.0, (s + d) / 2.0));
        }
    }
    Err(Error::Starvation {
        sampler: "conditioned_pair_at",
        attempts: CONDITIONED_PAIR_BUDGET,
        hint: "endpoint differences are too close to zero for rejection",
    })
}

/// Joint draw at `t` in `(left_time, tau)` of two unit paths that first meet at
/// `tau` at the common value `z_tau`. Returns `(z, x1, x2)` with `z = x1`.
pub fn pre_crossing_pair_at(
    stream: &mut RngStream,
    left_time: f64,
    tau: f64,
    x1_left: f64,
    x2_left: f64,
    z_tau: f64,
    t: f64,
) -> Result<(f64, f64, f64)> {
    if !(tau > left_time) {
        return Err(invalid("tau", "must exceed left_time"));
    }
    if !(t >= left_time && t <= tau) {
        return Err(Error::OutOfRange { t, lo: left_time, hi: tau });
    }
    let d_left = x2_left - x1_left;
    if d_left == 0.0 {
        return Err(invalid("x2_left", "paths must be strictly ordered before they meet"));
    }
    if t == left_time {
        return Ok((x1_left, x1_left, x2_left));
    }
    if t == tau {
        return Ok((z_tau, z_tau, z_tau));
    }
    let h = bessel3_bridge_at(stream, tau - left_time, d_left.abs(), tau - t)?;
    let sseg = BridgeSegment::new(left_time, x1_left + x2_left, tau, 2.0 * z_tau, PAIR_SIGMA2)?;
    let s = bb_sample_at(stream, &sseg, t)?;
    let signed = d_left.signum() * h;
    let x1 = (s - signed) / 2.0;
    Ok((x1, x1, (s + signed) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::stats::{ks_one_sample, mean, normal_cdf, variance};

    #[test]
    fn bridge_moments() {
        let mut s = RngStream::new(1, 0);
        let seg = BridgeSegment::unit(0.0, 0.0, 1.0, 0.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| bb_sample_at(&mut s, &seg, 0.5).unwrap()).collect();
        // Var of the sample variance for a Gaussian: 2 sigma^4 / (n - 1).
        let se = (2.0 * 0.25f64.powi(2) / 1e5).sqrt();
        assert!((variance(&xs) - 0.25).abs() < 3.0 * se);

        let seg = BridgeSegment::new(0.0, 1.0, 2.0, 3.0, 2.0).unwrap();
        assert_eq!(seg.mean_at(1.0), 2.0);
        assert_eq!(seg.variance_at(1.0), 1.0);
        assert!(seg.variance_at(1e-12) < 1e-11);
        assert_eq!(bb_sample_at(&mut s, &seg, 0.0).unwrap(), 1.0);
        assert!(bb_sample_at(&mut s, &seg, 2.5).is_err());
        assert!(BridgeSegment::new(1.0, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(BridgeSegment::new(0.0, 0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn nested_reveal_matches_direct_law() {
        let mut s = RngStream::new(2, 0);
        let seg = BridgeSegment::unit(0.0, 0.5, 1.0, -1.0).unwrap();
        let xs: Vec<f64> = (0..10_000)
            .map(|_| {
                let mid = bb_sample_at(&mut s, &seg, 0.7).unwrap();
                let inner = BridgeSegment::unit(0.0, 0.5, 0.7, mid).unwrap();
                bb_sample_at(&mut s, &inner, 0.3).unwrap()
            })
            .collect();
        let d = ks_one_sample(&xs, |x| normal_cdf(x, seg.mean_at(0.3), seg.variance_at(0.3)));
        assert!(d < 0.02, "D = {d}");
    }

    #[test]
    fn no_cross_examples() {
        assert!((no_cross_prob(1.0, 1.0, 1.0, 2.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((no_cross_prob(1.0, 2.0, 1.0, 2.0).unwrap() - (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert!((no_cross_prob(-1.0, -2.0, 1.0, 2.0).unwrap() - (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert_eq!(no_cross_prob(1e3, 1e3, 1.0, 2.0).unwrap(), 1.0);
        assert!(no_cross_prob(1.0, -1.0, 1.0, 2.0).is_err());
        assert!(no_cross_prob(0.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn fpt_boundaries() {
        let mut s = RngStream::new(3, 0);
        let seg = BridgeSegment::new(0.5, 0.0, 1.5, 2.0, 2.0).unwrap();
        assert_eq!(fpt_zero(&mut s, &seg).unwrap(), FptOutcome::Finite(0.5));
        let seg = BridgeSegment::new(0.0, 0.3, 1.0, -0.2, 2.0).unwrap();
        for _ in 0..1000 {
            let t = fpt_zero(&mut s, &seg).unwrap().time().unwrap();
            assert!(t > 0.0 && t < 1.0);
        }
        let seg = BridgeSegment::new(0.0, 0.7, 2.0, 0.0, 2.0).unwrap();
        for _ in 0..1000 {
            let t = fpt_zero(&mut s, &seg).unwrap().time().unwrap();
            assert!(t > 0.0 && t <= 2.0);
        }
    }

    fn fpt_ks(d0: f64, dt: f64, len: f64, n: usize, seed: u64) -> (f64, f64, f64) {
        let mut s = RngStream::new(seed, 0);
        let seg = BridgeSegment::new(0.0, d0, len, dt, 2.0).unwrap();
        let mut finite = Vec::new();
        let mut infinite = 0usize;
        for _ in 0..n {
            match fpt_zero(&mut s, &seg).unwrap() {
                FptOutcome::Finite(t) => finite.push(t),
                FptOutcome::Infinite => infinite += 1,
            }
        }
        let f = |u: f64| fpt_density_unnormalised(d0, dt, len, 2.0, u);
        let z = quad::integrate(f, 0.0, len, 1e-12);
        let d = ks_one_sample(&finite, |t| quad::integrate(f, 0.0, t, 1e-10) / z);
        let p_inf = if d0 * dt > 0.0 { no_cross_prob(d0, dt, len, 2.0).unwrap() } else { 0.0 };
        (d, infinite as f64 / n as f64, p_inf)
    }

    #[test]
    fn fpt_law_against_quadrature() {
        for (d0, dt, len) in [(1.0, 1.0, 1.0), (0.4, -1.3, 2.0), (-0.5, 0.0, 1.0)] {
            let n = 10_000;
            let (d, freq, p) = fpt_ks(d0, dt, len, n, 11);
            assert!(d < 0.02, "({d0}, {dt}, {len}): D = {d}");
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se + 1e-12, "P(inf) {freq} vs {p}");
        }
    }

    #[test]
    fn diff_sum_variance_examples() {
        assert_eq!(diff_sum_variance(1.0, 0.5, 2.0).unwrap(), 0.5);
        assert_eq!(diff_sum_variance(1.0, 1.0, 4.0).unwrap(), 2.0 * 3.0 * 1.0 / 4.0);
        assert_eq!(diff_sum_variance(2.0, 1.0, 2.0).unwrap(), 0.0);
        assert!(diff_sum_variance(0.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn sum_difference_round_trip() {
        // (B1, B2) at t versus (S, D) drawn directly from the sigma^2 = 2 bridges.
        let mut s = RngStream::new(4, 0);
        let n = 100_000;
        let (a, b) = (
            BridgeSegment::unit(0.0, 0.2, 2.0, 1.0).unwrap(),
            BridgeSegment::unit(0.0, -0.4, 2.0, 0.5).unwrap(),
        );
        let mut sums = Vec::with_capacity(n);
        let mut diffs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = bb_sample_at(&mut s, &a, 0.5).unwrap();
            let y = bb_sample_at(&mut s, &b, 0.5).unwrap();
            sums.push(x + y);
            diffs.push(y - x);
        }
        let sseg = BridgeSegment::new(0.0, -0.2, 2.0, 1.5, 2.0).unwrap();
        let dseg = BridgeSegment::new(0.0, -0.6, 2.0, -0.5, 2.0).unwrap();
        for (xs, seg) in [(&sums, sseg), (&diffs, dseg)] {
            let v = seg.variance_at(0.5);
            assert!((mean(xs) - seg.mean_at(0.5)).abs() < 3.0 * (v / n as f64).sqrt());
            assert!((variance(xs) - v).abs() < 3.0 * v * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn bessel_bridge_examples() {
        let mut s = RngStream::new(5, 0);
        assert_eq!(bessel3_bridge_at(&mut s, 1.0, 2.0, 0.0).unwrap(), 0.0);
        assert!(bessel3_bridge_at(&mut s, 1.0, -1.0, 0.5).is_err());
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| bessel3_bridge_at(&mut s, 1.0, 2.0, 0.5).unwrap().powi(2))
            .collect();
        // H^2 = (1 + sqrt(0.5) Z1)^2 + 0.5 Z2^2 + 0.5 Z3^2: mean 2.5, variance 2 + 3 * 0.5.
        let se = (3.5f64 / n as f64).sqrt();
        assert!((mean(&xs) - 2.5).abs() < 3.0 * se, "E[H^2] = {}", mean(&xs));
        for _ in 0..1000 {
            assert!(bessel3_bridge_at(&mut s, 1.0, 0.0, 0.3).unwrap() >= 0.0);
        }
    }

    #[test]
    fn bessel_bridge_path_is_consistent() {
        let mut s = RngStream::new(6, 0);
        let mut b = Bessel3Bridge::new(2.0, 1.0).unwrap();
        let h1 = b.at(&mut s, 1.0).unwrap();
        let h2 = b.at(&mut s, 0.5).unwrap();
        assert_eq!(b.at(&mut s, 1.0).unwrap(), h1);
        assert_eq!(b.at(&mut s, 0.5).unwrap(), h2);
        assert!((b.at(&mut s, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(b.at(&mut s, 2.5).is_err());
    }

    #[test]
    fn conditioned_pair_keeps_order() {
        let mut s = RngStream::new(7, 0);
        let a = BridgeSegment::unit(0.0, 0.0, 1.0, 0.1).unwrap();
        let b = BridgeSegment::unit(0.0, 0.3, 1.0, 0.2).unwrap();
        for _ in 0..2000 {
            let (x, y) = conditioned_pair_at(&mut s, &a, &b, 0.4).unwrap();
            assert!(y > x);
        }
        let c = BridgeSegment::unit(0.0, 0.5, 1.0, -0.5).unwrap();
        assert!(conditioned_pair_at(&mut s, &a, &c, 0.4).is_err());
    }

    #[test]
    fn conditioned_pair_wide_separation_accepts_nearly_always() {
        // Acceptance of the product coin at separation 10 sqrt(len), sigma^2 = 2.
        let mut s = RngStream::new(8, 0);
        let dseg = BridgeSegment::new(0.0, 10.0, 1.0, 10.0, 2.0).unwrap();
        let n = 10_000;
        let mut accepted = 0;
        for _ in 0..n {
            let d = bb_sample_at(&mut s, &dseg, 0.5).unwrap();
            if d > 0.0 {
                let p = no_cross_prob(10.0, d, 0.5, 2.0).unwrap() * no_cross_prob(d, 10.0, 0.5, 2.0).unwrap();
                if s.uniform() < p {
                    accepted += 1;
                }
            }
        }
        assert!(accepted as f64 / n as f64 >= 0.99);
    }

    #[test]
    fn pre_crossing_pair_examples() {
        let mut s = RngStream::new(9, 0);
        let (z, x1, x2) = pre_crossing_pair_at(&mut s, 0.0, 1.0, 0.0, 1.0, 0.4, 1.0).unwrap();
        assert_eq!((z, x1, x2), (0.4, 0.4, 0.4));
        let (z, x1, x2) = pre_crossing_pair_at(&mut s, 0.0, 1.0, 0.0, 1.0, 0.4, 0.0).unwrap();
        assert_eq!((z, x1, x2), (0.0, 0.0, 1.0));
        for &t in &[1e-9, 0.3, 0.999_999] {
            for _ in 0..500 {
                let (z, x1, x2) = pre_crossing_pair_at(&mut s, 0.0, 1.0, 0.0, 1.0, 0.4, t).unwrap();
                assert!(x2 >= x1 && z == x1);
                let (_, a, b) = pre_crossing_pair_at(&mut s, 0.0, 1.0, 2.0, -1.0, 0.4, t).unwrap();
                assert!(b <= a);
            }
        }
        assert!(pre_crossing_pair_at(&mut s, 0.0, 1.0, 0.0, 1.0, 0.4, 1.5).is_err());
        assert!(pre_crossing_pair_at(&mut s, 0.0, 1.0, 1.0, 1.0, 0.4, 0.5).is_err());
    }
}
