//! Path-space rejection sampling of unit-volatility diffusions, returning
//! skeletons that can be revealed retrospectively at further times.

use std::time::{Duration, Instant};

use crate::brownian::{bb_sample_at, BridgeSegment};
use crate::error::{invalid, Error, Result};
use crate::model::DiffusionSpec;
use crate::rng::RngStream;

const ENDPOINT_BUDGET: u64 = 1_000_000;
const SEGMENT_BUDGET: u64 = 1_000_000;

/// A path revealed on a finite, strictly increasing time grid. Between
/// consecutive points the path is a unit Brownian bridge.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Skeleton {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(invalid("times", "need at least two points and matching value count"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("skeleton value {v}")));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn first_value(&self) -> f64 {
        self.values[0]
    }

    pub fn last_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Stored value at `t`, if `t` is a grid point.
    pub fn known(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s < t);
        (i < self.times.len() && self.times[i] == t).then(|| self.values[i])
    }

    fn check_span(&self, t: f64) -> Result<()> {
        if t >= self.start() && t <= self.end() {
            Ok(())
        } else {
            Err(Error::OutOfRange { t, lo: self.start(), hi: self.end() })
        }
    }

    /// Reveals the path at `t`, inserting the draw into the grid.
    pub fn reveal_at(&mut self, stream: &mut RngStream, t: f64) -> Result<f64> {
        self.check_span(t)?;
        let i = self.times.partition_point(|&s| s < t);
        if self.times[i] == t {
            return Ok(self.values[i]);
        }
        let seg = BridgeSegment::unit(self.times[i - 1], self.values[i - 1], self.times[i], self.values[i])?;
        let x = bb_sample_at(stream, &seg, t)?;
        self.times.insert(i, t);
        self.values.insert(i, x);
        Ok(x)
    }

    /// Reveals at every time in the sorted slice `ts` with a single merge pass.
    pub fn reveal_many(&mut self, stream: &mut RngStream, ts: &[f64]) -> Result<Vec<f64>> {
        if ts.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("ts", "must be sorted"));
        }
        if let (Some(&a), Some(&b)) = (ts.first(), ts.last()) {
            self.check_span(a)?;
            self.check_span(b)?;
        } else {
            return Ok(Vec::new());
        }
        let mut times = Vec::with_capacity(self.times.len() + ts.len());
        let mut values = Vec::with_capacity(self.times.len() + ts.len());
        let mut out = Vec::with_capacity(ts.len());
        let mut i = 0;
        for &t in ts {
            while i < self.times.len() && self.times[i] < t {
                times.push(self.times[i]);
                values.push(self.values[i]);
                i += 1;
            }
            if i < self.times.len() && self.times[i] == t {
                out.push(self.values[i]);
                continue;
            }
            if times.last() == Some(&t) {
                out.push(*values.last().unwrap());
                continue;
            }
            // Left neighbour is the latest point written, which may itself be new.
            let seg = BridgeSegment::unit(*times.last().unwrap(), *values.last().unwrap(), self.times[i], self.values[i])?;
            let x = bb_sample_at(stream, &seg, t)?;
            times.push(t);
            values.push(x);
            out.push(x);
        }
        times.extend_from_slice(&self.times[i..]);
        values.extend_from_slice(&self.values[i..]);
        self.times = times;
        self.values = values;
        Ok(out)
    }

    /// Inserts a value known from elsewhere (for instance a conditioned draw).
    pub fn insert_known(&mut self, t: f64, x: f64) -> Result<()> {
        self.check_span(t)?;
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("inserted value {x}")));
        }
        let i = self.times.partition_point(|&s| s < t);
        if self.times[i] == t {
            self.values[i] = x;
        } else {
            self.times.insert(i, t);
            self.values.insert(i, x);
        }
        Ok(())
    }

    /// The path run backwards: `t -> start + end - t`.
    pub fn reversed(&self) -> Skeleton {
        let (a, b) = (self.start(), self.end());
        let times = self.times.iter().rev().map(|&t| a + b - t).collect();
        let values = self.values.iter().rev().copied().collect();
        Skeleton { times, values }
    }

    pub fn shifted(&self, dt: f64) -> Skeleton {
        Skeleton {
            times: self.times.iter().map(|&t| t + dt).collect(),
            values: self.values.clone(),
        }
    }

    /// The part of the path on `[a, b]`, revealing the cut points first.
    pub fn restrict(&mut self, stream: &mut RngStream, a: f64, b: f64) -> Result<Skeleton> {
        if !(b > a) {
            return Err(invalid("b", "restriction needs b > a"));
        }
        self.reveal_at(stream, a)?;
        self.reveal_at(stream, b)?;
        let i = self.times.partition_point(|&s| s < a);
        let j = self.times.partition_point(|&s| s <= b);
        Ok(Skeleton {
            times: self.times[i..j].to_vec(),
            values: self.values[i..j].to_vec(),
        })
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn append(&mut self, next: &Skeleton) -> Result<()> {
        if next.start() != self.end() || next.first_value() != self.last_value() {
            return Err(invalid("next", "must start at the end point of the skeleton"));
        }
        self.times.extend_from_slice(&next.times[1..]);
        self.values.extend_from_slice(&next.values[1..]);
        Ok(())
    }
}

/// Free form of [`Skeleton::reveal_at`].
pub fn reveal_at(stream: &mut RngStream, skel: &mut Skeleton, t: f64) -> Result<f64> {
    skel.reveal_at(stream, t)
}

/// Draws from `h(u) ∝ exp{A(u) - (u - x0)^2 / (2 delta)}`.
///
/// With a bound `M >= alpha'`, `A` lies under its tangent at `x0` plus
/// `M (u - x0)^2 / 2`, which gives a Gaussian envelope centred near the mode
/// of `h`. Otherwise the proposal is `N(x0, delta)` thinned by `exp(A - a_sup)`.
pub fn sample_biased_endpoint(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("must be > 0, got {delta}")));
    }
    if let Some(m) = spec.alpha_prime_sup() {
        let prec = 1.0 / delta - m.max(0.0);
        if prec > 0.5 / delta {
            return tangent_envelope_endpoint(stream, spec, x0, prec, m.max(0.0));
        }
    }
    let sd = delta.sqrt();
    for _ in 0..ENDPOINT_BUDGET {
        let u = x0 + sd * stream.std_normal();
        let log_acc = spec.potential(u) - spec.a_sup;
        if log_acc >= 0.0 || stream.uniform() < log_acc.exp() {
            return Ok(u);
        }
    }
    Err(Error::Starvation {
        sampler: "sample_biased_endpoint",
        attempts: ENDPOINT_BUDGET,
        hint: "A_sup is probably far above sup A",
    })
}

fn tangent_envelope_endpoint(stream: &mut RngStream, spec: &DiffusionSpec, x0: f64, prec: f64, m: f64) -> Result<f64> {
    let a0 = spec.potential(x0);
    let slope = spec.alpha(x0);
    let mean = x0 + slope / prec;
    let sd = prec.sqrt().recip();
    for _ in 0..ENDPOINT_BUDGET {
        let u = mean + sd * stream.std_normal();
        let d = u - x0;
        let log_acc = spec.potential(u) - a0 - slope * d - 0.5 * m * d * d;
        if log_acc >= 0.0 || stream.uniform() < log_acc.exp() {
            return Ok(u);
        }
    }
    Err(Error::Starvation {
        sampler: "sample_biased_endpoint",
        attempts: ENDPOINT_BUDGET,
        hint: "alpha' bound is probably far too loose",
    })
}

/// Result of a single proposal in the segment sampler.
#[derive(Debug, Clone)]
pub struct SegmentTrial {
    pub marks: usize,
    pub skeleton: Option<Skeleton>,
}

/// Reveals a unit bridge from `(0, x0)` to `(len, x1)` at Poisson marks of rate
/// `psi` and thins them against `phi - Phi`. Returns the mark count and, when
/// every mark lies above the graph, the revealed points.
fn thin_bridge(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    len: f64,
    x1: f64,
) -> Result<(usize, Option<(Vec<f64>, Vec<f64>)>)> {
    let marks = stream.poisson_times(spec.psi, 0.0, len)?;
    let mut times = Vec::with_capacity(marks.len() + 2);
    let mut values = Vec::with_capacity(marks.len() + 2);
    times.push(0.0);
    values.push(x0);
    for &t in &marks {
        let seg = BridgeSegment::unit(*times.last().unwrap(), *values.last().unwrap(), len, x1)?;
        let x = bb_sample_at(stream, &seg, t)?;
        let height = spec.psi * stream.uniform();
        if height < spec.phi(x) - spec.phi_lower {
            return Ok((marks.len(), None));
        }
        times.push(t);
        values.push(x);
    }
    times.push(len);
    values.push(x1);
    Ok((marks.len(), Some((times, values))))
}

/// One proposal of the segment sampler; `skeleton` is `None` on rejection.
pub fn psrs_segment_trial(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    delta: f64,
) -> Result<SegmentTrial> {
    let end = sample_biased_endpoint(stream, spec, x0, delta)?;
    let (marks, kept) = thin_bridge(stream, spec, x0, delta, end)?;
    let skeleton = kept.map(|(t, v)| Skeleton::new(t, v)).transpose()?;
    Ok(SegmentTrial { marks, skeleton })
}

/// An exact draw of the diffusion on `[0, delta]` started at `x0`.
pub fn psrs_segment(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    delta: f64,
) -> Result<Skeleton> {
    for _ in 0..SEGMENT_BUDGET {
        if let Some(s) = psrs_segment_trial(stream, spec, x0, delta)?.skeleton {
            return Ok(s);
        }
    }
    Err(Error::Starvation {
        sampler: "psrs_segment",
        attempts: SEGMENT_BUDGET,
        hint: "segment too long for the bound Psi; lower delta_max",
    })
}

/// An exact draw of the diffusion on `[0, t_end]`, built from equal segments no
/// longer than `delta_max` (default `min(t_end, 1 / max(Psi, 1))`).
pub fn psrs_unconditioned(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    t_end: f64,
    delta_max: Option<f64>,
) -> Result<Skeleton> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid("T", format!("must be finite and > 0, got {t_end}")));
    }
    let dmax = delta_max.unwrap_or_else(|| spec.default_delta_max(t_end));
    if !(dmax > 0.0) {
        return Err(invalid("delta_max", format!("must be > 0, got {dmax}")));
    }
    let pieces = (t_end / dmax).ceil().max(1.0) as usize;
    let delta = t_end / pieces as f64;
    let mut path = psrs_segment(stream, spec, x0, delta)?;
    for k in 1..pieces {
        let start = k as f64 * delta;
        let next = psrs_segment(stream, spec, path.last_value(), delta)?;
        let mut shifted = next.shifted(start);
        // Pin the seam exactly so floating-point drift never breaks the grid.
        shifted.times[0] = path.end();
        path.append(&shifted)?;
    }
    let n = path.times.len();
    path.times[n - 1] = t_end;
    Ok(path)
}

/// Limits on the reference bridge sampler.
#[derive(Debug, Clone, Copy, Default)]
pub struct BridgeBudget {
    pub max_attempts: Option<u64>,
    pub max_time: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct BridgeDraw {
    pub skeleton: Skeleton,
    pub attempts: u64,
}

/// Reference bridge sampler: pinned Brownian bridge proposals from `x0` to
/// `x_t` thinned as in [`psrs_segment`]. Cost grows exponentially with `t_end`.
pub fn psrs_bridge(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    x_t: f64,
    t_end: f64,
    budget: BridgeBudget,
) -> Result<BridgeDraw> {
    if !(t_end > 0.0) {
        return Err(invalid("T", format!("must be > 0, got {t_end}")));
    }
    let started = Instant::now();
    let mut attempts = 0u64;
    loop {
        if budget.max_attempts.is_some_and(|m| attempts >= m)
            || budget.max_time.is_some_and(|d| started.elapsed() >= d)
        {
            return Err(Error::BudgetExhausted { attempts });
        }
        attempts += 1;
        if let (_, Some((t, v))) = thin_bridge(stream, spec, x0, t_end, x_t)? {
            return Ok(BridgeDraw {
                skeleton: Skeleton::new(t, v)?,
                attempts,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{brownian_spec, langevin_t_spec};
    use crate::stats::{ks_one_sample, normal_cdf};

    fn skel(ts: &[f64], xs: &[f64]) -> Skeleton {
        Skeleton::new(ts.to_vec(), xs.to_vec()).unwrap()
    }

    #[test]
    fn construction_is_validated() {
        assert!(Skeleton::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Skeleton::new(vec![0.0], vec![1.0]).is_err());
        assert!(Skeleton::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn reveal_is_idempotent_and_sorted() {
        let mut s = RngStream::new(1, 0);
        let mut k = skel(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.5]);
        assert_eq!(k.reveal_at(&mut s, 1.0).unwrap(), 1.0);
        assert_eq!(k.len(), 3);
        let a = k.reveal_at(&mut s, 1.5).unwrap();
        let b = k.reveal_at(&mut s, 0.25).unwrap();
        assert_eq!(k.times(), &[0.0, 0.25, 1.0, 1.5, 2.0]);
        assert_eq!(k.known(1.5), Some(a));
        assert_eq!(k.known(0.25), Some(b));
        assert!(k.reveal_at(&mut s, 2.5).is_err());
    }

    #[test]
    fn reveal_many_matches_law_and_keeps_order() {
        let mut s = RngStream::new(2, 0);
        let mut mids = Vec::new();
        for _ in 0..10_000 {
            let mut k = skel(&[0.0, 1.0, 3.0], &[0.0, 2.0, -1.0]);
            let got = k.reveal_many(&mut s, &[0.2, 0.5, 1.0, 2.0, 2.0]).unwrap();
            assert_eq!(got[2], 2.0);
            assert_eq!(got[3], got[4]);
            assert!(k.times().windows(2).all(|w| w[0] < w[1]));
            mids.push(got[1]);
        }
        let seg = BridgeSegment::unit(0.0, 0.0, 1.0, 2.0).unwrap();
        let d = ks_one_sample(&mids, |x| normal_cdf(x, seg.mean_at(0.5), seg.variance_at(0.5)));
        assert!(d < 0.02, "D = {d}");
    }

    #[test]
    fn reversal_restriction_and_append() {
        let mut s = RngStream::new(3, 0);
        let k = skel(&[0.0, 1.0, 4.0], &[1.0, 2.0, 3.0]);
        let r = k.reversed();
        assert_eq!(r.times(), &[0.0, 3.0, 4.0]);
        assert_eq!(r.values(), &[3.0, 2.0, 1.0]);
        let mut long = k.clone();
        let part = long.restrict(&mut s, 0.5, 2.0).unwrap();
        assert_eq!(part.start(), 0.5);
        assert_eq!(part.end(), 2.0);
        assert_eq!(part.known(1.0), Some(2.0));
        let mut a = skel(&[0.0, 1.0], &[0.0, 1.0]);
        a.append(&skel(&[1.0, 2.0], &[1.0, 5.0])).unwrap();
        assert_eq!(a.values(), &[0.0, 1.0, 5.0]);
        assert!(a.append(&skel(&[3.0, 4.0], &[5.0, 1.0])).is_err());
    }

    #[test]
    fn flat_potential_gives_gaussian_endpoint() {
        let mut s = RngStream::new(4, 0);
        let spec = brownian_spec();
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_biased_endpoint(&mut s, &spec, 1.0, 2.0).unwrap())
            .collect();
        assert!(ks_one_sample(&xs, |x| normal_cdf(x, 1.0, 2.0)) < 0.02);
    }

    #[test]
    fn tail_endpoint_matches_quadrature() {
        use crate::quad::cumulative;
        for (v, x0, delta) in [(100.0, 9.0, 0.3), (3.0, 12.0, 1.0)] {
            let spec = langevin_t_spec(v).unwrap();
            let mut s = RngStream::new(8, 0);
            let mut xs: Vec<f64> = (0..20_000)
                .map(|_| sample_biased_endpoint(&mut s, &spec, x0, delta).unwrap())
                .collect();
            xs.sort_by(f64::total_cmp);
            let h = |u: f64| (spec.potential(u) - spec.potential(x0) - (u - x0) * (u - x0) / (2.0 * delta)).exp();
            let (lo, hi) = (x0 - 12.0 * delta.sqrt(), x0 + 12.0 * delta.sqrt());
            let z = crate::quad::integrate(h, lo, hi, 1e-12);
            let cdf: Vec<f64> = cumulative(h, lo, &xs, 1e-12).iter().map(|c| c / z).collect();
            let d = crate::stats::ks_from_sorted_cdf(&cdf);
            assert!(d < 0.015, "v={v}: D={d}");
        }
    }

    #[test]
    fn zero_psi_segments_are_endpoint_only() {
        let mut s = RngStream::new(5, 0);
        let k = psrs_segment(&mut s, &brownian_spec(), 0.0, 1.0).unwrap();
        assert_eq!(k.len(), 2);
    }

    #[test]
    fn unconditioned_paths_span_the_interval() {
        let mut s = RngStream::new(6, 0);
        let spec = langevin_t_spec(3.0).unwrap();
        let k = psrs_unconditioned(&mut s, &spec, 0.5, 7.3, None).unwrap();
        assert_eq!(k.start(), 0.0);
        assert_eq!(k.end(), 7.3);
        assert_eq!(k.first_value(), 0.5);
        assert!(k.times().windows(2).all(|w| w[0] < w[1]));
        // T <= delta_max: a single segment.
        let k = psrs_unconditioned(&mut s, &brownian_spec(), 0.0, 0.5, Some(1.0)).unwrap();
        assert_eq!(k.len(), 2);
    }

    #[test]
    fn bridge_sampler_honours_budget() {
        let mut s = RngStream::new(7, 0);
        let spec = langevin_t_spec(3.0).unwrap();
        let d = psrs_bridge(&mut s, &spec, 0.0, 0.5, 1.0, BridgeBudget::default()).unwrap();
        assert_eq!(d.skeleton.first_value(), 0.0);
        assert_eq!(d.skeleton.last_value(), 0.5);
        let e = psrs_bridge(
            &mut s,
            &spec,
            0.0,
            0.5,
            1.0,
            BridgeBudget { max_attempts: Some(0), max_time: None },
        );
        assert!(matches!(e, Err(Error::BudgetExhausted { attempts: 0 })));
    }
}
