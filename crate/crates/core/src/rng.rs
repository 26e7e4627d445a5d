//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed and positioned on
//! its own 64-bit stream id, so parallel replicates can be handed disjoint
//! streams without coordination. Replaying `(seed, stream_id)` replays every
//! draw bit for bit.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A derived stream for a sub-task; `(seed, stream_id, child)` is mixed into a fresh key.
    pub fn child(&self, child: u64) -> Self {
        let mixed = splitmix(self.seed ^ splitmix(self.stream_id.wrapping_add(0x9e37_79b9)));
        Self::new(mixed, child)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        self.inner.sample(Exp1)
    }

    pub fn normal(&mut self, mean: f64, variance: f64) -> Result<f64> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(invalid("variance", format!("must be finite and >= 0, got {variance}")));
        }
        if variance == 0.0 {
            return Ok(mean);
        }
        Ok(mean + variance.sqrt() * self.std_normal())
    }

    /// Inverse-Gaussian draw with mean `mu` and shape `lambda`, via the
    /// squared-normal transformation with a uniform root selection.
    pub fn inverse_gaussian(&mut self, mu: f64, lambda: f64) -> Result<f64> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(invalid("mu", format!("must be finite and > 0, got {mu}")));
        }
        if !(lambda > 0.0) {
            return Err(invalid("lambda", format!("must be > 0, got {lambda}")));
        }
        let nu = self.std_normal();
        let y = nu * nu;
        // Smaller root written in the cancellation-free form mu / (1 + w).
        let w = (mu * y) / (2.0 * lambda);
        let root = mu / (1.0 + w + (w * (w + 2.0)).sqrt());
        if self.uniform() * (mu + root) <= mu {
            Ok(root)
        } else {
            Ok(mu * mu / root)
        }
    }

    /// Event times of a homogeneous Poisson process on `(t0, t1)`.
    pub fn poisson_times(&mut self, rate: f64, t0: f64, t1: f64) -> Result<Vec<f64>> {
        if !(t1 > t0) {
            return Err(invalid("t1", format!("must exceed t0 ({t1} <= {t0})")));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(invalid("rate", format!("must be finite and >= 0, got {rate}")));
        }
        let mut times = Vec::new();
        if rate == 0.0 {
            return Ok(times);
        }
        let mut t = t0;
        loop {
            t += self.exp1() / rate;
            if t >= t1 {
                break;
            }
            if times.last().map_or(t > t0, |&last| t > last) {
                times.push(t);
            }
        }
        Ok(times)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, mean, variance};

    #[test]
    fn uniform_range_and_determinism() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 0);
        for _ in 0..1000 {
            let u = a.uniform();
            assert!((0.0..1.0).contains(&u));
            assert_eq!(u.to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 1);
        let same = (0..100).filter(|_| a.uniform() == b.uniform()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_mean() {
        let mut s = RngStream::new(7, 3);
        let xs: Vec<f64> = (0..100_000).map(|_| s.uniform()).collect();
        assert!((mean(&xs) - 0.5).abs() < 0.005);
    }

    #[test]
    fn normal_moments_and_degenerate() {
        let mut s = RngStream::new(11, 0);
        assert_eq!(s.normal(3.25, 0.0).unwrap(), 3.25);
        assert!(s.normal(0.0, -1.0).is_err());
        let xs: Vec<f64> = (0..100_000).map(|_| s.normal(0.0, 1.0).unwrap()).collect();
        assert!((variance(&xs) - 1.0).abs() < 0.03);
    }

    #[test]
    fn affine_normal_is_standard() {
        let mut s = RngStream::new(12, 0);
        let zs: Vec<f64> = (0..10_000)
            .map(|_| (s.normal(5.0, 4.0).unwrap() - 5.0) / 2.0)
            .collect();
        let d = ks_one_sample(&zs, crate::stats::std_normal_cdf);
        assert!(d < 1.63 / 100.0, "D = {d}");
    }

    #[test]
    fn inverse_gaussian_moments() {
        let mut s = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| s.inverse_gaussian(1.0, 1.0).unwrap()).collect();
        assert!((mean(&xs) - 1.0).abs() < 0.01, "mean {}", mean(&xs));

        let n = 100_000.0;
        let ys: Vec<f64> = (0..100_000).map(|_| s.inverse_gaussian(2.0, 3.0).unwrap()).collect();
        let var = 8.0 / 3.0;
        assert!((mean(&ys) - 2.0).abs() < 3.0 * (var / n as f64).sqrt());
        // Var of the sample variance uses the fourth central moment: mu4 = 15 mu^7/lambda^3 + 3 var^2.
        let mu4 = 15.0 * 2f64.powi(7) / 27.0 + 3.0 * var * var;
        let se_var = ((mu4 - var * var) / n).sqrt();
        assert!((variance(&ys) - var).abs() < 3.0 * se_var, "var {}", variance(&ys));
    }

    #[test]
    fn inverse_gaussian_concentrates() {
        let mut s = RngStream::new(5, 1);
        for _ in 0..1000 {
            let x = s.inverse_gaussian(1.0, 1e6).unwrap();
            assert!((x - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn inverse_gaussian_rejects_bad_params() {
        let mut s = RngStream::new(0, 0);
        assert!(s.inverse_gaussian(0.0, 1.0).is_err());
        assert!(s.inverse_gaussian(1.0, -2.0).is_err());
    }

    #[test]
    fn poisson_times_contract() {
        let mut s = RngStream::new(9, 0);
        assert!(s.poisson_times(0.0, 0.0, 10.0).unwrap().is_empty());
        assert!(s.poisson_times(1.0, 1.0, 1.0).is_err());
        let mut total = 0usize;
        for _ in 0..10_000 {
            let ts = s.poisson_times(2.0, 0.0, 10.0).unwrap();
            assert!(ts.windows(2).all(|w| w[0] < w[1]));
            assert!(ts.iter().all(|&t| t > 0.0 && t < 10.0));
            total += ts.len();
        }
        let m = total as f64 / 10_000.0;
        assert!((m - 20.0).abs() < 0.14, "mean count {m}");
    }
}
