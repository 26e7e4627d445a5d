//! Confluent proposal bridges: a forward path from `x0` and a time-reversed
//! backward path from `x_T`, spliced at the first time they meet.

use crate::brownian::{
    bb_sample_at, conditioned_pair_at, fpt_zero, pre_crossing_pair_at, BridgeSegment, FptOutcome,
    PAIR_SIGMA2,
};
use crate::error::{invalid, Error, Result};
use crate::model::DiffusionSpec;
use crate::psrs::psrs_unconditioned;
use crate::rng::RngStream;

const PAIR_BUDGET: u64 = 1_000_000;

/// The spliced path `Z` with its partner path on a common grid.
///
/// Left of `tau`, `z` is the forward path and `x2rev` the reversed backward
/// path; from `tau` on, both hold the reversed backward path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfluentProposal {
    x0: f64,
    x_t: f64,
    t_end: f64,
    tau: f64,
    grid: Vec<f64>,
    z: Vec<f64>,
    x2rev: Vec<f64>,
}

impl ConfluentProposal {
    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn x_t(&self) -> f64 {
        self.x_t
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    pub fn x2rev_values(&self) -> &[f64] {
        &self.x2rev
    }

    /// Forward path on the grid; tracked only up to `tau`.
    pub fn x1_values(&self) -> Vec<Option<f64>> {
        self.grid
            .iter()
            .zip(&self.z)
            .map(|(&t, &z)| (t <= self.tau).then_some(z))
            .collect()
    }

    pub fn tau_index(&self) -> usize {
        self.grid.partition_point(|&t| t < self.tau)
    }

    pub fn z_at_tau(&self) -> f64 {
        self.z[self.tau_index()]
    }

    /// Value of `Z` at a grid time, if revealed.
    pub fn known(&self, t: f64) -> Option<f64> {
        let i = self.grid.partition_point(|&s| s < t);
        (i < self.grid.len() && self.grid[i] == t).then(|| self.z[i])
    }

    /// Checks the structural invariants of the proposal.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.grid.len();
        if n < 2 || self.z.len() != n || self.x2rev.len() != n {
            return Err(invalid("proposal", "grid and value lists disagree"));
        }
        if self.grid[0] != 0.0 || self.grid[n - 1] != self.t_end {
            return Err(invalid("proposal", "grid must span [0, T]"));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("proposal", "grid must be strictly increasing"));
        }
        if self.z[0] != self.x0 || self.z[n - 1] != self.x_t {
            return Err(invalid("proposal", "Z must be pinned at x0 and x_T"));
        }
        let k = self.tau_index();
        if k >= n || self.grid[k] != self.tau || self.z[k] != self.x2rev[k] {
            return Err(invalid("proposal", "tau must be a grid point where the paths agree"));
        }
        if (k..n).any(|j| self.z[j] != self.x2rev[j]) {
            return Err(invalid("proposal", "Z must follow the reversed path right of tau"));
        }
        let sign = (self.x2rev[0] - self.z[0]).signum();
        if (0..k).any(|j| (self.x2rev[j] - self.z[j]).signum() != sign || self.x2rev[j] == self.z[j]) {
            return Err(invalid("proposal", "paths must keep a strict order left of tau"));
        }
        Ok(())
    }

    /// Draws `(z, x2rev)` at `t` strictly between grid neighbours `i - 1` and `i`,
    /// given the left point `(ta, za, xa)`.
    fn sample_between(
        &self,
        stream: &mut RngStream,
        left: (f64, f64, f64),
        i: usize,
        t: f64,
    ) -> Result<(f64, f64)> {
        let (ta, za, xa) = left;
        let (tb, zb, xb) = (self.grid[i], self.z[i], self.x2rev[i]);
        if ta >= self.tau {
            let z = bb_sample_at(stream, &BridgeSegment::unit(ta, za, tb, zb)?, t)?;
            return Ok((z, z));
        }
        if tb < self.tau {
            let s1 = BridgeSegment::unit(ta, za, tb, zb)?;
            let s2 = BridgeSegment::unit(ta, xa, tb, xb)?;
            return conditioned_pair_at(stream, &s1, &s2, t);
        }
        let (_, x1, x2) = pre_crossing_pair_at(stream, ta, self.tau, za, xa, zb, t)?;
        Ok((x1, x2))
    }

    /// Reveals `Z` (and its partner) at `t`, keeping the draw.
    pub fn reveal(&mut self, stream: &mut RngStream, t: f64) -> Result<f64> {
        Ok(self.reveal_many(stream, &[t])?[0])
    }

    /// Reveals at every time in the sorted slice `ts` in one merge pass.
    pub fn reveal_many(&mut self, stream: &mut RngStream, ts: &[f64]) -> Result<Vec<f64>> {
        if ts.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("ts", "must be sorted"));
        }
        for &t in ts.first().into_iter().chain(ts.last()) {
            if !(t >= 0.0 && t <= self.t_end) {
                return Err(Error::OutOfRange { t, lo: 0.0, hi: self.t_end });
            }
        }
        let cap = self.grid.len() + ts.len();
        let (mut grid, mut z, mut x2) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
        let mut out = Vec::with_capacity(ts.len());
        let mut i = 0;
        for &t in ts {
            while i < self.grid.len() && self.grid[i] < t {
                grid.push(self.grid[i]);
                z.push(self.z[i]);
                x2.push(self.x2rev[i]);
                i += 1;
            }
            if i < self.grid.len() && self.grid[i] == t {
                out.push(self.z[i]);
                continue;
            }
            if grid.last() == Some(&t) {
                out.push(*z.last().unwrap());
                continue;
            }
            let j = grid.len() - 1;
            let (zv, xv) = self.sample_between(stream, (grid[j], z[j], x2[j]), i, t)?;
            grid.push(t);
            z.push(zv);
            x2.push(xv);
            out.push(zv);
        }
        grid.extend_from_slice(&self.grid[i..]);
        z.extend_from_slice(&self.z[i..]);
        x2.extend_from_slice(&self.x2rev[i..]);
        self.grid = grid;
        self.z = z;
        self.x2rev = x2;
        Ok(out)
    }
}

/// Draws a confluent proposal bridge from `x0` at 0 to `x_t` at `t_end`.
pub fn propose_confluent(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    x_t: f64,
    t_end: f64,
    delta_max: Option<f64>,
) -> Result<ConfluentProposal> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid("T", format!("must be finite and > 0, got {t_end}")));
    }
    if !x0.is_finite() || !x_t.is_finite() {
        return Err(Error::NonFinite(format!("endpoints {x0}, {x_t}")));
    }
    for _ in 0..PAIR_BUDGET {
        let mut fwd = psrs_unconditioned(stream, spec, x0, t_end, delta_max)?;
        let mut rev = psrs_unconditioned(stream, spec, x_t, t_end, delta_max)?.reversed();
        let fwd_times = fwd.times().to_vec();
        fwd.reveal_many(stream, rev.times())?;
        rev.reveal_many(stream, &fwd_times)?;
        let (grid, a, b) = (fwd.times(), fwd.values(), rev.values());
        debug_assert_eq!(grid, rev.times());
        for j in 0..grid.len() - 1 {
            let d = BridgeSegment::new(grid[j], b[j] - a[j], grid[j + 1], b[j + 1] - a[j + 1], PAIR_SIGMA2)?;
            let tau = match fpt_zero(stream, &d)? {
                FptOutcome::Finite(tau) => tau,
                FptOutcome::Infinite => continue,
            };
            let s = BridgeSegment::new(grid[j], a[j] + b[j], grid[j + 1], a[j + 1] + b[j + 1], PAIR_SIGMA2)?;
            let z_tau = bb_sample_at(stream, &s, tau)? / 2.0;
            return Ok(splice(x0, x_t, t_end, grid, a, b, j, tau, z_tau));
        }
    }
    Err(Error::Starvation {
        sampler: "propose_confluent",
        attempts: PAIR_BUDGET,
        hint: "forward and backward paths never met",
    })
}

#[allow(clippy::too_many_arguments)]
fn splice(
    x0: f64,
    x_t: f64,
    t_end: f64,
    grid: &[f64],
    fwd: &[f64],
    rev: &[f64],
    j: usize,
    tau: f64,
    z_tau: f64,
) -> ConfluentProposal {
    let mut g = Vec::with_capacity(grid.len() + 1);
    let mut z = Vec::with_capacity(grid.len() + 1);
    let mut x2 = Vec::with_capacity(grid.len() + 1);
    // A first passage on a grid node counts as an interior crossing: the node
    // itself becomes tau.
    let left_end = if grid[j] == tau { j } else { j + 1 };
    for k in 0..left_end {
        g.push(grid[k]);
        z.push(fwd[k]);
        x2.push(rev[k]);
    }
    g.push(tau);
    z.push(z_tau);
    x2.push(z_tau);
    for k in (j + 1)..grid.len() {
        if grid[k] > tau {
            g.push(grid[k]);
            z.push(rev[k]);
            x2.push(rev[k]);
        }
    }
    ConfluentProposal { x0, x_t, t_end, tau, grid: g, z, x2rev: x2 }
}

#[cfg(test)]
impl ConfluentProposal {
    pub(crate) fn from_parts(
        x0: f64,
        x_t: f64,
        t_end: f64,
        tau: f64,
        grid: Vec<f64>,
        z: Vec<f64>,
        x2rev: Vec<f64>,
    ) -> Self {
        Self { x0, x_t, t_end, tau, grid, z, x2rev }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{brownian_spec, langevin_t_spec};

    #[test]
    fn proposals_satisfy_invariants() {
        let spec = langevin_t_spec(3.0).unwrap();
        let mut s = RngStream::new(1, 0);
        for _ in 0..300 {
            let mut p = propose_confluent(&mut s, &spec, 2.0, 3.3, 4.0, None).unwrap();
            p.check_invariants().unwrap();
            assert!(p.tau() > 0.0 && p.tau() < 4.0);
            p.reveal_many(&mut s, &[0.1, 1.0, 2.0, 3.9]).unwrap();
            let tau = p.tau();
            p.reveal(&mut s, tau * 0.999).unwrap();
            p.check_invariants().unwrap();
        }
    }

    #[test]
    fn reveals_are_idempotent() {
        let mut s = RngStream::new(2, 0);
        let mut p = propose_confluent(&mut s, &brownian_spec(), 0.0, 1.0, 4.0, None).unwrap();
        let a = p.reveal(&mut s, 2.0).unwrap();
        assert_eq!(p.reveal(&mut s, 2.0).unwrap(), a);
        assert_eq!(p.known(2.0), Some(a));
        assert_eq!(p.reveal(&mut s, 0.0).unwrap(), 0.0);
        assert_eq!(p.reveal(&mut s, 4.0).unwrap(), 1.0);
        assert!(p.reveal(&mut s, 4.5).is_err());
    }

    #[test]
    fn hand_built_proposal_reveal_rules() {
        let mut s = RngStream::new(3, 0);
        let base = ConfluentProposal::from_parts(
            0.0,
            1.0,
            3.0,
            1.5,
            vec![0.0, 1.0, 1.5, 3.0],
            vec![0.0, 0.2, 0.6, 1.0],
            vec![1.5, 1.0, 0.6, 1.0],
        );
        base.check_invariants().unwrap();
        for _ in 0..500 {
            let mut p = base.clone();
            p.reveal_many(&mut s, &[0.5, 1.2, 1.4, 2.0]).unwrap();
            p.check_invariants().unwrap();
            assert_eq!(p.x1_values().iter().filter(|v| v.is_some()).count(), 6);
        }
    }
}
