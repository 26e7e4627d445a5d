//! Discretised simple diffusion bridge: Euler paths, grid-detected crossings
//! and the pseudo-marginal correction with discretised auxiliary paths.
//! Biased for any step size; kept as the baseline the exact sampler is
//! compared against.

use crate::error::{invalid, Error, Result};
use crate::model::{AuxOrigin, AuxStart, DiffusionSpec};
use crate::rng::RngStream;

/// Values on the uniform grid `{0, h, 2h, ..., T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    step: f64,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(invalid("step", format!("must be finite and > 0, got {step}")));
        }
        if values.len() < 2 {
            return Err(invalid("values", "need at least two grid nodes"));
        }
        Ok(Self { step, values })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.step * self.steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.step * k as f64
    }

    /// Linear interpolation between grid nodes.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let t_end = self.t_end();
        if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::OutOfRange { t, lo: 0.0, hi: t_end });
        }
        let x = t / self.step;
        let k = (x.floor() as usize).min(self.steps() - 1);
        let w = (x - k as f64).clamp(0.0, 1.0);
        Ok(self.values[k] * (1.0 - w) + self.values[k + 1] * w)
    }
}

/// Number of Euler steps covering `[0, t_end]` with step at most `delta`.
pub fn grid_steps(t_end: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("delta", format!("must be finite and > 0, got {delta}")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid("T", format!("must be finite and > 0, got {t_end}")));
    }
    // Snap so that T/delta within rounding of an integer keeps that integer.
    let r = t_end / delta;
    let n = if (r - r.round()).abs() < 1e-9 * r.max(1.0) { r.round() } else { r.ceil() };
    Ok((n as usize).max(1))
}

fn euler_steps(stream: &mut RngStream, spec: &DiffusionSpec, x0: f64, step: f64, n: usize) -> Result<Vec<f64>> {
    let sd = step.sqrt();
    let mut v = Vec::with_capacity(n + 1);
    let mut x = x0;
    v.push(x);
    for _ in 0..n {
        x += spec.alpha(x) * step + sd * stream.std_normal();
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("Euler path left the reals at step {step}")));
        }
        v.push(x);
    }
    Ok(v)
}

/// Euler-Maruyama path of `dY = alpha(Y) dt + dW` from `x0` over `[0, t_end]`.
pub fn euler_path(stream: &mut RngStream, spec: &DiffusionSpec, x0: f64, t_end: f64, delta: f64) -> Result<GridPath> {
    let n = grid_steps(t_end, delta)?;
    let step = t_end / n as f64;
    GridPath::new(step, euler_steps(stream, spec, x0, step, n)?)
}

/// Splices `forward` and the already time-reversed `backward_rev` at the left
/// node of their first grid sign change. `None` when the grid shows none.
pub fn splice_first_crossing(forward: &[f64], backward_rev: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(forward.len(), backward_rev.len());
    let j = (0..forward.len() - 1).find(|&j| {
        (forward[j] - backward_rev[j]) * (forward[j + 1] - backward_rev[j + 1]) <= 0.0
    })?;
    let mut z = forward[..=j].to_vec();
    z.extend_from_slice(&backward_rev[j + 1..]);
    Some(z)
}

/// Does the grid show a sign change between the two paths?
pub fn grid_intersects(a: &[f64], b: &[f64]) -> bool {
    a.windows(2)
        .zip(b.windows(2))
        .any(|(x, y)| (x[0] - y[0]) * (x[1] - y[1]) <= 0.0)
}

/// Tunables of the discretised sampler.
#[derive(Debug, Clone, Copy)]
pub struct SdbSettings {
    pub delta: f64,
    pub aux_start: AuxStart,
    /// Cap on forward/backward pairs per proposal and on auxiliary paths per count.
    pub max_attempts: u64,
}

impl SdbSettings {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            aux_start: AuxStart::default(),
            max_attempts: 10_000_000,
        }
    }
}

/// Proposal: forward path from `x0`, reversed path from `x_t`, spliced at the
/// first grid crossing; pairs without one are discarded.
pub fn sdb_propose(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    x_t: f64,
    t_end: f64,
    settings: &SdbSettings,
) -> Result<GridPath> {
    let n = grid_steps(t_end, settings.delta)?;
    let step = t_end / n as f64;
    for _ in 0..settings.max_attempts {
        let forward = euler_steps(stream, spec, x0, step, n)?;
        let mut backward = euler_steps(stream, spec, x_t, step, n)?;
        backward.reverse();
        if let Some(z) = splice_first_crossing(&forward, &backward) {
            return GridPath::new(step, z);
        }
    }
    Err(Error::Starvation {
        sampler: "sdb_propose",
        attempts: settings.max_attempts,
        hint: "forward and reversed paths almost never cross",
    })
}

/// Auxiliary paths until the first one whose grid meets `z`.
pub fn sdb_count_trials(stream: &mut RngStream, spec: &DiffusionSpec, z: &GridPath, x0: f64, x_t: f64, settings: &SdbSettings) -> Result<u64> {
    let n = z.steps();
    let step = z.step();
    let t_end = z.t_end();
    for k in 1..=settings.max_attempts {
        let aux = match settings.aux_start.origin(stream, spec, x0, x_t, t_end)? {
            AuxOrigin::At(y) => euler_steps(stream, spec, y, step, n)?,
            AuxOrigin::Propagate(y) => euler_steps(stream, spec, y, step, 2 * n)?.split_off(n),
        };
        if grid_intersects(z.values(), &aux) {
            return Ok(k);
        }
    }
    Err(Error::Starvation {
        sampler: "sdb_count_trials",
        attempts: settings.max_attempts,
        hint: "auxiliary paths almost never meet the proposal",
    })
}

/// Chain state: the current path and its auxiliary trial count.
#[derive(Debug, Clone, PartialEq)]
pub struct SdbState {
    pub path: GridPath,
    pub trials: u64,
}

/// One independence Metropolis-Hastings step; accepts when `U <= T_new / T_cur`.
pub fn sdb_mh_update(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    x_t: f64,
    state: SdbState,
    settings: &SdbSettings,
) -> Result<(SdbState, bool)> {
    let t_end = state.path.t_end();
    let path = sdb_propose(stream, spec, x0, x_t, t_end, settings)?;
    let trials = sdb_count_trials(stream, spec, &path, x0, x_t, settings)?;
    if stream.uniform() * (state.trials as f64) <= trials as f64 {
        Ok((SdbState { path, trials }, true))
    } else {
        Ok((state, false))
    }
}

/// Runs the chain for `n_mh` steps and returns the final state.
#[allow(clippy::too_many_arguments)]
pub fn run_sdb(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    x_t: f64,
    t_end: f64,
    n_mh: usize,
    settings: &SdbSettings,
) -> Result<SdbState> {
    let path = sdb_propose(stream, spec, x0, x_t, t_end, settings)?;
    let mut state = SdbState { path, trials: 1 };
    for _ in 0..n_mh {
        state = sdb_mh_update(stream, spec, x0, x_t, state, settings)?.0;
    }
    Ok(state)
}
