//! Pseudo-marginal independence sampler over confluent proposals.

use std::time::{Duration, Instant};

use super::aux::{aux_crossing, AuxTally};
use super::coins::CoinSettings;
use super::proposal::{propose_confluent, ConfluentProposal};
use crate::error::{invalid, Error, Result};
use crate::model::{AuxStart, DiffusionSpec};
use crate::rng::RngStream;

/// Tunables of the confluent bridge sampler.
#[derive(Debug, Clone, Copy)]
pub struct CdbSettings {
    pub coins: CoinSettings,
    pub aux_start: AuxStart,
    pub delta_max: Option<f64>,
    /// Number of geometric trial counts summed into one estimate.
    pub estimates: u32,
    /// Cap on auxiliary trials for a single geometric count.
    pub max_aux_trials: u64,
    /// Wall-clock cap on one chain; checked between auxiliary trials.
    pub max_time: Option<Duration>,
}

impl Default for CdbSettings {
    fn default() -> Self {
        Self {
            coins: CoinSettings::default(),
            aux_start: AuxStart::default(),
            delta_max: None,
            estimates: 1,
            max_aux_trials: 1_000_000,
            max_time: None,
        }
    }
}

/// Current state of the chain: a proposal and its trial count.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub proposal: ConfluentProposal,
    pub trials: u64,
}

/// Auxiliary trials until the first intersection, summed over `settings.estimates` runs.
pub fn count_trials(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    proposal: &mut ConfluentProposal,
    settings: &CdbSettings,
    tally: &mut AuxTally,
    deadline: Option<Instant>,
) -> Result<u64> {
    let mut total = 0;
    for _ in 0..settings.estimates.max(1) {
        let mut k = 0;
        loop {
            k += 1;
            if aux_crossing(stream, spec, proposal, settings.coins, settings.aux_start, settings.delta_max, tally)? {
                break;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(Error::BudgetExhausted { attempts: tally.trials });
            }
            if k >= settings.max_aux_trials {
                return Err(Error::Starvation {
                    sampler: "aux_crossing",
                    attempts: k,
                    hint: "auxiliary paths almost never meet the proposal",
                });
            }
        }
        total += k;
    }
    Ok(total)
}

/// One Metropolis-Hastings step; returns the next state and whether it moved.
pub fn mh_update(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    state: ChainState,
    settings: &CdbSettings,
    tally: &mut AuxTally,
) -> Result<(ChainState, bool)> {
    mh_step(stream, spec, state, settings, tally, None)
}

fn mh_step(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    state: ChainState,
    settings: &CdbSettings,
    tally: &mut AuxTally,
    deadline: Option<Instant>,
) -> Result<(ChainState, bool)> {
    let (x0, x_t, t_end) = (state.proposal.x0(), state.proposal.x_t(), state.proposal.t_end());
    let mut proposal = propose_confluent(stream, spec, x0, x_t, t_end, settings.delta_max)?;
    let trials = count_trials(stream, spec, &mut proposal, settings, tally, deadline)?;
    let u = stream.uniform();
    if u * (state.trials as f64) < trials as f64 {
        Ok((ChainState { proposal, trials }, true))
    } else {
        Ok((state, false))
    }
}

/// Runs the chain for `n_mh` steps from an initial proposal with trial count 1
/// and returns every state's proposal.
pub fn run_cdb(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    x_t: f64,
    t_end: f64,
    n_mh: usize,
    settings: &CdbSettings,
) -> Result<Vec<ConfluentProposal>> {
    let mut out = Vec::with_capacity(n_mh + 1);
    run_cdb_with(stream, spec, x0, x_t, t_end, n_mh, settings, &mut AuxTally::default(), |s| {
        out.push(s.proposal.clone())
    })?;
    Ok(out)
}

/// Like [`run_cdb`] but hands each state to `visit` and returns the last one.
#[allow(clippy::too_many_arguments)]
pub fn run_cdb_with(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    x0: f64,
    x_t: f64,
    t_end: f64,
    n_mh: usize,
    settings: &CdbSettings,
    tally: &mut AuxTally,
    mut visit: impl FnMut(&ChainState),
) -> Result<ChainState> {
    if settings.estimates == 0 {
        return Err(invalid("estimates", "must be >= 1"));
    }
    let deadline = settings.max_time.map(|d| Instant::now() + d);
    let proposal = propose_confluent(stream, spec, x0, x_t, t_end, settings.delta_max)?;
    let mut state = ChainState { proposal, trials: 1 };
    visit(&state);
    for _ in 0..n_mh {
        state = mh_step(stream, spec, state, settings, tally, deadline)?.0;
        visit(&state);
    }
    Ok(state)
}
