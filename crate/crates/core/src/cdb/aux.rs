//! Does a fresh auxiliary path intersect the proposal? Decided exactly from
//! the revealed grid with sign checks and crossing coins, cheapest first.

use super::coins::{p_a_cross_prob, toss_regime_coin_traced, CoinBranch, CoinSettings, Regime, RegimeCoinInput};
use super::proposal::ConfluentProposal;
use crate::error::Result;
use crate::model::{AuxOrigin, AuxStart, DiffusionSpec};
use crate::psrs::psrs_unconditioned;
use crate::rng::RngStream;

/// Counters describing how auxiliary checks were decided.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuxTally {
    pub trials: u64,
    pub intersections: u64,
    pub sign_decided: u64,
    pub a_coins: u64,
    pub b_coins: u64,
    pub c_coins: u64,
    pub far_apart: u64,
    pub drop_conditioning: u64,
    pub numeric_fallback: u64,
    /// Regime B/C coins tossed in a trial whose grid already showed a sign
    /// change. Stays zero by construction.
    pub coins_after_sign_change: u64,
}

impl AuxTally {
    fn record_branch(&mut self, b: CoinBranch) {
        match b {
            CoinBranch::Exact => {}
            CoinBranch::FarApart => self.far_apart += 1,
            CoinBranch::DropConditioning => self.drop_conditioning += 1,
            CoinBranch::NumericFallback => self.numeric_fallback += 1,
        }
    }

    pub fn merge(&mut self, o: &AuxTally) {
        self.trials += o.trials;
        self.intersections += o.intersections;
        self.sign_decided += o.sign_decided;
        self.a_coins += o.a_coins;
        self.b_coins += o.b_coins;
        self.c_coins += o.c_coins;
        self.far_apart += o.far_apart;
        self.drop_conditioning += o.drop_conditioning;
        self.numeric_fallback += o.numeric_fallback;
        self.coins_after_sign_change += o.coins_after_sign_change;
    }
}

/// Samples the auxiliary path on `[0, T]`.
fn auxiliary_path(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    proposal: &ConfluentProposal,
    start: AuxStart,
    delta_max: Option<f64>,
) -> Result<crate::psrs::Skeleton> {
    let t_end = proposal.t_end();
    let at_zero = match start.origin(stream, spec, proposal.x0(), proposal.x_t(), t_end)? {
        AuxOrigin::At(y) => y,
        AuxOrigin::Propagate(y) => psrs_unconditioned(stream, spec, y, t_end, delta_max)?.last_value(),
    };
    psrs_unconditioned(stream, spec, at_zero, t_end, delta_max)
}

/// Decides whether `(aux_grid, aux_values)`, already revealed on the
/// proposal's grid, intersects the proposal. `true` means it does.
pub fn check_crossing(
    stream: &mut RngStream,
    proposal: &ConfluentProposal,
    aux: &[f64],
    coins: CoinSettings,
    tally: &mut AuxTally,
) -> Result<bool> {
    let grid = proposal.grid();
    let z = proposal.z_values();
    let x2 = proposal.x2rev_values();
    let tau = proposal.tau();
    let n = grid.len();
    debug_assert_eq!(aux.len(), n);

    for j in 0..n - 1 {
        if (aux[j] - z[j]) * (aux[j + 1] - z[j + 1]) <= 0.0 {
            tally.sign_decided += 1;
            return Ok(true);
        }
    }
    for j in 0..n - 1 {
        if grid[j] >= tau {
            tally.a_coins += 1;
            let p = p_a_cross_prob(x2[j] - aux[j], x2[j + 1] - aux[j + 1], grid[j + 1] - grid[j])?;
            if stream.uniform() < p {
                return Ok(true);
            }
        }
    }
    let input_at = |j: usize, k: usize| RegimeCoinInput {
        g0: (z[j] - x2[j], z[j] - aux[j]),
        g_t: (z[k] - x2[k], z[k] - aux[k]),
        len: grid[k] - grid[j],
    };
    for j in 0..n - 1 {
        if grid[j + 1] < tau {
            tally.b_coins += 1;
            let (clear, branch) = toss_regime_coin_traced(stream, &input_at(j, j + 1), Regime::B, coins)?;
            tally.record_branch(branch);
            if !clear {
                return Ok(true);
            }
        }
    }
    let k = proposal.tau_index();
    if k > 0 {
        tally.c_coins += 1;
        let mut input = input_at(k - 1, k);
        input.g_t.0 = 0.0;
        let (clear, branch) = toss_regime_coin_traced(stream, &input, Regime::C, coins)?;
        tally.record_branch(branch);
        if !clear {
            return Ok(true);
        }
    }
    Ok(false)
}

/// One auxiliary trial: draws a fresh auxiliary path, co-reveals it with the
/// proposal (the proposal keeps its new points) and checks for an intersection.
pub fn aux_crossing(
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    proposal: &mut ConfluentProposal,
    coins: CoinSettings,
    start: AuxStart,
    delta_max: Option<f64>,
    tally: &mut AuxTally,
) -> Result<bool> {
    let mut aux = auxiliary_path(stream, spec, proposal, start, delta_max)?;
    proposal.reveal_many(stream, aux.times())?;
    aux.reveal_many(stream, proposal.grid())?;
    debug_assert_eq!(aux.times(), proposal.grid());
    tally.trials += 1;
    let hit = check_crossing(stream, proposal, aux.values(), coins, tally)?;
    if hit {
        tally.intersections += 1;
    }
    Ok(hit)
}
