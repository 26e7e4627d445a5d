//! The confluent diffusion bridge sampler.

pub mod aux;
pub mod coins;
pub mod mcmc;

pub use coins::{
    p_a_cross_prob, p_hat_eps, polar_reparam, regime_b_series_terms, regime_c_series_terms,
    m_hat, switch_heuristic, toss_regime_coin, toss_regime_coin_traced, CoinBranch, CoinSettings,
    PolarCoords, Regime, RegimeCoinInput, SeriesTerms,
};
pub mod proposal;

pub use proposal::{propose_confluent, ConfluentProposal};
pub use aux::{aux_crossing, AuxTally};
pub use mcmc::{mh_update, run_cdb, run_cdb_with, CdbSettings, ChainState};
