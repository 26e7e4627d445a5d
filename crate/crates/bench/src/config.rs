//! Experiment configuration with per-experiment defaults.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Bias,
    Timing,
    Paths,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bias => "bias",
            Self::Timing => "timing",
            Self::Paths => "paths",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Fully resolved settings of one run. Serialised into JSON output as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: String,
    pub dof: Option<f64>,
    pub x0: f64,
    pub x_t: f64,
    pub t_list: Vec<f64>,
    pub bridges: usize,
    pub mcmc_steps: usize,
    pub sdb_delta: Vec<f64>,
    pub gamma: f64,
    pub coin_ceiling: usize,
    pub delta_max: Option<f64>,
    pub aux_start: String,
    pub sampler: String,
    pub psrs_cutoff: f64,
    /// PSRS replicates per `T` in the timing run; defaults to `bridges`.
    pub psrs_bridges: Option<usize>,
    /// Wall-clock cap in seconds on one CDB chain.
    pub cdb_budget: Option<f64>,
    /// PSRS wall-clock budget as a multiple of the CDB median at the same `T`.
    pub psrs_budget_factor: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            model: "langevin-t".into(),
            dof: Some(3.0),
            x0: 2.0,
            x_t: 3.3,
            t_list: vec![4.0],
            bridges: 20_000,
            mcmc_steps: 50,
            sdb_delta: vec![0.4, 0.2, 5e-3],
            gamma: 3.0,
            coin_ceiling: confluent_bridge::pcoin::DEFAULT_COIN_CEILING,
            delta_max: None,
            aux_start: "invariant".into(),
            sampler: "cdb".into(),
            psrs_cutoff: 6.0,
            psrs_bridges: None,
            cdb_budget: None,
            psrs_budget_factor: 10.0,
            seed: 1,
        };
        match experiment {
            Experiment::Bias => base,
            Experiment::Timing => Self {
                cdb_budget: Some(600.0),
                dof: Some(100.0),
                x0: 7.0,
                x_t: 7.0,
                t_list: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 20.0, 30.0, 50.0, 100.0],
                bridges: 50,
                mcmc_steps: 200,
                ..base
            },
            Experiment::Paths => Self {
                cdb_budget: Some(600.0),
                dof: Some(100.0),
                x0: 7.0,
                x_t: 7.0,
                t_list: vec![1.0, 4.0, 20.0, 100.0],
                bridges: 30,
                mcmc_steps: 200,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bridges == 0 {
            bail!("--bridges must be positive");
        }
        if self.t_list.is_empty() {
            bail!("--T needs at least one value");
        }
        if let Some(t) = self.t_list.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            bail!("--T values must be finite and positive, got {t}");
        }
        if self.experiment == Experiment::Bias && self.sdb_delta.is_empty() {
            bail!("--sdb-delta needs at least one value");
        }
        if let Some(d) = self.sdb_delta.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            bail!("--sdb-delta values must be finite and positive, got {d}");
        }
        if !(self.gamma > 0.0) {
            bail!("--gamma must be positive");
        }
        if self.cdb_budget.is_some_and(|b| !(b > 0.0)) {
            bail!("CDB budget must be positive");
        }
        if !(self.psrs_budget_factor > 0.0) {
            bail!("PSRS budget factor must be positive");
        }
        Ok(())
    }
}

/// Parses a comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>().map_err(|e| anyhow::anyhow!("bad number `{p}`: {e}"))
        })
        .collect()
}
