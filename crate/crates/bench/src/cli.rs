//! Command-line parsing into an [`ExperimentConfig`].

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_list, Experiment, ExperimentConfig, Format};

#[derive(Debug, Parser)]
#[command(name = "bridge-bench", version, about = "Diffusion bridge sampler experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Midpoint law of the exact sampler against discretised bridges.
    Bias(CommonArgs),
    /// Wall-clock seconds per bridge across bridge lengths.
    Timing(CommonArgs),
    /// Revealed points of sampled bridges.
    Paths(CommonArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Model name (brownian, langevin-t).
    #[arg(long)]
    pub model: Option<String>,
    /// Degrees of freedom of the langevin-t model.
    #[arg(long)]
    pub dof: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long = "xT")]
    pub x_t: Option<f64>,
    /// Comma-separated bridge lengths.
    #[arg(long = "T")]
    pub t_list: Option<String>,
    #[arg(long)]
    pub bridges: Option<usize>,
    #[arg(long)]
    pub mcmc_steps: Option<usize>,
    /// Comma-separated Euler steps for the discretised sampler.
    #[arg(long)]
    pub sdb_delta: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub coin_ceiling: Option<usize>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    /// Auxiliary start law (invariant, from-end).
    #[arg(long)]
    pub aux_start: Option<String>,
    /// Sampler name from the registry (cdb, sdb, psrs-bridge).
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub psrs_cutoff: Option<f64>,
    #[arg(long)]
    pub psrs_bridges: Option<usize>,
    /// Seconds allowed per CDB chain before the run counts as incomplete.
    #[arg(long)]
    pub cdb_budget: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn parts(&self) -> (Experiment, &CommonArgs) {
        match self {
            Self::Bias(a) => (Experiment::Bias, a),
            Self::Timing(a) => (Experiment::Timing, a),
            Self::Paths(a) => (Experiment::Paths, a),
        }
    }

    /// Resolves flags over the experiment defaults.
    pub fn resolve(&self) -> Result<(ExperimentConfig, Format, Option<PathBuf>)> {
        let (e, a) = self.parts();
        let mut c = ExperimentConfig::defaults(e);
        if let Some(m) = &a.model {
            c.model = m.clone();
        }
        if a.dof.is_some() {
            c.dof = a.dof;
        }
        c.x0 = a.x0.unwrap_or(c.x0);
        c.x_t = a.x_t.unwrap_or(c.x_t);
        if let Some(t) = &a.t_list {
            c.t_list = parse_list(t)?;
        }
        c.bridges = a.bridges.unwrap_or(c.bridges);
        c.mcmc_steps = a.mcmc_steps.unwrap_or(c.mcmc_steps);
        if let Some(d) = &a.sdb_delta {
            c.sdb_delta = parse_list(d)?;
        }
        c.gamma = a.gamma.unwrap_or(c.gamma);
        c.coin_ceiling = a.coin_ceiling.unwrap_or(c.coin_ceiling);
        if a.delta_max.is_some() {
            c.delta_max = a.delta_max;
        }
        if let Some(s) = &a.aux_start {
            c.aux_start = s.clone();
        }
        if let Some(s) = &a.sampler {
            c.sampler = s.clone();
        }
        c.psrs_cutoff = a.psrs_cutoff.unwrap_or(c.psrs_cutoff);
        if a.psrs_bridges.is_some() {
            c.psrs_bridges = a.psrs_bridges;
        }
        if a.cdb_budget.is_some() {
            c.cdb_budget = a.cdb_budget;
        }
        c.seed = a.seed.unwrap_or(c.seed);
        c.validate()?;
        let format = match a.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
        Ok((c, format, a.out.clone()))
    }
}
