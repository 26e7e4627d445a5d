//! The three experiments. Replicates run on a rayon pool with one stream each;
//! results are collected in replicate order so output never depends on scheduling.

use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use confluent_bridge::cdb::CoinSettings;
use confluent_bridge::model::{AuxStart, DiffusionSpec, ModelParams, ModelRegistry};
use confluent_bridge::psrs::BridgeBudget;
use confluent_bridge::sampler::{BridgeSampler, SamplerParams, SamplerRegistry};
use confluent_bridge::stats::{ks_two_sample, ks_two_sample_pvalue, median};
use confluent_bridge::{Error, RngStream};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{BiasSample, KsRow, Output, PathPoint, Report, TimingRow};

/// Stream id of replicate `rep` within group `group`.
pub fn stream_id(group: u64, rep: usize) -> u64 {
    (group << 32) | rep as u64
}

fn build_model(cfg: &ExperimentConfig) -> Result<DiffusionSpec> {
    Ok(ModelRegistry::default().build(&cfg.model, &ModelParams { dof: cfg.dof })?)
}

pub fn sampler_params(cfg: &ExperimentConfig) -> Result<SamplerParams> {
    Ok(SamplerParams {
        mcmc_steps: cfg.mcmc_steps,
        coins: CoinSettings {
            gamma: cfg.gamma,
            ceiling: cfg.coin_ceiling,
        },
        aux_start: AuxStart::parse(&cfg.aux_start)?,
        delta_max: cfg.delta_max,
        sdb_delta: cfg.sdb_delta.first().copied().unwrap_or(5e-3),
        cdb_max_time: cfg.cdb_budget.map(Duration::from_secs_f64),
        ..SamplerParams::default()
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Output> {
    cfg.validate()?;
    let report = match cfg.experiment {
        Experiment::Bias => bias(cfg)?,
        Experiment::Timing => timing(cfg)?,
        Experiment::Paths => paths(cfg)?,
    };
    Ok(Output::new(cfg.clone(), report))
}

fn midpoints(
    cfg: &ExperimentConfig,
    spec: &DiffusionSpec,
    sampler: &dyn BridgeSampler,
    group: u64,
    t_end: f64,
) -> Result<Vec<f64>> {
    (0..cfg.bridges)
        .into_par_iter()
        .map(|rep| {
            let mut s = RngStream::new(cfg.seed, stream_id(group, rep));
            let mut b = sampler.sample(&mut s, spec, cfg.x0, cfg.x_t, t_end)?;
            Ok(b.value_at(&mut s, 0.5 * t_end)?)
        })
        .collect::<Result<Vec<_>, Error>>()
        .with_context(|| format!("{} replicate failed", sampler.name()))
}

fn bias(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = build_model(cfg)?;
    let t_end = cfg.t_list[0];
    let registry = SamplerRegistry::default();
    let params = sampler_params(cfg)?;
    let reference = registry.build(&cfg.sampler, &params)?;
    let ref_mid = midpoints(cfg, &spec, reference.as_ref(), 0, t_end)?;
    let mut samples: Vec<BiasSample> = ref_mid
        .iter()
        .enumerate()
        .map(|(replicate, &midpoint)| BiasSample { method: cfg.sampler.clone(), delta: None, replicate, midpoint })
        .collect();
    let mut ks = Vec::new();
    for (i, &delta) in cfg.sdb_delta.iter().enumerate() {
        let sdb = registry.build("sdb", &SamplerParams { sdb_delta: delta, ..params.clone() })?;
        let mid = midpoints(cfg, &spec, sdb.as_ref(), 1 + i as u64, t_end)?;
        let d = ks_two_sample(&mid, &ref_mid);
        ks.push(KsRow {
            method: "sdb".into(),
            delta,
            reference: cfg.sampler.clone(),
            d,
            p_value: ks_two_sample_pvalue(d, mid.len(), ref_mid.len()),
        });
        samples.extend(mid.into_iter().enumerate().map(|(replicate, midpoint)| BiasSample {
            method: "sdb".into(),
            delta: Some(delta),
            replicate,
            midpoint,
        }));
    }
    Ok(Report::Bias { samples, ks })
}

/// Times one draw; budget and starvation failures count as incomplete runs.
fn time_draw(
    sampler: &dyn BridgeSampler,
    stream: &mut RngStream,
    spec: &DiffusionSpec,
    cfg: &ExperimentConfig,
    t_end: f64,
) -> Result<(f64, bool)> {
    let t0 = Instant::now();
    let r = sampler.sample(stream, spec, cfg.x0, cfg.x_t, t_end);
    let secs = t0.elapsed().as_secs_f64();
    match r {
        Ok(_) => Ok((secs, true)),
        Err(Error::BudgetExhausted { .. } | Error::Starvation { .. }) => Ok((secs, false)),
        Err(e) => Err(anyhow!("{} at T={t_end}: {e}", sampler.name())),
    }
}

/// Replicates run one after another so wall-clock times are not inflated by
/// contention.
fn timing(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = build_model(cfg)?;
    let registry = SamplerRegistry::default();
    let params = sampler_params(cfg)?;
    let cdb = registry.build(&cfg.sampler, &params)?;
    let mut rows = Vec::new();
    for (ti, &t_end) in cfg.t_list.iter().enumerate() {
        let mut secs = Vec::with_capacity(cfg.bridges);
        for rep in 0..cfg.bridges {
            let mut s = RngStream::new(cfg.seed, stream_id(ti as u64, rep));
            let (sec, completed) = time_draw(cdb.as_ref(), &mut s, &spec, cfg, t_end)?;
            secs.push(sec);
            rows.push(TimingRow { method: cfg.sampler.clone(), t_end, replicate: rep, seconds: sec, completed });
        }
        if t_end > cfg.psrs_cutoff {
            continue;
        }
        let budget = BridgeBudget {
            max_attempts: None,
            max_time: Some(Duration::from_secs_f64(cfg.psrs_budget_factor * median(&secs))),
        };
        let psrs = registry.build("psrs-bridge", &SamplerParams { psrs_budget: budget, ..params.clone() })?;
        for rep in 0..cfg.psrs_bridges.unwrap_or(cfg.bridges) {
            let mut s = RngStream::new(cfg.seed, stream_id((1 << 16) | ti as u64, rep));
            let (sec, completed) = time_draw(psrs.as_ref(), &mut s, &spec, cfg, t_end)?;
            rows.push(TimingRow { method: "psrs-bridge".into(), t_end, replicate: rep, seconds: sec, completed });
        }
    }
    Ok(Report::Timing { rows })
}

fn paths(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = build_model(cfg)?;
    let sampler = SamplerRegistry::default().build(&cfg.sampler, &sampler_params(cfg)?)?;
    let mut points = Vec::new();
    for (ti, &t_end) in cfg.t_list.iter().enumerate() {
        let drawn = (0..cfg.bridges)
            .into_par_iter()
            .map(|rep| {
                let mut s = RngStream::new(cfg.seed, stream_id(ti as u64, rep));
                Ok(sampler.sample(&mut s, &spec, cfg.x0, cfg.x_t, t_end)?.points())
            })
            .collect::<Result<Vec<_>, Error>>()
            .with_context(|| format!("{} failed at T={t_end}", sampler.name()))?;
        for (bridge, (ts, vs)) in drawn.into_iter().enumerate() {
            points.extend(ts.into_iter().zip(vs).map(|(t, value)| PathPoint { t_end, bridge, t, value }));
        }
    }
    Ok(Report::Paths { points })
}
