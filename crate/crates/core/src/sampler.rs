//! Bridge samplers behind one trait, selectable by name.

use std::collections::BTreeMap;
use std::time::Duration;

use crate::cdb::{run_cdb_with, AuxTally, CdbSettings, CoinSettings, ConfluentProposal};
use crate::error::{Error, Result};
use crate::model::{AuxStart, DiffusionSpec};
use crate::psrs::{psrs_bridge, BridgeBudget, Skeleton};
use crate::rng::RngStream;
use crate::sdb::{run_sdb, GridPath, SdbSettings};

/// A sampled bridge that can be evaluated at further times.
pub trait SampledBridge: Send {
    /// Value at `t`; exact samplers reveal it lazily, grid samplers interpolate.
    fn value_at(&mut self, stream: &mut RngStream, t: f64) -> Result<f64>;
    /// Every point known so far, sorted by time.
    fn points(&self) -> (Vec<f64>, Vec<f64>);
}

impl SampledBridge for ConfluentProposal {
    fn value_at(&mut self, stream: &mut RngStream, t: f64) -> Result<f64> {
        self.reveal(stream, t)
    }
    fn points(&self) -> (Vec<f64>, Vec<f64>) {
        (self.grid().to_vec(), self.z_values().to_vec())
    }
}

impl SampledBridge for Skeleton {
    fn value_at(&mut self, stream: &mut RngStream, t: f64) -> Result<f64> {
        self.reveal_at(stream, t)
    }
    fn points(&self) -> (Vec<f64>, Vec<f64>) {
        (self.times().to_vec(), self.values().to_vec())
    }
}

impl SampledBridge for GridPath {
    fn value_at(&mut self, _: &mut RngStream, t: f64) -> Result<f64> {
        GridPath::value_at(self, t)
    }
    fn points(&self) -> (Vec<f64>, Vec<f64>) {
        let times = (0..self.values().len()).map(|k| self.time(k)).collect();
        (times, self.values().to_vec())
    }
}

pub trait BridgeSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn sample(
        &self,
        stream: &mut RngStream,
        spec: &DiffusionSpec,
        x0: f64,
        x_t: f64,
        t_end: f64,
    ) -> Result<Box<dyn SampledBridge>>;
}

pub struct CdbSampler {
    pub settings: CdbSettings,
    pub mcmc_steps: usize,
}

impl BridgeSampler for CdbSampler {
    fn name(&self) -> &'static str {
        "cdb"
    }
    fn sample(&self, stream: &mut RngStream, spec: &DiffusionSpec, x0: f64, x_t: f64, t_end: f64) -> Result<Box<dyn SampledBridge>> {
        let mut tally = AuxTally::default();
        let state = run_cdb_with(stream, spec, x0, x_t, t_end, self.mcmc_steps, &self.settings, &mut tally, |_| {})?;
        Ok(Box::new(state.proposal))
    }
}

pub struct SdbSampler {
    pub settings: SdbSettings,
    pub mcmc_steps: usize,
}

impl BridgeSampler for SdbSampler {
    fn name(&self) -> &'static str {
        "sdb"
    }
    fn sample(&self, stream: &mut RngStream, spec: &DiffusionSpec, x0: f64, x_t: f64, t_end: f64) -> Result<Box<dyn SampledBridge>> {
        Ok(Box::new(run_sdb(stream, spec, x0, x_t, t_end, self.mcmc_steps, &self.settings)?.path))
    }
}

pub struct PsrsBridgeSampler {
    pub budget: BridgeBudget,
}

impl BridgeSampler for PsrsBridgeSampler {
    fn name(&self) -> &'static str {
        "psrs-bridge"
    }
    fn sample(&self, stream: &mut RngStream, spec: &DiffusionSpec, x0: f64, x_t: f64, t_end: f64) -> Result<Box<dyn SampledBridge>> {
        Ok(Box::new(psrs_bridge(stream, spec, x0, x_t, t_end, self.budget)?.skeleton))
    }
}

/// Knobs shared by the built-in samplers; each one reads what it needs.
#[derive(Debug, Clone)]
pub struct SamplerParams {
    pub mcmc_steps: usize,
    pub coins: CoinSettings,
    pub aux_start: AuxStart,
    pub delta_max: Option<f64>,
    pub sdb_delta: f64,
    /// Wall-clock cap on one CDB chain.
    pub cdb_max_time: Option<Duration>,
    pub psrs_budget: BridgeBudget,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            mcmc_steps: 50,
            coins: CoinSettings::default(),
            aux_start: AuxStart::default(),
            delta_max: None,
            sdb_delta: 5e-3,
            cdb_max_time: None,
            psrs_budget: BridgeBudget {
                max_attempts: None,
                max_time: Some(Duration::from_secs(60)),
            },
        }
    }
}

type SamplerFactory = Box<dyn Fn(&SamplerParams) -> Result<Box<dyn BridgeSampler>> + Send + Sync>;

pub struct SamplerRegistry {
    entries: BTreeMap<&'static str, SamplerFactory>,
}

impl Default for SamplerRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register("cdb", |p| {
            let settings = CdbSettings {
                coins: p.coins,
                aux_start: p.aux_start,
                delta_max: p.delta_max,
                max_time: p.cdb_max_time,
                ..CdbSettings::default()
            };
            Ok(Box::new(CdbSampler { settings, mcmc_steps: p.mcmc_steps }))
        });
        r.register("sdb", |p| {
            let mut settings = SdbSettings::new(p.sdb_delta);
            settings.aux_start = p.aux_start;
            crate::sdb::grid_steps(1.0, p.sdb_delta)?;
            Ok(Box::new(SdbSampler { settings, mcmc_steps: p.mcmc_steps }))
        });
        r.register("psrs-bridge", |p| Ok(Box::new(PsrsBridgeSampler { budget: p.psrs_budget })));
        r
    }
}

impl SamplerRegistry {
    pub fn register(
        &mut self,
        name: &'static str,
        factory: impl Fn(&SamplerParams) -> Result<Box<dyn BridgeSampler>> + Send + Sync + 'static,
    ) {
        self.entries.insert(name, Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn build(&self, name: &str, params: &SamplerParams) -> Result<Box<dyn BridgeSampler>> {
        let factory = self.entries.get(name).ok_or_else(|| Error::UnknownName {
            kind: "sampler",
            name: name.to_string(),
        })?;
        factory(params)
    }
}
