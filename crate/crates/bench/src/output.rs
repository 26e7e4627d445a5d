//! Result records and their CSV/JSON encodings.
//!
//! CSV layout (schema version 1):
//!
//! ```text
//! # bridge-bench v1 experiment=<name> columns=<c1,c2,...>
//! # config <json>
//! <c1,c2,...>
//! <rows>
//! #ks,<method>,<delta>,<reference>,<d>,<p_value>     (bias only)
//! ```
//!
//! JSON holds the same data: `{"schema", "version", "config", "report"}`.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, Format};

pub const SCHEMA: &str = "bridge-bench";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSample {
    pub method: String,
    /// Step size for discretised methods.
    pub delta: Option<f64>,
    pub replicate: usize,
    pub midpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub method: String,
    pub delta: f64,
    pub reference: String,
    pub d: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub t_end: f64,
    pub replicate: usize,
    pub seconds: f64,
    /// `false` when the run budget ran out before a draw was accepted.
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t_end: f64,
    pub bridge: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Report {
    Bias { samples: Vec<BiasSample>, ks: Vec<KsRow> },
    Timing { rows: Vec<TimingRow> },
    Paths { points: Vec<PathPoint> },
}

impl Report {
    pub fn experiment(&self) -> Experiment {
        match self {
            Self::Bias { .. } => Experiment::Bias,
            Self::Timing { .. } => Experiment::Timing,
            Self::Paths { .. } => Experiment::Paths,
        }
    }

    fn columns(experiment: Experiment) -> &'static [&'static str] {
        match experiment {
            Experiment::Bias => &["method", "delta", "replicate", "midpoint"],
            Experiment::Timing => &["method", "T", "replicate", "seconds", "completed"],
            Experiment::Paths => &["T", "bridge", "t", "value"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub schema: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub report: Report,
}

impl Output {
    pub fn new(config: ExperimentConfig, report: Report) -> Self {
        Self {
            schema: SCHEMA.into(),
            version: SCHEMA_VERSION,
            config,
            report,
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => self.to_csv(),
        }
    }

    fn to_csv(&self) -> Result<String> {
        let e = self.report.experiment();
        let cols = Report::columns(e).join(",");
        let mut s = format!("# {SCHEMA} v{SCHEMA_VERSION} experiment={} columns={cols}\n", e.name());
        s += &format!("# config {}\n", serde_json::to_string(&self.config)?);
        s += &cols;
        s.push('\n');
        match &self.report {
            Report::Bias { samples, ks } => {
                for r in samples {
                    let delta = r.delta.map(|d| d.to_string()).unwrap_or_default();
                    s += &format!("{},{},{},{}\n", r.method, delta, r.replicate, r.midpoint);
                }
                for k in ks {
                    s += &format!("#ks,{},{},{},{},{}\n", k.method, k.delta, k.reference, k.d, k.p_value);
                }
            }
            Report::Timing { rows } => {
                for r in rows {
                    s += &format!("{},{},{},{},{}\n", r.method, r.t_end, r.replicate, r.seconds, r.completed);
                }
            }
            Report::Paths { points } => {
                for p in points {
                    s += &format!("{},{},{},{}\n", p.t_end, p.bridge, p.t, p.value);
                }
            }
        }
        Ok(s)
    }
}

pub fn parse(text: &str, format: Format) -> Result<Output> {
    match format {
        Format::Json => parse_json(text),
        Format::Csv => parse_csv(text),
    }
}

pub fn parse_json(text: &str) -> Result<Output> {
    let out: Output = serde_json::from_str(text).context("malformed JSON result")?;
    if out.schema != SCHEMA || out.version != SCHEMA_VERSION {
        bail!("unsupported schema {} v{}", out.schema, out.version);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(cells: &[&str], i: usize, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let c = cells.get(i).ok_or_else(|| anyhow!("line {line}: missing column {i}"))?;
    c.parse().map_err(|e| anyhow!("line {line}: bad value `{c}`: {e}"))
}

pub fn parse_csv(text: &str) -> Result<Output> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| anyhow!("empty file"))?;
    let prefix = format!("# {SCHEMA} v{SCHEMA_VERSION} experiment=");
    let rest = head.strip_prefix(&prefix).ok_or_else(|| anyhow!("missing or unsupported schema header"))?;
    let (name, _) = rest.split_once(' ').ok_or_else(|| anyhow!("malformed schema header"))?;
    let experiment: Experiment = serde_json::from_str(&format!("\"{name}\""))
        .map_err(|_| anyhow!("unknown experiment `{name}`"))?;
    let (_, cfg) = lines.next().ok_or_else(|| anyhow!("missing config line"))?;
    let cfg = cfg.strip_prefix("# config ").ok_or_else(|| anyhow!("missing config line"))?;
    let config: ExperimentConfig = serde_json::from_str(cfg).context("malformed config line")?;
    let (_, cols) = lines.next().ok_or_else(|| anyhow!("missing column header"))?;
    if cols != Report::columns(experiment).join(",") {
        bail!("column header does not match experiment {name}");
    }
    let mut report = match experiment {
        Experiment::Bias => Report::Bias { samples: vec![], ks: vec![] },
        Experiment::Timing => Report::Timing { rows: vec![] },
        Experiment::Paths => Report::Paths { points: vec![] },
    };
    for (i, line) in lines {
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        match &mut report {
            Report::Bias { samples, ks } => {
                if let Some(k) = line.strip_prefix("#ks,") {
                    let c: Vec<&str> = k.split(',').collect();
                    ks.push(KsRow {
                        method: c[0].to_string(),
                        delta: field(&c, 1, n)?,
                        reference: field(&c, 2, n)?,
                        d: field(&c, 3, n)?,
                        p_value: field(&c, 4, n)?,
                    });
                } else {
                    let c: Vec<&str> = line.split(',').collect();
                    samples.push(BiasSample {
                        method: c[0].to_string(),
                        delta: if c.get(1).is_some_and(|d| d.is_empty()) { None } else { Some(field(&c, 1, n)?) },
                        replicate: field(&c, 2, n)?,
                        midpoint: field(&c, 3, n)?,
                    });
                }
            }
            Report::Timing { rows } => {
                let c: Vec<&str> = line.split(',').collect();
                rows.push(TimingRow {
                    method: c[0].to_string(),
                    t_end: field(&c, 1, n)?,
                    replicate: field(&c, 2, n)?,
                    seconds: field(&c, 3, n)?,
                    completed: field(&c, 4, n)?,
                });
            }
            Report::Paths { points } => {
                let c: Vec<&str> = line.split(',').collect();
                points.push(PathPoint {
                    t_end: field(&c, 0, n)?,
                    bridge: field(&c, 1, n)?,
                    t: field(&c, 2, n)?,
                    value: field(&c, 3, n)?,
                });
            }
        }
    }
    Ok(Output::new(config, report))
}
