//! Experiment harness for the bridge samplers: midpoint bias against the
//! discretised baseline, per-bridge timing, and path dumps for plotting.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
