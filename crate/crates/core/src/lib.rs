//! Exact simulation of one-dimensional diffusion bridges by splicing a forward
//! and a time-reversed path where they meet, corrected by a pseudo-marginal
//! Metropolis-Hastings step whose auxiliary crossings are decided with
//! Bernoulli factory coins. A discretised baseline and a reference
//! rejection sampler are included for comparison.
//!
//! Models are unit-volatility SDEs `dY = alpha(Y) dt + dW`; see [`model`].

pub mod brownian;
pub mod cdb;
pub mod error;
pub mod model;
pub mod pcoin;
pub mod psrs;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod sdb;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
