//! Spiking neural networks for modeled neuromorphic edge chips.
//!
//! - [`snn`]: discrete-time LIF simulation
//! - [`encoding`]: rate, latency and hybrid spike encoders
//! - [`training`]: surrogate-gradient BPTT
//! - [`hardware`]: chip models and neuron-to-core mapping
//! - [`adapt`]: activity-driven threshold adaptation
//! - [`energy`]: event-count energy accounting
//! - [`data`], [`io`], [`config`], [`presets`], [`pipeline`]: datasets, file
//!   formats and the command-line workflows

pub mod adapt;
pub mod config;
pub mod data;
pub mod encoding;
pub mod energy;
pub mod error;
pub mod hardware;
pub mod io;
pub mod pipeline;
pub mod presets;
pub mod seed;
pub mod snn;
pub mod training;

pub use error::{Error, Result};
