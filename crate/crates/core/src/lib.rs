//! Determinantal point process learning for subset selection, applied to
//! wireless link scheduling.
//!
//! - [`net`]: random link networks, SINR and sum-rate.
//! - [`schedule`]: successive-GP, exhaustive and thinning schedulers.
//! - [`dpp`]: L-ensembles, spectral sampling, greedy MAP, enumeration.
//! - [`learn`]: conditional kernel, likelihood, training and inference.
//! - [`par`]: order-preserving batch execution (rayon or sequential).

pub mod dpp;
pub mod error;
mod gp;
pub mod learn;
pub mod net;
pub mod par;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
pub use gp::GpSolution;
pub use learn::{DppModel, InferMode, TrainingSample, TrainingSet};
pub use net::{ActiveSubset, LinkNetwork, PowerConfig};
pub use schedule::GpSettings;
