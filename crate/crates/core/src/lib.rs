//! Graph attention networks, initial-residual ADGAT layers with adaptive depth
//! selection, and the diagnostic probes used to study how attention networks
//! behave as they get deeper.

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod trainer;

pub use error::{Error, Result};
