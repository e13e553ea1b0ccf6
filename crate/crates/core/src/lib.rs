//! Prior sensitivity study toolkit for hierarchical random-effects models.
//!
//! The numerical core ([`stats`], [`priors`], [`models`], [`sampler`],
//! [`diagnostics`], [`metrics`]) is generic over a [`Real`] scalar; the study
//! pipeline ([`harness`], [`oracle`]) runs in `f64`. Concrete `f64` aliases are
//! exported at the crate root.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod priors;
pub mod sampler;
mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PriorSpec = priors::PriorSpec<f64>;
pub type Dataset = models::Dataset<f64>;
pub type SimulatedDataset = models::SimulatedDataset<f64>;
pub type Model1Data = models::Model1Data<f64>;
pub type Model2Data = models::Model2Data<f64>;
pub type Model3Data = models::Model3Data<f64>;
pub type TargetDensity = models::BoundTarget<f64>;



pub type ChainOutput = sampler::ChainOutput<f64>;
pub use metrics::{DatasetMetrics, SummaryRow};
