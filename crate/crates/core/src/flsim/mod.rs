//! Desk-scale federated learning: data, models, baselines and oracles.

pub mod aggregate;
pub mod config;
pub mod data;
pub mod model;
pub mod oracle;
pub mod report;
pub mod train;

use thiserror::Error;

pub use config::{Aggregator, ExperimentConfig};
pub use data::Dataset;
pub use model::{local_train, Arch, Model};
pub use oracle::{fixedpoint_oracle, reduce_fraction, OracleOutput};

#[derive(Debug, Error)]
pub enum FlError {
    #[error("dataset: {0}")]
    Data(String),
}
pub use train::{run_training, IterMetrics, RunResult, RunSummary, TrainError};
