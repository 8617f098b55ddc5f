//! Classifiers: the L1-penalized two-layer network, the IRLS logistic
//! baseline, the holdout protocol and ensemble evaluation.

pub mod ann;
pub mod dataset;
pub mod ensemble;
pub mod logreg;
pub mod metrics;
pub mod scg;

use thiserror::Error;

pub use ann::{ann_gradient, ann_loss, train_ann, AnnModel, TrainedAnn, TrainingConfig};
pub use dataset::{split, split_indices, PairedDataset, SplitIndices, SplitSpec};
pub use ensemble::{ensemble_run, fit_tune_evaluate, DataSource, EnsembleConfig, EnsembleSummary, Summary};
pub use logreg::{train_logreg, LogRegModel};
pub use metrics::{evaluate, tune_threshold, Metrics, ThresholdChoice};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("simulation failed: {0}")]
    Simulation(String),
}
