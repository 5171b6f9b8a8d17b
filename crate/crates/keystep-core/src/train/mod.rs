//! Five-fold cross-validation training.
//!
//! Folds partition takes (never individual graphs, so windows of one take
//! cannot straddle the train/validation boundary). Each fold trains from
//! scratch on the other four folds' graphs — exo and text nodes included
//! per the variant — and is scored on its own takes rebuilt the way
//! inference sees them: ego-only, plus text for the hetero variants.
//! All randomness flows from per-fold streams derived off one seed, so a
//! report is a pure function of (data, configs, seed) whether folds run
//! sequentially or in parallel.

mod adam;
mod fit;
mod folds;

pub use adam::{Adam, AdamConfig};
pub use fit::{
    cross_validate, train_fold, write_trace_csv, CrossValidationOutcome, EpochTrace,
    FoldArtifacts, FoldOutcome, TrainConfig,
};
pub use folds::{make_folds, FoldAssignment, NUM_FOLDS};

use crate::graph::GraphError;
use crate::metrics::MetricsError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("need at least {needed} takes for {folds} folds, got {got}")]
    TooFewTakes {
        needed: usize,
        folds: usize,
        got: usize,
    },
    #[error("fold {fold} epoch {epoch} graph {graph_index}: loss diverged to {loss}")]
    DivergedLoss {
        fold: usize,
        epoch: usize,
        graph_index: usize,
        loss: f64,
    },
    #[error("invalid training configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl TrainError {
    pub fn category(&self) -> &'static str {
        match self {
            TrainError::TooFewTakes { .. } => "trainer.TooFewTakes",
            TrainError::DivergedLoss { .. } => "trainer.DivergedLoss",
            TrainError::InvalidConfig { .. } => "trainer.InvalidConfig",
            TrainError::Model(e) => e.category(),
            TrainError::Graph(e) => e.category(),
            TrainError::Metrics(e) => e.category(),
        }
    }
}
