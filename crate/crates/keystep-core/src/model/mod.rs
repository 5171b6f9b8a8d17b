//! Relational message-passing node classifier.
//!
//! Per-node-type input projections lift pooled features into a shared
//! hidden space; each of the L layers mixes a node's own state with
//! mean-aggregated neighbor states, one learned transform per relation;
//! a linear head scores every node over the keystep classes. Masks decide
//! which logits feed the loss (train) or the metrics (eval).

mod checkpoint;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{forward, predict, predict_batch, ForwardPass, ParamTensors};
pub use params::{init_params, Linear, LayerParams, ModelConfig, ModelParams};

use std::path::PathBuf;

use crate::autodiff::AutodiffError;
use crate::graph::NodeType;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("node {node_index} ({node_type:?}) has {got} features, expected {expected}")]
    DimMismatch {
        node_index: usize,
        node_type: NodeType,
        got: usize,
        expected: usize,
    },
    #[error("no input dimension configured for node type {node_type:?}")]
    MissingInputDim { node_type: NodeType },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("checkpoint {path}: {source}")]
    CheckpointIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path}: {reason}")]
    CheckpointFormat { path: PathBuf, reason: String },
}

impl ModelError {
    pub fn category(&self) -> &'static str {
        match self {
            ModelError::DimMismatch { .. } => "model.DimMismatch",
            ModelError::MissingInputDim { .. } => "model.MissingInputDim",
            ModelError::Autodiff(e) => e.category(),
            ModelError::CheckpointIo { .. } => "model.CheckpointIo",
            ModelError::CheckpointFormat { .. } => "model.CheckpointFormat",
        }
    }
}
