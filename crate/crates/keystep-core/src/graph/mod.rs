//! Graph construction from annotated takes.
//!
//! Every keystep segment becomes a vision node; the graph variant decides
//! which extra nodes and relations join it:
//!
//! * ego: temporal chain over egocentric segment nodes,
//! * multiview: adds one exocentric node per (segment, exo view) with an
//!   ego-exo edge to the matching ego node,
//! * hetero: adds one text node per segment with a vision-text edge.
//!
//! The context mode sets how much of the take one graph covers: a single
//! segment, a quarter-duration window, or the whole take. Edges are stored
//! once as unordered pairs; message passing later expands them to both
//! directions.

mod build;
mod dump;
mod stats;
mod types;

pub use build::{
    build_dataset_graphs, build_ego_graphs, build_graphs, build_hetero_graphs,
    build_multiview_graphs, windows, BuildOptions,
};
pub use dump::{dump_graphs, write_graph_dump};
pub use stats::{graph_stats, GraphStats};
pub use types::{ContextMode, Edge, EdgeType, Graph, Node, NodeType, Variant};

/// Errors from graph construction.
#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("take {take_id} has no segments")]
    EmptyTake { take_id: String },
    #[error("take {take_id} view {view_id}: {vectors} pooled vectors for {segments} segments")]
    ViewSegmentMismatch {
        take_id: String,
        view_id: String,
        vectors: usize,
        segments: usize,
    },
    #[error("take {take_id} has no text features but a text-bearing variant was requested")]
    MissingTextFeatures { take_id: String },
}

impl GraphError {
    /// Stable machine-readable category, used in CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            GraphError::EmptyTake { .. } => "graph.EmptyTake",
            GraphError::ViewSegmentMismatch { .. } => "graph.ViewSegmentMismatch",
            GraphError::MissingTextFeatures { .. } => "graph.MissingTextFeatures",
        }
    }
}
