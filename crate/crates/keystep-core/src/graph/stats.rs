//! Summary statistics over a set of built graphs.

use serde::Serialize;

use super::{EdgeType, Graph};

/// Aggregate counts for a graph collection; means carry two decimals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub graphs: usize,
    pub mean_nodes: f64,
    pub mean_segments: f64,
    pub temporal_edges: usize,
    pub ego_exo_edges: usize,
    pub vision_text_edges: usize,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Count nodes, segments, and per-kind edges; an empty input yields zeros.
pub fn graph_stats(graphs: &[Graph]) -> GraphStats {
    if graphs.is_empty() {
        return GraphStats {
            graphs: 0,
            mean_nodes: 0.0,
            mean_segments: 0.0,
            temporal_edges: 0,
            ego_exo_edges: 0,
            vision_text_edges: 0,
        };
    }
    let n = graphs.len() as f64;
    let nodes: usize = graphs.iter().map(|g| g.nodes.len()).sum();
    let segments: usize = graphs.iter().map(|g| g.num_segments()).sum();
    let count = |kind: EdgeType| {
        graphs
            .iter()
            .map(|g| g.edges.iter().filter(|e| e.kind == kind).count())
            .sum()
    };
    GraphStats {
        graphs: graphs.len(),
        mean_nodes: round2(nodes as f64 / n),
        mean_segments: round2(segments as f64 / n),
        temporal_edges: count(EdgeType::Temporal),
        ego_exo_edges: count(EdgeType::EgoExo),
        vision_text_edges: count(EdgeType::VisionText),
    }
}
