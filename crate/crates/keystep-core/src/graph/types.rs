//! Core graph vocabulary: node/edge kinds, context modes, variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// What a node stands for. Exactly one per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeType {
    EgoVision,
    ExoVision,
    Text,
}

/// Relation carried by an edge.
///
/// Temporal edges join consecutive vision segments of one view; ego-exo
/// edges join an ego node to an exo node of the same segment; vision-text
/// edges join an ego node to its segment's text node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    Temporal,
    EgoExo,
    VisionText,
}

impl EdgeType {
    pub const ALL: [EdgeType; 3] = [EdgeType::Temporal, EdgeType::EgoExo, EdgeType::VisionText];
}

/// How much temporal context one graph covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    /// One graph per segment: an isolated node, no edges.
    #[serde(rename = "none")]
    NoContext,
    /// The take is split into four equal-duration windows; one graph per
    /// nonempty window.
    #[serde(rename = "short")]
    ShortContext,
    /// One graph spanning the whole take.
    #[serde(rename = "full")]
    FullContext,
}

impl ContextMode {
    pub const ALL: [ContextMode; 3] = [
        ContextMode::NoContext,
        ContextMode::ShortContext,
        ContextMode::FullContext,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::NoContext => "none",
            ContextMode::ShortContext => "short",
            ContextMode::FullContext => "full",
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ContextMode::NoContext),
            "short" => Ok(ContextMode::ShortContext),
            "full" => Ok(ContextMode::FullContext),
            other => Err(format!(
                "unknown context mode {other:?} (expected none, short, or full)"
            )),
        }
    }
}

/// Which node/edge kinds the graphs carry at training time.
///
/// Inference graphs never contain exo nodes — exocentric views exist only
/// while training — so [`Variant::inference`] maps each training variant to
/// what the model actually sees at evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "ego")]
    EgoOnly,
    #[serde(rename = "multiview")]
    MultiView,
    #[serde(rename = "hetero")]
    Hetero,
    #[serde(rename = "multiview-hetero")]
    MultiViewHetero,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::EgoOnly,
        Variant::MultiView,
        Variant::Hetero,
        Variant::MultiViewHetero,
    ];

    pub fn includes_exo(self) -> bool {
        matches!(self, Variant::MultiView | Variant::MultiViewHetero)
    }

    pub fn includes_text(self) -> bool {
        matches!(self, Variant::Hetero | Variant::MultiViewHetero)
    }

    /// The variant evaluation graphs are built with: exo views drop out,
    /// text (when trained with) remains available.
    pub fn inference(self) -> Variant {
        if self.includes_text() {
            Variant::Hetero
        } else {
            Variant::EgoOnly
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::EgoOnly => "ego",
            Variant::MultiView => "multiview",
            Variant::Hetero => "hetero",
            Variant::MultiViewHetero => "multiview-hetero",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ego" => Ok(Variant::EgoOnly),
            "multiview" => Ok(Variant::MultiView),
            "hetero" => Ok(Variant::Hetero),
            "multiview-hetero" => Ok(Variant::MultiViewHetero),
            other => Err(format!(
                "unknown variant {other:?} (expected ego, multiview, hetero, or multiview-hetero)"
            )),
        }
    }
}

/// One node: its kind, provenance, pooled features, and role masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub node_type: NodeType,
    /// View the features came from; text nodes use `"text"`.
    pub view_id: String,
    /// Segment index within the take (not within the window).
    pub segment_index: usize,
    pub features: Vec<f64>,
    pub label: usize,
    /// Participates in the training loss (all vision nodes).
    pub train_mask: bool,
    /// Scored at evaluation (ego vision nodes only).
    pub eval_mask: bool,
}

/// Undirected edge, canonicalized so `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeType,
}

impl Edge {
    /// Build a canonical edge; panics on a self-loop, which no builder
    /// produces.
    pub fn new(u: usize, v: usize, kind: EdgeType) -> Self {
        assert_ne!(u, v, "self-edges are not allowed");
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        Edge { a, b, kind }
    }
}

/// An immutable graph over one context window of one take.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub take_id: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl Graph {
    /// Number of keystep segments covered (= ego vision nodes).
    pub fn num_segments(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.node_type == NodeType::EgoVision)
            .count()
    }

    /// Both directions of every undirected edge of `kind`, for
    /// neighborhood aggregation.
    pub fn directed_edges(&self, kind: EdgeType) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.kind == kind {
                out.push((e.a, e.b));
                out.push((e.b, e.a));
            }
        }
        out
    }

    /// Edge kinds present in this graph, deduplicated, in enum order.
    pub fn edge_kinds(&self) -> Vec<EdgeType> {
        EdgeType::ALL
            .into_iter()
            .filter(|k| self.edges.iter().any(|e| e.kind == *k))
            .collect()
    }
}
