//! Model configuration, parameter containers, and initialization.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Manifest;
use crate::graph::{EdgeType, NodeType, Variant};
use crate::rng::seeded_rng;

/// Architecture hyperparameters.
///
/// `input_dims` must cover every node type appearing in training graphs;
/// `edge_types_active` fixes which relations get message weights — a
/// relation absent here is ignored in graphs that carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout_p: f64,
    pub num_classes: usize,
    pub input_dims: BTreeMap<NodeType, usize>,
    pub edge_types_active: BTreeSet<EdgeType>,
}

impl ModelConfig {
    pub const DEFAULT_HIDDEN_DIM: usize = 128;
    pub const DEFAULT_NUM_LAYERS: usize = 2;
    pub const DEFAULT_DROPOUT_P: f64 = 0.2;

    pub fn new(
        num_classes: usize,
        input_dims: BTreeMap<NodeType, usize>,
        edge_types_active: BTreeSet<EdgeType>,
    ) -> Self {
        Self {
            hidden_dim: Self::DEFAULT_HIDDEN_DIM,
            num_layers: Self::DEFAULT_NUM_LAYERS,
            dropout_p: Self::DEFAULT_DROPOUT_P,
            num_classes,
            input_dims,
            edge_types_active,
        }
    }

    /// Derive input dims and active relations from a manifest and the
    /// training variant; defaults elsewhere.
    pub fn for_dataset(manifest: &Manifest, variant: Variant) -> Self {
        let mut input_dims = BTreeMap::new();
        input_dims.insert(NodeType::EgoVision, manifest.feature_dim_vision);
        let mut edges = BTreeSet::new();
        edges.insert(EdgeType::Temporal);
        if variant.includes_exo() {
            input_dims.insert(NodeType::ExoVision, manifest.feature_dim_vision);
            edges.insert(EdgeType::EgoExo);
        }
        if variant.includes_text() {
            input_dims.insert(NodeType::Text, manifest.feature_dim_text);
            edges.insert(EdgeType::VisionText);
        }
        Self::new(manifest.num_classes, input_dims, edges)
    }
}

/// A dense layer: `in×out` weight plus `1×out` bias row.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

/// One message-passing layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub self_weight: Array2<f64>,
    /// One hidden×hidden transform per active relation, in enum order.
    pub relation: BTreeMap<EdgeType, Array2<f64>>,
    pub bias: Array2<f64>,
}

/// Every learnable tensor of the model.
///
/// Declaration order — the order `tensors` walks and the order checkpoints
/// store — is: input projections by node type (weight, bias each), then
/// per layer the self weight, relation weights in enum order, and bias,
/// then the head weight and bias.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub input: BTreeMap<NodeType, Linear>,
    pub layers: Vec<LayerParams>,
    pub head: Linear,
}

impl ModelParams {
    /// All tensors in declaration order.
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for linear in self.input.values() {
            out.push(&linear.weight);
            out.push(&linear.bias);
        }
        for layer in &self.layers {
            out.push(&layer.self_weight);
            for w in layer.relation.values() {
                out.push(w);
            }
            out.push(&layer.bias);
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    /// Mutable view of all tensors in declaration order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for linear in self.input.values_mut() {
            out.push(&mut linear.weight);
            out.push(&mut linear.bias);
        }
        for layer in &mut self.layers {
            out.push(&mut layer.self_weight);
            for w in layer.relation.values_mut() {
                out.push(w);
            }
            out.push(&mut layer.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Exact bitwise equality — the checkpoint round-trip contract.
    pub fn bits_eq(&self, other: &ModelParams) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                x.dim() == y.dim()
                    && x.iter()
                        .zip(y.iter())
                        .all(|(u, v)| u.to_bits() == v.to_bits())
            })
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let mut w = Array2::zeros((rows, cols));
    for v in w.iter_mut() {
        *v = rng.random_range(-a..a);
    }
    w
}

/// Fresh parameters: weights uniform in ±sqrt(6/(fan_in+fan_out)), biases
/// zero, drawn in declaration order from a seeded stream.
pub fn init_params(config: &ModelConfig, seed: u64) -> ModelParams {
    let mut rng = seeded_rng(seed);
    let h = config.hidden_dim;
    let k = config.num_classes;

    let mut input = BTreeMap::new();
    for (&node_type, &dim) in &config.input_dims {
        let weight = glorot(dim, h, &mut rng);
        let bias = Array2::zeros((1, h));
        input.insert(node_type, Linear { weight, bias });
    }

    let mut layers = Vec::with_capacity(config.num_layers);
    for _ in 0..config.num_layers {
        let self_weight = glorot(h, h, &mut rng);
        let mut relation = BTreeMap::new();
        for &kind in &config.edge_types_active {
            relation.insert(kind, glorot(h, h, &mut rng));
        }
        let bias = Array2::zeros((1, h));
        layers.push(LayerParams {
            self_weight,
            relation,
            bias,
        });
    }

    let head = Linear {
        weight: glorot(h, k, &mut rng),
        bias: Array2::zeros((1, k)),
    };

    ModelParams {
        input,
        layers,
        head,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        let mut dims = BTreeMap::new();
        dims.insert(NodeType::EgoVision, 5);
        dims.insert(NodeType::ExoVision, 5);
        let mut edges = BTreeSet::new();
        edges.insert(EdgeType::Temporal);
        edges.insert(EdgeType::EgoExo);
        let mut c = ModelConfig::new(3, dims, edges);
        c.hidden_dim = 4;
        c
    }

    #[test]
    fn same_seed_same_params() {
        let c = tiny_config();
        let a = init_params(&c, 42);
        let b = init_params(&c, 42);
        assert!(a.bits_eq(&b));
    }

    #[test]
    fn different_seed_differs() {
        let c = tiny_config();
        let a = init_params(&c, 42);
        let b = init_params(&c, 43);
        assert!(!a.bits_eq(&b));
    }

    #[test]
    fn biases_zero_weights_in_glorot_range() {
        let c = tiny_config();
        let p = init_params(&c, 7);
        for linear in p.input.values() {
            assert!(linear.bias.iter().all(|&v| v == 0.0));
            let a = (6.0 / (linear.weight.nrows() + linear.weight.ncols()) as f64).sqrt();
            assert!(linear.weight.iter().all(|&v| v.abs() < a));
        }
        assert!(p.head.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weight_mean_near_zero_across_seeds() {
        let c = tiny_config();
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..10 {
            let p = init_params(&c, seed);
            for t in p.tensors() {
                sum += t.sum();
                count += t.len();
            }
        }
        let mean = sum / count as f64;
        // uniform(−a,a) has σ = a/√3; a ≤ sqrt(6/8) here, so σ_mean over
        // `count` draws is tiny — 3σ with the largest a is a safe bound
        let a_max = (6.0 / 8.0f64).sqrt();
        let sigma_mean = a_max / (3.0f64).sqrt() / (count as f64).sqrt();
        assert!(
            mean.abs() < 3.0 * sigma_mean,
            "mean {mean} vs 3σ {}",
            3.0 * sigma_mean
        );
    }

    #[test]
    fn tensor_count_matches_structure() {
        let c = tiny_config();
        let p = init_params(&c, 1);
        // 2 input types ×2 + 2 layers ×(1 self + 2 relations + 1 bias) + head ×2
        assert_eq!(p.tensors().len(), 4 + 2 * 4 + 2);
        let n = p.num_parameters();
        // input: 2×(5×4+4); layers: 2×(16+2×16+4); head: 4×3+3
        assert_eq!(n, 2 * 24 + 2 * 52 + 15);
    }

    #[test]
    fn for_dataset_covers_variant_needs() {
        use crate::dataset::{SegmentAnnotation, TakeRecord, ViewRecord};
        let manifest = Manifest {
            dataset_name: "d".to_string(),
            num_classes: 6,
            feature_dim_vision: 12,
            feature_dim_text: 5,
            frame_rate: 1.0,
            takes: vec![TakeRecord {
                take_id: "t".to_string(),
                duration: 1.0,
                ego_view: ViewRecord {
                    view_id: "ego".to_string(),
                    features_path: "e.glvf".into(),
                    num_frames: 1,
                },
                exo_views: vec![],
                text_features_path: None,
                segments: vec![SegmentAnnotation {
                    segment_index: 0,
                    start_time: 0.0,
                    end_time: 1.0,
                    label: 0,
                }],
            }],
        };
        let ego = ModelConfig::for_dataset(&manifest, Variant::EgoOnly);
        assert_eq!(ego.input_dims.len(), 1);
        assert!(ego.edge_types_active.contains(&EdgeType::Temporal));
        assert_eq!(ego.edge_types_active.len(), 1);

        let full = ModelConfig::for_dataset(&manifest, Variant::MultiViewHetero);
        assert_eq!(full.input_dims[&NodeType::Text], 5);
        assert_eq!(full.input_dims[&NodeType::ExoVision], 12);
        assert_eq!(full.edge_types_active.len(), 3);
        assert_eq!(full.num_classes, 6);
    }
}
