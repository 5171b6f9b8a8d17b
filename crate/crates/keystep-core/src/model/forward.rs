//! Forward pass, loss wiring, and prediction.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{row_softmax, Tape, TensorId};
use crate::exec::maybe_par_map;
use crate::graph::{EdgeType, Graph, NodeType};
use crate::metrics::PredictionRecord;

use super::{ModelConfig, ModelError, ModelParams};

/// Tape handles of one layer's parameters.
pub struct LayerTensors {
    pub self_weight: TensorId,
    pub relation: BTreeMap<EdgeType, TensorId>,
    pub bias: TensorId,
}

/// Tape handles of every parameter, mirrored from [`ModelParams`] plus a
/// flat declaration-order list for optimizer sweeps.
pub struct ParamTensors {
    pub input: BTreeMap<NodeType, (TensorId, TensorId)>,
    pub layers: Vec<LayerTensors>,
    pub head: (TensorId, TensorId),
    pub flat: Vec<TensorId>,
}

/// A completed forward pass: the tape, the logits, and the parameter
/// handles whose gradients `backward` will fill.
pub struct ForwardPass {
    pub tape: Tape,
    pub logits: TensorId,
    pub params: ParamTensors,
}

impl ForwardPass {
    /// Masked cross-entropy over the graph's train-masked nodes.
    pub fn training_loss(&mut self, graph: &Graph) -> Result<TensorId, ModelError> {
        let labels: Vec<usize> = graph.nodes.iter().map(|n| n.label).collect();
        let mask: Vec<bool> = graph.nodes.iter().map(|n| n.train_mask).collect();
        Ok(self.tape.softmax_cross_entropy(self.logits, &labels, &mask)?)
    }
}

// One warning per process per relation kind the model silently skips.
static WARNED_INACTIVE: [AtomicBool; 3] = [
    AtomicBool::new(false),
    AtomicBool::new(false),
    AtomicBool::new(false),
];

fn warn_once_inactive(kind: EdgeType) {
    let idx = match kind {
        EdgeType::Temporal => 0,
        EdgeType::EgoExo => 1,
        EdgeType::VisionText => 2,
    };
    if !WARNED_INACTIVE[idx].swap(true, Ordering::Relaxed) {
        log::warn!(
            "graph carries {kind:?} edges but the model has no transform for that relation; skipping"
        );
    }
}

fn push_params(tape: &mut Tape, params: &ModelParams) -> ParamTensors {
    let mut flat = Vec::new();
    let mut input = BTreeMap::new();
    for (&node_type, linear) in &params.input {
        let w = tape.leaf(linear.weight.clone(), true);
        let b = tape.leaf(linear.bias.clone(), true);
        flat.extend([w, b]);
        input.insert(node_type, (w, b));
    }
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let self_weight = tape.leaf(layer.self_weight.clone(), true);
        flat.push(self_weight);
        let mut relation = BTreeMap::new();
        for (&kind, w) in &layer.relation {
            let id = tape.leaf(w.clone(), true);
            flat.push(id);
            relation.insert(kind, id);
        }
        let bias = tape.leaf(layer.bias.clone(), true);
        flat.push(bias);
        layers.push(LayerTensors {
            self_weight,
            relation,
            bias,
        });
    }
    let head_w = tape.leaf(params.head.weight.clone(), true);
    let head_b = tape.leaf(params.head.bias.clone(), true);
    flat.extend([head_w, head_b]);
    ParamTensors {
        input,
        layers,
        head: (head_w, head_b),
        flat,
    }
}

/// Run the model over one graph, recording onto a fresh tape.
///
/// Hidden state: `h⁰ = relu(proj_type(x))`; per layer,
/// `h = dropout(relu(h·W_self + Σ_r mean_r(h)·W_r + b))` where the sum
/// runs over active relations with at least one edge (an absent relation
/// aggregates to zero, so skipping it is exact); every undirected edge
/// feeds the aggregation in both directions. Dropout fires only while
/// training. Logits cover every node; masks decide what consumes them.
pub fn forward(
    graph: &Graph,
    params: &ModelParams,
    config: &ModelConfig,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardPass, ModelError> {
    for (i, node) in graph.nodes.iter().enumerate() {
        let expected = *config
            .input_dims
            .get(&node.node_type)
            .ok_or(ModelError::MissingInputDim {
                node_type: node.node_type,
            })?;
        if node.features.len() != expected {
            return Err(ModelError::DimMismatch {
                node_index: i,
                node_type: node.node_type,
                got: node.features.len(),
                expected,
            });
        }
    }

    let n = graph.nodes.len();
    let mut tape = Tape::new();
    let param_ids = push_params(&mut tape, params);

    // Per-type input projections, scattered back to node order and summed.
    let mut h: Option<TensorId> = None;
    for (&node_type, &(w, b)) in &param_ids.input {
        let rows: Vec<usize> = graph
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, nd)| nd.node_type == node_type)
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let dim = config.input_dims[&node_type];
        let x = Array2::from_shape_fn((rows.len(), dim), |(i, j)| {
            graph.nodes[rows[i]].features[j]
        });
        let x = tape.leaf(x, false);
        let proj = tape.matmul(x, w)?;
        let proj = tape.add_bias(proj, b)?;
        let scattered = tape.scatter_rows(proj, &rows, n);
        h = Some(match h {
            Some(acc) => tape.add(acc, scattered)?,
            None => scattered,
        });
    }
    let mut h = tape.relu(h.expect("graphs have at least one node"));

    for kind in graph.edge_kinds() {
        if !config.edge_types_active.contains(&kind) {
            warn_once_inactive(kind);
        }
    }

    for layer in &param_ids.layers {
        let mut pre = tape.matmul(h, layer.self_weight)?;
        for (&kind, &w) in &layer.relation {
            let edges = graph.directed_edges(kind);
            if edges.is_empty() {
                continue;
            }
            let agg = tape.scatter_mean(h, &edges);
            let msg = tape.matmul(agg, w)?;
            pre = tape.add(pre, msg)?;
        }
        let pre = tape.add_bias(pre, layer.bias)?;
        let post = tape.relu(pre);
        h = tape.dropout(post, config.dropout_p, training, rng)?;
    }

    let logits = tape.matmul(h, param_ids.head.0)?;
    let logits = tape.add_bias(logits, param_ids.head.1)?;

    Ok(ForwardPass {
        tape,
        logits,
        params: param_ids,
    })
}

/// Class predictions with confidences for the eval-masked nodes of one
/// graph. Ties at the argmax resolve to the lower class index.
pub fn predict(
    graph: &Graph,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Vec<PredictionRecord>, ModelError> {
    // dropout is inert when not training, so this RNG is never consumed
    let mut rng = crate::rng::seeded_rng(0);
    let pass = forward(graph, params, config, false, &mut rng)?;
    let probs = row_softmax(pass.tape.value(pass.logits));
    let mut out = Vec::new();
    for (i, node) in graph.nodes.iter().enumerate() {
        if !node.eval_mask {
            continue;
        }
        let row = probs.row(i);
        // normalization only holds for finite logits; a diverged model
        // still has to flow through so the trainer can report it
        debug_assert!(
            row.iter().any(|v| !v.is_finite()) || (row.sum() - 1.0).abs() < 1e-9
        );
        let mut best = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = j;
            }
        }
        out.push(PredictionRecord {
            take_id: graph.take_id.clone(),
            segment_index: node.segment_index,
            true_label: node.label,
            predicted_label: best,
            confidence: row[best],
        });
    }
    Ok(out)
}

/// Predict across many graphs, optionally in parallel; output order
/// follows input order either way.
pub fn predict_batch(
    graphs: &[Graph],
    params: &ModelParams,
    config: &ModelConfig,
    parallel: bool,
) -> Result<Vec<PredictionRecord>, ModelError> {
    let per_graph: Vec<Result<Vec<PredictionRecord>, ModelError>> =
        maybe_par_map(parallel, graphs, |_, g| predict(g, params, config));
    let mut out = Vec::new();
    for r in per_graph {
        out.extend(r?);
    }
    Ok(out)
}
