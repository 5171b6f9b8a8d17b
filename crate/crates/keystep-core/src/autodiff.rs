//! Minimal reverse-mode automatic differentiation over dense f64 matrices.
//!
//! A [`Tape`] owns every tensor of one forward pass and records each
//! operation as it runs; [`Tape::backward`] replays the record in reverse,
//! accumulating gradients with `+=` so a tensor feeding several branches
//! receives the sum of all branch gradients. Tapes are cheap and short
//! lived: the trainer builds a fresh one per forward/backward pass, so no
//! cross-step graph retention exists to manage.
//!
//! Everything runs in 64-bit floats even though feature files store f32;
//! the tight finite-difference tolerances in the test suite rely on it.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

/// Handle to a tensor on a tape. Only meaningful with the tape it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("backward needs a 1x1 loss tensor, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidProbability(f64),
}

impl AutodiffError {
    pub fn category(&self) -> &'static str {
        match self {
            AutodiffError::ShapeMismatch { .. } => "autodiff.ShapeMismatch",
            AutodiffError::NonScalarLoss(_) => "autodiff.NonScalarLoss",
            AutodiffError::InvalidProbability(_) => "autodiff.InvalidProbability",
        }
    }
}

/// How an entry's value was produced; stores whatever backward needs.
enum Op {
    Leaf,
    Matmul(TensorId, TensorId),
    Add(TensorId, TensorId),
    AddBias(TensorId, TensorId),
    Relu(TensorId),
    Dropout {
        input: TensorId,
        /// Per-entry factor: 0 where dropped, 1/(1−p) where kept.
        mask: Array2<f64>,
    },
    ScatterRows {
        input: TensorId,
        dst_rows: Vec<usize>,
    },
    ScatterMean {
        input: TensorId,
        edges: Vec<(usize, usize)>,
        /// In-degree per output row, 0.0 where no edge arrives.
        degree: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: TensorId,
        softmax: Array2<f64>,
        labels: Vec<usize>,
        mask: Vec<bool>,
        masked: usize,
    },
    SumAll(TensorId),
}

struct Entry {
    value: Array2<f64>,
    grad: Option<Array2<f64>>,
    requires_grad: bool,
    op: Op,
}

/// The recording of one forward pass.
#[derive(Default)]
pub struct Tape {
    entries: Vec<Entry>,
}

fn accumulate(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
    match slot {
        Some(g) => *g += &delta,
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record an input tensor.
    pub fn leaf(&mut self, value: Array2<f64>, requires_grad: bool) -> TensorId {
        self.push(value, requires_grad, Op::Leaf)
    }

    fn push(&mut self, value: Array2<f64>, requires_grad: bool, op: Op) -> TensorId {
        self.entries.push(Entry {
            value,
            grad: None,
            requires_grad,
            op,
        });
        TensorId(self.entries.len() - 1)
    }

    pub fn value(&self, id: TensorId) -> &Array2<f64> {
        &self.entries[id.0].value
    }

    pub fn shape(&self, id: TensorId) -> (usize, usize) {
        self.entries[id.0].value.dim()
    }

    /// Gradient populated by the last [`Tape::backward`], if any reached it.
    pub fn grad(&self, id: TensorId) -> Option<&Array2<f64>> {
        self.entries[id.0].grad.as_ref()
    }

    fn requires(&self, id: TensorId) -> bool {
        self.entries[id.0].requires_grad
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, AutodiffError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: (ar, ac),
                rhs: (br, bc),
            });
        }
        let value = self.entries[a.0].value.dot(&self.entries[b.0].value);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, rg, Op::Matmul(a, b)))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, AutodiffError> {
        let (la, lb) = (self.shape(a), self.shape(b));
        if la != lb {
            return Err(AutodiffError::ShapeMismatch {
                op: "add",
                lhs: la,
                rhs: lb,
            });
        }
        let value = &self.entries[a.0].value + &self.entries[b.0].value;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, rg, Op::Add(a, b)))
    }

    /// Add a 1×n bias row to every row of an m×n tensor.
    pub fn add_bias(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId, AutodiffError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(bias);
        if br != 1 || bc != ac {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_bias",
                lhs: (ar, ac),
                rhs: (br, bc),
            });
        }
        let value = &self.entries[a.0].value + &self.entries[bias.0].value;
        let rg = self.requires(a) || self.requires(bias);
        Ok(self.push(value, rg, Op::AddBias(a, bias)))
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let value = self.entries[a.0].value.mapv(|v| v.max(0.0));
        let rg = self.requires(a);
        self.push(value, rg, Op::Relu(a))
    }

    /// Inverted dropout: kept entries scale by 1/(1−p) so the expectation
    /// matches the input. Identity (same id, nothing recorded) when not
    /// training or p = 0; the RNG is only consumed when a mask is drawn.
    pub fn dropout(
        &mut self,
        a: TensorId,
        p: f64,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<TensorId, AutodiffError> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::InvalidProbability(p));
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let scale = 1.0 / (1.0 - p);
        let (r, c) = self.shape(a);
        let mut mask = Array2::zeros((r, c));
        for v in mask.iter_mut() {
            if rng.random::<f64>() >= p {
                *v = scale;
            }
        }
        let value = &self.entries[a.0].value * &mask;
        let rg = self.requires(a);
        Ok(self.push(value, rg, Op::Dropout { input: a, mask }))
    }

    /// Scatter-add rows of an m×d input into a zeroed `num_rows`×d output:
    /// row i of the input lands on row `dst_rows[i]`.
    pub fn scatter_rows(
        &mut self,
        a: TensorId,
        dst_rows: &[usize],
        num_rows: usize,
    ) -> TensorId {
        let (r, c) = self.shape(a);
        assert_eq!(r, dst_rows.len(), "one destination per input row");
        let mut value = Array2::zeros((num_rows, c));
        for (i, &dst) in dst_rows.iter().enumerate() {
            assert!(dst < num_rows, "destination row {dst} out of range {num_rows}");
            let src = self.entries[a.0].value.row(i);
            let mut out = value.row_mut(dst);
            out += &src;
        }
        let rg = self.requires(a);
        self.push(
            value,
            rg,
            Op::ScatterRows {
                input: a,
                dst_rows: dst_rows.to_vec(),
            },
        )
    }

    /// Neighborhood mean: output row v averages input rows u over all
    /// directed pairs (u, v); rows with no incoming pair stay zero.
    pub fn scatter_mean(&mut self, a: TensorId, edges: &[(usize, usize)]) -> TensorId {
        let (n, d) = self.shape(a);
        let mut degree = vec![0.0f64; n];
        for &(u, v) in edges {
            assert!(u < n && v < n, "edge ({u},{v}) out of range {n}");
            degree[v] += 1.0;
        }
        let mut value = Array2::zeros((n, d));
        for &(u, v) in edges {
            let src = self.entries[a.0].value.row(u).to_owned();
            let mut out = value.row_mut(v);
            out += &src;
        }
        for (v, mut row) in value.axis_iter_mut(Axis(0)).enumerate() {
            if degree[v] > 0.0 {
                row /= degree[v];
            }
        }
        let rg = self.requires(a);
        self.push(
            value,
            rg,
            Op::ScatterMean {
                input: a,
                edges: edges.to_vec(),
                degree,
            },
        )
    }

    /// Mean negative log-likelihood over masked rows, stabilized by
    /// row-max subtraction. With no masked rows the loss is 0 and backward
    /// sends no gradient — a graph with nothing to supervise is a no-op.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: TensorId,
        labels: &[usize],
        mask: &[bool],
    ) -> Result<TensorId, AutodiffError> {
        let (n, k) = self.shape(logits);
        if labels.len() != n || mask.len() != n {
            return Err(AutodiffError::ShapeMismatch {
                op: "softmax_cross_entropy",
                lhs: (n, k),
                rhs: (labels.len(), mask.len()),
            });
        }
        for (i, &l) in labels.iter().enumerate() {
            if mask[i] {
                assert!(l < k, "label {l} out of range {k} on masked row {i}");
            }
        }
        let softmax = row_softmax(&self.entries[logits.0].value);
        let masked = mask.iter().filter(|&&m| m).count();
        let mut loss = 0.0;
        if masked > 0 {
            for i in 0..n {
                if mask[i] {
                    loss -= softmax[[i, labels[i]]].ln();
                }
            }
            loss /= masked as f64;
        }
        let rg = self.requires(logits);
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                softmax,
                labels: labels.to_vec(),
                mask: mask.to_vec(),
                masked,
            },
        ))
    }

    /// Sum every entry into a 1×1 tensor.
    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let s = self.entries[a.0].value.sum();
        let rg = self.requires(a);
        self.push(Array2::from_elem((1, 1), s), rg, Op::SumAll(a))
    }

    /// Populate gradients of every `requires_grad` tensor reachable from a
    /// scalar loss. Clears any gradients from a previous call first.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), AutodiffError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        for e in &mut self.entries {
            e.grad = None;
        }
        self.entries[loss.0].grad = Some(Array2::from_elem((1, 1), 1.0));

        for i in (0..self.entries.len()).rev() {
            // Inputs always precede their outputs on the tape, so the
            // entry being processed and the entries it feeds from are on
            // opposite sides of this split.
            let (before, after) = self.entries.split_at_mut(i);
            let entry = &after[0];
            let Some(g) = entry.grad.as_ref() else { continue };
            match &entry.op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    let da = g.dot(&before[b.0].value.t());
                    let db = before[a.0].value.t().dot(g);
                    if before[a.0].requires_grad {
                        accumulate(&mut before[a.0].grad, da);
                    }
                    if before[b.0].requires_grad {
                        accumulate(&mut before[b.0].grad, db);
                    }
                }
                Op::Add(a, b) => {
                    if before[a.0].requires_grad {
                        accumulate(&mut before[a.0].grad, g.clone());
                    }
                    if before[b.0].requires_grad {
                        accumulate(&mut before[b.0].grad, g.clone());
                    }
                }
                Op::AddBias(a, bias) => {
                    if before[a.0].requires_grad {
                        accumulate(&mut before[a.0].grad, g.clone());
                    }
                    if before[bias.0].requires_grad {
                        let col_sum = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut before[bias.0].grad, col_sum);
                    }
                }
                Op::Relu(a) => {
                    if before[a.0].requires_grad {
                        let gate = entry.value.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                        accumulate(&mut before[a.0].grad, g * &gate);
                    }
                }
                Op::Dropout { input, mask } => {
                    if before[input.0].requires_grad {
                        accumulate(&mut before[input.0].grad, g * mask);
                    }
                }
                Op::ScatterRows { input, dst_rows } => {
                    if before[input.0].requires_grad {
                        let cols = g.ncols();
                        let mut da = Array2::zeros((dst_rows.len(), cols));
                        for (i, &dst) in dst_rows.iter().enumerate() {
                            let mut row = da.row_mut(i);
                            row += &g.row(dst);
                        }
                        accumulate(&mut before[input.0].grad, da);
                    }
                }
                Op::ScatterMean {
                    input,
                    edges,
                    degree,
                } => {
                    if before[input.0].requires_grad {
                        let (n, d) = g.dim();
                        let mut da = Array2::zeros((n, d));
                        for &(u, v) in edges {
                            let scaled = g.row(v).mapv(|x| x / degree[v]);
                            let mut row = da.row_mut(u);
                            row += &scaled;
                        }
                        accumulate(&mut before[input.0].grad, da);
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    softmax,
                    labels,
                    mask,
                    masked,
                } => {
                    if before[logits.0].requires_grad && *masked > 0 {
                        let upstream = g[[0, 0]];
                        let scale = upstream / *masked as f64;
                        let mut da = Array2::zeros(softmax.dim());
                        for i in 0..softmax.nrows() {
                            if mask[i] {
                                for j in 0..softmax.ncols() {
                                    let onehot = if j == labels[i] { 1.0 } else { 0.0 };
                                    da[[i, j]] = (softmax[[i, j]] - onehot) * scale;
                                }
                            }
                        }
                        accumulate(&mut before[logits.0].grad, da);
                    }
                }
                Op::SumAll(a) => {
                    if before[a.0].requires_grad {
                        let shape = before[a.0].value.dim();
                        let da = Array2::from_elem(shape, g[[0, 0]]);
                        accumulate(&mut before[a.0].grad, da);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Row-wise softmax with max subtraction for overflow safety.
pub fn row_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row /= sum;
    }
    out
}

/// Row-wise argmax with ties broken toward the lower index.
pub fn argmax_row(row: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
