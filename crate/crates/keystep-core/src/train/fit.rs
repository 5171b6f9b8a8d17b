//! The training loop: per-fold fitting and five-fold cross-validation.

use std::collections::BTreeSet;
use std::io::{self, Write};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LoadedDataset;
use crate::exec::maybe_par_try_map;
use crate::graph::{build_dataset_graphs, BuildOptions, ContextMode, Graph, Variant};
use crate::metrics::{
    aggregate_folds, f1_at_threshold, top1_accuracy, F1Average, FoldMetrics, MetricsReport,
    PredictionRecord,
};
use crate::model::{forward, init_params, predict_batch, ModelConfig, ModelParams};
use crate::rng::{derive_seed, seeded_rng};

use super::{make_folds, Adam, AdamConfig, FoldAssignment, TrainError, NUM_FOLDS};

// Stream layout off the base seed: 0 picks fold membership, 1+f drives
// fold f. Inside a fold, substream 0 initializes parameters and 1 feeds
// the shuffle/dropout RNG.
const STREAM_FOLD_ASSIGNMENT: u64 = 0;
const STREAM_FOLD_BASE: u64 = 1;

/// Everything the optimizer and protocol need beyond the architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Consecutive non-improving epochs tolerated before a fold stops.
    pub early_stop_patience: usize,
    pub variant: Variant,
    pub context: ContextMode,
    pub exo_temporal_edges: bool,
    pub f1_threshold: f64,
    pub f1_average: F1Average,
}

impl TrainConfig {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
    pub const DEFAULT_EPOCHS: usize = 200;
    pub const DEFAULT_PATIENCE: usize = 20;
    pub const DEFAULT_F1_THRESHOLD: f64 = 0.1;

    pub fn new(variant: Variant, context: ContextMode) -> Self {
        Self {
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            epochs: Self::DEFAULT_EPOCHS,
            adam: AdamConfig::default(),
            seed: 0,
            early_stop_patience: Self::DEFAULT_PATIENCE,
            variant,
            context,
            exo_temporal_edges: false,
            f1_threshold: Self::DEFAULT_F1_THRESHOLD,
            f1_average: F1Average::Macro,
        }
    }

    /// Reject configurations the loop cannot run sensibly. A zero
    /// learning rate is allowed — it is the documented null update.
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |reason: String| Err(TrainError::InvalidConfig { reason });
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!("learning_rate {} must be ≥ 0", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1".to_string());
        }
        if self.early_stop_patience >= self.epochs {
            return bad(format!(
                "early_stop_patience {} must be < epochs {}",
                self.early_stop_patience, self.epochs
            ));
        }
        if !(0.0..=1.0).contains(&self.f1_threshold) {
            return bad(format!(
                "f1_threshold {} must be in [0, 1]",
                self.f1_threshold
            ));
        }
        Ok(())
    }
}

/// One row of the per-epoch training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_f1: f64,
}

/// Write a fold's trace as CSV: `epoch,train_loss,val_acc,val_f1_at_0.1`.
pub fn write_trace_csv(w: &mut impl Write, trace: &[EpochTrace]) -> io::Result<()> {
    writeln!(w, "epoch,train_loss,val_acc,val_f1_at_0.1")?;
    for t in trace {
        writeln!(w, "{},{},{},{}", t.epoch, t.train_loss, t.val_acc, t.val_f1)?;
    }
    Ok(())
}

/// What one trained fold hands back.
pub struct FoldOutcome {
    /// Parameters from the best-validation-accuracy epoch.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub trace: Vec<EpochTrace>,
}

/// Train one fold from scratch.
///
/// Per epoch: graphs in seeded-shuffled order, one Adam step per graph on
/// its masked cross-entropy; then validation accuracy/F1 on `val_graphs`
/// (already built the way inference sees them). Keeps the parameters of
/// the best epoch — strict improvement only — and stops once
/// `early_stop_patience` epochs pass without a new best.
pub fn train_fold(
    fold: usize,
    train_graphs: &[Graph],
    val_graphs: &[Graph],
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<FoldOutcome, TrainError> {
    config.validate()?;
    if train_graphs.is_empty() {
        return Err(TrainError::InvalidConfig {
            reason: format!("fold {fold}: no training graphs"),
        });
    }
    if val_graphs.is_empty() {
        return Err(TrainError::InvalidConfig {
            reason: format!("fold {fold}: no validation graphs"),
        });
    }

    let fold_seed = derive_seed(config.seed, STREAM_FOLD_BASE + fold as u64);
    let mut params = init_params(model_config, derive_seed(fold_seed, 0));
    let mut rng = seeded_rng(derive_seed(fold_seed, 1));
    let mut optimizer = Adam::new(config.learning_rate, config.adam, &params);

    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut best_val_acc = f64::NEG_INFINITY;
    let mut stall = 0usize;
    let mut trace = Vec::new();

    let mut order: Vec<usize> = (0..train_graphs.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &graph_index in &order {
            let graph = &train_graphs[graph_index];
            let mut pass = forward(graph, &params, model_config, true, &mut rng)?;
            let loss = pass.training_loss(graph)?;
            let loss_value = pass.tape.value(loss)[[0, 0]];
            if !loss_value.is_finite() {
                return Err(TrainError::DivergedLoss {
                    fold,
                    epoch,
                    graph_index,
                    loss: loss_value,
                });
            }
            pass.tape.backward(loss).map_err(crate::model::ModelError::from)?;
            let grads: Vec<Array2<f64>> = pass
                .params
                .flat
                .iter()
                .map(|&id| {
                    pass.tape
                        .grad(id)
                        .cloned()
                        .unwrap_or_else(|| Array2::zeros(pass.tape.shape(id)))
                })
                .collect();
            optimizer.step(&mut params, &grads);
            loss_sum += loss_value;
        }
        let train_loss = loss_sum / train_graphs.len() as f64;

        let records = predict_batch(val_graphs, &params, model_config, false)?;
        let val_acc = top1_accuracy(&records)?;
        let val_f1 = f1_at_threshold(
            &records,
            config.f1_threshold,
            model_config.num_classes,
            config.f1_average,
        )?;
        trace.push(EpochTrace {
            epoch,
            train_loss,
            val_acc,
            val_f1,
        });

        if val_acc > best_val_acc {
            best_val_acc = val_acc;
            best_epoch = epoch;
            best_params = params.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= config.early_stop_patience {
                break;
            }
        }
    }

    Ok(FoldOutcome {
        params: best_params,
        best_epoch,
        best_val_acc,
        trace,
    })
}

/// One fold's full output: best model, trace, and held-out scores.
pub struct FoldArtifacts {
    pub fold: usize,
    pub outcome: FoldOutcome,
    pub predictions: Vec<PredictionRecord>,
    pub metrics: FoldMetrics,
}

/// Cross-validation result: the aggregate report plus everything needed
/// to write checkpoints, traces, and prediction files.
pub struct CrossValidationOutcome {
    pub report: MetricsReport,
    pub assignment: FoldAssignment,
    pub folds: Vec<FoldArtifacts>,
}

/// Five-fold cross-validation over a loaded dataset.
///
/// Training graphs follow `config.variant`; each held-out fold is rebuilt
/// as its inference counterpart (ego-only, or ego+text for the hetero
/// variants) before scoring. With `parallel_folds`, folds run
/// concurrently and produce bit-identical results to the sequential path
/// — every fold's randomness is a derived stream, and aggregation reads
/// folds in index order.
pub fn cross_validate(
    dataset: &LoadedDataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
    parallel_folds: bool,
) -> Result<CrossValidationOutcome, TrainError> {
    config.validate()?;
    if model_config.num_classes != dataset.manifest.num_classes {
        return Err(TrainError::InvalidConfig {
            reason: format!(
                "model num_classes {} does not match manifest {}",
                model_config.num_classes, dataset.manifest.num_classes
            ),
        });
    }

    let take_ids: Vec<String> = dataset
        .manifest
        .takes
        .iter()
        .map(|t| t.take_id.clone())
        .collect();
    let assignment = make_folds(&take_ids, derive_seed(config.seed, STREAM_FOLD_ASSIGNMENT))?;

    let options = BuildOptions {
        exo_temporal_edges: config.exo_temporal_edges,
    };
    let train_by_take =
        build_dataset_graphs(dataset, config.variant, config.context, options, parallel_folds)?;
    let val_by_take = build_dataset_graphs(
        dataset,
        config.variant.inference(),
        config.context,
        options,
        parallel_folds,
    )?;

    let fold_indices: Vec<usize> = (0..NUM_FOLDS).collect();
    let folds = maybe_par_try_map(parallel_folds, &fold_indices, |_, &fold| {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (i, id) in take_ids.iter().enumerate() {
            let assigned = assignment.fold_of(id).expect("every take is assigned");
            if assigned == fold {
                val.extend(val_by_take[i].iter().cloned());
            } else {
                train.extend(train_by_take[i].iter().cloned());
            }
        }
        // the no-leakage contract: a take id may appear on one side only
        let train_ids: BTreeSet<&str> = train.iter().map(|g| g.take_id.as_str()).collect();
        let val_ids: BTreeSet<&str> = val.iter().map(|g| g.take_id.as_str()).collect();
        assert!(
            train_ids.is_disjoint(&val_ids),
            "fold {fold}: take ids leak between train and validation"
        );

        let outcome = train_fold(fold, &train, &val, model_config, config)?;
        let predictions = predict_batch(&val, &outcome.params, model_config, false)?;
        let acc = top1_accuracy(&predictions)?;
        let f1 = f1_at_threshold(
            &predictions,
            config.f1_threshold,
            model_config.num_classes,
            config.f1_average,
        )?;
        Ok::<_, TrainError>(FoldArtifacts {
            fold,
            metrics: FoldMetrics {
                fold,
                acc,
                f1,
                n: predictions.len(),
            },
            predictions,
            outcome,
        })
    })?;

    let report = aggregate_folds(
        config.variant,
        config.context,
        folds.iter().map(|f| f.metrics.clone()).collect(),
    );
    Ok(CrossValidationOutcome {
        report,
        assignment,
        folds,
    })
}
