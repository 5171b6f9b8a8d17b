//! Evaluation metrics over ego-node predictions.
//!
//! Two numbers drive every comparison: top-1 accuracy, and a
//! confidence-gated F1 — a prediction only counts as emitted when its
//! confidence clears the threshold (default 0.1); a suppressed prediction
//! leaves its true class with a false negative. The gated F1 is averaged
//! macro-style over classes that actually occur in the ground truth;
//! micro and weighted averaging are available as alternates since the
//! metric's canonical definition is not pinned down anywhere public.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::graph::{ContextMode, Variant};

/// One scored segment: what the model said about one ego node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub take_id: String,
    pub segment_index: usize,
    pub true_label: usize,
    pub predicted_label: usize,
    /// Max softmax probability, in [0, 1].
    pub confidence: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no prediction records to score")]
    EmptyRecords,
}

impl MetricsError {
    pub fn category(&self) -> &'static str {
        match self {
            MetricsError::EmptyRecords => "metrics.EmptyRecords",
        }
    }
}

/// How per-class F1 scores combine into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    /// Unweighted mean over classes with ≥1 ground-truth instance.
    Macro,
    /// Pooled counts across all classes.
    Micro,
    /// Mean weighted by ground-truth class frequency.
    Weighted,
}

impl std::str::FromStr for F1Average {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(F1Average::Macro),
            "micro" => Ok(F1Average::Micro),
            "weighted" => Ok(F1Average::Weighted),
            other => Err(format!(
                "unknown F1 average {other:?} (expected macro, micro, or weighted)"
            )),
        }
    }
}

/// Percentage of records whose prediction matches the truth.
pub fn top1_accuracy(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let correct = records
        .iter()
        .filter(|r| r.predicted_label == r.true_label)
        .count();
    Ok(100.0 * correct as f64 / records.len() as f64)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Confidence-gated F1 as a percentage.
///
/// A record predicts `predicted_label` only when `confidence ≥ threshold`;
/// below that it predicts nothing and its true class takes a false
/// negative. Per-class precision/recall/F1 use the 0/0 → 0 convention.
pub fn f1_at_threshold(
    records: &[PredictionRecord],
    threshold: f64,
    num_classes: usize,
    average: F1Average,
) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let mut tp = vec![0u64; num_classes];
    let mut fp = vec![0u64; num_classes];
    let mut fnn = vec![0u64; num_classes];
    let mut gt = vec![0u64; num_classes];
    for r in records {
        gt[r.true_label] += 1;
        if r.confidence >= threshold {
            if r.predicted_label == r.true_label {
                tp[r.true_label] += 1;
            } else {
                fp[r.predicted_label] += 1;
                fnn[r.true_label] += 1;
            }
        } else {
            fnn[r.true_label] += 1;
        }
    }

    let class_f1 = |c: usize| {
        let p = ratio(tp[c] as f64, (tp[c] + fp[c]) as f64);
        let r = ratio(tp[c] as f64, (tp[c] + fnn[c]) as f64);
        f1(p, r)
    };

    let score = match average {
        F1Average::Macro => {
            let classes: Vec<usize> = (0..num_classes).filter(|&c| gt[c] > 0).collect();
            let sum: f64 = classes.iter().map(|&c| class_f1(c)).sum();
            ratio(sum, classes.len() as f64)
        }
        F1Average::Micro => {
            let tp_all: u64 = tp.iter().sum();
            let fp_all: u64 = fp.iter().sum();
            let fn_all: u64 = fnn.iter().sum();
            let p = ratio(tp_all as f64, (tp_all + fp_all) as f64);
            let r = ratio(tp_all as f64, (tp_all + fn_all) as f64);
            f1(p, r)
        }
        F1Average::Weighted => {
            let total: u64 = gt.iter().sum();
            let sum: f64 = (0..num_classes)
                .map(|c| gt[c] as f64 * class_f1(c))
                .sum();
            ratio(sum, total as f64)
        }
    };
    Ok(100.0 * score)
}

/// One fold's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub acc: f64,
    #[serde(rename = "f1_at_0.1")]
    pub f1: f64,
    /// Number of scored records in the fold.
    pub n: usize,
}

/// Cross-validation summary; the means are unweighted over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: Variant,
    pub context: ContextMode,
    pub folds: Vec<FoldMetrics>,
    pub mean_acc: f64,
    pub mean_f1: f64,
}

/// Combine fold scores; the canonical means are unweighted.
pub fn aggregate_folds(
    variant: Variant,
    context: ContextMode,
    folds: Vec<FoldMetrics>,
) -> MetricsReport {
    let k = folds.len() as f64;
    let mean_acc = folds.iter().map(|f| f.acc).sum::<f64>() / k;
    let mean_f1 = folds.iter().map(|f| f.f1).sum::<f64>() / k;
    MetricsReport {
        variant,
        context,
        folds,
        mean_acc,
        mean_f1,
    }
}

impl MetricsReport {
    /// Record-weighted mean accuracy — reported alongside the canonical
    /// unweighted mean when fold sizes differ.
    pub fn weighted_mean_acc(&self) -> f64 {
        let total: usize = self.folds.iter().map(|f| f.n).sum();
        if total == 0 {
            return 0.0;
        }
        self.folds
            .iter()
            .map(|f| f.acc * f.n as f64)
            .sum::<f64>()
            / total as f64
    }

    /// Human-readable table.
    pub fn format_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "variant={} context={}", self.variant, self.context);
        let _ = writeln!(out, "{:<6} {:>8} {:>8} {:>6}", "fold", "acc", "f1@0.1", "n");
        for f in &self.folds {
            let _ = writeln!(out, "{:<6} {:>8.2} {:>8.2} {:>6}", f.fold, f.acc, f.f1, f.n);
        }
        let _ = writeln!(
            out,
            "{:<6} {:>8.2} {:>8.2}",
            "mean", self.mean_acc, self.mean_f1
        );
        let sizes_differ = self.folds.windows(2).any(|w| w[0].n != w[1].n);
        if sizes_differ {
            let _ = writeln!(
                out,
                "note: fold sizes differ; record-weighted mean acc = {:.2} (unweighted mean is canonical)",
                self.weighted_mean_acc()
            );
        }
        out
    }
}

/// Write the canonical JSON report (pretty, trailing newline).
pub fn write_report(w: &mut impl Write, report: &MetricsReport) -> io::Result<()> {
    let json = serde_json::to_vec_pretty(report)?;
    w.write_all(&json)?;
    w.write_all(b"\n")
}

/// Write predictions as CSV: `take_id,segment_index,true_label,pred_label,confidence`.
pub fn write_predictions_csv(
    w: &mut impl Write,
    records: &[PredictionRecord],
) -> io::Result<()> {
    writeln!(w, "take_id,segment_index,true_label,pred_label,confidence")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.take_id, r.segment_index, r.true_label, r.predicted_label, r.confidence
        )?;
    }
    Ok(())
}
