//! Subcommand implementations and the error-to-exit-code mapping.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use keystep_core::dataset::{DataError, Dataset};
use keystep_core::graph::{
    build_dataset_graphs, graph_stats, write_graph_dump, BuildOptions, ContextMode, GraphError,
    Variant,
};
use keystep_core::metrics::{
    aggregate_folds, f1_at_threshold, top1_accuracy, write_predictions_csv, write_report,
    F1Average, FoldMetrics, MetricsError, MetricsReport,
};
use keystep_core::model::{
    load_checkpoint, predict_batch, save_checkpoint, CheckpointMeta, ModelConfig, ModelError,
};
use keystep_core::synth::{generate, summarize, SynthConfig, SynthError};
use keystep_core::train::{
    cross_validate, write_trace_csv, CrossValidationOutcome, TrainConfig, TrainError,
};

use crate::{
    AblateContextArgs, BuildGraphsArgs, EvaluateArgs, GenSyntheticArgs, TrainArgs, TrainOverrides,
};

/// A failure ready for the shell: module-qualified category, message, and
/// the exit code the category maps to.
pub struct CliError {
    pub category: String,
    pub message: String,
}

impl CliError {
    fn new(category: impl Into<String>, message: impl ToString) -> Self {
        Self {
            category: category.into(),
            message: message.to_string(),
        }
    }

    /// 2 for configuration mistakes, 4 for training divergence, 3 for
    /// everything wrong with data or files.
    pub fn exit_code(&self) -> i32 {
        match self.category.as_str() {
            "trainer.DivergedLoss" => 4,
            "trainer.InvalidConfig" | "synthgen.InvalidConfig" | "cli.BadConfig" => 2,
            _ => 3,
        }
    }
}

macro_rules! categorized {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new(e.category(), &e)
            }
        }
    )*};
}

categorized!(DataError, GraphError, ModelError, SynthError, TrainError, MetricsError);

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("cli.Io", format!("{}: {e}", path.display()))
}

fn bad_config(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new("cli.BadConfig", format!("{}: {e}", path.display()))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| io_error(path, e))?,
    ))
}

/// Optional JSON overrides for `train` and `ablate-context`. Any subset
/// of fields may appear; explicit flags still win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOverrides {
    hidden_dim: Option<usize>,
    num_layers: Option<usize>,
    dropout: Option<f64>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    early_stop_patience: Option<usize>,
    seed: Option<u64>,
    f1_threshold: Option<f64>,
    f1_average: Option<F1Average>,
    exo_temporal_edges: Option<bool>,
}

fn load_file_overrides(path: Option<&PathBuf>) -> Result<FileOverrides, CliError> {
    let Some(path) = path else {
        return Ok(FileOverrides::default());
    };
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| bad_config(path, e))
}

/// Resolve the effective model and train configuration: flag, else
/// config-file value, else default.
fn resolve_configs(
    manifest: &keystep_core::Manifest,
    variant: Variant,
    context: ContextMode,
    seed: Option<u64>,
    overrides: &TrainOverrides,
) -> Result<(ModelConfig, TrainConfig), CliError> {
    let file = load_file_overrides(overrides.config.as_ref())?;

    let mut model = ModelConfig::for_dataset(manifest, variant);
    if let Some(h) = overrides.hidden_dim.or(file.hidden_dim) {
        model.hidden_dim = h;
    }
    if let Some(l) = overrides.num_layers.or(file.num_layers) {
        model.num_layers = l;
    }
    if let Some(p) = overrides.dropout.or(file.dropout) {
        model.dropout_p = p;
    }

    let mut train = TrainConfig::new(variant, context);
    if let Some(lr) = overrides.lr.or(file.learning_rate) {
        train.learning_rate = lr;
    }
    if let Some(e) = overrides.epochs.or(file.epochs) {
        train.epochs = e;
    }
    if let Some(p) = overrides.patience.or(file.early_stop_patience) {
        train.early_stop_patience = p;
    }
    if let Some(s) = seed.or(file.seed) {
        train.seed = s;
    }
    if let Some(t) = overrides.f1_threshold.or(file.f1_threshold) {
        train.f1_threshold = t;
    }
    if let Some(a) = overrides.f1_average.or(file.f1_average) {
        train.f1_average = a;
    }
    train.exo_temporal_edges =
        overrides.exo_temporal_edges || file.exo_temporal_edges.unwrap_or(false);
    Ok((model, train))
}

/// Size the worker pool once; 1 keeps everything on the calling thread.
fn configure_parallelism(parallel_folds: usize) -> bool {
    #[cfg(feature = "parallel")]
    if parallel_folds > 1 {
        // ignore the error: the global pool can only be built once per
        // process, and a prebuilt pool is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel_folds)
            .build_global();
        return true;
    }
    let _ = parallel_folds;
    false
}

pub fn gen_synthetic(args: GenSyntheticArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            serde_json::from_str::<SynthConfig>(&text).map_err(|e| bad_config(path, e))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let manifest = generate(&config, &args.out, args.parallel)?;
    let summary = summarize(&manifest);
    let segments: u64 = summary.class_counts.iter().sum();
    println!(
        "generated {} takes / {} segments / {} classes into {}",
        manifest.takes.len(),
        segments,
        manifest.num_classes,
        args.out.display()
    );
    println!("class counts: {:?}", summary.class_counts);
    Ok(())
}

pub fn build_graphs(args: BuildGraphsArgs) -> Result<(), CliError> {
    let dataset = Dataset::open(&args.manifest)?.load_all(args.parallel)?;
    let options = BuildOptions {
        exo_temporal_edges: args.exo_temporal_edges,
    };
    let per_take =
        build_dataset_graphs(&dataset, args.variant, args.context, options, args.parallel)?;
    let graphs: Vec<_> = per_take.into_iter().flatten().collect();
    if let Some(dump) = &args.dump {
        let mut w = create_file(dump)?;
        write_graph_dump(&mut w, &graphs).map_err(|e| io_error(dump, e))?;
        w.flush().map_err(|e| io_error(dump, e))?;
    }
    let stats = graph_stats(&graphs);
    println!(
        "{}",
        serde_json::to_string_pretty(&stats).expect("stats serialize")
    );
    Ok(())
}

/// Write the fixed training layout: `report.json`, `predictions.csv`,
/// and per-fold `trace.csv` + `model.glvp`.
fn write_run_artifacts(
    out: &Path,
    outcome: &CrossValidationOutcome,
    model: &ModelConfig,
    train: &TrainConfig,
) -> Result<(), CliError> {
    let report_path = out.join("report.json");
    let mut w = create_file(&report_path)?;
    write_report(&mut w, &outcome.report).map_err(|e| io_error(&report_path, e))?;
    w.flush().map_err(|e| io_error(&report_path, e))?;

    let pred_path = out.join("predictions.csv");
    let mut w = create_file(&pred_path)?;
    let all: Vec<_> = outcome
        .folds
        .iter()
        .flat_map(|f| f.predictions.iter().cloned())
        .collect();
    write_predictions_csv(&mut w, &all).map_err(|e| io_error(&pred_path, e))?;
    w.flush().map_err(|e| io_error(&pred_path, e))?;

    let meta = CheckpointMeta {
        model: model.clone(),
        variant: train.variant,
        context: train.context,
    };
    for fold in &outcome.folds {
        let dir = out.join(format!("fold_{}", fold.fold));
        let trace_path = dir.join("trace.csv");
        let mut w = create_file(&trace_path)?;
        write_trace_csv(&mut w, &fold.outcome.trace).map_err(|e| io_error(&trace_path, e))?;
        w.flush().map_err(|e| io_error(&trace_path, e))?;
        save_checkpoint(dir.join("model.glvp"), &fold.outcome.params, &meta)?;
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let parallel = configure_parallelism(args.overrides.parallel_folds);
    let dataset = Dataset::open(&args.manifest)?.load_all(parallel)?;
    let (model, train) = resolve_configs(
        &dataset.manifest,
        args.variant,
        args.context,
        args.seed,
        &args.overrides,
    )?;
    let outcome = cross_validate(&dataset, &model, &train, parallel)?;
    write_run_artifacts(&args.out, &outcome, &model, &train)?;
    print!("{}", outcome.report.format_table());
    println!("artifacts in {}", args.out.display());
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let (params, meta) = load_checkpoint(&args.checkpoint)?;
    let dataset = Dataset::open(&args.manifest)?.load_all(false)?;
    // score exactly the way the trainer validated: inference graphs only
    let variant = meta.variant.inference();
    let per_take = build_dataset_graphs(
        &dataset,
        variant,
        meta.context,
        BuildOptions::default(),
        false,
    )?;
    let graphs: Vec<_> = per_take.into_iter().flatten().collect();
    let predictions = predict_batch(&graphs, &params, &meta.model, false)?;
    let threshold = args.f1_threshold.unwrap_or(TrainConfig::DEFAULT_F1_THRESHOLD);
    let average = args.f1_average.unwrap_or(F1Average::Macro);
    let acc = top1_accuracy(&predictions)?;
    let f1 = f1_at_threshold(&predictions, threshold, meta.model.num_classes, average)?;
    let report = aggregate_folds(
        meta.variant,
        meta.context,
        vec![FoldMetrics {
            fold: 0,
            acc,
            f1,
            n: predictions.len(),
        }],
    );

    let report_path = args.out.join("report.json");
    let mut w = create_file(&report_path)?;
    write_report(&mut w, &report).map_err(|e| io_error(&report_path, e))?;
    w.flush().map_err(|e| io_error(&report_path, e))?;
    let pred_path = args.out.join("predictions.csv");
    let mut w = create_file(&pred_path)?;
    write_predictions_csv(&mut w, &predictions).map_err(|e| io_error(&pred_path, e))?;
    w.flush().map_err(|e| io_error(&pred_path, e))?;

    print!("{}", report.format_table());
    println!("artifacts in {}", args.out.display());
    Ok(())
}

pub fn ablate_context(args: AblateContextArgs) -> Result<(), CliError> {
    let parallel = configure_parallelism(args.overrides.parallel_folds);
    let dataset = Dataset::open(&args.manifest)?.load_all(parallel)?;
    let mut reports: Vec<MetricsReport> = Vec::new();
    for context in ContextMode::ALL {
        let (model, train) = resolve_configs(
            &dataset.manifest,
            args.variant,
            context,
            args.seed,
            &args.overrides,
        )?;
        let outcome = cross_validate(&dataset, &model, &train, parallel)?;
        write_run_artifacts(&args.out.join(context.to_string()), &outcome, &model, &train)?;
        reports.push(outcome.report);
    }

    let cmp_path = args.out.join("context_comparison.csv");
    let mut w = create_file(&cmp_path)?;
    writeln!(w, "context,mean_acc,mean_f1").map_err(|e| io_error(&cmp_path, e))?;
    for r in &reports {
        writeln!(w, "{},{},{}", r.context, r.mean_acc, r.mean_f1)
            .map_err(|e| io_error(&cmp_path, e))?;
    }
    w.flush().map_err(|e| io_error(&cmp_path, e))?;

    println!("context comparison ({} variant, 5-fold means):", args.variant);
    println!("{:<8} {:>9} {:>9}", "context", "mean_acc", "mean_f1");
    for r in &reports {
        println!("{:<8} {:>9.2} {:>9.2}", r.context.to_string(), r.mean_acc, r.mean_f1);
    }
    println!("artifacts in {}", args.out.display());
    Ok(())
}
