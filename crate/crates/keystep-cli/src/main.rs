//! `keystep` — command-line front end for the keystep recognition
//! pipeline.
//!
//! Subcommands cover the full loop: generate a synthetic dataset, build
//! graphs and inspect their structure, train with five-fold
//! cross-validation, evaluate a saved checkpoint, and ablate the temporal
//! context mode. Every run is deterministic given its seed; reruns
//! overwrite their outputs byte-identically.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 training divergence. Failures print a single line to stderr:
//! `error <module.Category>: <message>`.

mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use keystep_core::graph::{ContextMode, Variant};
use keystep_core::metrics::F1Average;

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_context(s: &str) -> Result<ContextMode, String> {
    s.parse()
}

fn parse_f1_average(s: &str) -> Result<F1Average, String> {
    s.parse()
}

#[derive(Parser)]
#[command(
    name = "keystep",
    version,
    about = "Keystep recognition on segment-annotated long videos: graph construction, relational message passing, cross-validated training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with controllable structure
    GenSynthetic(GenSyntheticArgs),
    /// Build graphs from a dataset and print structure statistics
    BuildGraphs(BuildGraphsArgs),
    /// Train with five-fold cross-validation and write all artifacts
    Train(TrainArgs),
    /// Score a saved checkpoint on a dataset
    Evaluate(EvaluateArgs),
    /// Train under every context mode and write a comparison table
    AblateContext(AblateContextArgs),
}

#[derive(Args)]
struct GenSyntheticArgs {
    /// Generator configuration JSON; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory to write manifest.json and features/ into
    #[arg(long)]
    out: PathBuf,
    /// Override the configuration's seed [default: from config]
    #[arg(long)]
    seed: Option<u64>,
    /// Generate takes on worker threads (same bytes either way)
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct BuildGraphsArgs {
    /// Dataset manifest JSON
    #[arg(long)]
    manifest: PathBuf,
    /// Graph variant: ego, multiview, hetero, or multiview-hetero
    #[arg(long, default_value = "ego", value_parser = parse_variant)]
    variant: Variant,
    /// Context mode: none, short, or full
    #[arg(long, default_value = "full", value_parser = parse_context)]
    context: ContextMode,
    /// Also write every graph as one JSON line to this path
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Chain exocentric nodes temporally as well as egocentric ones
    #[arg(long)]
    exo_temporal_edges: bool,
    /// Build takes on worker threads (same graphs either way)
    #[arg(long)]
    parallel: bool,
}

/// Model and optimizer settings shared by `train` and `ablate-context`.
/// Flags beat the `--config` file, which beats the built-in defaults.
#[derive(Args)]
struct TrainOverrides {
    /// Optional JSON file with any of the override fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hidden width of every message-passing layer [default: 128]
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Number of message-passing layers [default: 2]
    #[arg(long)]
    num_layers: Option<usize>,
    /// Dropout probability after each layer during training [default: 0.2]
    #[arg(long)]
    dropout: Option<f64>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// Maximum epochs per fold [default: 200]
    #[arg(long)]
    epochs: Option<usize>,
    /// Non-improving epochs tolerated before a fold stops [default: 20]
    #[arg(long)]
    patience: Option<usize>,
    /// Confidence floor for a prediction to count in F1 [default: 0.1]
    #[arg(long)]
    f1_threshold: Option<f64>,
    /// F1 averaging: macro, micro, or weighted [default: macro]
    #[arg(long, value_parser = parse_f1_average)]
    f1_average: Option<F1Average>,
    /// Chain exocentric nodes temporally as well as egocentric ones
    #[arg(long)]
    exo_temporal_edges: bool,
    /// Train this many folds concurrently; 1 is fully sequential
    #[arg(long, default_value_t = 1)]
    parallel_folds: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest JSON
    #[arg(long)]
    manifest: PathBuf,
    /// Graph variant: ego, multiview, hetero, or multiview-hetero
    #[arg(long, default_value = "ego", value_parser = parse_variant)]
    variant: Variant,
    /// Context mode: none, short, or full
    #[arg(long, default_value = "full", value_parser = parse_context)]
    context: ContextMode,
    /// Base seed for fold assignment, initialization, and shuffling
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.json, predictions.csv, and fold_<i>/ artifacts
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: TrainOverrides,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset manifest JSON
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint written by `train` (fold_<i>/model.glvp)
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory for report.json and predictions.csv
    #[arg(long)]
    out: PathBuf,
    /// Confidence floor for a prediction to count in F1 [default: 0.1]
    #[arg(long)]
    f1_threshold: Option<f64>,
    /// F1 averaging: macro, micro, or weighted [default: macro]
    #[arg(long, value_parser = parse_f1_average)]
    f1_average: Option<F1Average>,
}

#[derive(Args)]
struct AblateContextArgs {
    /// Dataset manifest JSON
    #[arg(long)]
    manifest: PathBuf,
    /// Graph variant: ego, multiview, hetero, or multiview-hetero
    #[arg(long, default_value = "ego", value_parser = parse_variant)]
    variant: Variant,
    /// Base seed for fold assignment, initialization, and shuffling
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving one train layout per context mode plus the
    /// comparison table
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: TrainOverrides,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynthetic(args) => pipeline::gen_synthetic(args),
        Command::BuildGraphs(args) => pipeline::build_graphs(args),
        Command::Train(args) => pipeline::train(args),
        Command::Evaluate(args) => pipeline::evaluate(args),
        Command::AblateContext(args) => pipeline::ablate_context(args),
    };
    if let Err(e) = result {
        eprintln!("error {}: {}", e.category, e.message);
        std::process::exit(e.exit_code());
    }
}
