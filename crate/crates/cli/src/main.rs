//! `brain-infomax`: generate synthetic cohorts, train and evaluate the
//! Infomax-regularized graph classifier, and analyze region separability.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or config errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::{parse_indices, parse_widths};

#[derive(Debug, Parser)]
#[command(name = "brain-infomax", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort with planted group differences.
    Generate(GenerateArgs),
    /// Train with subject-level k-fold cross-validation (or one fold).
    Train(TrainArgs),
    /// Evaluate a checkpoint on its held-out fold.
    Eval(EvalArgs),
    /// Score per-ROI class separability of a checkpoint's node embeddings.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Subjects per class [default: 60].
    #[arg(long)]
    subjects_per_class: Option<usize>,
    /// Number of ROIs N [default: 148].
    #[arg(long)]
    rois: Option<usize>,
    /// Time points per synthetic time series [default: 300].
    #[arg(long)]
    timesteps: Option<usize>,
    /// Comma-separated planted ROI indices [default: six ROIs of the middle community].
    #[arg(long, value_parser = parse_indices)]
    separable_rois: Option<Vec<usize>>,
    /// Shift of the planted ROIs' GLM betas in class 1 [default: 2.0].
    #[arg(long)]
    effect_size: Option<f64>,
    /// Standard deviation of per-subject GLM beta noise [default: 1.0].
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Root seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Graphs per subject including the original; >1 enables feature jitter [default: 1].
    #[arg(long)]
    replicates: Option<usize>,
    /// Standard deviation of the feature jitter on replicates [default: 0.1].
    #[arg(long)]
    jitter_sd: Option<f64>,
    /// Output cohort file [default: paths.cohort from the config].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    /// Cross-entropy only.
    L1,
    /// Cross-entropy plus Infomax and link regularization.
    Joint,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormArg {
    Standard,
    Literal,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cohort file [default: paths.cohort from the config].
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Output directory for checkpoints, metrics and the CV report [default: paths.out_dir].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Training objective [default: joint].
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Graph convolution widths, e.g. 8,8 or 16 [default: 8,8].
    #[arg(long, value_parser = parse_widths)]
    widths: Option<Vec<usize>>,
    /// Training epochs [default: 100].
    #[arg(long)]
    epochs: Option<usize>,
    /// Number of cross-validation folds [default: 5].
    #[arg(long)]
    folds: Option<usize>,
    /// Train only this held-out fold instead of all of them.
    #[arg(long)]
    fold: Option<usize>,
    /// Root seed for splitting, initialization, shuffling and negatives [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Initial Adam learning rate, halved every 20 epochs [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// Weight of the Infomax term [default: 1.0].
    #[arg(long)]
    lambda_infomax: Option<f64>,
    /// Weight of the link regularizer [default: 0.1].
    #[arg(long)]
    lambda_reg: Option<f64>,
    /// Form of the Infomax term [default: standard].
    #[arg(long, value_enum)]
    infomax_form: Option<FormArg>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint file [default: paths.model].
    #[arg(long)]
    model: Option<PathBuf>,
    /// Cohort file [default: paths.cohort].
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Fold whose test graphs are scored [default: the checkpoint's held-out fold].
    #[arg(long)]
    fold: Option<usize>,
    /// Also write the evaluation as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpaceArg {
    Tsne,
    Embedding,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint file [default: paths.model].
    #[arg(long)]
    model: Option<PathBuf>,
    /// Cohort file [default: paths.cohort].
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Fold whose test graphs are embedded [default: the checkpoint's held-out fold].
    #[arg(long)]
    fold: Option<usize>,
    /// Regions with silhouette strictly above this are marked [default: 0.1].
    #[arg(long)]
    threshold: Option<f64>,
    /// t-SNE perplexity; must be below (S - 1) / 3 for S test graphs [default: 30].
    #[arg(long)]
    perplexity: Option<f64>,
    /// t-SNE iterations [default: 1000].
    #[arg(long)]
    iterations: Option<usize>,
    /// Seed of the per-ROI t-SNE streams and negative pairing [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Space the silhouette is computed in [default: tsne].
    #[arg(long, value_enum)]
    score_space: Option<SpaceArg>,
    /// Output directory for regions.tsv, summary.json and roi_<k>.svg [default: paths.out_dir].
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Failure classes that map to distinct exit codes.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0:#}")]
    Usage(anyhow::Error),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
