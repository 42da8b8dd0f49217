mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Glyph recognition pipeline: ingest, explore, train, evaluate.
#[derive(Debug, Parser)]
#[command(name = "glyphlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read class directories of PGM images into a GLY1 dataset.
    Ingest(IngestArgs),
    /// Stratified train/validation/test split of a GLY1 dataset.
    Split(SplitArgs),
    /// Embed a dataset in 3D with t-SNE.
    Tsne(TsneArgs),
    /// Clustered pairwise-distance map with class ribbons.
    Distmap(DistmapArgs),
    /// Train multinomial logistic regression.
    TrainMlr(TrainArgs),
    /// Train the binary convolutional network.
    TrainCnn(TrainArgs),
    /// ROC/AUC, accuracy and confusion matrix of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Write augmented copies of every image as PGM files.
    AugmentPreview(PreviewArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Root directory with one sub-directory per class.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Images are resized to SIZE×SIZE.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[arg(long, env = "GLYPHLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub val_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TsneArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated class names (default: all).
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, env = "GLYPHLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_svg: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistmapArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated class names (default: all).
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_svg: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// Augmentation policy: none, lossless or lossy.
    #[arg(long, default_value = "none")]
    pub augment: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long, env = "GLYPHLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub history_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub roc_svg: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub policy: String,
    /// Augmented copies per source image.
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    #[arg(long, env = "GLYPHLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Split(a) => commands::split(a),
        Command::Tsne(a) => commands::tsne(a),
        Command::Distmap(a) => commands::distmap(a),
        Command::TrainMlr(a) => commands::train(a, commands::ModelKind::Mlr),
        Command::TrainCnn(a) => commands::train(a, commands::ModelKind::Cnn),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::AugmentPreview(a) => commands::augment_preview(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("glyphlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
