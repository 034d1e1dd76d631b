mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;
use crate::error::CliError;

/// Incipient slip detection for pillar-array tactile sensors.
#[derive(Debug, Parser)]
#[command(name = "tactislip", version)]
pub struct Cli {
    /// Configuration file (TOML, or JSON by extension). Flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Maximum worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Only print warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labeled corpus of slip and stop runs.
    Generate(GenerateArgs),
    /// Expand a labeled corpus with transformed copies.
    Augment(AugmentArgs),
    /// Class-stratified train/test split.
    Split(SplitArgs),
    /// Train a bagged ensemble.
    Train(TrainArgs),
    /// Score a model on labeled test sequences and write plot-ready artifacts.
    Eval(EvalArgs),
    /// Stream frames through a model and print decisions as JSON lines.
    Detect(DetectArgs),
    /// Summarize a model or dataset file and check its invariants.
    Inspect(InspectArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output dataset; labels go to the `.labels.jsonl` sidecar.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub slip: Option<usize>,
    #[arg(long)]
    pub stop: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Copies per input sequence, the original included.
    #[arg(long)]
    pub factor: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random rotations only, no domain-adaptation remedies.
    #[arg(long)]
    pub symmetry_only: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    /// Fraction of each class assigned to training.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NetworkSize {
    Toy,
    Mid,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaggingArg {
    PerEpoch,
    PerStep,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled training set.
    #[arg(long)]
    pub train: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Labeled validation set; enables best-validation checkpointing.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_windows: Option<usize>,
    #[arg(long, value_enum)]
    pub network: Option<NetworkSize>,
    #[arg(long, value_enum)]
    pub bagging: Option<BaggingArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled test set (typically the augmented one).
    #[arg(long)]
    pub test: PathBuf,
    /// Labeled raw test set, reported separately. Defaults to `--test`.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Manifest of the `generate` run (or a grid JSON file); enables the
    /// displacement table.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Ablation mode: compare `--model` against this model trained without
    /// the remedies, on a domain-shifted copy of the raw test set.
    #[arg(long)]
    pub plain_model: Option<PathBuf>,
    #[arg(long)]
    pub ablation_seed: Option<u64>,
    #[arg(long)]
    pub latency_bin_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Recorded dataset to replay; without it, frames are read from stdin
    /// as JSON arrays `[t, fx0, fy0, fz0, ..., fz8]`, one per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write decisions here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Causal median filter: no lag, no offline equivalence.
    #[arg(long)]
    pub causal: bool,
    /// Replay recorded data at wall-clock pace, sped up by this factor.
    #[arg(long)]
    pub realtime: Option<f64>,
    #[arg(long)]
    pub deadline_ms: Option<f64>,
    /// Lines buffered between the reader and the detector.
    #[arg(long, default_value_t = 1024)]
    pub queue: usize,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Model JSON or dataset JSONL.
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Fail unless every output hashes as recorded.
    #[arg(long)]
    pub verify: bool,
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let result = (|| {
        if let Some(jobs) = cli.jobs {
            if jobs == 0 {
                return Err(CliError::Usage("--jobs must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        let config = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        commands::run(&cli, config, argv[1..].to_vec()).map(|_| ())
    })();
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
