//! `tama`: batch entry point for synthesizing data, training, tuning and
//! window sweeps.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "tama", version, about = "Temporal link prediction on yearly trade networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset as edges.csv and features.csv.
    Synth(SynthArgs),
    /// Train a model over a seed list and report held-out AUC and AP.
    Train(TrainArgs),
    /// Search hyperparameters, then retrain the best configuration.
    Tune(TuneArgs),
    /// Run the seeded protocol for a range of window lengths.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// key=value file supplying any of the flags below; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of countries [default: 60]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Number of yearly snapshots [default: 10]
    #[arg(long)]
    pub years: Option<usize>,
    /// First year [default: 2012]
    #[arg(long)]
    pub start_year: Option<i32>,
    /// Backbone density over ordered pairs [default: 0.06]
    #[arg(long)]
    pub backbone: Option<f64>,
    /// Yearly churn rate [default: 0.02]
    #[arg(long)]
    pub churn: Option<f64>,
    /// Standard deviation of the yearly feature step [default: 0.1]
    #[arg(long)]
    pub feature_noise: Option<f64>,
    /// Generator seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Tama,
    Gru,
    Static,
}

/// Dataset and training settings shared by train, tune and sweep.
#[derive(Args, Debug)]
pub struct CommonArgs {
    /// key=value file (e.g. a best.cfg or a manifest); flags win over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Edge list with header year,exporter_iso3,importer_iso3,tonnes
    /// (sweep accepts it repeatedly, one per dataset)
    #[arg(long)]
    pub edges: Vec<PathBuf>,
    /// Features with header year,iso3,gdp,agri_employment_ratio,population,production,
    /// one per --edges
    #[arg(long)]
    pub features: Vec<PathBuf>,
    /// Dataset label in output tables, one per --edges [default: name of the edges file's directory]
    #[arg(long)]
    pub name: Vec<String>,
    /// Model: tama, gru (memory disabled) or static (last training snapshot only) [default: tama]
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Sliding window length [default: 4]
    #[arg(long)]
    pub window: Option<usize>,
    /// Seeds as a..b (inclusive) or a comma list [default: 1000..1009]
    #[arg(long)]
    pub seeds: Option<String>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Latent dimension [default: 32]
    #[arg(long)]
    pub z_dim: Option<usize>,
    /// Initial momentum coefficient [default: 0.8]
    #[arg(long)]
    pub gamma_init: Option<f64>,
    /// Initial memory mixing weight [default: 0.5]
    #[arg(long)]
    pub beta_init: Option<f64>,
    /// KL weight [default: 0.0001]
    #[arg(long)]
    pub lambda_kl: Option<f64>,
    /// Seed of the held-out negative pairs [default: 2024]
    #[arg(long)]
    pub eval_seed: Option<u64>,
    /// Positive-class weight in the loss [default: 1]
    #[arg(long)]
    pub pos_weight: Option<f64>,
    /// Worker threads for independent runs [default: 1]
    #[arg(long, default_value_t = 1, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub jobs: usize,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training epochs [default: 300]
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Control {
    None,
    Random,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of trials [default: 20]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seeds trained per trial [default: 1000..1002]
    #[arg(long)]
    pub trial_seeds: Option<String>,
    /// Epochs per trial [default: 500]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs between pruning checkpoints [default: 50]
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Earlier trials needed at a checkpoint before pruning [default: 5]
    #[arg(long)]
    pub min_trials: Option<usize>,
    /// Random trials before the surrogate is used [default: 10]
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Seed of the sampler and acquisition streams [default: 0]
    #[arg(long)]
    pub study_seed: Option<u64>,
    /// Epochs of the final retraining over --seeds [default: 300]
    #[arg(long)]
    pub retrain_epochs: Option<usize>,
    /// Also run a random-search control arm [default: none]
    #[arg(long, value_enum)]
    pub control: Option<Control>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training epochs [default: 300]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Window lengths as a..b (inclusive) or a comma list [default: 3..8]
    #[arg(long)]
    pub windows: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
