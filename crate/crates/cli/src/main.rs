//! `specseg`: spectral segmentation of dense patch features from the command line.

mod budget;
mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use specseg::{MetricKind, Normalization, ThresholdRule};

use budget::Budget;

#[derive(Debug, Parser)]
#[command(name = "specseg", version, about = "Unsupervised spectral segmentation of patch feature tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Foreground/background mask from the Fiedler vector
    Fgbg(FgbgArgs),
    /// Instance labels inside a foreground mask
    Instance(InstanceArgs),
    /// Score a predicted mask against ground truth
    Eval(EvalArgs),
    /// Per-channel entropy, deviation and selection ranks
    ChannelStats(ChannelStatsArgs),
    /// Intra/inter-instance similarity variance ratio per metric
    MetricBench(MetricBenchArgs),
    /// Write a synthetic scene as NPY files
    Synth(SynthArgs),
    /// Apply the dataset size and occlusion rules to a ground-truth mask
    Filter(FilterArgs),
    /// Rerun the command recorded in a manifest
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FgbgArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Channels kept by NCR: integer, fraction of C, or C/d [default: C/3]
    #[arg(long = "M")]
    pub m: Option<Budget>,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long, default_value = "dot")]
    pub metric: MetricKind,
    #[arg(long, default_value = "symmetric_normalized")]
    pub normalization: Normalization,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub post_process: bool,
    #[arg(long, value_enum, default_value_t = Threshold::Zero)]
    pub threshold: Threshold,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Threshold {
    Zero,
    Mean,
}

impl From<Threshold> for ThresholdRule {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::Zero => ThresholdRule::Zero,
            Threshold::Mean => ThresholdRule::Mean,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub fg_mask: PathBuf,
    /// Channels kept by NCR [default: C/3]
    #[arg(long = "M")]
    pub m: Option<Budget>,
    /// Channels kept by DCR, resolved against C [default: 60 per 128 of M]
    #[arg(long = "N")]
    pub n: Option<Budget>,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long, default_value = "boc")]
    pub metric: MetricKind,
    #[arg(long, default_value = "symmetric_normalized")]
    pub normalization: Normalization,
    #[arg(long, default_value_t = 4)]
    pub eig_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Task {
    Fgbg,
    Instance,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Report JSON path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ChannelStatsArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    /// Instance mask; adds the between-instance mean gap per channel
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// CSV path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MetricBenchArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Comma-separated metric names [default: all]
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<MetricKind>,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// NCR budget applied before sampling; `C` disables [default: C/3]
    #[arg(long = "M")]
    pub m: Option<Budget>,
    /// DCR budget applied before sampling [default: 60 per 128 of M]
    #[arg(long = "N")]
    pub n: Option<Budget>,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    /// CSV path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// Rectangles with a third of the channels carrying signal
    Planted,
    /// Planted scene with spikes in a few channels of instance 1
    Spiked,
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["spec", "preset"])))]
pub struct SynthArgs {
    /// Scene description JSON
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Preset seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Preset instance count [default: 2 + seed mod 3]
    #[arg(long)]
    pub instances: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 0.07)]
    pub min_frac: f64,
    #[arg(long, default_value_t = 0.3)]
    pub min_ratio: f64,
    #[arg(long, default_value_t = 0.5)]
    pub max_mbor: f64,
    /// Occlusion score of the frame, if known
    #[arg(long)]
    pub mbor: Option<f64>,
    /// Decision JSON path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded location
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse_from(std::iter::once("specseg".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("specseg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
