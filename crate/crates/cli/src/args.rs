use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "chansim", version, about = "Trainable distortion-channel simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit channel parameters from aligned clean/noisy recordings.
    Train(TrainArgs),
    /// Run a clean recording through a trained channel.
    Simulate(SimulateArgs),
    /// Simulate every WAV in a directory at several noise weights.
    Augment(AugmentArgs),
    /// Mean spectral loss of a trained channel on aligned recordings.
    Eval(EvalArgs),
    /// Time the companded smoother (and optionally training) per ds_factor.
    Bench(BenchArgs),
    /// Compare tape gradients with finite differences on a random problem.
    CheckGrad(CheckGradArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum WavFormat {
    #[default]
    Pcm16,
    Float32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub noisy: PathBuf,
    #[arg(long)]
    pub out_params: PathBuf,
    /// Per-step log (JSON lines); defaults to <out-params>.log.jsonl.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub duration_sec: usize,
    #[arg(long, default_value_t = 0.8)]
    pub s2t_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s2t_hi: f64,
    #[arg(long, default_value_t = 16)]
    pub ds_factor: usize,
    #[arg(long, default_value_t = 1500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.03)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise weight; defaults to the value stored in the parameter file.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: WavFormat,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub in_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.79,1.0,1.26")]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: WavFormat,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub noisy: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the run manifest.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    pub ds_factors: Vec<usize>,
    #[arg(long, default_value_t = 60.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Also train on a synthetic target at every factor.
    #[arg(long)]
    pub full: bool,
    /// Training steps per factor in full mode.
    #[arg(long, default_value_t = 1500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the table and the run manifest.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub len: usize,
    #[arg(long, default_value_t = 16)]
    pub ds_factor: usize,
    /// Scale one primitive's derivative, as `op=factor` (e.g. `atan=1.01`).
    #[arg(long)]
    pub fault: Option<String>,
    /// Directory for the run manifest.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
