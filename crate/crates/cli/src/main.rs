use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "mmlab", version, about = "Synthetic multi-modal training, probing and theory simulations")]
struct Cli {
    /// Print machine-readable JSON on stdout instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset, its split and a sidecar.
    Gen(GenArgs),
    /// Train one model on a generated dataset.
    Train(TrainArgs),
    /// Linear-probe a frozen encoder over several probe seeds.
    Probe(ProbeArgs),
    /// Evaluate the average of two uni-modal models' predictions.
    Ume(UmeArgs),
    /// Compare a classifier on frozen uni-modal features with prediction averaging.
    Decide(DecideArgs),
    /// Run the feature-learning simulator and its theorem checks.
    Theory(TheoryArgs),
    /// Aggregate result files into the synthetic accuracy and confusion tables.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantArg {
    Alpha,
    Beta,
    Gamma,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase2Arg {
    Quota,
    Literal,
}

#[derive(clap::Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset file; the split and sidecar are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Row count (ignored for gamma).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = mmlab_core::synth::DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    #[arg(long, value_enum, default_value_t = Phase2Arg::Quota)]
    pub gamma_phase2: Phase2Arg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Uni1,
    Uni2,
    Naive,
    Umt,
    Aux,
    Dropout,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Uni1 => "uni1",
            Mode::Uni2 => "uni2",
            Mode::Naive => "naive",
            Mode::Umt => "umt",
            Mode::Aux => "aux",
            Mode::Dropout => "dropout",
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub data: PathBuf,
    /// JSON run configuration; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Training seed; defaults to the config's, then the dataset's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub teacher1: Option<PathBuf>,
    #[arg(long)]
    pub teacher2: Option<PathBuf>,
    /// Train missing UMT teachers instead of failing.
    #[arg(long)]
    pub auto_teachers: bool,
    #[arg(long)]
    pub lambda_task: Option<f64>,
    #[arg(long)]
    pub lambda_distill: Option<f64>,
    #[arg(long)]
    pub drop_prob: Option<f64>,
}

#[derive(clap::Args, Debug)]
pub struct ProbeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub modality: u8,
    /// Number of probe seeds, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct UmeArgs {
    #[arg(long)]
    pub model1: PathBuf,
    #[arg(long)]
    pub model2: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "0.5,0.5")]
    pub weights: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct DecideArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = mmlab_core::train::UNI_HIDDEN)]
    pub hidden: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct TheoryArgs {
    /// Universe JSON file, or `example` / `example-no-h` for the built-in seven-feature universe.
    #[arg(long)]
    pub universe: String,
    /// Number of simulation seeds.
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Priority boost for uni-modal features; enables the boosted comparison.
    #[arg(long)]
    pub boost: Option<f64>,
    /// Ratio p / eps for the built-in universes.
    #[arg(long, default_value_t = mmlab_core::theory::DEFAULT_C)]
    pub c: f64,
    #[arg(long, default_value_t = 1000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo trials for the complementary-event check; 0 skips it.
    #[arg(long, default_value_t = 200_000)]
    pub lemma_trials: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MMLAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("MMLAB_THREADS must be a positive integer, got `{v}`"))?;
        anyhow::ensure!(n > 0, "MMLAB_THREADS must be a positive integer, got `{v}`");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = || -> anyhow::Result<()> {
        init_threads()?;
        match cli.command {
            Command::Gen(a) => commands::generate(&a, cli.json),
            Command::Train(a) => commands::train(&a, cli.json),
            Command::Probe(a) => commands::probe(&a, cli.json),
            Command::Ume(a) => commands::ume(&a, cli.json),
            Command::Decide(a) => commands::decide(&a, cli.json),
            Command::Theory(a) => commands::theory(&a, cli.json),
            Command::Report(a) => commands::report(&a, cli.json),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
