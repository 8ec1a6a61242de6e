mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "gols", version, about = "GOLS-I line search experiments on small neural-network problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with GOLS-I or a fixed step size; one CSV per repeat.
    Train(TrainArgs),
    /// Count minima and SNN-GPPs along a search direction under dynamic sampling.
    Localize(LocalizeArgs),
    /// Summarize function evaluations per iteration and final metrics of run CSVs.
    Report {
        dir: PathBuf,
    },
    /// Sample F and F' along the full-batch steepest-descent direction.
    Scan(ScanArgs),
    /// Check backprop against finite differences and the singleton-batch identity.
    #[command(hide = true)]
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptKind {
    GolsI,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerKind {
    Dynamic,
    Static,
    Full,
}

#[derive(Args)]
struct GolsFlags {
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    alpha_min: Option<f64>,
    #[arg(long)]
    alpha_max_cap: Option<f64>,
    #[arg(long)]
    reuse_prev_gradient: Option<bool>,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment preset, e.g. bcwd-logr or netpi-deep10.
    #[arg(long)]
    preset: Option<String>,
    /// TOML or JSON manifest; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerKind>,
    #[arg(long, value_enum)]
    opt: Option<OptKind>,
    /// Step size for `--opt fixed`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Function-evaluation budget per run.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Compute loss and errors every this many function evaluations.
    #[arg(long)]
    cadence: Option<usize>,
    #[arg(long)]
    error_subsample: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "GOLS_DATA_DIR")]
    data_dir: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    gols: GolsFlags,
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(long, default_value = "iris")]
    preset: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated batch sizes; the dataset size means full batch.
    #[arg(long, value_delimiter = ',')]
    batch_sizes: Option<Vec<usize>>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    init_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "GOLS_DATA_DIR")]
    data_dir: Option<String>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value = "iris")]
    preset: String,
    #[arg(long, value_enum, default_value = "dynamic")]
    sampler: SamplerKind,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    grid: usize,
    #[arg(long, default_value_t = 0.002)]
    spacing: f64,
    #[arg(long)]
    init_seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "GOLS_DATA_DIR")]
    data_dir: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Localize(a) => commands::localize(a),
        Command::Report { dir } => commands::report(&dir),
        Command::Scan(a) => commands::scan(a),
        Command::Verify => commands::verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gols: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
