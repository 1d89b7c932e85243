mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gcpr::error::GcprError;

#[derive(Debug, Parser)]
#[command(name = "gcpr", version, about = "Generalized cointegrating polynomial regressions")]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "GCPR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a model by concentrated NLS.
    Fit(FitArgs),
    /// Simulation-based confidence intervals and coefficient tests.
    Infer(InferArgs),
    /// Subsampling KPSS test of the cointegrating relation.
    Kpss(KpssArgs),
    /// Monte Carlo tables.
    Mc(McArgs),
    /// RSS profile over a grid of powers.
    Profile(ProfileArgs),
    /// Re-run the command recorded in an output's manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    M1,
    M2,
    M3,
    M4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// CSV with header `t,y,x1[,x2,...]`.
    pub data: PathBuf,
    /// Preset specification.
    #[arg(long, value_enum)]
    pub model: Option<Preset>,
    /// Trend powers, e.g. `0,1,free` (overrides the preset's trends).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub trend: Option<Vec<String>>,
    /// Polynomial order of each regressor, e.g. `2` (overrides the preset).
    #[arg(long, value_delimiter = ',')]
    pub xpow: Option<Vec<usize>>,
    #[arg(long)]
    pub theta_lower: Option<f64>,
    #[arg(long)]
    pub theta_upper: Option<f64>,
    /// Minimal distance between trend powers.
    #[arg(long)]
    pub min_gap: Option<f64>,
    /// Step of the grid scanned before refinement.
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LrvArgs {
    /// bartlett, parzen or qs.
    #[arg(long, default_value = "bartlett")]
    pub kernel: String,
    /// `auto` (AR(1) plug-in) or a positive number.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub lrv: LrvArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Number of simulated draws.
    #[arg(long = "draws", short = 'J', default_value_t = 999)]
    pub draws: usize,
    /// Length of the simulated paths (default: sample length).
    #[arg(long)]
    pub path_len: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct KpssArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub lrv: LrvArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Candidate block sizes (default: data-driven grid).
    #[arg(long, value_delimiter = ',')]
    pub q_grid: Option<Vec<usize>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// 1, 2, 4, 5 or power.
    #[arg(long)]
    pub table: String,
    /// Cells, e.g. `A:rho=0:T=100`, `AD`, `*:T=200`.
    #[arg(long)]
    pub scope: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Simulated draws per replication.
    #[arg(long = "draws", short = 'J')]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// 25000 replications and 999 draws unless overridden.
    #[arg(long)]
    pub full_scale: bool,
    /// Keep one VAR rotation per cell instead of redrawing it.
    #[arg(long)]
    pub fixed_rotation: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    /// Free trend power of the model.
    Trend,
    /// Power of the regressor in `y = tau1 + tau2 t + phi1 x + phi2 x^theta`.
    Xpow,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub kind: ProfileKind,
    /// `lo:hi:step` or a comma-separated list.
    #[arg(long)]
    pub grid: String,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A JSON report, or a CSV/text output with a `# manifest:` header.
    pub report: PathBuf,
}

/// Exit-code contract.
pub fn exit_code(err: &GcprError) -> u8 {
    match err {
        GcprError::RankDeficient { .. } => 3,
        GcprError::Optimizer(_) => 4,
        GcprError::Degenerate(_) | GcprError::NotPositiveDefinite(_) => 5,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command, commands::replay_argv(&argv[1..])) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
