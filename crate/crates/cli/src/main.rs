mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sensaudit_core::{Criterion, SelectionMode};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sensaudit",
    version,
    about = "Uncertainty analysis, sensitivity analysis and sensitivity auditing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Overrides the configured seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for model evaluation (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Record failed model rows and continue without them.
    #[arg(long, global = true)]
    pub drop_failures: bool,

    /// Parent directory of study directories.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Format of the report printed to stdout.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate input uncertainty: output moments and quantiles.
    Ua(ConfigArg),
    /// First-order, total-effect and moment-independent indices.
    Sa(ConfigArg),
    /// Total-effect variable selection over regressor inclusion.
    Select(SelectArgs),
    /// Reference experiments.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Seven-rule audit checklist for a study.
    #[command(subcommand)]
    Audit(AuditCommand),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Study configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Bic,
    Aic,
    AdjustedR2,
    CvMse,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Bic => Criterion::Bic,
            CriterionArg::Aic => Criterion::Aic,
            CriterionArg::AdjustedR2 => Criterion::AdjustedR2,
            CriterionArg::CvMse => Criterion::CvMse,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Sampled,
}

impl From<ModeArg> for SelectionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exhaustive => SelectionMode::Exhaustive,
            ModeArg::Sampled => SelectionMode::Sampled,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Candidate regressors (header = names); the last column is `y` unless --response is given.
    #[arg(long)]
    pub data: PathBuf,
    /// Response file with a single `y` column.
    #[arg(long)]
    pub response: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bic")]
    pub criterion: CriterionArg,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub mode: ModeArg,
    /// Base sample size for sampled mode.
    #[arg(long = "n", default_value_t = 1024)]
    pub n_base: usize,
    /// Selection threshold on T_i (default 1/p).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Study directory name for the outputs.
    #[arg(long, default_value = "selection")]
    pub study: String,
}

#[derive(Debug, Subcommand)]
pub enum DemoCommand {
    /// Coverage of one-at-a-time designs and the interactions they miss.
    Oat(OatArgs),
    /// Bias and propagated variance against polynomial order.
    Oneill(OneillArgs),
}

#[derive(Debug, Args)]
pub struct OatArgs {
    /// Number of factors.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Study whose model and factors replace the x1*x2 demonstration model.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Sweep levels per factor.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Sweep half-width in probability space.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Base sample size for the total-effect estimates.
    #[arg(long = "n")]
    pub n_base: Option<usize>,
    /// Monte Carlo points for the hit ratio.
    #[arg(long, default_value_t = sensaudit_core::experiments::DEFAULT_MC_POINTS)]
    pub mc_points: usize,
}

#[derive(Debug, Args)]
pub struct OneillArgs {
    /// True polynomial coefficients, constant term first.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, -2.0, 1.5])]
    pub coefficients: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 30)]
    pub n_obs: usize,
    /// Orders 0..=max are fitted.
    #[arg(long, default_value_t = 10)]
    pub max_order: usize,
    #[arg(long, default_value_t = 500)]
    pub replications: usize,
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    /// Create `<study>/audit.json` and `audit.md` with every rule unaddressed.
    Init {
        study: String,
        /// Study configuration whose metadata fills the report.
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Replace an existing checklist.
        #[arg(long)]
        force: bool,
    },
    /// Link `sa.json` (and `ua.json` if present) to rules 3, 4 and 7.
    Attach {
        study: String,
        /// Defaults to the copy of the configuration in the study directory.
        #[arg(long, short)]
        config: Option<PathBuf>,
    },
    /// Set a rule's status by hand.
    Set {
        study: String,
        /// Rule number, 1 to 7.
        rule: u8,
        #[arg(value_enum)]
        status: StatusArg,
        /// Narrative or justification recorded with the status.
        #[arg(long, default_value = "")]
        narrative: String,
    },
    /// Render the checklist to `audit.md` and `audit.json` and print it.
    Render { study: String },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatusArg {
    Attested,
    Failed,
    NotApplicable,
    Unaddressed,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Ua(a) => commands::ua(g, &a.config),
        Command::Sa(a) => commands::sa(g, &a.config),
        Command::Select(a) => commands::select(g, &a),
        Command::Demo(DemoCommand::Oat(a)) => commands::demo_oat(g, &a),
        Command::Demo(DemoCommand::Oneill(a)) => commands::demo_oneill(g, &a),
        Command::Audit(a) => commands::audit(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(error::exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(sensaudit_core::Error::ModelFailure { failures, .. }) = &e {
                const SHOWN: usize = 20;
                for f in failures.iter().take(SHOWN) {
                    eprintln!("  row {}: {}", f.row, f.reason);
                }
                if failures.len() > SHOWN {
                    eprintln!("  ... and {} more failed rows", failures.len() - SHOWN);
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
