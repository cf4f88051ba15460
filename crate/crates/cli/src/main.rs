mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jointgibbs::error::Error;

#[derive(Parser)]
#[command(name = "jointgibbs", version, about = "Bayesian regression with incomplete covariates")]
struct Cli {
    /// Log level (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write a run directory.
    Fit(FitArgs),
    /// Posterior summary of a fitted run.
    Summary(SummaryArgs),
    /// Convergence and Monte Carlo error diagnostics, with plot data.
    Diagnose(DiagnoseArgs),
    /// Predictions for new data or for a grid over some variables.
    Predict(PredictArgs),
    /// Completed datasets drawn from the imputations.
    ImputeExport(ImputeArgs),
    /// Missing-data patterns of a CSV file.
    MdPattern(MdPatternArgs),
}

#[derive(Args)]
pub struct FitArgs {
    /// JSON configuration with `data`, `na`, `model` and `mcmc`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub na: Option<String>,
    /// Run directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Analysis formula; repeat for several outcomes.
    #[arg(long)]
    pub formula: Vec<String>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub link: Option<String>,
    /// Monitor keywords to switch on, e.g. `imps,other_models`; `key=false`
    /// switches one off.
    #[arg(long, value_delimiter = ',')]
    pub monitor: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub n_adapt: Option<usize>,
    #[arg(long)]
    pub n_chains: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Replace an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Default)]
pub struct SubsetArgs {
    /// First iteration to use.
    #[arg(long)]
    pub start: Option<usize>,
    /// Last iteration to use.
    #[arg(long)]
    pub end: Option<usize>,
    /// Use every n-th stored draw.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Chains to leave out, e.g. `2,3`.
    #[arg(long, value_delimiter = ',')]
    pub exclude_chains: Vec<usize>,
    /// Subset as JSON text or a path to a JSON file; the flags above win.
    #[arg(long)]
    pub subset: Option<String>,
}

#[derive(Args)]
pub struct RunArgs {
    /// Run directory written by `fit`.
    pub run: PathBuf,
    /// Output directory; a subdirectory of the run by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SummaryArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub subset: SubsetArgs,
    /// Lower and upper quantile.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub quantiles: Option<Vec<f64>>,
    /// Add complete-case and missing-value tables.
    #[arg(long)]
    pub missinfo: bool,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub subset: SubsetArgs,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Drop the first half of each chain before the Gelman-Rubin criterion.
    #[arg(long)]
    pub autoburnin: bool,
    /// Plot data to write.
    #[arg(long, value_delimiter = ',', default_value = "trace,density,mcse_ratio")]
    pub plots: Vec<String>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub subset: SubsetArgs,
    /// CSV with the covariate values to predict for.
    #[arg(long, conflicts_with = "vars")]
    pub newdata: Option<PathBuf>,
    /// Variables that vary over the prediction grid, e.g. `"age + gender"`.
    #[arg(long)]
    pub vars: Option<String>,
    #[arg(long, default_value_t = jointgibbs::postprocess::DEFAULT_GRID_LENGTH)]
    pub grid_length: usize,
    /// Fixed grid values, e.g. `--set age=40` or `--set age=30,50`.
    #[arg(long)]
    pub set: Vec<String>,
    /// link, lp, response, prob or class.
    #[arg(long = "type", default_value = "link")]
    pub pred_type: String,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub quantiles: Option<Vec<f64>>,
    #[arg(long)]
    pub outcome: Option<String>,
}

#[derive(Args)]
pub struct ImputeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = jointgibbs::postprocess::DEFAULT_MINSPACE)]
    pub minspace: usize,
    #[arg(long)]
    pub start: Option<usize>,
    /// Leave the original data out of the stack.
    #[arg(long)]
    pub no_include: bool,
}

#[derive(Args)]
pub struct MdPatternArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "NA")]
    pub na: String,
    /// Columns to use, e.g. `a,b`; all by default.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Directory for the pattern table and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Syntax { .. } | Error::Formula(_) | Error::Model(_) | Error::Config(_) | Error::Diagnostics(_) => 2,
        Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
        Error::Sampler { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    let res = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Summary(a) => commands::summary(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::ImputeExport(a) => commands::impute_export(&a),
        Command::MdPattern(a) => commands::md_pattern(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
