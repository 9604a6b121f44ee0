use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  invalid input or configuration (message names the offending column or key)
  3  sampler divergence or MLE non-convergence (e.g. monotone likelihood)
  4  fewer than 90% of simulation replications succeeded

Environment:
  RANKHAZ_SEED  when set, overrides --seed";

#[derive(Debug, Parser)]
#[command(name = "rankhaz", version, about = "Bayesian Cox regression with PL-Cox and GPL-Cox Gibbs samplers", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit PL-Cox or GPL-Cox by Gibbs sampling.
    #[command(after_help = EXIT_CODES)]
    Fit(FitArgs),
    /// Maximum partial likelihood with Breslow or Efron ties.
    #[command(after_help = EXIT_CODES)]
    Mle(MleArgs),
    /// Run a simulation scenario and report Bias/SD/RMSE/CP/AW.
    #[command(after_help = EXIT_CODES)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Pl,
    Gpl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TiesArg {
    Breslow,
    Efron,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Column holding observed times.
    #[arg(long, default_value = "time")]
    pub time: String,
    /// Column holding event indicators (0/1).
    #[arg(long, default_value = "event")]
    pub event: String,
    /// Comma-separated covariate columns; default is every other column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[command(flatten)]
    pub data: DataArgs,
    /// Integer cluster column; adds a shared log-normal frailty.
    #[arg(long)]
    pub frailty_col: Option<String>,
    #[arg(long, default_value_t = 3000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Negative-binomial concentration (PL-Cox only).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Prior SD of each coefficient (independent normal priors, mean 0).
    #[arg(long, default_value_t = 10.0)]
    pub prior_sd: f64,
    /// Independent chains; chain k uses stream k of the seed.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Maximum worker threads.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long, default_value = "rankhaz-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = TiesArg::Efron)]
    pub ties: TiesArg,
    /// Gradient tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value = "rankhaz-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the scenario's replication count.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long, default_value = "rankhaz-out")]
    pub out_dir: PathBuf,
}

/// `RANKHAZ_SEED` wins over the flag when set.
pub fn resolve_seed(flag: Option<u64>) -> anyhow::Result<Option<u64>> {
    match std::env::var("RANKHAZ_SEED") {
        Ok(v) if !v.trim().is_empty() => {
            let seed = v
                .trim()
                .parse::<u64>()
                .map_err(|_| anyhow::Error::new(rankhaz::Error::Validation(format!("RANKHAZ_SEED `{v}` is not an unsigned integer"))))?;
            Ok(Some(seed))
        }
        _ => Ok(flag),
    }
}
