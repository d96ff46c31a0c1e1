use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bshrink",
    version,
    about = "Cut-offs, risks and property checks for Baranchik-type shrinkage under balanced losses"
)]
pub struct Cli {
    /// Worker threads for curve points and property checks (default: available parallelism;
    /// BSHRINK_THREADS is used when the flag is absent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// File of `key = value` lines supplying flags; flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dominance cut-off a0 for a model and loss.
    Cutoff(CutoffArgs),
    /// Risk of one estimator at a single lambda or over a lambda grid.
    Risk(ExperimentArgs),
    /// Risk curves of several estimators over a lambda grid.
    Curve(ExperimentArgs),
    /// Draw points from a spherical model.
    Sample(SampleArgs),
    /// Certify a loss (C1 or C3) or the shrinkage multiplier of an estimator.
    Certify(CertifyArgs),
    /// Run the numerical property suite.
    Verify(VerifyArgs),
    /// Recompute the Kotz / log1p study: cut-off, benchmark, origin gains and risk curves.
    #[command(name = "reproduce-fig1")]
    ReproduceFig1(Fig1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Rho,
    Ell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Quad,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Condition {
    C1,
    C3,
}

#[derive(Debug, Args)]
pub struct CutoffArgs {
    /// normal | kotz:r=,s=,nu= | ball:m= | mix:v1:w1,v2:w2,...
    #[arg(long, required_unless_present = "closed_form")]
    pub model: Option<String>,
    #[arg(long, required_unless_present = "closed_form")]
    pub dim: Option<usize>,
    /// identity | log1p | refnorm:alpha= | power:q= | powshift:gamma=,beta= | rational:r= | atan | tanh | tnormcdf
    #[arg(long, required_unless_present = "closed_form")]
    pub loss: Option<String>,
    #[arg(long, value_enum, default_value = "rho")]
    pub form: FormArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega: f64,
    /// ball_log_d4:m=,omega= | kotz_refnorm:r=,nu=,alpha=,omega=,d= | ball_power:m=,q=,d= | kotz_power:r=,s=,nu=,q=,d=
    #[arg(long, conflicts_with_all = ["model", "dim", "loss"])]
    pub closed_form: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub loss: String,
    #[arg(long, value_enum, default_value = "rho")]
    pub form: FormArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega: f64,
    /// x | baranchik:b=,c= | js:b=  (repeat for several curves)
    #[arg(long = "estimator", required = true)]
    pub estimators: Vec<String>,
    #[arg(long, conflicts_with = "lambda_grid", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// `a:b:n`, n evenly spaced points on [a, b] (curve default 0:8:33)
    #[arg(long)]
    pub lambda_grid: Option<String>,
    #[arg(long, value_enum, default_value = "quad")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    pub mc_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; inferred from the `--out` extension, csv otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write the validated configuration as a `--config` file.
    #[arg(long, value_name = "PATH")]
    pub save_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Location as comma-separated coordinates (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("subject").required(true).args(["loss", "estimator"])))]
pub struct CertifyArgs {
    #[arg(long)]
    pub loss: Option<String>,
    /// Certify the shrinkage multiplier of this estimator.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Condition for `--loss`: c1 (rho-form) or c3 (ell-form).
    #[arg(long, value_enum, default_value = "c1")]
    pub condition: Condition,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// all | superharmonic | lemma_2_1 | sphere_ball | monotone_conditional | covariance | loss_difference | risk_identity
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    #[arg(long, default_value = "0:8:33")]
    pub lambda_grid: String,
    #[arg(long, value_enum, default_value = "quad")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    pub mc_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wide CSV with one column per curve.
    #[arg(long, default_value = "fig1.csv")]
    pub out: PathBuf,
    /// JSON summary; also printed to stdout.
    #[arg(long, default_value = "fig1_summary.json")]
    pub summary: PathBuf,
}
