//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lqmle_core::distribution::{Family, InnovationDist};
use lqmle_core::estimation::Objective;
use lqmle_core::models::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::data::{parse_delimiter, Column, CsvOptions};
use crate::error::{CliError, Result};

#[derive(Parser, Debug, Clone)]
#[command(
    name = "lqmle",
    version,
    about = "Logistic quasi-maximum likelihood for conditional mean/scale time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Fit a model to a data column and report estimates, tests and diagnostics.
    Fit(FitArgs),
    /// Simulate a series from a model and innovation law.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo scenario grid.
    Mc(McArgs),
    /// Wald and LM tests of a linear restriction, plus coefficient t-tests.
    Test(TestArgs),
    /// Scale (or stable index) at which psi equals one.
    Calibrate(CalibrateArgs),
    /// Residual diagnostics at a given parameter.
    Diagnose(DiagnoseArgs),
    /// Human-readable tables from a JSON report.
    Render(RenderArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::Mc(_) => "mc",
            Command::Test(_) => "test",
            Command::Calibrate(_) => "calibrate",
            Command::Diagnose(_) => "diagnose",
            Command::Render(_) => "render",
        }
    }

    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Fit(a) => a.out.as_ref(),
            Command::Simulate(a) => a.out.as_ref(),
            Command::Mc(a) => a.out.as_ref(),
            Command::Test(a) => a.out.as_ref(),
            Command::Calibrate(a) => a.out.as_ref(),
            Command::Diagnose(a) => a.out.as_ref(),
            Command::Render(a) => a.out.as_ref(),
        }
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Dar,
    Garch,
    ArmaGarch,
    Expar,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Logistic,
    Gaussian,
}

impl ObjectiveKind {
    pub fn objective(self) -> Objective {
        match self {
            ObjectiveKind::Logistic => Objective::Logistic,
            ObjectiveKind::Gaussian => Objective::Gaussian,
        }
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    Logistic,
    Normal,
    Uniform,
    T,
    Stable,
}

impl DistKind {
    pub fn family(self) -> Family {
        match self {
            DistKind::Logistic => Family::Logistic,
            DistKind::Normal => Family::Normal,
            DistKind::Uniform => Family::Uniform,
            DistKind::T => Family::StudentT,
            DistKind::Stable => Family::SymmetricStable,
        }
    }

    /// Degrees of freedom or stability index, with the defaults 3 and 1.69.
    pub fn shape(self, nu: Option<f64>, alpha: Option<f64>) -> f64 {
        match self {
            DistKind::T => nu.unwrap_or(3.0),
            DistKind::Stable => alpha.unwrap_or(1.69),
            _ => 0.0,
        }
    }
}

/// Scale used when none is given: the one giving psi = 1, except for the
/// stable law, which is calibrated through its index and keeps scale 1.
pub fn default_scale(kind: DistKind, shape: f64) -> Result<f64> {
    match kind {
        DistKind::Stable => Ok(1.0),
        _ => Ok(lqmle_core::distribution::calibrate_scale(kind.family(), shape, 1e-8)?),
    }
}

pub fn innovation(kind: DistKind, scale: f64, shape: f64) -> InnovationDist {
    match kind {
        DistKind::Logistic => InnovationDist::logistic(scale),
        DistKind::Normal => InnovationDist::normal(scale),
        DistKind::Uniform => InnovationDist::uniform(scale),
        DistKind::T => InnovationDist::student_t(shape, scale),
        DistKind::Stable => InnovationDist::stable(shape, scale),
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct DataArgs {
    /// Delimited text file holding the series.
    #[arg(long)]
    pub data: PathBuf,
    /// Field delimiter (one character, or `tab`).
    #[arg(long, default_value = ",")]
    pub delim: String,
    /// Column by zero-based index or header name.
    #[arg(long)]
    pub column: Option<String>,
    /// First row holds column names.
    #[arg(long)]
    pub header: bool,
    /// Use first differences of the column.
    #[arg(long)]
    pub diff: bool,
}

impl DataArgs {
    pub fn csv_options(&self) -> Result<CsvOptions> {
        Ok(CsvOptions {
            delimiter: parse_delimiter(&self.delim)?,
            column: self.column.as_deref().map(|c| c.parse::<Column>().unwrap()),
            header: self.header,
            diff: self.diff,
        })
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// `p,q` for dar and garch, `p` for expar; arma-garch is (1,1).
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<usize>,
    /// Drop the intercept of the arma-garch mean.
    #[arg(long)]
    pub no_intercept: bool,
}

impl ModelArgs {
    pub fn build(&self) -> Result<ModelSpec> {
        build_model(self.model, &self.order, self.no_intercept)
    }
}

pub fn build_model(kind: ModelKind, order: &[usize], no_intercept: bool) -> Result<ModelSpec> {
    let two = |default: (usize, usize)| -> Result<(usize, usize)> {
        match order {
            [] => Ok(default),
            [p, q] => Ok((*p, *q)),
            _ => Err(CliError::Usage(format!("order must be p,q, got {order:?}"))),
        }
    };
    let m = match kind {
        ModelKind::Dar => {
            let (p, q) = two((1, 1))?;
            ModelSpec::dar(p, q)?
        }
        ModelKind::Garch => {
            let (p, q) = two((1, 1))?;
            ModelSpec::garch(p, q)?
        }
        ModelKind::ArmaGarch => {
            if two((1, 1))? != (1, 1) {
                return Err(CliError::Usage("arma-garch supports order 1,1 only".into()));
            }
            ModelSpec::arma_garch(!no_intercept)
        }
        ModelKind::Expar => match order {
            [] => ModelSpec::expar(1)?,
            [p] => ModelSpec::expar(*p)?,
            _ => return Err(CliError::Usage(format!("expar order is a single p, got {order:?}"))),
        },
    };
    if no_intercept && kind != ModelKind::ArmaGarch {
        return Err(CliError::Usage("--no-intercept applies to arma-garch only".into()));
    }
    Ok(m)
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "logistic")]
    pub objective: ObjectiveKind,
    /// Starting point; multistart when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta_init: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    pub random_starts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Order statistics used by the Hill estimator (default floor(n^0.6)).
    #[arg(long)]
    pub hill_k: Option<usize>,
    /// Draws for simulated stationarity checks.
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Record wall-clock time in the manifest (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub theta: Vec<f64>,
    #[arg(long, value_enum, default_value = "logistic")]
    pub dist: DistKind,
    /// Innovation multiplier; defaults to the value giving psi = 1.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Degrees of freedom of `t` (default 3).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Stability index of `stable` (default 1.69).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; a `.manifest.json` sidecar is written next to it.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct McArgs {
    /// TOML scenario grid.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Overrides the grid's top-level seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "logistic")]
    pub objective: ObjectiveKind,
    /// Restriction rows `r1,..,rd=c` separated by `;`, e.g. `1,1,1,1=2.3`.
    #[arg(long, allow_hyphen_values = true)]
    pub restrict: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta_init: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    pub random_starts: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrateFamily {
    Logistic,
    Normal,
    Uniform,
    T,
    Stable,
    /// Normal, uniform, t(3), t(2) and stable.
    All,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub family: CalibrateFamily,
    /// Degrees of freedom for `t` (default 3).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Target for |psi - 1|.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Parameter value; taken from `--from-report` when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    /// A `fit` report whose estimates are used.
    #[arg(long)]
    pub from_report: Option<PathBuf>,
    #[arg(long)]
    pub hill_k: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Text,
    Markdown,
}

#[derive(Args, Debug, Clone)]
pub struct RenderArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: RenderFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Canonical command line reproducing `options`, as recorded in manifests.
pub fn argv(command: &str, options: &serde_json::Value) -> Vec<String> {
    let mut v = vec!["lqmle".to_string(), command.to_string()];
    if let serde_json::Value::Object(map) = options {
        for (key, value) in map {
            let flag = format!("--{}", key.replace('_', "-"));
            match value {
                serde_json::Value::Null | serde_json::Value::Bool(false) => {}
                serde_json::Value::Bool(true) => v.push(flag),
                serde_json::Value::Array(items) if items.is_empty() => {}
                serde_json::Value::Array(items) => {
                    let joined: Vec<String> = items.iter().map(scalar).collect();
                    v.push(format!("{flag}={}", joined.join(",")));
                }
                other => v.push(format!("{flag}={}", scalar(other))),
            }
        }
    }
    v
}

fn scalar(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
