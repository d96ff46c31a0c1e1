//! `--config` files and the validated experiment description shared by
//! `risk` and `curve`.
//!
//! A config file holds one `key = value` pair per line. Keys are long flag
//! names (`mc-n` or `mc_n`); `#` starts a comment line; repeated keys (such as
//! `estimator`) supply repeated flags. The optional key `command` names the
//! subcommand when none is given on the command line.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use bshrink::densities::{ModelDensity, ModelKind};
use bshrink::estimators::BaranchikEstimator;
use bshrink::losses::{BalancedLoss, LossFn, LossForm};
use bshrink::risk::{lambda_grid, RiskMethod};
use clap::Parser;

use crate::args::{Cli, Command, ExperimentArgs, FormArg, Format, MethodArg};
use crate::CliError;

/// Global flags that take a value and may precede the subcommand.
const GLOBAL_VALUED: [&str; 2] = ["--threads", "--config"];

fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("{origin}:{}: expected `key = value`, found `{line}`", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(CliError::validation(format!("{origin}:{}: bad key `{key}`", i + 1)));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if GLOBAL_VALUED.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Splices the pairs of a `--config` file into `argv` right after the
/// subcommand, dropping keys the command line already sets.
pub fn expand_argv(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path: Option<String> = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::validation("--config needs a path"))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::validation(format!("cannot read config `{path}`: {e}")))?;
    splice(rest, parse_pairs(&text, &path)?)
}

fn splice(mut argv: Vec<String>, pairs: Vec<(String, String)>) -> Result<Vec<String>, CliError> {
    let mut command = None;
    let mut flags = Vec::new();
    for (k, v) in pairs {
        if k == "command" {
            command = Some(v);
        } else {
            flags.push((k, v));
        }
    }
    let at = match subcommand_index(&argv) {
        Some(i) => i,
        None => {
            let c = command.ok_or_else(|| CliError::validation("no subcommand given and the config has no `command` key"))?;
            argv.push(c);
            argv.len() - 1
        }
    };
    let given: HashSet<String> = argv[at + 1..]
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).replace('_', "-"))
        .collect();
    let inserted: Vec<String> = flags
        .into_iter()
        .filter(|(k, _)| !given.contains(k))
        .map(|(k, v)| format!("--{k}={v}"))
        .collect();
    argv.splice(at + 1..at + 1, inserted);
    Ok(argv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambdas {
    Single(f64),
    Grid { a: f64, b: f64, n: usize },
}

impl Lambdas {
    pub const DEFAULT_GRID: Lambdas = Lambdas::Grid { a: 0.0, b: 8.0, n: 33 };

    pub fn parse_grid(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::validation(format!("lambda grid `{s}` must look like a:b:n"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        Ok(Lambdas::Grid {
            a: a.parse().map_err(|_| bad())?,
            b: b.parse().map_err(|_| bad())?,
            n: n.parse().map_err(|_| bad())?,
        })
    }

    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match *self {
            Lambdas::Single(l) if l >= 0.0 && l.is_finite() => Ok(vec![l]),
            Lambdas::Single(l) => Err(CliError::validation(format!("lambda must be finite and non-negative, got {l}"))),
            Lambdas::Grid { a, b, n } => Ok(lambda_grid(a, b, n)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Risk,
    Curve,
}

/// Everything a `risk` or `curve` run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: String,
    pub dim: usize,
    pub loss: String,
    pub form: FormArg,
    pub omega: f64,
    pub estimators: Vec<String>,
    pub lambdas: Lambdas,
    pub method: MethodArg,
    pub mc_n: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// The validated objects behind an [`ExperimentConfig`].
pub struct Experiment {
    pub model: ModelDensity,
    pub loss: BalancedLoss,
    pub estimators: Vec<BaranchikEstimator>,
    pub grid: Vec<f64>,
    pub method: RiskMethod,
}

impl ExperimentConfig {
    pub fn from_args(kind: ExperimentKind, a: &ExperimentArgs) -> Result<Self, CliError> {
        let lambdas = match (a.lambda, &a.lambda_grid) {
            (Some(l), _) => Lambdas::Single(l),
            (None, Some(g)) => Lambdas::parse_grid(g)?,
            (None, None) if kind == ExperimentKind::Curve => Lambdas::DEFAULT_GRID,
            (None, None) => return Err(CliError::validation("risk needs --lambda or --lambda-grid")),
        };
        if kind == ExperimentKind::Risk && a.estimators.len() != 1 {
            return Err(CliError::validation("risk takes exactly one --estimator; use curve for several"));
        }
        Ok(Self {
            kind,
            model: a.model.clone(),
            dim: a.dim,
            loss: a.loss.clone(),
            form: a.form,
            omega: a.omega,
            estimators: a.estimators.clone(),
            lambdas,
            method: a.method,
            mc_n: a.mc_n,
            seed: a.seed,
            out: a.out.clone(),
            format: a.format,
        })
    }

    /// Parses the text written by [`ExperimentConfig::emit`].
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let argv = splice(vec!["bshrink".into()], parse_pairs(text, "config")?)?;
        let cli = Cli::try_parse_from(argv).map_err(|e| CliError::validation(e.to_string()))?;
        match cli.command {
            Command::Risk(a) => Self::from_args(ExperimentKind::Risk, &a),
            Command::Curve(a) => Self::from_args(ExperimentKind::Curve, &a),
            _ => Err(CliError::validation("config does not describe a risk or curve run")),
        }
    }

    pub fn emit(&self) -> String {
        let mut lines = vec![
            format!(
                "command = {}",
                match self.kind {
                    ExperimentKind::Risk => "risk",
                    ExperimentKind::Curve => "curve",
                }
            ),
            format!("model = {}", self.model),
            format!("dim = {}", self.dim),
            format!("loss = {}", self.loss),
            format!("form = {}", value_name(self.form)),
            format!("omega = {}", self.omega),
        ];
        lines.extend(self.estimators.iter().map(|e| format!("estimator = {e}")));
        lines.push(match self.lambdas {
            Lambdas::Single(l) => format!("lambda = {l}"),
            Lambdas::Grid { a, b, n } => format!("lambda-grid = {a}:{b}:{n}"),
        });
        lines.push(format!("method = {}", value_name(self.method)));
        lines.push(format!("mc-n = {}", self.mc_n));
        lines.push(format!("seed = {}", self.seed));
        if let Some(out) = &self.out {
            lines.push(format!("out = {}", out.display()));
        }
        if let Some(f) = self.format {
            lines.push(format!("format = {}", value_name(f)));
        }
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    /// Validates every component before any computation starts.
    pub fn build(&self) -> Result<Experiment, CliError> {
        let kind: ModelKind = self.model.parse()?;
        let model = ModelDensity::new(kind, self.dim)?;
        let shape: LossFn = self.loss.parse()?;
        let form = match self.form {
            FormArg::Rho => LossForm::Rho,
            FormArg::Ell => LossForm::Ell,
        };
        let loss = BalancedLoss::new(form, self.omega, shape)?;
        let estimators = self
            .estimators
            .iter()
            .map(|e| e.parse::<BaranchikEstimator>())
            .collect::<Result<Vec<_>, _>>()?;
        let grid = self.lambdas.values()?;
        let method = match self.method {
            MethodArg::Quad => RiskMethod::Quadrature,
            MethodArg::Mc if self.mc_n < 100 => {
                return Err(CliError::validation(format!("--mc-n must be at least 100, got {}", self.mc_n)))
            }
            MethodArg::Mc => RiskMethod::Mc {
                n: self.mc_n,
                seed: self.seed,
            },
        };
        Ok(Experiment {
            model,
            loss,
            estimators,
            grid,
            method,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.emit()).map_err(|e| CliError::io(path, e))
    }
}

fn value_name<T: clap::ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Curve,
            model: "mix:0.5:0.25,2:0.75".into(),
            dim: 6,
            loss: "refnorm:alpha=0.5".into(),
            form: FormArg::Ell,
            omega: 0.1 + 0.2,
            estimators: vec!["baranchik:b=0.5,c=1".into(), "js:b=0.5".into(), "x".into()],
            lambdas: Lambdas::Grid { a: 0.0, b: 7.3, n: 12 },
            method: MethodArg::Mc,
            mc_n: 5000,
            seed: 42,
            out: Some(PathBuf::from("out/curve.json")),
            format: Some(Format::Json),
        }
    }

    #[test]
    fn emit_then_parse_round_trips() {
        let cfg = sample();
        assert_eq!(ExperimentConfig::parse(&cfg.emit()).unwrap(), cfg);
        let single = ExperimentConfig {
            kind: ExperimentKind::Risk,
            estimators: vec!["x".into()],
            lambdas: Lambdas::Single(1.0 / 3.0),
            out: None,
            format: None,
            ..cfg
        };
        assert_eq!(ExperimentConfig::parse(&single.emit()).unwrap(), single);
    }

    #[test]
    fn splice_inserts_after_subcommand_and_respects_flags() {
        let pairs = parse_pairs("# comment\nomega = 0.2\nmc_n = 10\n\ndim=6\n", "t").unwrap();
        let out = splice(argv("bshrink --threads 2 risk --omega 0.5"), pairs).unwrap();
        assert_eq!(out, argv("bshrink --threads 2 risk --mc-n=10 --dim=6 --omega 0.5"));
    }

    #[test]
    fn config_can_name_the_command() {
        let pairs = parse_pairs("command = verify\nsuite = covariance", "t").unwrap();
        assert_eq!(splice(argv("bshrink"), pairs).unwrap(), argv("bshrink verify --suite=covariance"));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_pairs("omega 0.5", "t").is_err());
        assert!(parse_pairs("bad key = 1", "t").is_err());
        assert!(Lambdas::parse_grid("0:8").is_err());
        assert!(Lambdas::parse_grid("0:8:x").is_err());
    }

    #[test]
    fn build_validates_every_component() {
        let mut cfg = sample();
        assert!(cfg.build().is_ok());
        cfg.estimators.push("js:b=-1".into());
        assert!(cfg.build().is_err());
        let mut cfg = sample();
        cfg.omega = 1.0;
        assert!(cfg.build().is_err());
        let mut cfg = sample();
        cfg.lambdas = Lambdas::Grid { a: 3.0, b: 1.0, n: 5 };
        assert!(cfg.build().is_err());
    }
}
