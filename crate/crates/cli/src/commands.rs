use std::fmt::Write as _;
use std::path::Path;

use bshrink::cutoffs::{closed_form, cutoff_ell, cutoff_rho, ClosedForm};
use bshrink::densities::{sample, ModelDensity, ModelKind};
use bshrink::estimators::{certify_multiplier, BaranchikEstimator};
use bshrink::lemma_lab::{run_suite, Suite};
use bshrink::losses::{certify_c1, certify_c3, BalancedLoss, CertGrid, LossFn};
use bshrink::risk::{benchmark_risk, risk_at_origin, risk_curve, RiskCurve, RiskMethod};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{CertifyArgs, Command, Condition, CutoffArgs, FormArg, Format, Fig1Args, MethodArg, SampleArgs, VerifyArgs};
use crate::config::{ExperimentConfig, ExperimentKind, Lambdas};
use crate::output::{emit, fmt_float, opt_float, resolve_format, to_json};
use crate::{CliError, EXIT_INVALID, EXIT_NUMERICAL};

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Cutoff(a) => cutoff(&a),
        Command::Risk(a) => experiment(ExperimentConfig::from_args(ExperimentKind::Risk, &a)?, a.save_config.as_deref()),
        Command::Curve(a) => experiment(ExperimentConfig::from_args(ExperimentKind::Curve, &a)?, a.save_config.as_deref()),
        Command::Sample(a) => sample_cmd(&a),
        Command::Certify(a) => certify(&a),
        Command::Verify(a) => verify(&a),
        Command::ReproduceFig1(a) => reproduce_fig1(&a),
    }
}

fn write_out(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    emit(text, out).map_err(|e| match out {
        Some(p) => CliError::io(p, e),
        None => CliError::validation(format!("cannot write to stdout: {e}")),
    })
}

fn cutoff(a: &CutoffArgs) -> Result<(), CliError> {
    let (report, context) = if let Some(spec) = &a.closed_form {
        let cf: ClosedForm = spec.parse()?;
        (closed_form(&cf)?, json!({ "closed_form": cf.to_string() }))
    } else {
        let (model, loss, dim) = (a.model.as_deref(), a.loss.as_deref(), a.dim);
        let (Some(model), Some(loss), Some(dim)) = (model, loss, dim) else {
            return Err(CliError::validation("cutoff needs --model, --dim and --loss, or --closed-form"));
        };
        let model = ModelDensity::new(model.parse::<ModelKind>()?, dim)?;
        let loss: LossFn = loss.parse()?;
        let report = match a.form {
            FormArg::Rho => cutoff_rho(&model, &loss, a.omega)?,
            FormArg::Ell => cutoff_ell(&model, &loss, a.omega)?,
        };
        let ctx = json!({
            "model": model.kind().to_string(),
            "dim": dim,
            "loss": loss.to_string(),
            "form": match a.form { FormArg::Rho => "rho", FormArg::Ell => "ell" },
        });
        (report, ctx)
    };
    let mut v = serde_json::to_value(&report).expect("serializable report");
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("a0_half".into(), json!(report.a0 / 2.0));
    if let Value::Object(ctx) = context {
        obj.extend(ctx);
    }
    write_out(&to_json(&v), a.out.as_deref())
}

fn curves_csv(curves: &[RiskCurve], with_estimator: bool) -> String {
    let mut s = String::from(if with_estimator {
        "estimator,lambda,risk,se,method\n"
    } else {
        "lambda,risk,se,method\n"
    });
    for c in curves {
        for p in &c.points {
            if with_estimator {
                // estimator specs contain commas
                let _ = write!(s, "\"{}\",", c.estimator);
            }
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_float(p.lambda),
                opt_float(p.risk),
                opt_float(p.se),
                c.method.label()
            );
        }
    }
    s
}

fn report_failures(curves: &[RiskCurve]) -> Result<(), CliError> {
    let mut failed = false;
    for c in curves {
        for p in c.failures() {
            failed = true;
            eprintln!(
                "error: {} at lambda {}: {}",
                c.estimator,
                fmt_float(p.lambda),
                p.error.as_deref().unwrap_or("")
            );
        }
    }
    if failed {
        Err(CliError::silent(EXIT_NUMERICAL))
    } else {
        Ok(())
    }
}

fn experiment(cfg: ExperimentConfig, save_config: Option<&Path>) -> Result<(), CliError> {
    let exp = cfg.build()?;
    if let Some(path) = save_config {
        cfg.save(path)?;
    }
    let curves = exp
        .estimators
        .iter()
        .map(|est| risk_curve(&exp.model, &exp.loss, est, &exp.grid, exp.method))
        .collect::<Result<Vec<_>, _>>()?;
    let text = match resolve_format(cfg.format, cfg.out.as_deref()) {
        Format::Csv => curves_csv(&curves, cfg.kind == ExperimentKind::Curve),
        Format::Json => match cfg.kind {
            ExperimentKind::Risk => to_json(&curves[0]),
            ExperimentKind::Curve => to_json(&json!({
                "benchmark": benchmark_risk(&exp.model, &exp.loss)?,
                "curves": curves,
            })),
        },
    };
    write_out(&text, cfg.out.as_deref())?;
    report_failures(&curves)
}

fn sample_cmd(a: &SampleArgs) -> Result<(), CliError> {
    let model = ModelDensity::new(a.model.parse::<ModelKind>()?, a.dim)?;
    let theta = match &a.theta {
        None => vec![0.0; a.dim],
        Some(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::validation(format!("bad coordinate `{t}` in --theta")))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let points = sample(&model, &theta, a.n, a.seed)?;
    let text = match resolve_format(a.format, a.out.as_deref()) {
        Format::Json => to_json(&points),
        Format::Csv => {
            let mut s = (1..=a.dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
            s.push('\n');
            for p in &points {
                s.push_str(&p.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        }
    };
    write_out(&text, a.out.as_deref())
}

fn certify(a: &CertifyArgs) -> Result<(), CliError> {
    let result = if let Some(spec) = &a.loss {
        let loss: LossFn = spec.parse()?;
        let grid = CertGrid::default();
        match a.condition {
            Condition::C1 => certify_c1(&loss, &grid),
            Condition::C3 => certify_c3(&loss, &grid),
        }
    } else {
        let est: BaranchikEstimator = a.estimator.as_deref().unwrap_or_default().parse()?;
        certify_multiplier(est.multiplier(), &CertGrid::multiplier())
    };
    let (certified, body) = match result {
        Ok(cert) => (true, serde_json::to_value(cert)),
        Err(report) => (false, serde_json::to_value(report)),
    };
    let mut v = body.expect("serializable certificate");
    v.as_object_mut()
        .expect("certificate is an object")
        .insert("certified".into(), json!(certified));
    write_out(&to_json(&v), a.out.as_deref())?;
    if certified {
        Ok(())
    } else {
        Err(CliError::silent(EXIT_INVALID))
    }
}

fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let suite: Suite = a.suite.parse()?;
    if a.mc_n < 100 {
        return Err(CliError::validation(format!("--mc-n must be at least 100, got {}", a.mc_n)));
    }
    let reports = run_suite(suite, a.seed, a.mc_n)?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    for r in reports.iter().filter(|r| !r.pass) {
        eprintln!("FAIL {} [{}]: worst {} > {}", r.property, r.sample, fmt_float(r.worst_violation), fmt_float(r.tolerance));
    }
    let v = json!({
        "suite": suite.to_string(),
        "seed": a.seed,
        "mc_n": a.mc_n,
        "pass": failed == 0,
        "checks": reports.len(),
        "failed": failed,
        "reports": reports,
    });
    write_out(&to_json(&v), a.out.as_deref())?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::silent(EXIT_INVALID))
    }
}

#[derive(Serialize)]
struct EstimatorSummary {
    estimator: String,
    column: String,
    within_cutoff: bool,
    origin_risk: f64,
    origin_gain_percent: f64,
    max_risk: Option<f64>,
    below_benchmark: Option<bool>,
}

fn reproduce_fig1(a: &Fig1Args) -> Result<(), CliError> {
    let Lambdas::Grid { a: lo, b: hi, n } = Lambdas::parse_grid(&a.lambda_grid)? else {
        unreachable!("parse_grid yields a grid")
    };
    let grid = bshrink::risk::lambda_grid(lo, hi, n)?;
    let method = match a.method {
        MethodArg::Quad => RiskMethod::Quadrature,
        MethodArg::Mc if a.mc_n < 100 => {
            return Err(CliError::validation(format!("--mc-n must be at least 100, got {}", a.mc_n)))
        }
        MethodArg::Mc => RiskMethod::Mc { n: a.mc_n, seed: a.seed },
    };
    let model = ModelDensity::kotz(1.0, 1.0, 4.0, 6)?;
    let omega = 0.5;
    let loss = BalancedLoss::rho(omega, LossFn::log1p())?;
    let estimators = [
        ("b0.5_c1", BaranchikEstimator::ratio(0.5, 1.0)?),
        ("b1_c1", BaranchikEstimator::ratio(1.0, 1.0)?),
        ("js_b0.5", BaranchikEstimator::james_stein(0.5)?),
    ];

    let cut = cutoff_rho(&model, loss.shape(), omega)?;
    let bench = benchmark_risk(&model, &loss)?;
    let curves = estimators
        .iter()
        .map(|(_, est)| risk_curve(&model, &loss, est, &grid, method))
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("lambda,benchmark");
    for (name, _) in &estimators {
        let _ = write!(csv, ",{name}");
        if matches!(method, RiskMethod::Mc { .. }) {
            let _ = write!(csv, ",{name}_se");
        }
    }
    csv.push('\n');
    for (i, lam) in grid.iter().enumerate() {
        let _ = write!(csv, "{},{}", fmt_float(*lam), fmt_float(bench));
        for c in &curves {
            let p = &c.points[i];
            let _ = write!(csv, ",{}", opt_float(p.risk));
            if matches!(method, RiskMethod::Mc { .. }) {
                let _ = write!(csv, ",{}", opt_float(p.se));
            }
        }
        csv.push('\n');
    }
    write_out(&csv, Some(&a.out))?;

    let b_max = cut.admissible_b_max.unwrap_or(f64::NAN);
    let mut summaries = Vec::new();
    for ((name, est), curve) in estimators.iter().zip(&curves) {
        let origin = risk_at_origin(&model, &loss, est)?;
        let max = curve.values().ok().map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max));
        summaries.push(EstimatorSummary {
            estimator: est.to_string(),
            column: name.to_string(),
            within_cutoff: est.shrink_b() <= b_max,
            origin_risk: origin,
            origin_gain_percent: 100.0 * (bench - origin) / bench,
            max_risk: max,
            below_benchmark: max.map(|m| m < bench),
        });
    }
    let summary = json!({
        "model": model.kind().to_string(),
        "dim": 6,
        "loss": "log1p",
        "form": "rho",
        "omega": omega,
        "a0": cut.a0,
        "a0_half": cut.a0 / 2.0,
        "I_3": cut.intermediates.get("I_3"),
        "I_2": cut.intermediates.get("I_2"),
        "admissible_b_max": b_max,
        "benchmark": bench,
        "method": method,
        "lambda_grid": { "a": lo, "b": hi, "n": n },
        "csv": a.out.display().to_string(),
        "estimators": summaries,
    });
    let text = to_json(&summary);
    write_out(&text, Some(&a.summary))?;
    write_out(&text, None)?;
    report_failures(&curves)
}
