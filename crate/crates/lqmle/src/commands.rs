//! Subcommand implementations. Each returns the artifact text; writing it is
//! left to the caller.

use std::path::Path;
use std::time::Instant;

use lqmle_core::diagnostics::{diagnostics_at, residual_diagnostics, DiagnosticsOptions, DiagnosticsReport};
use lqmle_core::distribution::{calibrate_scale, calibrate_stable_index, Family, InnovationDist};
use lqmle_core::estimation::{fit, FitOptions, FitResult, LinearConstraint};
use lqmle_core::inference::{lm_test, lr_statistic, t_test, wald_test, TestResult};
use lqmle_core::models::{simulate, ConditionalModel, StationarityKind};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::cli::*;
use crate::data::{read_series, series_csv};
use crate::error::{CliError, Result};
use crate::grid::{cell_json, expand, parse_config, run_cells};
use crate::render::render;
use crate::report::{document, matrix, num, nums, resolve_seed, Manifest};

/// Output of a command. `deferred` is an error reported after the artifact
/// has been written (non-convergence, failed grid cells).
#[derive(Debug)]
pub struct Artifact {
    pub body: String,
    /// Manifest written next to a non-JSON artifact.
    pub sidecar: Option<String>,
    pub deferred: Option<CliError>,
}

impl Artifact {
    fn report(body: String) -> Self {
        Artifact {
            body,
            sidecar: None,
            deferred: None,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Artifact> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Test(a) => cmd_test(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Render(a) => {
            let text = std::fs::read_to_string(&a.report).map_err(|e| CliError::io(&a.report, e))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path: a.report.clone(),
                line: e.line() as u64,
                message: e.to_string(),
            })?;
            Ok(Artifact::report(render(&v, a.format == RenderFormat::Markdown)?))
        }
    }
}

fn theta_arg(theta: &Option<Vec<f64>>, d: usize) -> Result<Option<&[f64]>> {
    match theta {
        Some(t) if t.len() != d => Err(CliError::Usage(format!(
            "parameter has {} values, model needs {d}",
            t.len()
        ))),
        Some(t) => Ok(Some(t.as_slice())),
        None => Ok(None),
    }
}

fn not_converged(f: &FitResult) -> Option<CliError> {
    (!f.converged).then(|| {
        CliError::NotConverged(format!(
            "optimizer stopped after {} iterations without converging (score norm {:e})",
            f.iterations, f.score_norm
        ))
    })
}

fn coefficients(f: &FitResult) -> Value {
    Value::Array(
        (0..f.theta_hat.dim())
            .map(|j| {
                let t = t_test(f, j).ok();
                json!({
                    "name": f.theta_hat.names[j],
                    "estimate": num(f.theta_hat.values[j]),
                    "asd": f.se.as_ref().map(|s| num(s[j])),
                    "t": t.as_ref().map(|t| num(t.statistic)),
                    "p_value": t.as_ref().map(|t| num(t.p_value)),
                    "at_bound": f.boundary_active[j],
                })
            })
            .collect(),
    )
}

fn fit_json(f: &FitResult, model: &dyn ConditionalModel) -> Value {
    json!({
        "model": model.label(),
        "objective": match f.objective {
            lqmle_core::estimation::Objective::Logistic => "logistic",
            lqmle_core::estimation::Objective::Gaussian => "gaussian",
        },
        "n": f.n,
        "converged": f.converged,
        "iterations": f.iterations,
        "score_norm": num(f.score_norm),
        "clamp_count": f.clamp_count,
        "coefficients": coefficients(f),
        "loglik": num(f.loglik),
        "covariance": f.cov.as_ref().map(matrix),
        "rcond": num(f.rcond),
    })
}

fn diagnostics_json(d: &DiagnosticsReport) -> Value {
    json!({
        "loglik": num(d.loglik),
        "aic": num(d.aic),
        "stationarity": d.stationarity.map(|s| json!({
            "kind": match s.kind {
                StationarityKind::Lyapunov => "lyapunov",
                StationarityKind::Margin => "margin",
            },
            "value": num(s.value),
            "std_error": num(s.std_error),
        })),
        "hill": d.hill.map(num),
        "hill_k": d.hill_k,
        "hill_sweep": d.hill_sweep.iter().map(|(k, h)| json!({"k": k, "hill": num(*h)})).collect::<Vec<_>>(),
        "psi_hat": num(d.psi_hat),
        "residual_summary": {
            "min": num(d.residuals.min),
            "max": num(d.residuals.max),
            "quartiles": nums(&d.residuals.quartiles),
            "histogram": {
                "lower": num(d.residuals.histogram.lower),
                "upper": num(d.residuals.histogram.upper),
                "counts": d.residuals.histogram.counts,
            },
        },
        "flags": d.flags,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut a, b) {
        a.extend(b);
    }
    a
}

fn cmd_fit(a: &FitArgs) -> Result<Artifact> {
    let start = Instant::now();
    let (bytes, y) = read_series(&a.data.data, &a.data.csv_options()?)?;
    let model = a.model.build()?;
    let seed = resolve_seed(a.seed);
    let opts = FitOptions {
        objective: a.objective.objective(),
        max_iter: a.max_iter,
        random_starts: a.random_starts,
        seed,
        ..FitOptions::default()
    };
    let f = fit(&model, &y, theta_arg(&a.theta_init, model.dim())?, &opts)?;
    let diag = residual_diagnostics(
        &f,
        &model,
        &DiagnosticsOptions {
            hill_k: a.hill_k,
            draws: a.draws,
            seed,
        },
    )?;
    let mut resolved = a.clone();
    resolved.seed = Some(seed);
    let manifest = Manifest::new("fit", &resolved, Some(&bytes), Some(seed)).timed(a.timing, start);
    let body = merge(
        fit_json(&f, &model),
        json!({
            "aic": num(diag.aic),
            "diagnostics": diagnostics_json(&diag),
            "residuals": nums(&f.residuals),
        }),
    );
    Ok(Artifact {
        body: document("fit", &manifest, body),
        sidecar: None,
        deferred: not_converged(&f),
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Artifact> {
    let start = Instant::now();
    let model = a.model.build()?;
    theta_arg(&Some(a.theta.clone()), model.dim())?;
    let seed = resolve_seed(a.seed);
    let shape = a.dist.shape(a.nu, a.alpha);
    let scale = match a.scale {
        Some(s) => s,
        None => default_scale(a.dist, shape)?,
    };
    let dist = innovation(a.dist, scale, shape);
    let y = simulate(&model, &a.theta, a.n, &dist, seed, a.burn_in)?;
    let mut resolved = a.clone();
    resolved.seed = Some(seed);
    resolved.scale = Some(scale);
    match a.dist {
        DistKind::T => resolved.nu = Some(shape),
        DistKind::Stable => resolved.alpha = Some(shape),
        _ => {}
    }
    let csv = series_csv(&y);
    let manifest = Manifest::new("simulate", &resolved, None, Some(seed)).timed(a.timing, start);
    let sidecar = document(
        "simulate",
        &manifest,
        json!({
            "model": model.label(),
            "n": y.len(),
            "output_sha256": crate::data::sha256_hex(csv.as_bytes()),
        }),
    );
    Ok(Artifact {
        body: csv,
        sidecar: Some(sidecar),
        deferred: None,
    })
}

fn cmd_mc(a: &McArgs) -> Result<Artifact> {
    let start = Instant::now();
    let text = std::fs::read(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let text_str =
        std::str::from_utf8(&text).map_err(|_| CliError::Config(format!("{} is not UTF-8", a.config.display())))?;
    let cfg = parse_config(text_str)?;
    let seed = resolve_seed(a.seed.or(cfg.seed));
    let cells = expand(&cfg, seed)?;
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let summaries = run_cells(&cells, workers)?;
    let failed: Vec<String> = cells
        .iter()
        .zip(&summaries)
        .filter_map(|(c, s)| {
            s.as_ref()
                .err()
                .map(|e| format!("{} ({}, n = {}): {e}", c.group, c.dist_label, c.scenario.n))
        })
        .collect();
    let mut resolved = a.clone();
    resolved.seed = Some(seed);
    let manifest = Manifest::new("mc", &resolved, Some(&text), Some(seed)).timed(a.timing, start);
    let body = json!({
        "cells": cells.iter().zip(&summaries).map(|(c, s)| cell_json(c, s)).collect::<Vec<_>>(),
        "failed_cells": failed.len(),
    });
    let deferred = (!failed.is_empty()).then(|| {
        CliError::Numeric(lqmle_core::Error::InvalidScenario(format!(
            "{} cell(s) failed: {}",
            failed.len(),
            failed.join("; ")
        )))
    });
    Ok(Artifact {
        body: document("mc", &manifest, body),
        sidecar: None,
        deferred,
    })
}

/// Parses `r11,..,r1d=c1;r21,..=c2`.
pub fn parse_restriction(s: &str, d: usize) -> Result<LinearConstraint> {
    let bad = |m: String| CliError::Usage(format!("--restrict: {m}"));
    let mut flat = Vec::new();
    let mut rhs = Vec::new();
    for row in s.split(';').map(str::trim).filter(|r| !r.is_empty()) {
        let (lhs, c) = row
            .split_once('=')
            .ok_or_else(|| bad(format!("row {row:?} lacks '='")))?;
        let coefs: Vec<f64> = lhs
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("row {row:?} has a non-numeric coefficient")))?;
        if coefs.len() != d {
            return Err(bad(format!(
                "row {row:?} has {} coefficients, model needs {d}",
                coefs.len()
            )));
        }
        flat.extend(coefs);
        rhs.push(
            c.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("bad right-hand side in {row:?}")))?,
        );
    }
    if rhs.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(LinearConstraint::new(
        DMatrix::from_row_slice(rhs.len(), d, &flat),
        DVector::from_vec(rhs),
    )?)
}

fn test_json(t: &TestResult, level: f64) -> Value {
    json!({
        "statistic": num(t.statistic),
        "df": t.df,
        "p_value": num(t.p_value),
        "reject": t.rejects(level),
    })
}

fn cmd_test(a: &TestArgs) -> Result<Artifact> {
    let start = Instant::now();
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("--level must lie in (0, 1), got {}", a.level)));
    }
    let (bytes, y) = read_series(&a.data.data, &a.data.csv_options()?)?;
    let model = a.model.build()?;
    let constraint = a
        .restrict
        .as_deref()
        .map(|s| parse_restriction(s, model.dim()))
        .transpose()?;
    let seed = resolve_seed(a.seed);
    let opts = FitOptions {
        objective: a.objective.objective(),
        random_starts: a.random_starts,
        seed,
        ..FitOptions::default()
    };
    let f = fit(&model, &y, theta_arg(&a.theta_init, model.dim())?, &opts)?;
    let mut body = fit_json(&f, &model);
    let mut deferred = not_converged(&f);
    if let Some(c) = &constraint {
        let w = wald_test(&f, c)?;
        let (lm, cf, lambda) = lm_test(&model, &y, c, Some(&f.theta_hat.values), &opts)?;
        if deferred.is_none() {
            deferred = not_converged(&cf);
        }
        body = merge(
            body,
            json!({
                "restriction": {
                    "r_mat": matrix(&c.r_mat),
                    "r": nums(c.r.as_slice()),
                },
                "wald": test_json(&w, a.level),
                "lm": test_json(&lm, a.level),
                "lr_descriptive": num(lr_statistic(&f, &cf)),
                "constrained": {
                    "estimate": nums(&cf.theta_hat.values),
                    "loglik": num(cf.loglik),
                    "converged": cf.converged,
                    "multiplier": nums(lambda.as_slice()),
                },
            }),
        );
    }
    let mut resolved = a.clone();
    resolved.seed = Some(seed);
    let manifest = Manifest::new("test", &resolved, Some(&bytes), Some(seed)).timed(a.timing, start);
    body = merge(body, json!({ "level": a.level }));
    Ok(Artifact {
        body: document("test", &manifest, body),
        sidecar: None,
        deferred,
    })
}

fn calibration(family: &str, parameter: &str, value: f64, dist: InnovationDist, tol: f64) -> Result<Value> {
    let psi = dist.psi((tol * 1e-2).min(1e-10))?;
    Ok(json!({
        "family": family,
        "parameter": parameter,
        "value": num(value),
        "psi": num(psi),
        "abs_error": num((psi - 1.0).abs()),
    }))
}

fn calibrate_one(family: CalibrateFamily, nu: f64, tol: f64) -> Result<Value> {
    match family {
        CalibrateFamily::Logistic => calibration("logistic", "scale", 1.0, InnovationDist::logistic(1.0), tol),
        CalibrateFamily::Normal => {
            let s = calibrate_scale(Family::Normal, 0.0, tol)?;
            calibration("normal", "scale", s, InnovationDist::normal(s), tol)
        }
        CalibrateFamily::Uniform => {
            let s = calibrate_scale(Family::Uniform, 0.0, tol)?;
            calibration("uniform", "half_width", s, InnovationDist::uniform(s), tol)
        }
        CalibrateFamily::T => {
            let s = calibrate_scale(Family::StudentT, nu, tol)?;
            calibration(&format!("t{nu}"), "scale", s, InnovationDist::student_t(nu, s), tol)
        }
        CalibrateFamily::Stable => {
            let alpha = calibrate_stable_index(tol)?;
            calibration("stable", "alpha", alpha, InnovationDist::stable(alpha, 1.0), tol)
        }
        CalibrateFamily::All => unreachable!("expanded by the caller"),
    }
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<Artifact> {
    let start = Instant::now();
    if !(a.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", a.tol)));
    }
    let nu = a.nu.unwrap_or(3.0);
    let rows = match a.family {
        CalibrateFamily::All => vec![
            calibrate_one(CalibrateFamily::Normal, nu, a.tol)?,
            calibrate_one(CalibrateFamily::Uniform, nu, a.tol)?,
            calibrate_one(CalibrateFamily::T, 3.0, a.tol)?,
            calibrate_one(CalibrateFamily::T, 2.0, a.tol)?,
            calibrate_one(CalibrateFamily::Stable, nu, a.tol)?,
        ],
        f => vec![calibrate_one(f, nu, a.tol)?],
    };
    let manifest = Manifest::new("calibrate", a, None, None).timed(a.timing, start);
    Ok(Artifact::report(document(
        "calibrate",
        &manifest,
        json!({ "constants": rows }),
    )))
}

fn theta_from_report(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    v["coefficients"]
        .as_array()
        .and_then(|cs| cs.iter().map(|c| c["estimate"].as_f64()).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| CliError::Config(format!("{} is not a fit report", path.display())))
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<Artifact> {
    let start = Instant::now();
    let (bytes, y) = read_series(&a.data.data, &a.data.csv_options()?)?;
    let model = a.model.build()?;
    let theta = match (&a.theta, &a.from_report) {
        (Some(t), None) => t.clone(),
        (None, Some(p)) => theta_from_report(p)?,
        _ => return Err(CliError::Usage("give exactly one of --theta and --from-report".into())),
    };
    theta_arg(&Some(theta.clone()), model.dim())?;
    let seed = resolve_seed(a.seed);
    let d = diagnostics_at(
        &model,
        &y,
        &theta,
        &DiagnosticsOptions {
            hill_k: a.hill_k,
            draws: a.draws,
            seed,
        },
    )?;
    let mut resolved = a.clone();
    resolved.seed = Some(seed);
    resolved.theta = Some(theta.clone());
    resolved.from_report = None;
    let manifest = Manifest::new("diagnose", &resolved, Some(&bytes), Some(seed)).timed(a.timing, start);
    let body = json!({
        "model": model.label(),
        "theta": nums(&theta),
        "names": model.param_names(),
        "n": y.len(),
        "diagnostics": diagnostics_json(&d),
    });
    Ok(Artifact::report(document("diagnose", &manifest, body)))
}
