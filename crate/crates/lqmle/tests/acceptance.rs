//! Acceptance criteria, one test each. Every test prints a single
//! `[PASS]` / `[FAIL]` line to stderr (bypassing output capture) before
//! asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use clap::Parser;
use lqmle::{run, Cli};
use lqmle_core::diagnostics::{aic, hill_estimator, residual_diagnostics, DiagnosticsOptions};
use lqmle_core::distribution::InnovationDist;
use lqmle_core::estimation::{
    evaluate, fit, loglik, population_information, sandwich, sandwich_cov, scale_only_cov, structured_information,
    Assembly, FitOptions, Objective,
};
use lqmle_core::kernel::{h, log_logistic_pdf, logistic_pdf, score_kernel};
use lqmle_core::linalg::sym_spectral_norm;
use lqmle_core::models::{simulate, ConditionalModel, ModelSpec, Order};
use lqmle_core::montecarlo::{normality_sample, run_scenario, Estimator, McSummary, Scenario};
use lqmle_core::stats::ks_normal;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SEED: u64 = 2024;

fn line(id: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {id}: {detail}");
}

fn cli_body(args: &[&str]) -> String {
    let cli = Cli::try_parse_from(args).expect("arguments parse");
    let art = run(&cli).expect("command runs");
    assert!(art.deferred.is_none(), "{:?}", art.deferred);
    art.body
}

fn dar_i() -> (ModelSpec, Vec<f64>) {
    (ModelSpec::dar(1, 1).unwrap(), vec![1.0, 0.5, 0.3, 0.5])
}

fn arma_garch_i() -> (ModelSpec, Vec<f64>) {
    (ModelSpec::arma_garch(false), vec![0.3, 0.2, 0.2, 0.1, 0.3])
}

#[test]
fn c01_calibration_constants() {
    let t0 = Instant::now();
    let body = cli_body(&["lqmle", "calibrate", "--family", "all"]);
    let elapsed = t0.elapsed();
    let v: Value = serde_json::from_str(&body).unwrap();
    let got: Vec<(String, f64)> = v["constants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["family"].as_str().unwrap().to_string(), c["value"].as_f64().unwrap()))
        .collect();
    let want = [
        ("normal", 1.75),
        ("uniform", 2.85),
        ("t3", 1.25),
        ("t2", 0.96),
        ("stable", 1.69),
    ];
    let mut ok = got.len() == want.len();
    let mut detail = Vec::new();
    for ((name, value), (wname, target)) in got.iter().zip(want) {
        ok &= name == wname && (value - target).abs() <= 0.01;
        detail.push(format!("{name} {value:.4}"));
    }
    // E[eta tanh(eta/2)] = 1 exactly for the standard logistic law
    let psi = InnovationDist::logistic(1.0).psi(1e-12).unwrap();
    ok &= (psi - 1.0).abs() <= 1e-8 && elapsed < Duration::from_secs(30);
    line(
        "C1 calibration",
        ok,
        &format!(
            "{}; psi(logistic) - 1 = {:.1e}; {:.1?}",
            detail.join(", "),
            psi - 1.0,
            elapsed
        ),
    );
    assert!(ok);
}

/// Random admissible parameter for each model family.
fn random_instance(model: &ModelSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u = |a: f64, b: f64| a + (b - a) * rng.random::<f64>();
    match model {
        ModelSpec::Dar(_) => vec![u(-0.5, 0.5), u(-0.5, 0.5), u(0.2, 2.0), u(0.05, 0.5)],
        ModelSpec::Garch(_) => vec![u(0.05, 0.5), u(0.05, 0.3), u(0.1, 0.6)],
        ModelSpec::ArmaGarch(_) => vec![u(-0.5, 0.5), u(-0.5, 0.5), u(0.1, 0.5), u(0.05, 0.3), u(0.1, 0.5)],
        ModelSpec::Expar(_) => vec![u(-0.5, 0.5), u(-0.4, 0.4), u(0.2, 2.0)],
    }
}

#[test]
fn c02_derivative_oracles() {
    let t0 = Instant::now();
    let models = [
        ModelSpec::dar(1, 1).unwrap(),
        ModelSpec::garch(1, 1).unwrap(),
        ModelSpec::arma_garch(false),
        ModelSpec::expar(1).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_s, mut worst_h) = (0.0f64, 0.0f64);
    for m in &models {
        for _ in 0..10 {
            let theta = random_instance(m, &mut rng);
            let y = simulate(m, &theta, 300, &InnovationDist::logistic(1.0), rng.random(), 0).unwrap();
            let e = evaluate(m, &y, &theta, Objective::Logistic, Order::Second, Assembly::ClosedForm).unwrap();
            let d = theta.len();
            let l = |t: &[f64]| loglik(m, &y, t).unwrap();
            let at = |i: usize, hi: f64, j: usize, hj: f64| {
                let mut t = theta.clone();
                t[i] += hi;
                t[j] += hj;
                l(&t)
            };
            let mut s_fd = DVector::zeros(d);
            let mut h_fd = DMatrix::zeros(d, d);
            for i in 0..d {
                let hs = 1e-5 * theta[i].abs().max(1.0);
                s_fd[i] = (at(i, hs, i, 0.0) - at(i, -hs, i, 0.0)) / (2.0 * hs);
                let hi = 1e-4 * theta[i].abs().max(1.0);
                for j in 0..d {
                    let hj = 1e-4 * theta[j].abs().max(1.0);
                    // negative second difference of the objective
                    h_fd[(i, j)] = -(at(i, hi, j, hj) - at(i, hi, j, -hj) - at(i, -hi, j, hj) + at(i, -hi, j, -hj))
                        / (4.0 * hi * hj);
                }
            }
            worst_s = worst_s.max((&e.score - &s_fd).norm() / s_fd.norm().max(1.0));
            worst_h = worst_h.max((&e.neg_hessian - &h_fd).norm() / h_fd.norm());
        }
    }
    let elapsed = t0.elapsed();
    let ok = worst_s <= 1e-5 && worst_h <= 1e-4 && elapsed < Duration::from_secs(60);
    line(
        "C2 derivative oracles",
        ok,
        &format!("40 instances, max rel err score {worst_s:.1e}, Hessian {worst_h:.1e}; {elapsed:.1?}"),
    );
    assert!(ok);
}

#[test]
fn c03_concavity_and_monotone_ascent() {
    // (log f)'' from differences of the score kernel against -2f, and against
    // the identity f = 1 / (4 cosh^2(x/2)) where differences lose precision.
    let mut kernel_ok = true;
    let mut worst = 0.0f64;
    for i in -600..=600 {
        let x = i as f64 * 0.05;
        let f = logistic_pdf(x);
        let second = -2.0 * f;
        kernel_ok &= second < 0.0;
        let oracle = if x.abs() <= 10.0 {
            let h = 1e-4;
            (score_kernel(x + h) - score_kernel(x - h)) / (2.0 * h)
        } else {
            -0.5 / (x / 2.0).cosh().powi(2)
        };
        let rel = (second - oracle).abs() / oracle.abs();
        worst = worst.max(rel);
        kernel_ok &= rel < 1e-6;
        // log f itself, against its closed form
        kernel_ok &= (log_logistic_pdf(x) - f.ln()).abs() < 1e-12 * (1.0 + x.abs());
    }
    let models = [
        ModelSpec::dar(1, 1).unwrap(),
        ModelSpec::garch(1, 1).unwrap(),
        ModelSpec::arma_garch(false),
        ModelSpec::expar(1).unwrap(),
    ];
    let dists = [
        InnovationDist::logistic(1.0),
        InnovationDist::normal(1.75),
        InnovationDist::student_t(2.0, 0.96),
        InnovationDist::stable(1.69, 1.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut fits, mut steps, mut decreases, mut errors) = (0, 0, 0, 0);
    for k in 0..200 {
        let m = &models[k % 4];
        let theta = random_instance(m, &mut rng);
        let y = simulate(m, &theta, 200, &dists[(k / 4) % 4], rng.random(), 0).unwrap();
        let opts = FitOptions {
            seed: rng.random(),
            ..FitOptions::default()
        };
        match fit(m, &y, None, &opts) {
            Ok(f) => {
                fits += 1;
                steps += f.trace.len() - 1;
                decreases += f.trace.windows(2).filter(|w| w[1] < w[0]).count();
            }
            Err(_) => errors += 1,
        }
    }
    let ok = kernel_ok && decreases == 0 && fits > 0;
    line(
        "C3 concavity / monotone ascent",
        ok,
        &format!(
            "(log f)'' = -2f < 0 on |x| <= 30 (max rel err {worst:.1e}); {fits} fits ({errors} errors), {steps} accepted steps, {decreases} decreases"
        ),
    );
    assert!(ok);
}

fn estimation_run(model: ModelSpec, theta0: Vec<f64>, dist: InnovationDist, estimator: Estimator) -> McSummary {
    let mut s = Scenario::new("acceptance", model, theta0, dist);
    s.n = 400;
    s.reps = 200;
    s.seed = SEED;
    s.estimator = estimator;
    s.drop_boundary = false;
    run_scenario(&s).unwrap()
}

#[test]
fn c04_dar_bias_and_sd() {
    let t0 = Instant::now();
    let (m, theta) = dar_i();
    let sm = estimation_run(m, theta, InnovationDist::logistic(1.0), Estimator::Lqmle);
    let elapsed = t0.elapsed();
    let reference_sd = [0.105, 0.069, 0.076, 0.053];
    let mut ok = elapsed < Duration::from_secs(300);
    let mut detail = Vec::new();
    for (c, p) in sm.coefficients.iter().zip(reference_sd) {
        let ratio = c.sd / p;
        ok &= c.abs_bias <= 0.03 && (0.7..=1.4).contains(&ratio);
        detail.push(format!("{} bias {:+.4} sd {:.3} ({:.2}x)", c.name, c.bias, c.sd, ratio));
    }
    line(
        "C4 DAR scenario I estimation",
        ok,
        &format!("{}; {} failures; {elapsed:.1?}", detail.join(", "), sm.failures),
    );
    assert!(ok);
}

#[test]
fn c05_robustness_ordering() {
    let (m, theta) = arma_garch_i();
    let dists = [
        ("0.96 t2", InnovationDist::student_t(2.0, 0.96), true),
        ("S(1.69)", InnovationDist::stable(1.69, 1.0), true),
        ("N(0, 1.75^2)", InnovationDist::normal(1.75), false),
        ("U(-2.85, 2.85)", InnovationDist::uniform(2.85), false),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, dist, lqmle_wins) in dists {
        let l = estimation_run(m, theta.clone(), dist.clone(), Estimator::Lqmle);
        let g = estimation_run(m, theta.clone(), dist, Estimator::Gqmle);
        for j in 0..2 {
            let (sl, sg) = (l.coefficients[j].sd, g.coefficients[j].sd);
            ok &= (sl < sg) == lqmle_wins;
            detail.push(format!("{name} {} {sl:.3}/{sg:.3}", l.coefficients[j].name));
        }
    }
    line("C5 LQMLE/GQMLE SD ordering", ok, &detail.join(", "));
    assert!(ok);
}

const SIZE_POWER_GRID: &str = r#"
reps = 500
n = 400

[[scenario]]
name = "dar"
model = "dar"
order = [1, 1]
theta0 = [1.0, 0.5, 0.3, 0.5]
dist = [{ family = "logistic" }, { family = "normal", scale = 1.75 }]
alternatives = [1.0, 1.1, 1.3, 1.5]
restriction = { rows = [[1.0, 1.0, 1.0, 1.0]] }

[[scenario]]
name = "arma-garch"
model = "arma-garch"
no_intercept = true
theta0 = [0.3, 0.2, 0.2, 0.1, 0.3]
dist = [{ family = "logistic" }, { family = "normal", scale = 1.75 }]
alternatives = [1.0, 1.1, 1.3, 1.5]
restriction = { rows = [[1.0, 1.0, 2.0, 3.0, 1.0]] }
"#;

#[test]
fn c06_size_and_power() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    std::fs::write(&cfg, SIZE_POWER_GRID).unwrap();
    let t0 = Instant::now();
    let seed = SEED.to_string();
    let body = cli_body(&["lqmle", "mc", "--config", cfg.to_str().unwrap(), "--seed", &seed]);
    let elapsed = t0.elapsed();
    let v: Value = serde_json::from_str(&body).unwrap();
    let cells = v["cells"].as_array().unwrap();
    let mut ok = elapsed < Duration::from_secs(900) && cells.len() == 16;
    let mut detail = Vec::new();
    for scen in ["dar", "arma-garch"] {
        for fam in ["logistic", "normal"] {
            for test in ["wald", "lm"] {
                let rate = |alt: f64| {
                    cells
                        .iter()
                        .find(|c| {
                            c["scenario"] == scen
                                && c["dist"]["family"] == fam
                                && c["alternative_scale"].as_f64() == Some(alt)
                        })
                        .and_then(|c| c[test]["rate"].as_f64())
                        .unwrap_or(f64::NAN)
                };
                let r: Vec<f64> = [1.0, 1.1, 1.3, 1.5].iter().map(|a| rate(*a)).collect();
                ok &= (0.02..=0.09).contains(&r[0]) && r[1] <= r[2] && r[2] <= r[3] && r[3] >= 0.85;
                detail.push(format!(
                    "{scen}/{fam}/{test} {:.3} {:.3} {:.3} {:.3}",
                    r[0], r[1], r[2], r[3]
                ));
            }
        }
    }
    line(
        "C6 size and power",
        ok,
        &format!("{}; {elapsed:.1?}", detail.join(", ")),
    );
    assert!(ok);
}

#[test]
fn c07_asymptotic_normality() {
    let (m, theta) = dar_i();
    let mut s = Scenario::new("normality", m, theta, InnovationDist::normal(1.75));
    s.n = 400;
    s.reps = 500;
    s.seed = SEED;
    s.drop_boundary = false;
    let ns = normality_sample(&s).unwrap();
    let names = m.param_names();
    let mut ok = true;
    let mut detail = Vec::new();
    for j in 0..m.dim() {
        let ks = ks_normal(&ns.standardized(j));
        ok &= ks.p_value > 0.01;
        detail.push(format!("{} D {:.3} p {:.3}", names[j], ks.statistic, ks.p_value));
    }
    line("C7 asymptotic normality (KS at 1%)", ok, &detail.join(", "));
    assert!(ok);
}

#[test]
fn c08_sandwich_consistency() {
    let m = ModelSpec::garch(1, 1).unwrap();
    let theta = [0.2, 0.1, 0.3];
    let logistic = InnovationDist::logistic(1.0);
    let y = simulate(&m, &theta, 20_000, &logistic, SEED, 0).unwrap();
    let e = evaluate(&m, &y, &theta, Objective::Logistic, Order::Second, Assembly::ClosedForm).unwrap();
    let n = y.len() as f64;
    let a_hat = &e.neg_hessian / n;
    let b_hat = &e.outer / n;
    let pop = population_information(&m, &theta, &logistic, 1_000_000, SEED + 1, 1000).unwrap();
    let rel_a = sym_spectral_norm(&(&a_hat - &pop.a0)) / sym_spectral_norm(&pop.a0);
    let rel_b = sym_spectral_norm(&(&b_hat - &pop.b0)) / sym_spectral_norm(&pop.b0);
    let ok_a = rel_a <= 0.03 && rel_b <= 0.03;
    line(
        "C8a sample vs population information",
        ok_a,
        &format!("rel spectral error A {rel_a:.4}, B {rel_b:.4}"),
    );

    // scale-only identity on fitted data
    let y = simulate(&m, &theta, 2000, &logistic, SEED + 2, 0).unwrap();
    let f = fit(&m, &y, None, &FitOptions::default()).unwrap();
    let so = scale_only_cov(&m, &y, &f).unwrap();
    let raw = sandwich_cov(&f).unwrap();
    let rel_raw = sym_spectral_norm(&(&raw - &so.cov)) / sym_spectral_norm(&so.cov);
    // declared unattainable: the sample-Hessian sandwich only matches the
    // factorised form asymptotically, so this line is reported, not asserted
    line(
        "C8b scale_only_cov vs sample sandwich_cov (declared unattainable at 1e-8)",
        rel_raw <= 1e-8,
        &format!("rel spectral difference {rel_raw:.2e}"),
    );
    let s = structured_information(&m, &y, &f.theta_hat.values).unwrap();
    let (structured, _) = sandwich(&s.a, &s.b, f.n).unwrap();
    let rel_structured = sym_spectral_norm(&(&structured - &so.cov)) / sym_spectral_norm(&so.cov);
    line(
        "C8b' scale_only_cov vs factorised-plug-in sandwich",
        rel_structured <= 1e-8,
        &format!("rel spectral difference {rel_structured:.2e}"),
    );
    assert!(ok_a);
    assert!(rel_structured <= 1e-8);
}

const DETERMINISM_GRID: &str = r#"
reps = 24
n = 200

[[scenario]]
name = "dar"
model = "dar"
theta0 = [1.0, 0.5, 0.3, 0.5]
dist = [{ family = "logistic" }, { family = "t", nu = 3 }]
alternatives = [1.0, 1.3]
restriction = { rows = [[1.0, 1.0, 1.0, 1.0]] }

[[scenario]]
name = "garch"
model = "garch"
theta0 = [0.2, 0.1, 0.3]
dist = { family = "stable" }
estimator = ["lqmle", "gqmle"]
drop_boundary = false
"#;

#[test]
fn c09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    std::fs::write(&cfg, DETERMINISM_GRID).unwrap();
    let c = cfg.to_str().unwrap();
    let one = cli_body(&["lqmle", "mc", "--config", c, "--seed", "11", "--workers", "1"]);
    let eight = cli_body(&["lqmle", "mc", "--config", c, "--seed", "11", "--workers", "8"]);
    let again = cli_body(&["lqmle", "mc", "--config", c, "--seed", "11", "--workers", "1"]);
    let v: Value = serde_json::from_str(&one).unwrap();
    let argv: Vec<String> = v["manifest"]["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_string())
        .collect();
    let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
    let replay = cli_body(&argv);
    let ok = one == eight && one == again && one == replay;
    line(
        "C9 determinism",
        ok,
        &format!(
            "1 vs 8 workers identical: {}, rerun identical: {}, manifest replay identical: {} ({} bytes)",
            one == eight,
            one == again,
            one == replay,
            one.len()
        ),
    );
    assert!(ok);
}

#[test]
fn c10_declared_substitutes() {
    let arithmetic = (aic(226.778, 6) + 441.556).abs() <= 0.01;
    let (m, theta) = dar_i();
    let logistic = InnovationDist::logistic(1.0);
    let mut identity = true;
    let mut toward_one = 0;
    let mut toward_one_at_truth = 0;
    let mut worst_gap = 0.0f64;
    for run in 0..50u64 {
        let mut gaps = [0.0; 2];
        let mut gaps_truth = [0.0; 2];
        for (k, n) in [200usize, 2000].into_iter().enumerate() {
            let y = simulate(&m, &theta, n, &logistic, SEED * 1000 + run, 0).unwrap();
            let f = fit(&m, &y, Some(&theta), &FitOptions::default()).unwrap();
            let d = residual_diagnostics(&f, &m, &DiagnosticsOptions::default()).unwrap();
            identity &= d.aic == -2.0 * f.loglik + 2.0 * theta.len() as f64;
            gaps[k] = (d.psi_hat - 1.0).abs();
            let e = evaluate(&m, &y, &theta, Objective::Logistic, Order::Value, Assembly::ClosedForm).unwrap();
            gaps_truth[k] = (e.residuals.iter().map(|v| h(*v)).sum::<f64>() / n as f64 - 1.0).abs();
        }
        worst_gap = worst_gap.max(gaps[0]).max(gaps[1]);
        toward_one += usize::from(gaps[1] < gaps[0]);
        toward_one_at_truth += usize::from(gaps_truth[1] < gaps_truth[0]);
    }
    // Hill on exact Pareto(1.5) tails
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let x: Vec<f64> = (0..10_000)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.5))
        .collect();
    let hill = hill_estimator(&x, 500).unwrap();
    let hill_ok = (hill / 1.5 - 1.0).abs() < 0.15;

    // At an interior estimate the scale equations sum to mean(h) = 1, so
    // psi_hat sits at 1 up to optimizer tolerance for every n and its
    // "movement" is rounding noise; reported, not asserted.
    line(
        "C10a psi_hat moves toward 1 from n = 200 to 2000 in >= 80% of 50 runs (declared unattainable)",
        toward_one >= 40,
        &format!(
            "{toward_one}/50 at theta_hat (max |psi_hat - 1| = {worst_gap:.1e}); {toward_one_at_truth}/50 for residuals at theta0"
        ),
    );
    let ok = arithmetic && identity && hill_ok && worst_gap <= 1e-6;
    line(
        "C10b AIC, diagnostics properties",
        ok,
        &format!(
            "AIC(226.778, 6) = {:.3}; AIC identity on 100 fits: {identity}; max |psi_hat - 1| = {worst_gap:.1e}; Hill(Pareto 1.5) = {hill:.3}",
            aic(226.778, 6)
        ),
    );
    assert!(ok);
}
