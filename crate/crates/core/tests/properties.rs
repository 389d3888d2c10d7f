use lqmle_core::distribution::{calibrate_scale, Family, InnovationDist};
use lqmle_core::estimation::{
    evaluate, fit, fit_constrained, loglik, Assembly, FitOptions, LinearConstraint, Objective,
};
use lqmle_core::inference::wald_test;
use lqmle_core::models::{simulate, ConditionalModel, ModelSpec, Order};
use lqmle_core::montecarlo::{run_replication, run_scenario, summarize, Scenario};
use lqmle_core::stats::ks_test;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dar_i() -> (ModelSpec, Vec<f64>) {
    (ModelSpec::dar(1, 1).unwrap(), vec![1.0, 0.5, 0.3, 0.5])
}

fn garch_path(seed: u64, n: usize) -> (ModelSpec, Vec<f64>) {
    let m = ModelSpec::garch(1, 1).unwrap();
    let y = simulate(&m, &[0.2, 0.1, 0.3], n, &InnovationDist::logistic(1.0), seed, 0).unwrap();
    (m, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn calibrated_scale_gives_unit_psi(family in 0usize..3, nu in 2.5f64..10.0) {
        let (fam, shape) = [(Family::Normal, 0.0), (Family::Uniform, 0.0), (Family::StudentT, nu)][family];
        let tol = 1e-7;
        let c = calibrate_scale(fam, shape, tol).unwrap();
        let dist = match fam {
            Family::Normal => InnovationDist::normal(c),
            Family::Uniform => InnovationDist::uniform(c),
            _ => InnovationDist::student_t(shape, c),
        };
        let psi = dist.psi(tol * 1e-2).unwrap();
        prop_assert!((psi - 1.0).abs() <= 2.0 * tol, "psi = {psi}");
    }

    #[test]
    fn garch_score_matches_differences(a0 in 0.05f64..0.5, a1 in 0.05f64..0.3, b1 in 0.1f64..0.6, seed in 0u64..1000) {
        let (m, y) = garch_path(seed, 150);
        let theta = [a0, a1, b1];
        let e = evaluate(&m, &y, &theta, Objective::Logistic, Order::First, Assembly::ClosedForm).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut up = theta;
            let mut dn = theta;
            up[i] += h;
            dn[i] -= h;
            let fd = (loglik(&m, &y, &up).unwrap() - loglik(&m, &y, &dn).unwrap()) / (2.0 * h);
            prop_assert!((e.score[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn full_rank_constraint_returns_its_target(
        a0 in 0.1f64..0.4, a1 in 0.05f64..0.3, b1 in 0.1f64..0.5, c in 0.5f64..2.0,
    ) {
        let (m, y) = garch_path(9, 300);
        let target = [a0, a1, b1];
        // a non-identity full-rank R with R target = r
        let r_mat = DMatrix::from_row_slice(3, 3, &[c, 1.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0, 2.0]);
        let r = &r_mat * DVector::from_column_slice(&target);
        let con = LinearConstraint::new(r_mat, r).unwrap();
        let (f, _) = fit_constrained(&m, &y, &con, None, &FitOptions::default()).unwrap();
        for (got, want) in f.theta_hat.values.iter().zip(target) {
            prop_assert!((got - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn wald_ignores_row_scaling(k1 in -5.0f64..5.0, k2 in -5.0f64..5.0) {
        prop_assume!(k1.abs() > 1e-3 && k2.abs() > 1e-3);
        let (m, y) = garch_path(21, 500);
        let f = fit(&m, &y, None, &FitOptions::default()).unwrap();
        let r_mat = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let r = DVector::from_vec(vec![0.4, 0.2]);
        let base = wald_test(&f, &LinearConstraint::new(r_mat.clone(), r.clone()).unwrap()).unwrap();
        let scale = DMatrix::from_diagonal(&DVector::from_vec(vec![k1, k2]));
        let scaled = wald_test(&f, &LinearConstraint::new(&scale * r_mat, &scale * r).unwrap()).unwrap();
        prop_assert!((base.statistic - scaled.statistic).abs() <= 1e-10 * (1.0 + base.statistic));
    }
}

#[test]
fn fits_are_bit_identical() {
    let (m, y) = garch_path(3, 400);
    let opts = FitOptions {
        seed: 17,
        ..FitOptions::default()
    };
    assert_eq!(fit(&m, &y, None, &opts).unwrap(), fit(&m, &y, None, &opts).unwrap());
}

#[test]
fn summary_is_independent_of_execution_order() {
    let (m, theta) = dar_i();
    let mut s = Scenario::new("order", m, theta, InnovationDist::logistic(1.0));
    s.n = 200;
    s.reps = 40;
    s.seed = 77;
    let forward: Vec<_> = (0..s.reps).map(|i| run_replication(&s, i)).collect();
    let mut backward: Vec<_> = (0..s.reps).rev().map(|i| run_replication(&s, i)).collect();
    backward.rotate_left(13);
    assert_eq!(summarize(&s, forward).unwrap(), summarize(&s, backward).unwrap());
}

#[test]
fn p_values_are_uniform_under_the_null() {
    let (m, theta) = dar_i();
    let mut s = Scenario::new("null", m, theta.clone(), InnovationDist::logistic(1.0));
    s.n = 400;
    s.reps = 500;
    s.seed = 2024;
    let rhs: f64 = theta.iter().sum();
    s.constraint =
        Some(LinearConstraint::new(DMatrix::from_element(1, 4, 1.0), DVector::from_element(1, rhs)).unwrap());
    let reps: Vec<_> = (0..s.reps).map(|i| run_replication(&s, i)).collect();
    let records: Vec<_> = reps.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    assert!(records.len() >= 400);
    let uniform = |x: f64| x.clamp(0.0, 1.0);
    let wald: Vec<f64> = records.iter().map(|r| r.wald.unwrap().p_value).collect();
    let lm: Vec<f64> = records.iter().map(|r| r.lm.unwrap().p_value).collect();
    let dw = ks_test(&wald, uniform).statistic;
    let dl = ks_test(&lm, uniform).statistic;
    assert!(dw <= 0.08 && dl <= 0.08, "KS distance Wald {dw}, LM {dl}");
}

#[test]
fn bias_shrinks_with_sample_size() {
    let scenarios = [
        (dar_i(), InnovationDist::logistic(1.0)),
        (
            (ModelSpec::arma_garch(false), vec![0.3, 0.2, 0.2, 0.1, 0.3]),
            InnovationDist::normal(1.75),
        ),
        (
            (ModelSpec::garch(1, 1).unwrap(), vec![0.2, 0.1, 0.3]),
            InnovationDist::logistic(1.0),
        ),
        (
            (ModelSpec::expar(1).unwrap(), vec![0.3, 0.4, 1.0]),
            InnovationDist::logistic(1.0),
        ),
    ];
    for ((m, theta), dist) in scenarios {
        let run = |n: usize| {
            let mut s = Scenario::new("bias", m, theta.clone(), dist.clone());
            s.n = n;
            s.reps = 200;
            s.seed = 5;
            s.drop_boundary = false;
            run_scenario(&s).unwrap()
        };
        let (small, large) = (run(100), run(400));
        let mean_abs = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let b100 = mean_abs(&small.coefficients.iter().map(|c| c.abs_bias).collect::<Vec<_>>());
        let b400 = mean_abs(&large.coefficients.iter().map(|c| c.abs_bias).collect::<Vec<_>>());
        let se = mean_abs(&small.coefficients.iter().map(|c| c.mc_se).collect::<Vec<_>>());
        assert!(b400 <= b100 + 2.0 * se, "{}: {b400} vs {b100} (se {se})", m.label());
    }
}
