//! Wald, Lagrange multiplier and t tests built on the sandwich covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::{fit_constrained, FitOptions, FitResult, LinearConstraint};
use crate::linalg::{rank, sym_inverse};
use crate::math;
use crate::models::ConditionalModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFamily {
    Wald,
    Lm,
    TStat,
}

impl TestFamily {
    pub fn name(self) -> &'static str {
        match self {
            TestFamily::Wald => "wald",
            TestFamily::Lm => "lm",
            TestFamily::TStat => "t",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub family: TestFamily,
    pub statistic: f64,
    /// Chi-square degrees of freedom; `None` for t statistics.
    pub df: Option<usize>,
    pub p_value: f64,
    pub constraint: Option<LinearConstraint>,
}

impl TestResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Upper tail `P(X > x)` of a chi-square variable with `df` degrees of freedom.
pub fn chisq_sf(x: f64, df: usize) -> f64 {
    if df == 0 || x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df as f64, 0.5 * x)
}

/// Regularized upper incomplete gamma `Q(a, x)`.
fn gamma_q(a: f64, x: f64) -> f64 {
    let log_prefix = a * math::ln(x) - x - math::ln_gamma(a);
    if x < a + 1.0 {
        // P(a, x) = x^a e^-x / Gamma(a + 1) * sum_k x^k / ((a+1)...(a+k))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut k = a;
        for _ in 0..10_000 {
            k += 1.0;
            term *= x / k;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * math::exp(log_prefix)).clamp(0.0, 1.0)
    } else {
        // modified Lentz for the continued fraction of Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut f = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (math::exp(log_prefix) * f).clamp(0.0, 1.0)
    }
}

/// Two-sided normal p-value `2(1 - Phi(|t|))`.
pub fn normal_two_sided(t: f64) -> f64 {
    math::erfc(t.abs() / math::SQRT_2)
}

fn check_constraint(c: &LinearConstraint, d: usize) -> Result<()> {
    if c.dim() != d {
        return Err(Error::ShapeMismatch {
            expected: d,
            got: c.dim(),
        });
    }
    let k = rank(&c.r_mat);
    if k < c.rows() {
        return Err(Error::RankDeficientR {
            rank: k,
            rows: c.rows(),
        });
    }
    Ok(())
}

/// `n (R theta - r)' (R A^-1 B A^-1 R')^-1 (R theta - r)` on `q` degrees of freedom.
pub fn wald_test(fit: &FitResult, constraint: &LinearConstraint) -> Result<TestResult> {
    let d = fit.theta_hat.dim();
    check_constraint(constraint, d)?;
    let (ainv, _) = sym_inverse(&fit.a_hat)?;
    let v = &ainv * &fit.b_hat * &ainv;
    let rm = &constraint.r_mat;
    let middle = rm * v * rm.transpose();
    let (mid_inv, _) = sym_inverse(&middle)?;
    let diff = constraint.residual(&fit.theta_hat.values);
    let stat = (fit.n as f64 * diff.dot(&(&mid_inv * &diff))).max(0.0);
    let q = constraint.rows();
    Ok(TestResult {
        family: TestFamily::Wald,
        statistic: stat,
        df: Some(q),
        p_value: chisq_sf(stat, q),
        constraint: Some(constraint.clone()),
    })
}

/// LM statistic from a constrained fit and its multiplier:
/// `n lambda' Lambda^-1 lambda` with
/// `Lambda = (R A^-1 R')^-1 R A^-1 B A^-1 R' (R A^-1 R')^-1` at the constrained estimate.
pub fn lm_statistic(
    constrained: &FitResult,
    lambda: &DVector<f64>,
    constraint: &LinearConstraint,
) -> Result<TestResult> {
    let d = constrained.theta_hat.dim();
    check_constraint(constraint, d)?;
    let q = constraint.rows();
    if lambda.len() != q {
        return Err(Error::ShapeMismatch {
            expected: q,
            got: lambda.len(),
        });
    }
    let rm = &constraint.r_mat;
    let (ainv, _) = sym_inverse(&constrained.a_hat)?;
    let (p_inv, _) = sym_inverse(&(rm * &ainv * rm.transpose()))?;
    let inner = rm * &ainv * &constrained.b_hat * &ainv * rm.transpose();
    let big_lambda: DMatrix<f64> = &p_inv * inner * &p_inv;
    let (bl_inv, _) = sym_inverse(&big_lambda)?;
    let stat = (constrained.n as f64 * lambda.dot(&(&bl_inv * lambda))).max(0.0);
    Ok(TestResult {
        family: TestFamily::Lm,
        statistic: stat,
        df: Some(q),
        p_value: chisq_sf(stat, q),
        constraint: Some(constraint.clone()),
    })
}

/// Runs the constrained fit and returns the LM test with the fit and multiplier.
pub fn lm_test<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    constraint: &LinearConstraint,
    theta_init: Option<&[f64]>,
    options: &FitOptions,
) -> Result<(TestResult, FitResult, DVector<f64>)> {
    check_constraint(constraint, model.dim())?;
    let (fit, lambda) = fit_constrained(model, y, constraint, theta_init, options)?;
    let test = lm_statistic(&fit, &lambda, constraint)?;
    Ok((test, fit, lambda))
}

/// `sqrt(n) theta_j / sqrt((A^-1 B A^-1)_jj)` with a two-sided normal p-value.
pub fn t_test(fit: &FitResult, j: usize) -> Result<TestResult> {
    let d = fit.theta_hat.dim();
    if j >= d {
        return Err(Error::ShapeMismatch { expected: d, got: j });
    }
    let (ainv, _) = sym_inverse(&fit.a_hat)?;
    let v = &ainv * &fit.b_hat * &ainv;
    let vjj = v[(j, j)];
    if !(vjj > 0.0) {
        return Err(Error::SingularInformation(0.0));
    }
    let theta = fit.theta_hat.values[j];
    let stat = if theta == 0.0 {
        0.0
    } else {
        math::sqrt(fit.n as f64) * theta / math::sqrt(vjj)
    };
    Ok(TestResult {
        family: TestFamily::TStat,
        statistic: stat,
        df: None,
        p_value: normal_two_sided(stat),
        constraint: None,
    })
}

/// `2 (L(theta_hat) - L(theta_tilde))`. Descriptive only: its null law depends
/// on `A = B`, which fails under misspecified innovations.
pub fn lr_statistic(unconstrained: &FitResult, constrained: &FitResult) -> f64 {
    2.0 * (unconstrained.loglik - constrained.loglik)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::InnovationDist;
    use crate::estimation::fit;
    use crate::models::{simulate, ModelSpec};
    use alloc::vec::Vec;
    use proptest::prelude::*;

    // odd df: sf = 2(1 - Phi(sqrt x)) + sqrt(2/pi) e^{-x/2} sum_{k=1}^{(df-1)/2} x^{k-1/2} / (1*3*...*(2k-1))
    fn odd_df_oracle(x: f64, df: usize) -> f64 {
        let s = x.sqrt();
        let mut total = 2.0 * (1.0 - math::normal_cdf(s));
        let mut term = s;
        let mut acc = 0.0;
        for k in 1..=(df - 1) / 2 {
            if k > 1 {
                term *= x / (2 * k - 1) as f64;
            }
            acc += term;
        }
        total += (2.0 / math::PI).sqrt() * (-x / 2.0).exp() * acc;
        total
    }

    // even df: sf = e^{-x/2} sum_{k<df/2} (x/2)^k / k!
    fn even_df_oracle(x: f64, df: usize) -> f64 {
        let h = x / 2.0;
        let mut term = 1.0;
        let mut acc = 1.0;
        for k in 1..df / 2 {
            term *= h / k as f64;
            acc += term;
        }
        (-h).exp() * acc
    }

    #[test]
    fn chisq_known_points() {
        assert_eq!(chisq_sf(0.0, 3), 1.0);
        assert!((chisq_sf(11.0705, 5) - 0.05).abs() < 1e-4);
        assert!((chisq_sf(3.841458820694124, 1) - 0.05).abs() < 1e-10);
    }

    #[test]
    fn chisq_matches_closed_forms() {
        for &x in &[0.01, 0.3, 1.0, 2.5, 4.0, 7.7, 11.0705, 20.0, 45.0] {
            for df in [1usize, 3, 5, 7] {
                let o = odd_df_oracle(x, df);
                assert!((chisq_sf(x, df) - o).abs() < 1e-10, "x {x} df {df}");
            }
            for df in [2usize, 4, 6, 10] {
                let o = even_df_oracle(x, df);
                assert!((chisq_sf(x, df) - o).abs() < 1e-10, "x {x} df {df}");
            }
        }
    }

    proptest! {
        #[test]
        fn chisq_sf_is_a_decreasing_probability(x in 0.0f64..60.0, dx in 0.0f64..5.0, df in 1usize..12) {
            let a = chisq_sf(x, df);
            let b = chisq_sf(x + dx, df);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a + 1e-15);
        }

        #[test]
        fn df1_is_squared_normal(x in 0.0f64..50.0) {
            let expect = 2.0 * (1.0 - math::normal_cdf(x.sqrt()));
            prop_assert!((chisq_sf(x, 1) - expect).abs() < 1e-10);
        }
    }

    fn dar_fit() -> (ModelSpec, Vec<f64>, FitResult) {
        let m = ModelSpec::dar(1, 1).unwrap();
        let y = simulate(&m, &[1.0, 0.5, 0.3, 0.5], 400, &InnovationDist::logistic(1.0), 77, 0).unwrap();
        let f = fit(&m, &y, None, &FitOptions::default()).unwrap();
        (m, y, f)
    }

    #[test]
    fn wald_at_estimate_is_zero() {
        let (_, _, f) = dar_fit();
        let r_mat = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 1.0]);
        let r = &r_mat * DVector::from_column_slice(&f.theta_hat.values);
        let t = wald_test(&f, &LinearConstraint::new(r_mat, r).unwrap()).unwrap();
        assert!(t.statistic < 1e-20);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wald_row_scaling_invariance() {
        let (_, _, f) = dar_fit();
        let r_mat = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 0.0, 1.0, -1.0, 0.0]);
        let r = DVector::from_vec(alloc::vec![2.3, 0.2]);
        let a = wald_test(&f, &LinearConstraint::new(r_mat.clone(), r.clone()).unwrap()).unwrap();
        let mut r2 = r_mat.clone();
        let mut v2 = r.clone();
        for j in 0..4 {
            r2[(1, j)] *= -3.5;
        }
        v2[1] *= -3.5;
        let b = wald_test(&f, &LinearConstraint::new(r2, v2).unwrap()).unwrap();
        assert!((a.statistic - b.statistic).abs() <= 1e-10 * (1.0 + a.statistic));
    }

    #[test]
    fn wald_identity_restriction() {
        let (_, _, f) = dar_fit();
        let target = [0.9, 0.45, 0.35, 0.45];
        let t = wald_test(&f, &LinearConstraint::pin(&target)).unwrap();
        let cov = f.cov.clone().unwrap();
        let diff = DVector::from_column_slice(&f.theta_hat.values) - DVector::from_column_slice(&target);
        let expect = diff.dot(&(cov.try_inverse().unwrap() * &diff));
        assert!((t.statistic - expect).abs() <= 1e-8 * expect);
        assert_eq!(t.df, Some(4));
    }

    #[test]
    fn lm_vanishes_when_constraint_is_inactive() {
        let (m, y, f) = dar_fit();
        let r_mat = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 1.0]);
        let r = &r_mat * DVector::from_column_slice(&f.theta_hat.values);
        let (t, _, _) = lm_test(
            &m,
            &y,
            &LinearConstraint::new(r_mat, r).unwrap(),
            None,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(t.statistic < 1e-6, "{}", t.statistic);
    }

    #[test]
    fn t_test_on_zero_coefficient() {
        let (_, _, mut f) = dar_fit();
        f.theta_hat.values[1] = 0.0;
        let t = t_test(&f, 1).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        let t0 = t_test(&f, 0).unwrap();
        let se = f.se.as_ref().unwrap()[0];
        assert!((t0.statistic - f.theta_hat.values[0] / se).abs() < 1e-10 * t0.statistic.abs());
        assert!(matches!(t_test(&f, 4), Err(Error::ShapeMismatch { .. })));
    }
}
