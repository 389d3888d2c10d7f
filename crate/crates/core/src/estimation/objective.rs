//! Quasi log-likelihood contributions, scores, and Hessians.
//!
//! With `z_t = (y_t - g_t) / sigma_t`, `D = d sigma_t^2`, `G = d g_t`,
//! `S = d^2 sigma_t^2`, `G2 = d^2 g_t`, `w = 2F(z) - 1` and `f` the logistic
//! density, the logistic contribution `l_t = -log sigma_t + log f(z_t)` has
//!
//! ```text
//! s_t = -D/(2 s^2) - (2 G s + D z)/(2 s^2) (1 - 2F(z))
//! H_t = (D D' - s^2 S)/(2 s^4) (z w - 1) + D D'/(4 s^4) (z w + 2 z^2 f)
//!       + (D G' + G D')/(2 s^3) (w + 2 z f) - w G2 / s + 2 f G G' / s^2
//! ```
//!
//! where `H_t = -d^2 l_t`. When `g` vanishes these reduce to
//! `s_t = D/(2 s^2) (z w - 1)` and the first two terms of `H_t`.
//!
//! A second, generic route differentiates `l_t = -log(sigma_t^2)/2 + rho(z_t)`
//! by the chain rule for any smooth `rho`; it serves the Gaussian objective
//! and cross-checks the closed forms above.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{centered_cdf, log_logistic_pdf, logistic_pdf};
use crate::math;
use crate::models::{ConditionalModel, FilterOutput, Order};

/// Which quasi-likelihood is maximised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// `-log sigma_t + log f(z_t)` with `f` the standard logistic density.
    Logistic,
    /// `-log sigma_t - z_t^2 / 2`.
    Gaussian,
}

/// How the score and Hessian are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assembly {
    /// Closed forms for the logistic objective (scale-only shortcut when `g = 0`).
    ClosedForm,
    /// Chain rule through `rho(z)`.
    Generic,
}

/// Objective value and derivatives summed over the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loglik: f64,
    /// `sum_t s_t` (present for order >= 1).
    pub score: DVector<f64>,
    /// `sum_t H_t = -sum_t d^2 l_t` (present for order 2).
    pub neg_hessian: DMatrix<f64>,
    /// `sum_t s_t s_t'` (present for order >= 1).
    pub outer: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub clamp_count: usize,
    pub n: usize,
}

#[inline]
fn rho(obj: Objective, z: f64) -> (f64, f64, f64) {
    match obj {
        Objective::Logistic => (log_logistic_pdf(z), -centered_cdf(z), -2.0 * logistic_pdf(z)),
        Objective::Gaussian => (-0.5 * z * z, -z, -1.0),
    }
}

/// Runs the filter and accumulates the objective up to `order`.
pub fn evaluate<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    theta: &[f64],
    objective: Objective,
    order: Order,
    assembly: Assembly,
) -> Result<Evaluation> {
    let f = model.filter(y, theta, order)?;
    evaluate_filtered(&f, y, objective, order, assembly)
}

/// As [`evaluate`] on an existing filter output.
pub fn evaluate_filtered(
    f: &FilterOutput,
    y: &[f64],
    objective: Objective,
    order: Order,
    assembly: Assembly,
) -> Result<Evaluation> {
    let (n, d) = (f.n, f.d);
    if order > f.order {
        return Err(Error::InvalidParameter(
            "filter was run at a lower derivative order".into(),
        ));
    }
    let mut loglik = 0.0;
    let mut score = vec![0.0; if order >= Order::First { d } else { 0 }];
    let mut outer = vec![0.0; if order >= Order::First { d * d } else { 0 }];
    let mut hess = vec![0.0; if order >= Order::Second { d * d } else { 0 }];
    let mut residuals = Vec::with_capacity(n);
    let mut st = vec![0.0; d];
    let closed = assembly == Assembly::ClosedForm && objective == Objective::Logistic;

    for t in 0..n {
        let s = f.sigma[t];
        let v = f.sigma2[t];
        let z = (y[t] - f.g[t]) / s;
        residuals.push(z);
        let (r0, r1, r2) = rho(objective, z);
        let lt = -math::ln(s) + r0;
        if !lt.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        loglik += lt;
        if order == Order::Value {
            continue;
        }
        let dd = f.dsigma2(t);
        let gg = f.dg(t);
        if closed {
            let w = centered_cdf(z);
            if f.mean_free {
                let c = (z * w - 1.0) / (2.0 * v);
                for a in 0..d {
                    st[a] = c * dd[a];
                }
            } else {
                // -D/(2v) - (2 G s + D z)/(2v) (1 - 2F) with 1 - 2F = -w
                for a in 0..d {
                    st[a] = -dd[a] / (2.0 * v) + (2.0 * gg[a] * s + dd[a] * z) / (2.0 * v) * w;
                }
            }
            if order == Order::Second {
                let fz = logistic_pdf(z);
                let s2 = f.d2sigma2(t);
                let v2 = v * v;
                let c1 = (z * w - 1.0) / (2.0 * v2);
                let c2 = (z * w + 2.0 * z * z * fz) / (4.0 * v2);
                if f.mean_free {
                    for a in 0..d {
                        for b in 0..d {
                            let ab = a * d + b;
                            hess[ab] += (dd[a] * dd[b] - v * s2[ab]) * c1 + dd[a] * dd[b] * c2;
                        }
                    }
                } else {
                    let g2 = f.d2g(t);
                    let c3 = (w + 2.0 * z * fz) / (2.0 * v * s);
                    let c4 = 2.0 * fz / v;
                    for a in 0..d {
                        for b in 0..d {
                            let ab = a * d + b;
                            hess[ab] += (dd[a] * dd[b] - v * s2[ab]) * c1
                                + dd[a] * dd[b] * c2
                                + (dd[a] * gg[b] + gg[a] * dd[b]) * c3
                                - w * g2[ab] / s
                                + gg[a] * gg[b] * c4;
                        }
                    }
                }
            }
        } else {
            // dz = -G/s - z D/(2v)
            let dz: Vec<f64> = (0..d).map(|a| -gg[a] / s - z * dd[a] / (2.0 * v)).collect();
            for a in 0..d {
                st[a] = -dd[a] / (2.0 * v) + r1 * dz[a];
            }
            if order == Order::Second {
                let s2 = f.d2sigma2(t);
                let g2 = f.d2g(t);
                let v2 = v * v;
                for a in 0..d {
                    for b in 0..d {
                        let ab = a * d + b;
                        let d2z = -g2[ab] / s + (gg[a] * dd[b] + dd[a] * gg[b]) / (2.0 * v * s)
                            - z * s2[ab] / (2.0 * v)
                            + 3.0 * z * dd[a] * dd[b] / (4.0 * v2);
                        let d2l = -s2[ab] / (2.0 * v) + dd[a] * dd[b] / (2.0 * v2) + r2 * dz[a] * dz[b] + r1 * d2z;
                        hess[ab] -= d2l;
                    }
                }
            }
        }
        for a in 0..d {
            score[a] += st[a];
            for b in 0..d {
                outer[a * d + b] += st[a] * st[b];
            }
        }
    }
    if !loglik.is_finite() || score.iter().chain(&hess).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let dm = |v: Vec<f64>| {
        if v.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            let mut m = DMatrix::from_row_slice(d, d, &v);
            // exact symmetry
            for a in 0..d {
                for b in 0..a {
                    let s = 0.5 * (m[(a, b)] + m[(b, a)]);
                    m[(a, b)] = s;
                    m[(b, a)] = s;
                }
            }
            m
        }
    };
    Ok(Evaluation {
        loglik,
        score: DVector::from_vec(score),
        neg_hessian: dm(hess),
        outer: dm(outer),
        residuals,
        clamp_count: f.clamp_count,
        n,
    })
}

/// `L_n(theta) = sum_t [-log sigma_t + log f(z_t)]`.
pub fn loglik<M: ConditionalModel + ?Sized>(model: &M, y: &[f64], theta: &[f64]) -> Result<f64> {
    Ok(evaluate(model, y, theta, Objective::Logistic, Order::Value, Assembly::ClosedForm)?.loglik)
}

/// `sum_t s_t(theta)` of the logistic objective.
pub fn score<M: ConditionalModel + ?Sized>(model: &M, y: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
    Ok(evaluate(model, y, theta, Objective::Logistic, Order::First, Assembly::ClosedForm)?.score)
}

/// `sum_t H_t(theta)` with `H_t = -d^2 l_t / d theta d theta'`.
pub fn hessian<M: ConditionalModel + ?Sized>(model: &M, y: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
    Ok(evaluate(
        model,
        y,
        theta,
        Objective::Logistic,
        Order::Second,
        Assembly::ClosedForm,
    )?
    .neg_hessian)
}
