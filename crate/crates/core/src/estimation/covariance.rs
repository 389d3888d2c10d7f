//! Sandwich covariance and its factorised forms.
//!
//! With innovations independent of the past the information matrices split
//! into innovation moments times scale/mean design moments:
//!
//! ```text
//! A = [1 + 2 E eta^2 f(eta)] E[D D'/(4 s^4)] + 2 E f(eta) E[G G'/s^2]
//! B = E{h(eta) - 1}^2        E[D D'/(4 s^4)] + E{2F(eta) - 1}^2 E[G G'/s^2]
//! ```
//!
//! When `g` vanishes, `A^-1 B A^-1 = 4 tau Omega^-1` with
//! `tau = E{h - 1}^2 / [1 + 2 E eta^2 f]^2` and `Omega = E[D D'/s^4]`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FitResult;
use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::kernel::{centered_cdf, h, logistic_pdf};
use crate::linalg::{sym_inverse, symmetrize};
use crate::models::{ConditionalModel, FilterOutput, Order};

/// `A^-1 B A^-1 / n` and the reciprocal condition number of `A`.
pub fn sandwich(a: &DMatrix<f64>, b: &DMatrix<f64>, n: usize) -> Result<(DMatrix<f64>, f64)> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let (ainv, rcond) = sym_inverse(a)?;
    let c = &ainv * b * &ainv / n as f64;
    Ok((symmetrize(&c), rcond))
}

/// Sandwich covariance from the fit's `A` and `B`.
pub fn sandwich_cov(fit: &FitResult) -> Result<DMatrix<f64>> {
    sandwich(&fit.a_hat, &fit.b_hat, fit.n).map(|(c, _)| c)
}

/// Innovation moments and design averages entering the factorised `A`, `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredInformation {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Average of `D D' / s^4`.
    pub omega: DMatrix<f64>,
    /// Average of `G G' / s^2`.
    pub gamma: DMatrix<f64>,
    pub mean_eta2_f: f64,
    pub mean_f: f64,
    pub mean_h_minus_1_sq: f64,
    pub mean_w_sq: f64,
}

struct Moments {
    eta2_f: f64,
    f: f64,
    h1: f64,
    w2: f64,
}

fn innovation_moments(eta: &[f64]) -> Moments {
    let n = eta.len() as f64;
    let mut m = Moments {
        eta2_f: 0.0,
        f: 0.0,
        h1: 0.0,
        w2: 0.0,
    };
    for &e in eta {
        let f = logistic_pdf(e);
        let w = centered_cdf(e);
        m.eta2_f += e * e * f;
        m.f += f;
        m.h1 += (h(e) - 1.0) * (h(e) - 1.0);
        m.w2 += w * w;
    }
    m.eta2_f /= n;
    m.f /= n;
    m.h1 /= n;
    m.w2 /= n;
    m
}

fn design_averages(f: &FilterOutput, skip: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = f.d;
    let mut omega = DMatrix::zeros(d, d);
    let mut gamma = DMatrix::zeros(d, d);
    let count = (f.n - skip) as f64;
    for t in skip..f.n {
        let v = f.sigma2[t];
        let ds = f.dsigma2(t);
        let dg = f.dg(t);
        for a in 0..d {
            for b in 0..d {
                omega[(a, b)] += ds[a] * ds[b] / (v * v);
                gamma[(a, b)] += dg[a] * dg[b] / v;
            }
        }
    }
    (omega / count, gamma / count)
}

fn assemble(omega: DMatrix<f64>, gamma: DMatrix<f64>, m: Moments) -> StructuredInformation {
    let a = &omega * ((1.0 + 2.0 * m.eta2_f) / 4.0) + &gamma * (2.0 * m.f);
    let b = &omega * (m.h1 / 4.0) + &gamma * m.w2;
    StructuredInformation {
        a: symmetrize(&a),
        b: symmetrize(&b),
        omega,
        gamma,
        mean_eta2_f: m.eta2_f,
        mean_f: m.f,
        mean_h_minus_1_sq: m.h1,
        mean_w_sq: m.w2,
    }
}

/// Plug-in of the factorised `A`, `B` built from residual moments and
/// design averages at `theta`.
pub fn structured_information<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    theta: &[f64],
) -> Result<StructuredInformation> {
    if y.is_empty() {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    let f = model.filter(y, theta, Order::First)?;
    let eta = f.residuals(y);
    let (omega, gamma) = design_averages(&f, 0);
    Ok(assemble(omega, gamma, innovation_moments(&eta)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleOnlyCov {
    /// `4 tau Omega^-1 / n`.
    pub cov: DMatrix<f64>,
    pub tau: f64,
    pub omega: DMatrix<f64>,
    pub rcond: f64,
}

/// Covariance `4 tau Omega^-1 / n` for models whose mean vanishes, with `tau`
/// and `Omega` estimated from the fit's residuals.
pub fn scale_only_cov<M: ConditionalModel + ?Sized>(model: &M, y: &[f64], fit: &FitResult) -> Result<ScaleOnlyCov> {
    if !model.mean_free() {
        return Err(Error::NotScaleOnly);
    }
    let s = structured_information(model, y, &fit.theta_hat.values)?;
    let tau = s.mean_h_minus_1_sq / ((1.0 + 2.0 * s.mean_eta2_f) * (1.0 + 2.0 * s.mean_eta2_f));
    let (inv, rcond) = sym_inverse(&s.omega)?;
    let cov = symmetrize(&(inv * (4.0 * tau / fit.n as f64)));
    Ok(ScaleOnlyCov {
        cov,
        tau,
        omega: s.omega,
        rcond,
    })
}

/// Monte Carlo approximation of the population `A`, `B` at `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationInformation {
    pub a0: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub tau: f64,
    pub detail: StructuredInformation,
}

/// Simulates one path of `draws` observations (after `burn_in`) and
/// averages the factorised information expressions along it; innovation
/// moments use the same `draws` innovations.
pub fn population_information<M: ConditionalModel + ?Sized>(
    model: &M,
    theta: &[f64],
    dist: &InnovationDist,
    draws: usize,
    seed: u64,
    burn_in: usize,
) -> Result<PopulationInformation> {
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least two draws".into()));
    }
    dist.validate()?;
    model.check_admissible(theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = dist.sample_n(&mut rng, draws + burn_in);
    let y = model.simulate_with(theta, &eta)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let f = model.filter(&y, theta, Order::First)?;
    let (omega, gamma) = design_averages(&f, burn_in);
    let kept: Vec<f64> = eta[burn_in..].to_vec();
    let detail = assemble(omega, gamma, innovation_moments(&kept));
    let tau = detail.mean_h_minus_1_sq / ((1.0 + 2.0 * detail.mean_eta2_f) * (1.0 + 2.0 * detail.mean_eta2_f));
    Ok(PopulationInformation {
        a0: detail.a.clone(),
        b0: detail.b.clone(),
        tau,
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{fit, FitOptions};
    use crate::linalg::sym_spectral_norm;
    use crate::models::{simulate, Dar, Garch};

    #[test]
    fn information_equality_case() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let (c, _) = sandwich(&a, &a, 50).unwrap();
        let inv = a.clone().try_inverse().unwrap() / 50.0;
        assert!((c - inv).norm() < 1e-14);
    }

    #[test]
    fn singular_information_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(sandwich(&a, &a, 10), Err(Error::SingularInformation(_))));
    }

    #[test]
    fn scale_only_identity() {
        let m = Garch::new(1, 1).unwrap();
        let y = simulate(&m, &[0.2, 0.1, 0.3], 800, &InnovationDist::logistic(1.0), 21, 0).unwrap();
        let f = fit(&m, &y, None, &FitOptions::default()).unwrap();
        let so = scale_only_cov(&m, &y, &f).unwrap();
        let s = structured_information(&m, &y, &f.theta_hat.values).unwrap();
        let (c, _) = sandwich(&s.a, &s.b, f.n).unwrap();
        let rel = sym_spectral_norm(&(&c - &so.cov)) / sym_spectral_norm(&so.cov);
        assert!(rel < 1e-8, "{rel}");
        // omega is a Gram average
        assert_eq!(so.omega.clone(), so.omega.transpose());
        assert!(crate::linalg::min_eigenvalue(&so.omega) >= 0.0);
    }

    #[test]
    fn scale_only_rejects_mean_models() {
        let m = Dar::new(1, 1).unwrap();
        let y = simulate(&m, &[1.0, 0.5, 0.3, 0.5], 200, &InnovationDist::logistic(1.0), 2, 0).unwrap();
        let f = fit(&m, &y, None, &FitOptions::default()).unwrap();
        assert!(matches!(scale_only_cov(&m, &y, &f), Err(Error::NotScaleOnly)));
    }

    #[test]
    fn residual_tau_tracks_population_tau() {
        let m = Garch::new(1, 1).unwrap();
        let theta = [0.2, 0.1, 0.3];
        let y = simulate(&m, &theta, 4000, &InnovationDist::logistic(1.0), 31, 0).unwrap();
        let f = fit(&m, &y, Some(&theta), &FitOptions::default()).unwrap();
        let so = scale_only_cov(&m, &y, &f).unwrap();
        let pop = population_information(&m, &theta, &InnovationDist::logistic(1.0), 200_000, 7, 100).unwrap();
        assert!((so.tau / pop.tau - 1.0).abs() < 0.05, "{} vs {}", so.tau, pop.tau);
    }
}
