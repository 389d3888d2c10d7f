//! Lyapunov exponents and stationarity margins.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distribution::{Family, InnovationDist};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LyapunovKind {
    /// `E log|phi_1 + eta sqrt(alpha_1)|`, parameters `(phi_1, alpha_1)`.
    Dar11,
    /// `E log(beta_1 + alpha_1 eta^2)`, parameters `(alpha_1, beta_1)`.
    Garch11,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationarityKind {
    Lyapunov,
    /// A sufficient-condition margin: negative means the condition holds.
    Margin,
}

/// Negative `value` indicates a contracting recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityDiag {
    pub kind: StationarityKind,
    pub value: f64,
    /// Monte Carlo standard error (zero when computed exactly).
    pub std_error: f64,
}

impl StationarityDiag {
    pub fn margin(value: f64) -> Self {
        Self {
            kind: StationarityKind::Margin,
            value,
            std_error: 0.0,
        }
    }
}

/// Lyapunov exponent of the DAR(1,1) or GARCH(1,1) random recursion.
///
/// An `Empirical` law is averaged exactly over its support points; any other
/// law is sampled `draws` times under `seed`.
pub fn lyapunov_exponent(
    kind: LyapunovKind,
    params: &[f64; 2],
    dist: &InnovationDist,
    draws: usize,
    seed: u64,
) -> Result<StationarityDiag> {
    dist.validate()?;
    let term: &dyn Fn(f64) -> f64 = match kind {
        LyapunovKind::Dar11 => {
            let (phi, alpha) = (params[0], params[1]);
            if phi == 0.0 && alpha == 0.0 {
                return Err(Error::DegenerateInput("phi_1 = alpha_1 = 0 gives log 0".into()));
            }
            if alpha < 0.0 {
                return Err(Error::InvalidParameter("alpha_1 must be nonnegative".into()));
            }
            &move |e: f64| math::ln((phi + e * math::sqrt(alpha)).abs())
        }
        LyapunovKind::Garch11 => {
            let (alpha, beta) = (params[0], params[1]);
            if alpha < 0.0 || beta < 0.0 || (alpha == 0.0 && beta == 0.0) {
                return Err(Error::DegenerateInput(
                    "GARCH exponent needs nonnegative alpha_1, beta_1, not both zero".into(),
                ));
            }
            if alpha == 0.0 {
                return Ok(StationarityDiag {
                    kind: StationarityKind::Lyapunov,
                    value: math::ln(beta),
                    std_error: 0.0,
                });
            }
            &move |e: f64| math::ln(beta + alpha * e * e)
        }
    };
    let (mean, se) = if dist.family == Family::Empirical {
        let (m, s) = mean_and_se(dist.samples.iter().map(|&e| term(dist.scale * e)));
        (m, s)
    } else {
        if draws < 2 {
            return Err(Error::InvalidParameter("need at least two draws".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mean_and_se((0..draws).map(|_| term(dist.sample(&mut rng))))
    };
    if !mean.is_finite() {
        return Err(Error::DegenerateInput("Lyapunov average is not finite".into()));
    }
    Ok(StationarityDiag {
        kind: StationarityKind::Lyapunov,
        value: mean,
        std_error: se,
    })
}

fn mean_and_se<I: Iterator<Item = f64>>(it: I) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in it {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    if n < 2 {
        return (mean, 0.0);
    }
    (mean, math::sqrt(m2 / (n - 1) as f64 / n as f64))
}

pub(crate) fn abs_moment(dist: &InnovationDist, draws: usize, seed: u64) -> Result<f64> {
    moment(dist, draws, seed, |e| e.abs())
}

pub(crate) fn second_moment(dist: &InnovationDist, draws: usize, seed: u64) -> Result<f64> {
    moment(dist, draws, seed, |e| e * e)
}

fn moment(dist: &InnovationDist, draws: usize, seed: u64, f: impl Fn(f64) -> f64) -> Result<f64> {
    dist.validate()?;
    if dist.family == Family::Empirical {
        return Ok(mean_and_se(dist.samples.iter().map(|&e| f(dist.scale * e))).0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(mean_and_se((0..draws.max(2)).map(|_| f(dist.sample(&mut rng)))).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn degenerate_dar_is_rejected() {
        let r = lyapunov_exponent(
            LyapunovKind::Dar11,
            &[0.0, 0.0],
            &InnovationDist::logistic(1.0),
            1000,
            1,
        );
        assert!(matches!(r, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn garch_without_arch_term_is_log_beta() {
        let r = lyapunov_exponent(
            LyapunovKind::Garch11,
            &[0.0, 0.3],
            &InnovationDist::logistic(1.0),
            10,
            1,
        )
        .unwrap();
        assert_eq!(r.value, 0.3f64.ln());
    }

    #[test]
    fn dar_scenario_is_contracting() {
        let r = lyapunov_exponent(
            LyapunovKind::Dar11,
            &[0.5, 0.5],
            &InnovationDist::logistic(1.0),
            200_000,
            5,
        )
        .unwrap();
        assert!(r.std_error < 0.01);
        assert!(r.value + 3.0 * r.std_error < 0.0, "{r:?}");
    }

    #[test]
    fn empirical_average_is_exact() {
        let d = InnovationDist::empirical(vec![1.0, -1.0]);
        let r = lyapunov_exponent(LyapunovKind::Garch11, &[0.5, 0.25], &d, 0, 0).unwrap();
        assert!((r.value - 0.75f64.ln()).abs() < 1e-15);
        assert_eq!(r.std_error, 0.0);
    }
}
