//! GARCH(p, q): `g_t = 0`,
//! `sigma_t^2 = alpha_0 + sum alpha_i y_{t-i}^2 + sum beta_j sigma_{t-j}^2`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{clamp_into, lag, psi_rescale, ConditionalModel, FilterOutput, Order, StationarityDiag};
use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::math;

/// Parameters `(alpha_0, alpha_1..alpha_p, beta_1..beta_q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Garch {
    pub p: usize,
    pub q: usize,
}

impl Garch {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("GARCH needs p >= 1".into()));
        }
        Ok(Self { p, q })
    }

    fn b0(&self) -> usize {
        self.p + 1
    }
}

pub(crate) fn check_beta(beta: &[f64]) -> Result<()> {
    let s: f64 = beta.iter().sum();
    if s >= 1.0 {
        return Err(Error::NonstationaryRegion(s));
    }
    Ok(())
}

impl ConditionalModel for Garch {
    fn label(&self) -> String {
        format!("garch({},{})", self.p, self.q)
    }

    fn dim(&self) -> usize {
        1 + self.p + self.q
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (0..=self.p).map(|i| format!("alpha{i}")).collect();
        v.extend((1..=self.q).map(|j| format!("beta{j}")));
        v
    }

    fn default_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.9999; d];
        lo[0] = 1e-6;
        hi[0] = 100.0;
        (lo, hi)
    }

    fn mean_free(&self) -> bool {
        true
    }

    fn check_admissible(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        if !(theta[0] > 0.0) || theta[1..].iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter(
                "GARCH needs alpha_0 > 0 and nonnegative alpha_i, beta_j".into(),
            ));
        }
        check_beta(&theta[self.b0()..])
    }

    fn filter(&self, y: &[f64], theta: &[f64], order: Order) -> Result<FilterOutput> {
        self.check_len(theta)?;
        let (p, q, d, b0) = (self.p, self.q, self.dim(), self.b0());
        check_beta(&theta[b0..])?;
        let n = y.len();
        let mut out = FilterOutput::new(n, d, order, true);
        let dd = d * d;
        for t in 0..n {
            let mut s2 = theta[0];
            for i in 1..=p {
                let l = lag(y, t, i);
                s2 += theta[i] * l * l;
            }
            for j in 1..=q {
                if t >= j {
                    s2 += theta[b0 + j - 1] * out.sigma2[t - j];
                }
            }
            out.sigma2[t] = s2;
            if order >= Order::First {
                let mut ds = vec![0.0; d];
                ds[0] = 1.0;
                for i in 1..=p {
                    let l = lag(y, t, i);
                    ds[i] = l * l;
                }
                for j in 1..=q {
                    if t >= j {
                        let bj = theta[b0 + j - 1];
                        ds[b0 + j - 1] += out.sigma2[t - j];
                        let prev = &out.dsigma2[(t - j) * d..(t - j + 1) * d];
                        for a in 0..d {
                            ds[a] += bj * prev[a];
                        }
                    }
                }
                out.dsigma2[t * d..(t + 1) * d].copy_from_slice(&ds);
            }
            if order >= Order::Second {
                let mut s = vec![0.0; dd];
                for j in 1..=q {
                    if t >= j {
                        let bj = theta[b0 + j - 1];
                        let k = b0 + j - 1;
                        let prev = &out.d2sigma2[(t - j) * dd..(t - j + 1) * dd];
                        for ab in 0..dd {
                            s[ab] += bj * prev[ab];
                        }
                        let pd = &out.dsigma2[(t - j) * d..(t - j + 1) * d];
                        for b in 0..d {
                            s[k * d + b] += pd[b];
                            s[b * d + k] += pd[b];
                        }
                    }
                }
                out.d2sigma2[t * dd..(t + 1) * dd].copy_from_slice(&s);
            }
        }
        // the recursion uses raw values; only the reported scale is floored
        out.finish();
        Ok(out)
    }

    fn simulate_with(&self, theta: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check_admissible(theta)?;
        let b0 = self.b0();
        let mut y: Vec<f64> = Vec::with_capacity(eta.len());
        let mut s2v: Vec<f64> = Vec::with_capacity(eta.len());
        for (t, e) in eta.iter().enumerate() {
            let mut s2 = theta[0];
            for i in 1..=self.p {
                let l = lag(&y, t, i);
                s2 += theta[i] * l * l;
            }
            for j in 1..=self.q {
                s2 += theta[b0 + j - 1] * lag(&s2v, t, j);
            }
            s2v.push(s2);
            y.push(math::sqrt(s2) * e);
        }
        Ok(y)
    }

    fn heuristic_start(&self, y: &[f64]) -> Vec<f64> {
        let (p, q) = (self.p, self.q);
        let ones = vec![1.0; y.len()];
        let c = psi_rescale(y, &ones);
        let a_tot = 0.1;
        let b_tot = if q == 0 { 0.0 } else { 0.6 };
        let mut theta = vec![c * c * (1.0 - a_tot - b_tot)];
        theta.extend(core::iter::repeat_n(a_tot / p as f64, p));
        theta.extend(core::iter::repeat_n(b_tot / q.max(1) as f64, q));
        clamp_into(&mut theta, &self.default_bounds());
        theta
    }

    fn stationarity(&self, theta: &[f64], dist: &InnovationDist, draws: usize, seed: u64) -> Result<StationarityDiag> {
        self.check_admissible(theta)?;
        if self.p == 1 && self.q <= 1 {
            let beta = if self.q == 1 { theta[2] } else { 0.0 };
            return super::lyapunov_exponent(super::LyapunovKind::Garch11, &[theta[1], beta], dist, draws, seed);
        }
        // sum alpha_i E eta^2 + sum beta_j < 1 is sufficient for second-order
        // stationarity; reported as a margin
        let m2 = super::stationarity::second_moment(dist, draws, seed)?;
        let a: f64 = theta[1..=self.p].iter().sum();
        let b: f64 = theta[self.b0()..].iter().sum();
        Ok(StationarityDiag::margin(a * m2 + b - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::simulate;
    use crate::models::test_support::check_derivatives;

    #[test]
    fn zero_data_recursion() {
        let m = Garch::new(1, 1).unwrap();
        let f = m.filter(&[0.0, 0.0, 0.0], &[0.2, 0.1, 0.3], Order::Value).unwrap();
        let expect = [0.2, 0.26, 0.278];
        for t in 0..3 {
            assert!((f.sigma2[t] - expect[t]).abs() < 1e-15);
            assert_eq!(f.g[t], 0.0);
        }
    }

    #[test]
    fn beta_zero_is_arch() {
        let m = Garch::new(1, 1).unwrap();
        let y = [0.5, -1.0, 2.0, 0.1];
        let f = m.filter(&y, &[0.2, 0.4, 0.0], Order::Value).unwrap();
        for t in 1..4 {
            assert!((f.sigma2[t] - (0.2 + 0.4 * y[t - 1] * y[t - 1])).abs() < 1e-15);
        }
    }

    #[test]
    fn nonstationary_beta_is_flagged() {
        let m = Garch::new(1, 2).unwrap();
        assert!(matches!(
            m.filter(&[0.0], &[0.1, 0.1, 0.6, 0.5], Order::Value),
            Err(Error::NonstationaryRegion(_))
        ));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = Garch::new(1, 1).unwrap();
        let y = simulate(&m, &[0.2, 0.1, 0.3], 50, &InnovationDist::logistic(1.0), 4, 0).unwrap();
        check_derivatives(&m, &y, &[0.25, 0.15, 0.5], 1e-6);
        let m = Garch::new(2, 2).unwrap();
        let theta = [0.1, 0.1, 0.05, 0.3, 0.2];
        let y = simulate(&m, &theta, 60, &InnovationDist::normal(1.75), 5, 0).unwrap();
        check_derivatives(&m, &y, &theta, 1e-6);
    }

    #[test]
    fn truncation_effect_decays_geometrically() {
        let m = Garch::new(1, 1).unwrap();
        let theta = [0.2, 0.1, 0.5];
        let y = simulate(&m, &theta, 400, &InnovationDist::logistic(1.0), 9, 0).unwrap();
        // a filter started 100 observations earlier versus one started at zero
        let full = m.filter(&y, &theta, Order::Value).unwrap();
        let late = m.filter(&y[100..], &theta, Order::Value).unwrap();
        let mut prev = f64::INFINITY;
        for t in (0..300).step_by(20) {
            let diff = (full.sigma2[t + 100] - late.sigma2[t]).abs();
            assert!(diff <= 50.0 * 0.5f64.powi(t as i32) + 1e-13, "t={t} diff={diff}");
            assert!(diff <= prev + 1e-15);
            prev = diff;
        }
    }

    #[test]
    fn filter_recovers_simulated_innovations() {
        let m = Garch::new(1, 1).unwrap();
        let theta = [0.2, 0.1, 0.3];
        let d = InnovationDist::logistic(1.0);
        let y = simulate(&m, &theta, 300, &d, 12, 0).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand_chacha::rand_core::SeedableRng>::seed_from_u64(12);
        let eta = d.sample_n(&mut rng, 300);
        let f = m.filter(&y, &theta, Order::Value).unwrap();
        let r = f.residuals(&y);
        for t in 50..300 {
            assert!((r[t] - eta[t]).abs() < 1e-8);
        }
    }
}
