//! DAR(p, q): `g_t = phi_0 + sum phi_i y_{t-i}`,
//! `sigma_t^2 = alpha_0 + sum alpha_j y_{t-j}^2`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{clamp_into, lag, psi_rescale, ConditionalModel, FilterOutput, Order, StationarityDiag};
use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::math;

/// Parameters `(phi_0, ..., phi_p, alpha_0, ..., alpha_q)`. `q = 0` gives an
/// AR(p) with constant scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dar {
    pub p: usize,
    pub q: usize,
}

impl Dar {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 && q == 0 {
            return Err(Error::InvalidParameter("DAR needs p >= 1 or q >= 1".into()));
        }
        Ok(Self { p, q })
    }

    fn a0(&self) -> usize {
        self.p + 1
    }
}

impl ConditionalModel for Dar {
    fn label(&self) -> String {
        format!("dar({},{})", self.p, self.q)
    }

    fn dim(&self) -> usize {
        self.p + self.q + 2
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (0..=self.p).map(|i| format!("phi{i}")).collect();
        v.extend((0..=self.q).map(|j| format!("alpha{j}")));
        v
    }

    fn default_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![-100.0];
        let mut hi = vec![100.0];
        lo.extend(core::iter::repeat_n(-10.0, self.p));
        hi.extend(core::iter::repeat_n(10.0, self.p));
        lo.push(1e-6);
        hi.push(100.0);
        lo.extend(core::iter::repeat_n(0.0, self.q));
        hi.extend(core::iter::repeat_n(10.0, self.q));
        (lo, hi)
    }

    fn mean_free(&self) -> bool {
        false
    }

    fn check_admissible(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        let alpha = &theta[self.a0()..];
        if !(alpha[0] > 0.0) || alpha[1..].iter().any(|a| *a < 0.0) {
            return Err(Error::InvalidParameter("DAR needs alpha_0 > 0 and alpha_j >= 0".into()));
        }
        Ok(())
    }

    fn filter(&self, y: &[f64], theta: &[f64], order: Order) -> Result<FilterOutput> {
        self.check_len(theta)?;
        let (p, q, d) = (self.p, self.q, self.dim());
        let a0 = self.a0();
        let n = y.len();
        let mut out = FilterOutput::new(n, d, order, false);
        for t in 0..n {
            let mut g = theta[0];
            for i in 1..=p {
                g += theta[i] * lag(y, t, i);
            }
            let mut s2 = theta[a0];
            for j in 1..=q {
                let l = lag(y, t, j);
                s2 += theta[a0 + j] * l * l;
            }
            out.g[t] = g;
            out.sigma2[t] = s2;
            if order >= Order::First {
                let dg = &mut out.dg[t * d..(t + 1) * d];
                dg[0] = 1.0;
                for i in 1..=p {
                    dg[i] = lag(y, t, i);
                }
                let ds = &mut out.dsigma2[t * d..(t + 1) * d];
                ds[a0] = 1.0;
                for j in 1..=q {
                    let l = lag(y, t, j);
                    ds[a0 + j] = l * l;
                }
            }
            // second derivatives vanish: both g and sigma^2 are linear in theta
        }
        out.finish();
        Ok(out)
    }

    fn simulate_with(&self, theta: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check_admissible(theta)?;
        let a0 = self.a0();
        let mut y: Vec<f64> = Vec::with_capacity(eta.len());
        for (t, e) in eta.iter().enumerate() {
            let mut g = theta[0];
            for i in 1..=self.p {
                g += theta[i] * lag(&y, t, i);
            }
            let mut s2 = theta[a0];
            for j in 1..=self.q {
                let l = lag(&y, t, j);
                s2 += theta[a0 + j] * l * l;
            }
            y.push(g + math::sqrt(s2) * e);
        }
        Ok(y)
    }

    fn heuristic_start(&self, y: &[f64]) -> Vec<f64> {
        let (p, q) = (self.p, self.q);
        let bounds = self.default_bounds();
        let n = y.len();
        let mean_rows: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                let mut r = vec![1.0];
                r.extend((1..=p).map(|i| lag(y, t, i)));
                r
            })
            .collect();
        let scale_rows: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                let mut r = vec![1.0];
                r.extend((1..=q).map(|j| {
                    let l = lag(y, t, j);
                    l * l
                }));
                r
            })
            .collect();
        let dot = |r: &[f64], b: &[f64]| r.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
        let mut sd = vec![1.0; n];
        let mut phi = vec![0.0; p + 1];
        let mut alpha = vec![0.0; q + 1];
        // two passes of weighted least squares; the weights tame the heavy
        // tails typical of DAR data
        for _ in 0..2 {
            let rows: Vec<Vec<f64>> = mean_rows
                .iter()
                .zip(&sd)
                .map(|(r, s)| r.iter().map(|v| v / s).collect())
                .collect();
            let ys: Vec<f64> = y.iter().zip(&sd).map(|(v, s)| v / s).collect();
            phi = least_squares(&rows, &ys).unwrap_or_else(|| vec![0.0; p + 1]);
            let e2: Vec<f64> = (0..n)
                .map(|t| {
                    let e = y[t] - dot(&mean_rows[t], &phi);
                    e * e
                })
                .collect();
            let w: Vec<f64> = scale_rows.iter().map(|r| r.iter().sum::<f64>()).collect();
            let rows: Vec<Vec<f64>> = scale_rows
                .iter()
                .zip(&w)
                .map(|(r, w)| r.iter().map(|v| v / w).collect())
                .collect();
            let targets: Vec<f64> = e2.iter().zip(&w).map(|(e, w)| e / w).collect();
            alpha = least_squares(&rows, &targets).unwrap_or_else(|| {
                let mut a = vec![0.0; q + 1];
                a[0] = e2.iter().sum::<f64>() / n.max(1) as f64;
                a
            });
            alpha[0] = alpha[0].max(1e-3);
            for a in alpha.iter_mut().skip(1) {
                *a = a.clamp(0.0, 5.0);
            }
            sd = scale_rows
                .iter()
                .map(|r| math::sqrt(dot(r, &alpha).max(1e-12)))
                .collect();
        }
        let e: Vec<f64> = (0..n).map(|t| y[t] - dot(&mean_rows[t], &phi)).collect();
        let k = psi_rescale(&e, &sd);
        let mut theta = phi;
        theta.extend(alpha.iter().map(|a| a * k * k));
        clamp_into(&mut theta, &bounds);
        theta
    }

    fn stationarity(&self, theta: &[f64], dist: &InnovationDist, draws: usize, seed: u64) -> Result<StationarityDiag> {
        self.check_admissible(theta)?;
        if self.p == 1 && self.q == 1 {
            return super::lyapunov_exponent(super::LyapunovKind::Dar11, &[theta[1], theta[3]], dist, draws, seed);
        }
        // first-moment contraction: sum(|phi_i| + sqrt(alpha_i) E|eta|) < 1
        // is sufficient; E|eta| is estimated by simulation
        let abs_mean = super::stationarity::abs_moment(dist, draws, seed)?;
        let a0 = self.a0();
        let mut m = -1.0;
        for i in 1..=self.p.max(self.q) {
            let phi = if i <= self.p { theta[i] } else { 0.0 };
            let alpha = if i <= self.q { theta[a0 + i] } else { 0.0 };
            m += phi.abs() + math::sqrt(alpha) * abs_mean;
        }
        Ok(StationarityDiag::margin(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_support::check_derivatives;
    use crate::models::{simulate, ConditionalModel};

    #[test]
    fn first_step_uses_zero_lags() {
        let m = Dar::new(1, 1).unwrap();
        let f = m.filter(&[5.0, 1.0], &[1.0, 0.5, 0.3, 0.5], Order::Value).unwrap();
        assert_eq!(f.g[0], 1.0);
        assert!((f.sigma[0] - 0.3f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.g[1], 3.5);
        assert!((f.sigma2[1] - (0.3 + 0.5 * 25.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_iid_case() {
        let m = Dar::new(1, 1).unwrap();
        let y = [0.3, -2.0, 7.0, 1.0];
        let f = m.filter(&y, &[0.0, 0.0, 1.0, 0.0], Order::Second).unwrap();
        assert!(f.g.iter().all(|v| *v == 0.0));
        assert!(f.sigma.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = Dar::new(2, 1).unwrap();
        let y = simulate(
            &m,
            &[0.5, 0.3, -0.2, 0.4, 0.3],
            100,
            &InnovationDist::logistic(1.0),
            3,
            0,
        )
        .unwrap();
        check_derivatives(&m, &y, &[0.4, 0.25, -0.1, 0.5, 0.2], 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let m = Dar::new(1, 1).unwrap();
        assert!(matches!(
            m.filter(&[1.0], &[1.0, 2.0], Order::Value),
            Err(Error::ShapeMismatch { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn stationary_mean() {
        let m = Dar::new(1, 1).unwrap();
        let theta = [1.0, 0.5, 0.3, 0.5];
        let y = simulate(&m, &theta, 400, &InnovationDist::logistic(1.0), 2024, 0).unwrap();
        let mean = y.iter().sum::<f64>() / 400.0;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 399.0).sqrt();
        // positive autocorrelation inflates the standard error of the mean
        let se = sd / 20.0 * (1.5f64 / 0.5).sqrt();
        assert!((mean - 2.0).abs() < 5.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn noise_free_path_follows_skeleton() {
        let m = Dar::new(1, 1).unwrap();
        let theta = [1.0, 0.5, 0.3, 0.5];
        let y = simulate(&m, &theta, 20, &InnovationDist::empirical(vec![0.0]), 1, 0).unwrap();
        let f = m.filter(&y, &theta, Order::Value).unwrap();
        for t in 0..20 {
            assert_eq!(y[t], f.g[t]);
        }
    }

    #[test]
    fn heuristic_start_is_close_on_long_sample() {
        let m = Dar::new(1, 1).unwrap();
        let theta = [1.0, 0.5, 0.3, 0.5];
        let y = simulate(&m, &theta, 5000, &InnovationDist::logistic(1.0), 8, 0).unwrap();
        let s = m.heuristic_start(&y);
        assert!((s[0] - 1.0).abs() < 0.3 && (s[1] - 0.5).abs() < 0.2, "{s:?}");
        assert!(s[2] > 0.0 && s[3] >= 0.0);
    }
}
