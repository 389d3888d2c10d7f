//! ARMA(1,1)-GARCH(1,1):
//! `y_t = phi_0 + phi_1 y_{t-1} + eps_t + vphi_1 eps_{t-1}`, `eps_t = sigma_t eta_t`,
//! `sigma_t^2 = alpha_0 + alpha_1 eps_{t-1}^2 + beta_1 sigma_{t-1}^2`.
//!
//! The innovations are recovered by the finite-sample inversion
//! `eps_t = y_t - phi_0 - phi_1 y_{t-1} - vphi_1 eps_{t-1}` with `eps_0 = y_0 = 0`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{clamp_into, lag, ConditionalModel, FilterOutput, Garch, LyapunovKind, Order, StationarityDiag};
use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::math;

/// Parameters `(phi_0, phi_1, vphi_1, alpha_0, alpha_1, beta_1)`; without the
/// intercept `phi_0` is fixed at zero and dropped from the vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArmaGarch {
    pub intercept: bool,
}

#[derive(Clone, Copy)]
struct Idx {
    phi0: Option<usize>,
    phi1: usize,
    vphi1: usize,
    a0: usize,
    a1: usize,
    b1: usize,
}

impl ArmaGarch {
    fn idx(&self) -> Idx {
        let o = self.intercept as usize;
        Idx {
            phi0: self.intercept.then_some(0),
            phi1: o,
            vphi1: o + 1,
            a0: o + 2,
            a1: o + 3,
            b1: o + 4,
        }
    }

    fn check_recursions(&self, theta: &[f64]) -> Result<()> {
        let ix = self.idx();
        if theta[ix.vphi1].abs() >= 1.0 {
            return Err(Error::InvertibilityViolation(theta[ix.vphi1]));
        }
        if theta[ix.b1] >= 1.0 {
            return Err(Error::NonstationaryRegion(theta[ix.b1]));
        }
        Ok(())
    }
}

impl ConditionalModel for ArmaGarch {
    fn label(&self) -> String {
        if self.intercept {
            "arma-garch".into()
        } else {
            "arma-garch-nc".into()
        }
    }

    fn dim(&self) -> usize {
        5 + self.intercept as usize
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        if self.intercept {
            v.push("phi0".into());
        }
        for s in ["phi1", "varphi1", "alpha0", "alpha1", "beta1"] {
            v.push(s.into());
        }
        v
    }

    fn default_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        if self.intercept {
            lo.push(-100.0);
            hi.push(100.0);
        }
        lo.extend_from_slice(&[-0.9999, -0.9999, 1e-6, 0.0, 0.0]);
        hi.extend_from_slice(&[0.9999, 0.9999, 100.0, 0.9999, 0.9999]);
        (lo, hi)
    }

    fn mean_free(&self) -> bool {
        false
    }

    fn check_admissible(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        self.check_recursions(theta)?;
        let ix = self.idx();
        if !(theta[ix.a0] > 0.0) || theta[ix.a1] < 0.0 || theta[ix.b1] < 0.0 {
            return Err(Error::InvalidParameter(
                "need alpha_0 > 0 and nonnegative alpha_1, beta_1".into(),
            ));
        }
        Ok(())
    }

    fn filter(&self, y: &[f64], theta: &[f64], order: Order) -> Result<FilterOutput> {
        self.check_len(theta)?;
        self.check_recursions(theta)?;
        let ix = self.idx();
        let d = self.dim();
        let dd = d * d;
        let n = y.len();
        let phi0 = ix.phi0.map_or(0.0, |i| theta[i]);
        let (phi1, vphi1) = (theta[ix.phi1], theta[ix.vphi1]);
        let (a0, a1, b1) = (theta[ix.a0], theta[ix.a1], theta[ix.b1]);
        let mut out = FilterOutput::new(n, d, order, false);

        let mut eps_prev = 0.0;
        let mut s2_prev = 0.0;
        // derivatives of g (= -d eps) and sigma^2 at t-1
        let mut gp = vec![0.0; d];
        let mut dp = vec![0.0; d];
        let mut g2p = vec![0.0; dd];
        let mut s2p = vec![0.0; dd];
        let mut gc = vec![0.0; d];
        let mut dc = vec![0.0; d];
        let mut g2c = vec![0.0; dd];
        let mut s2c = vec![0.0; dd];

        for t in 0..n {
            let y_prev = lag(y, t, 1);
            let g = phi0 + phi1 * y_prev + vphi1 * eps_prev;
            let s2 = a0 + a1 * eps_prev * eps_prev + b1 * s2_prev;
            out.g[t] = g;
            out.sigma2[t] = s2;

            if order >= Order::First {
                for a in 0..d {
                    gc[a] = -vphi1 * gp[a];
                    dc[a] = -2.0 * a1 * eps_prev * gp[a] + b1 * dp[a];
                }
                if let Some(i) = ix.phi0 {
                    gc[i] += 1.0;
                }
                gc[ix.phi1] += y_prev;
                gc[ix.vphi1] += eps_prev;
                dc[ix.a0] += 1.0;
                dc[ix.a1] += eps_prev * eps_prev;
                dc[ix.b1] += s2_prev;
                out.dg[t * d..(t + 1) * d].copy_from_slice(&gc);
                out.dsigma2[t * d..(t + 1) * d].copy_from_slice(&dc);
            }
            if order >= Order::Second {
                for a in 0..d {
                    for b in 0..d {
                        let ab = a * d + b;
                        g2c[ab] = -vphi1 * g2p[ab];
                        s2c[ab] = 2.0 * a1 * gp[a] * gp[b] - 2.0 * a1 * eps_prev * g2p[ab] + b1 * s2p[ab];
                    }
                }
                for b in 0..d {
                    g2c[ix.vphi1 * d + b] -= gp[b];
                    g2c[b * d + ix.vphi1] -= gp[b];
                    s2c[ix.a1 * d + b] -= 2.0 * eps_prev * gp[b];
                    s2c[b * d + ix.a1] -= 2.0 * eps_prev * gp[b];
                    s2c[ix.b1 * d + b] += dp[b];
                    s2c[b * d + ix.b1] += dp[b];
                }
                out.d2g[t * dd..(t + 1) * dd].copy_from_slice(&g2c);
                out.d2sigma2[t * dd..(t + 1) * dd].copy_from_slice(&s2c);
                core::mem::swap(&mut g2p, &mut g2c);
                core::mem::swap(&mut s2p, &mut s2c);
            }
            if order >= Order::First {
                core::mem::swap(&mut gp, &mut gc);
                core::mem::swap(&mut dp, &mut dc);
            }
            eps_prev = y[t] - g;
            s2_prev = s2;
        }
        out.finish();
        Ok(out)
    }

    fn simulate_with(&self, theta: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check_admissible(theta)?;
        let ix = self.idx();
        let phi0 = ix.phi0.map_or(0.0, |i| theta[i]);
        let (phi1, vphi1) = (theta[ix.phi1], theta[ix.vphi1]);
        let (a0, a1, b1) = (theta[ix.a0], theta[ix.a1], theta[ix.b1]);
        let mut y = Vec::with_capacity(eta.len());
        let (mut y_prev, mut eps_prev, mut s2_prev) = (0.0, 0.0, 0.0);
        for e in eta {
            let s2 = a0 + a1 * eps_prev * eps_prev + b1 * s2_prev;
            let eps = math::sqrt(s2) * e;
            let yt = phi0 + phi1 * y_prev + eps + vphi1 * eps_prev;
            y.push(yt);
            y_prev = yt;
            eps_prev = eps;
            s2_prev = s2;
        }
        Ok(y)
    }

    fn heuristic_start(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let c0: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let c1: f64 = y.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let phi1 = if c0 > 0.0 { (c1 / c0).clamp(-0.9, 0.9) } else { 0.0 };
        let phi0 = if self.intercept { mean * (1.0 - phi1) } else { 0.0 };
        let e: Vec<f64> = (0..y.len()).map(|t| y[t] - phi0 - phi1 * lag(y, t, 1)).collect();
        let vol = Garch { p: 1, q: 1 }.heuristic_start(&e);
        let mut theta = Vec::new();
        if self.intercept {
            theta.push(phi0);
        }
        theta.extend_from_slice(&[phi1, 0.0]);
        theta.extend_from_slice(&vol);
        clamp_into(&mut theta, &self.default_bounds());
        theta
    }

    fn stationarity(&self, theta: &[f64], dist: &InnovationDist, draws: usize, seed: u64) -> Result<StationarityDiag> {
        self.check_admissible(theta)?;
        let ix = self.idx();
        super::lyapunov_exponent(LyapunovKind::Garch11, &[theta[ix.a1], theta[ix.b1]], dist, draws, seed)
    }
}
