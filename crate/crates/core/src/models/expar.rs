//! EXPAR(p): `g_t = sum (phi_i + vphi_i exp(-delta y_{t-1}^2)) y_{t-i}`, `sigma_t = 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{clamp_into, lag, ConditionalModel, FilterOutput, Order, StationarityDiag};
use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::math;

/// Parameters `(phi_1..phi_p, vphi_1..vphi_p, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Expar {
    pub p: usize,
}

impl Expar {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("EXPAR needs p >= 1".into()));
        }
        Ok(Self { p })
    }

    fn mean(&self, y: &[f64], t: usize, theta: &[f64]) -> f64 {
        let p = self.p;
        let y1 = lag(y, t, 1);
        let e = math::exp(-theta[2 * p] * y1 * y1);
        (1..=p)
            .map(|i| (theta[i - 1] + theta[p + i - 1] * e) * lag(y, t, i))
            .sum()
    }
}

impl ConditionalModel for Expar {
    fn label(&self) -> String {
        format!("expar({})", self.p)
    }

    fn dim(&self) -> usize {
        2 * self.p + 1
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.p).map(|i| format!("phi{i}")).collect();
        v.extend((1..=self.p).map(|i| format!("varphi{i}")));
        v.push("delta".into());
        v
    }

    fn default_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![-10.0; 2 * self.p];
        let mut hi = vec![10.0; 2 * self.p];
        lo.push(1e-6);
        hi.push(100.0);
        (lo, hi)
    }

    fn mean_free(&self) -> bool {
        false
    }

    fn check_admissible(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        if !(theta[2 * self.p] > 0.0) {
            return Err(Error::InvalidParameter("EXPAR needs delta > 0".into()));
        }
        Ok(())
    }

    fn filter(&self, y: &[f64], theta: &[f64], order: Order) -> Result<FilterOutput> {
        self.check_len(theta)?;
        let p = self.p;
        let d = self.dim();
        let dd = d * d;
        let k = 2 * p;
        let n = y.len();
        let mut out = FilterOutput::new(n, d, order, false);
        for t in 0..n {
            let y1 = lag(y, t, 1);
            let y1s = y1 * y1;
            let e = math::exp(-theta[k] * y1s);
            let s: f64 = (1..=p).map(|i| theta[p + i - 1] * lag(y, t, i)).sum();
            out.g[t] = self.mean(y, t, theta);
            out.sigma2[t] = 1.0;
            if order >= Order::First {
                let dg = &mut out.dg[t * d..(t + 1) * d];
                for i in 1..=p {
                    let yi = lag(y, t, i);
                    dg[i - 1] = yi;
                    dg[p + i - 1] = e * yi;
                }
                dg[k] = -y1s * e * s;
            }
            if order >= Order::Second {
                let g2 = &mut out.d2g[t * dd..(t + 1) * dd];
                for i in 1..=p {
                    let v = -y1s * e * lag(y, t, i);
                    g2[(p + i - 1) * d + k] = v;
                    g2[k * d + p + i - 1] = v;
                }
                g2[k * d + k] = y1s * y1s * e * s;
            }
        }
        out.finish();
        Ok(out)
    }

    fn simulate_with(&self, theta: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check_admissible(theta)?;
        let mut y: Vec<f64> = Vec::with_capacity(eta.len());
        for (t, e) in eta.iter().enumerate() {
            let g = self.mean(&y, t, theta);
            y.push(g + e);
        }
        Ok(y)
    }

    fn heuristic_start(&self, y: &[f64]) -> Vec<f64> {
        let p = self.p;
        let bounds = self.default_bounds();
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let delta = if var > 0.0 { 1.0 / var } else { 1.0 };
        let rows: Vec<Vec<f64>> = (0..y.len())
            .map(|t| {
                let y1 = lag(y, t, 1);
                let e = math::exp(-delta * y1 * y1);
                let mut r: Vec<f64> = (1..=p).map(|i| lag(y, t, i)).collect();
                r.extend((1..=p).map(|i| e * lag(y, t, i)));
                r
            })
            .collect();
        let mut theta = least_squares(&rows, y).unwrap_or_else(|| vec![0.0; 2 * p]);
        theta.push(delta);
        clamp_into(&mut theta, &bounds);
        theta
    }

    fn stationarity(
        &self,
        theta: &[f64],
        _dist: &InnovationDist,
        _draws: usize,
        _seed: u64,
    ) -> Result<StationarityDiag> {
        self.check_admissible(theta)?;
        // sum max(|phi_i|, |phi_i + vphi_i|) < 1 bounds every regime's AR polynomial
        let p = self.p;
        let m: f64 = (0..p)
            .map(|i| theta[i].abs().max((theta[i] + theta[p + i]).abs()))
            .sum();
        Ok(StationarityDiag::margin(m - 1.0))
    }
}
