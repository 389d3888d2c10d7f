//! Post-fit diagnostics: Hill tail index, AIC, Lyapunov exponent and
//! residual summaries.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::estimation::{evaluate, Assembly, FitResult, Objective};
use crate::kernel::h;
use crate::math;
use crate::models::{ConditionalModel, Order, StationarityDiag};
use crate::stats::{quantile_sorted, sorted};

pub const HISTOGRAM_BINS: usize = 30;

/// Reciprocal mean log-excess of the `k` largest magnitudes over the
/// `(k+1)`-th largest. Values below 1 indicate very heavy tails.
pub fn hill_estimator(x: &[f64], k: usize) -> Result<f64> {
    let n = x.len();
    if k < 2 || k >= n {
        return Err(Error::InvalidParameter(alloc::format!(
            "Hill k must satisfy 2 <= k < n (k = {k}, n = {n})"
        )));
    }
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    if a.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateInput("NaN in Hill input".into()));
    }
    a.sort_by(f64::total_cmp);
    let threshold = a[n - k - 1];
    if threshold == 0.0 {
        return Err(Error::DegenerateTail(k));
    }
    let mean_log: f64 = a[n - k..].iter().map(|v| math::ln(v / threshold)).sum::<f64>() / k as f64;
    if !(mean_log > 0.0) || !mean_log.is_finite() {
        return Err(Error::DegenerateTail(k));
    }
    Ok(1.0 / mean_log)
}

/// Default number of order statistics, `floor(n^0.6)` kept inside `[2, n - 1]`.
pub fn default_hill_k(n: usize) -> usize {
    let k = math::floor(math::powf(n as f64, 0.6)) as usize;
    k.clamp(2, n.saturating_sub(1).max(2))
}

/// Hill estimates over a grid of `k`.
pub fn hill_sweep(x: &[f64], ks: &[usize]) -> Vec<(usize, Result<f64>)> {
    ks.iter().map(|&k| (k, hill_estimator(x, k))).collect()
}

/// `k` grid from 10 up to `n / 2` in roughly geometric steps.
pub fn default_hill_grid(n: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 10usize;
    while k < n / 2 {
        ks.push(k);
        k = math::ceil(k as f64 * 1.25) as usize;
    }
    ks
}

/// `-2 loglik + 2 d`.
pub fn aic(loglik: f64, d: usize) -> f64 {
    -2.0 * loglik + 2.0 * d as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[min, max]`; the last bin is closed.
pub fn histogram(x: &[f64], bins: usize) -> Histogram {
    let lower = x.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; bins.max(1)];
    if x.is_empty() {
        return Histogram {
            lower: 0.0,
            upper: 0.0,
            counts,
        };
    }
    let width = (upper - lower) / counts.len() as f64;
    for &v in x {
        let idx = if width > 0.0 {
            (((v - lower) / width) as usize).min(counts.len() - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Histogram { lower, upper, counts }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSummary {
    pub min: f64,
    pub max: f64,
    pub quartiles: [f64; 3],
    pub histogram: Histogram,
}

pub fn residual_summary(x: &[f64]) -> ResidualSummary {
    let s = sorted(x);
    ResidualSummary {
        min: s.first().copied().unwrap_or(f64::NAN),
        max: s.last().copied().unwrap_or(f64::NAN),
        quartiles: [
            quantile_sorted(&s, 0.25),
            quantile_sorted(&s, 0.5),
            quantile_sorted(&s, 0.75),
        ],
        histogram: histogram(x, HISTOGRAM_BINS),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsOptions {
    /// Overrides [`default_hill_k`].
    pub hill_k: Option<usize>,
    /// Draws for stationarity checks that need simulation.
    pub draws: usize,
    pub seed: u64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            hill_k: None,
            draws: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub loglik: f64,
    pub aic: f64,
    pub hill: Option<f64>,
    pub hill_k: usize,
    pub hill_sweep: Vec<(usize, f64)>,
    /// Lyapunov exponent (or stationarity margin) under the residual law.
    pub stationarity: Option<StationarityDiag>,
    /// Sample mean of `h(eta_hat)`; near 1 under the identification condition.
    pub psi_hat: f64,
    pub residuals: ResidualSummary,
    /// Labels for anything that could not be computed.
    pub flags: Vec<String>,
}

/// Assembles the diagnostics of a fit; degenerate pieces are flagged, not fatal.
pub fn residual_diagnostics<M: ConditionalModel + ?Sized>(
    fit: &FitResult,
    model: &M,
    options: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    let mut r = diagnose_residuals(model, &fit.theta_hat.values, &fit.residuals, fit.loglik, options)?;
    if !fit.converged {
        r.flags.push("fit: not converged".into());
    }
    Ok(r)
}

/// Diagnostics of the logistic objective at a given `theta`, without fitting.
pub fn diagnostics_at<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    theta: &[f64],
    options: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    model.check_len(theta)?;
    let e = evaluate(model, y, theta, Objective::Logistic, Order::Value, Assembly::ClosedForm)?;
    diagnose_residuals(model, theta, &e.residuals, e.loglik, options)
}

pub fn diagnose_residuals<M: ConditionalModel + ?Sized>(
    model: &M,
    theta: &[f64],
    eta: &[f64],
    loglik: f64,
    options: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    if eta.is_empty() {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    let mut flags = Vec::new();
    let n = eta.len();
    let hill_k = options.hill_k.unwrap_or_else(|| default_hill_k(n));
    let hill = match hill_estimator(eta, hill_k) {
        Ok(v) => Some(v),
        Err(e) => {
            flags.push(alloc::format!("hill: {e}"));
            None
        }
    };
    let sweep = hill_sweep(eta, &default_hill_grid(n))
        .into_iter()
        .filter_map(|(k, r)| r.ok().map(|v| (k, v)))
        .collect();
    let stationarity = match model.stationarity(
        theta,
        &InnovationDist::empirical(eta.to_vec()),
        options.draws,
        options.seed,
    ) {
        Ok(s) => Some(s),
        Err(e) => {
            flags.push(alloc::format!("stationarity: {e}"));
            None
        }
    };
    if eta.iter().all(|v| *v == eta[0]) {
        flags.push("residuals: constant".into());
    }
    let psi_hat = eta.iter().map(|v| h(*v)).sum::<f64>() / n as f64;
    Ok(DiagnosticsReport {
        loglik,
        aic: aic(loglik, theta.len()),
        hill,
        hill_k,
        hill_sweep: sweep,
        stationarity,
        psi_hat,
        residuals: residual_summary(eta),
        flags,
    })
}
