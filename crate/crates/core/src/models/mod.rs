//! Conditional mean / scale models `y_t = g_t(theta) + sigma_t(theta) eta_t`.
//!
//! Every filter starts from zero pre-sample values (lags of `y`, `eps` and
//! `sigma^2`) and returns the mean, the scale, and their parameter
//! derivatives up to the requested order.

mod arma_garch;
mod dar;
mod expar;
mod garch;
mod stationarity;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use arma_garch::ArmaGarch;
pub use dar::Dar;
pub use expar::Expar;
pub use garch::Garch;
pub use stationarity::{lyapunov_exponent, LyapunovKind, StationarityDiag, StationarityKind};

use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::kernel::h;
use crate::math;

/// Lower bound on `sigma_t^2`; equivalently `sigma_t >= 1e-8`.
pub const SIGMA2_FLOOR: f64 = 1e-16;

/// Highest parameter derivative a filter is asked to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Value = 0,
    First = 1,
    Second = 2,
}

/// Parameter values together with their names and the box defining the
/// parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (i, v) in theta.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Components sitting on (or within `tol` of) a bound.
    pub fn boundary_active(&self, theta: &[f64], tol: f64) -> Vec<bool> {
        theta
            .iter()
            .enumerate()
            .map(|(i, &v)| v - self.lower[i] <= tol || self.upper[i] - v <= tol)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for len in [self.names.len(), self.lower.len(), self.upper.len()] {
            if len != d {
                return Err(Error::ShapeMismatch { expected: d, got: len });
            }
        }
        for i in 0..d {
            if !(self.lower[i] <= self.upper[i]) {
                return Err(Error::InvalidParameter(format!(
                    "empty bound interval for {}",
                    self.names[i]
                )));
            }
        }
        if !self.contains(&self.values) {
            return Err(Error::InvalidParameter("values lie outside the bounds".into()));
        }
        Ok(())
    }
}

/// Filtered mean and scale with parameter derivatives.
///
/// Derivative arrays are row-major: `dg[t * d + i]`, `d2g[(t * d + i) * d + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub n: usize,
    pub d: usize,
    pub order: Order,
    pub g: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub dg: Vec<f64>,
    pub dsigma2: Vec<f64>,
    pub d2g: Vec<f64>,
    pub d2sigma2: Vec<f64>,
    /// Number of `t` at which `sigma_t^2` was raised to the floor.
    pub clamp_count: usize,
    /// `g` and its derivatives vanish identically for this model.
    pub mean_free: bool,
}

impl FilterOutput {
    pub(crate) fn new(n: usize, d: usize, order: Order, mean_free: bool) -> Self {
        let first = if order >= Order::First { n * d } else { 0 };
        let second = if order >= Order::Second { n * d * d } else { 0 };
        Self {
            n,
            d,
            order,
            g: vec![0.0; n],
            sigma2: vec![0.0; n],
            sigma: vec![0.0; n],
            dg: vec![0.0; first],
            dsigma2: vec![0.0; first],
            d2g: vec![0.0; second],
            d2sigma2: vec![0.0; second],
            clamp_count: 0,
            mean_free,
        }
    }

    pub fn dg(&self, t: usize) -> &[f64] {
        &self.dg[t * self.d..(t + 1) * self.d]
    }

    pub fn dsigma2(&self, t: usize) -> &[f64] {
        &self.dsigma2[t * self.d..(t + 1) * self.d]
    }

    pub fn d2g(&self, t: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.d2g[t * dd..(t + 1) * dd]
    }

    pub fn d2sigma2(&self, t: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.d2sigma2[t * dd..(t + 1) * dd]
    }

    /// Standardized residuals `(y_t - g_t) / sigma_t`.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.g.iter().zip(&self.sigma))
            .map(|(y, (g, s))| (y - g) / s)
            .collect()
    }

    /// Applies the scale floor and fills `sigma`.
    pub(crate) fn finish(&mut self) {
        for t in 0..self.n {
            if !(self.sigma2[t] >= SIGMA2_FLOOR) {
                if !self.sigma2[t].is_nan() {
                    self.sigma2[t] = SIGMA2_FLOOR;
                }
                self.clamp_count += 1;
            }
            self.sigma[t] = math::sqrt(self.sigma2[t]);
        }
    }
}

/// A conditional mean / scale specification.
pub trait ConditionalModel {
    /// Short identifier such as `dar(1,1)`.
    fn label(&self) -> String;
    fn dim(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    /// Default box `(lower, upper)` for the parameter space.
    fn default_bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// True when `g_t` is identically zero.
    fn mean_free(&self) -> bool;
    /// Rejects parameter values at which the recursions are not defined.
    fn check_admissible(&self, theta: &[f64]) -> Result<()>;
    fn filter(&self, y: &[f64], theta: &[f64], order: Order) -> Result<FilterOutput>;
    /// Runs the data-generating recursion forward from zero initial values.
    fn simulate_with(&self, theta: &[f64], eta: &[f64]) -> Result<Vec<f64>>;
    /// Data-driven starting point (inside the default box).
    fn heuristic_start(&self, y: &[f64]) -> Vec<f64>;
    /// Lyapunov exponent or stationarity margin at `theta`; negative means
    /// the recursion is contracting.
    fn stationarity(&self, theta: &[f64], dist: &InnovationDist, draws: usize, seed: u64) -> Result<StationarityDiag>;

    fn param_template(&self, values: Vec<f64>) -> ParamVector {
        let (lower, upper) = self.default_bounds();
        ParamVector {
            values,
            names: self.param_names(),
            lower,
            upper,
        }
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("parameter values must be finite".into()));
        }
        Ok(())
    }
}

/// The in-scope model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    Dar(Dar),
    Garch(Garch),
    ArmaGarch(ArmaGarch),
    Expar(Expar),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            ModelSpec::Dar($m) => $e,
            ModelSpec::Garch($m) => $e,
            ModelSpec::ArmaGarch($m) => $e,
            ModelSpec::Expar($m) => $e,
        }
    };
}

impl ModelSpec {
    pub fn dar(p: usize, q: usize) -> Result<Self> {
        Dar::new(p, q).map(ModelSpec::Dar)
    }

    pub fn garch(p: usize, q: usize) -> Result<Self> {
        Garch::new(p, q).map(ModelSpec::Garch)
    }

    pub fn arma_garch(intercept: bool) -> Self {
        ModelSpec::ArmaGarch(ArmaGarch { intercept })
    }

    pub fn expar(p: usize) -> Result<Self> {
        Expar::new(p).map(ModelSpec::Expar)
    }
}

impl ConditionalModel for ModelSpec {
    fn label(&self) -> String {
        dispatch!(self, m => m.label())
    }
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }
    fn param_names(&self) -> Vec<String> {
        dispatch!(self, m => m.param_names())
    }
    fn default_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        dispatch!(self, m => m.default_bounds())
    }
    fn mean_free(&self) -> bool {
        dispatch!(self, m => m.mean_free())
    }
    fn check_admissible(&self, theta: &[f64]) -> Result<()> {
        dispatch!(self, m => m.check_admissible(theta))
    }
    fn filter(&self, y: &[f64], theta: &[f64], order: Order) -> Result<FilterOutput> {
        dispatch!(self, m => m.filter(y, theta, order))
    }
    fn simulate_with(&self, theta: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, m => m.simulate_with(theta, eta))
    }
    fn heuristic_start(&self, y: &[f64]) -> Vec<f64> {
        dispatch!(self, m => m.heuristic_start(y))
    }
    fn stationarity(&self, theta: &[f64], dist: &InnovationDist, draws: usize, seed: u64) -> Result<StationarityDiag> {
        dispatch!(self, m => m.stationarity(theta, dist, draws, seed))
    }
}

/// Simulates `n` observations after discarding `burn_in`, with innovations
/// drawn from `dist` under `seed`.
pub fn simulate<M: ConditionalModel + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    dist: &InnovationDist,
    seed: u64,
    burn_in: usize,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_rng(model, theta, n, dist, &mut rng, burn_in)
}

/// As [`simulate`] with a caller-supplied generator.
pub fn simulate_rng<M: ConditionalModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    dist: &InnovationDist,
    rng: &mut R,
    burn_in: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    dist.validate()?;
    model.check_len(theta)?;
    model.check_admissible(theta)?;
    let eta = dist.sample_n(rng, n + burn_in);
    let mut y = model.simulate_with(theta, &eta)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    Ok(y.split_off(burn_in))
}

#[inline]
pub(crate) fn lag(y: &[f64], t: usize, k: usize) -> f64 {
    if t >= k {
        y[t - k]
    } else {
        0.0
    }
}

/// Factor `k` with `mean h(e_t / (k s_t)) = 1`, used to put heuristic scale
/// estimates on the identifiability normalisation.
pub(crate) fn psi_rescale(e: &[f64], s: &[f64]) -> f64 {
    let z: Vec<f64> = e.iter().zip(s).filter(|(_, s)| **s > 0.0).map(|(e, s)| e / s).collect();
    if z.is_empty() || z.iter().all(|v| *v == 0.0) {
        return 1.0;
    }
    let m = |k: f64| z.iter().map(|v| h(v / k)).sum::<f64>() / z.len() as f64;
    let (mut lo, mut hi) = (1e-6, 1e6);
    for _ in 0..200 {
        let mid = math::sqrt(lo * hi);
        // m decreases in k
        if m(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-10 {
            break;
        }
    }
    math::sqrt(lo * hi)
}

pub(crate) fn clamp_into(theta: &mut [f64], bounds: &(Vec<f64>, Vec<f64>)) {
    for (i, v) in theta.iter_mut().enumerate() {
        if !v.is_finite() {
            *v = 0.5 * (bounds.0[i] + bounds.1[i]);
        }
        *v = v.clamp(bounds.0[i], bounds.1[i]);
    }
}
