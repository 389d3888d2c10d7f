//! Innovation laws, their samplers, the `psi` functional, and calibration of
//! scales so that `psi(c X) = 1`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::kernel::{h, logistic_pdf};
use crate::math;
use crate::quadrature::{integrate, integrate_to_infinity, QuadSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Logistic,
    Normal,
    /// `U(-1, 1)` before scaling, so `scale` is the half-width.
    Uniform,
    StudentT,
    /// `S(alpha, 0, 1, 0)` before scaling.
    SymmetricStable,
    Empirical,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Normal => "normal",
            Family::Uniform => "uniform",
            Family::StudentT => "t",
            Family::SymmetricStable => "stable",
            Family::Empirical => "empirical",
        }
    }
}

/// Law of the innovation `eta = scale * X` where `X` follows the base family.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationDist {
    pub family: Family,
    pub scale: f64,
    /// Degrees of freedom for `StudentT`, stability index for `SymmetricStable`.
    pub shape: f64,
    /// Support points of the `Empirical` law (uniform weights).
    pub samples: Vec<f64>,
}

impl InnovationDist {
    fn new(family: Family, scale: f64, shape: f64) -> Self {
        Self {
            family,
            scale,
            shape,
            samples: Vec::new(),
        }
    }

    pub fn logistic(scale: f64) -> Self {
        Self::new(Family::Logistic, scale, 0.0)
    }

    pub fn normal(sd: f64) -> Self {
        Self::new(Family::Normal, sd, 0.0)
    }

    pub fn uniform(half_width: f64) -> Self {
        Self::new(Family::Uniform, half_width, 0.0)
    }

    pub fn student_t(nu: f64, scale: f64) -> Self {
        Self::new(Family::StudentT, scale, nu)
    }

    pub fn stable(alpha: f64, scale: f64) -> Self {
        Self::new(Family::SymmetricStable, scale, alpha)
    }

    pub fn empirical(samples: Vec<f64>) -> Self {
        Self {
            family: Family::Empirical,
            scale: 1.0,
            shape: 0.0,
            samples,
        }
    }

    /// Same base law with a different multiplier.
    pub fn with_scale(&self, scale: f64) -> Self {
        let mut d = self.clone();
        d.scale = scale;
        d
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        match self.family {
            Family::StudentT if !(self.shape > 1.0 && self.shape.is_finite()) => Err(Error::NonIntegrable(format!(
                "t degrees of freedom must exceed 1, got {}",
                self.shape
            ))),
            Family::SymmetricStable if !(self.shape > 1.0 && self.shape <= 2.0) => Err(Error::NonIntegrable(format!(
                "stable index must lie in (1, 2], got {}",
                self.shape
            ))),
            Family::Empirical if self.samples.is_empty() => {
                Err(Error::DegenerateInput("empirical law has no samples".into()))
            }
            Family::Empirical if self.samples.iter().any(|x| !x.is_finite()) => {
                Err(Error::DegenerateInput("empirical law has non-finite samples".into()))
            }
            _ => Ok(()),
        }
    }

    /// One draw. The law must already be valid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match self.family {
            Family::Logistic => {
                let u = open_unit(rng);
                math::ln(u / (1.0 - u))
            }
            Family::Normal => StandardNormal.sample(rng),
            Family::Uniform => 2.0 * rng.random::<f64>() - 1.0,
            Family::StudentT => StudentT::new(self.shape)
                .expect("validated degrees of freedom")
                .sample(rng),
            Family::SymmetricStable => {
                let v = math::PI * (open_unit(rng) - 0.5);
                let w: f64 = Exp1.sample(rng);
                stable_cms(self.shape, v, w)
            }
            Family::Empirical => self.samples[rng.random_range(0..self.samples.len())],
        };
        self.scale * x
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// `E h(eta)` with absolute error target `tol` on the quadrature routes.
    pub fn psi(&self, tol: f64) -> Result<f64> {
        self.validate()?;
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let c = self.scale;
        let settings = QuadSettings::absolute(tol);
        match self.family {
            Family::Logistic => symmetric_psi(c, logistic_pdf, 1.0, settings),
            Family::Normal => symmetric_psi(c, math::normal_pdf, 1.0, settings),
            Family::Uniform => {
                // density 1/2 on (-1, 1), folded onto (0, 1)
                Ok(integrate(|x| h(c * x), 0.0, 1.0, settings)?.value)
            }
            Family::StudentT => {
                let nu = self.shape;
                let log_norm =
                    math::ln_gamma(0.5 * (nu + 1.0)) - math::ln_gamma(0.5 * nu) - 0.5 * math::ln(nu * math::PI);
                let pdf = move |x: f64| math::exp(log_norm - 0.5 * (nu + 1.0) * math::ln_1p(x * x / nu));
                // tail ~ x^-nu: choose the map so the folded integrand stays bounded
                let m = if nu >= 2.0 { 1.0 } else { (1.0 / (nu - 1.0)).min(40.0) };
                symmetric_psi(c, pdf, m, settings)
            }
            Family::SymmetricStable => stable_psi(self.shape, c, tol),
            Family::Empirical => {
                let s: f64 = self.samples.iter().map(|&x| h(c * x)).sum();
                Ok(s / self.samples.len() as f64)
            }
        }
    }

    /// Monte Carlo estimate of `psi` with its standard error.
    pub fn psi_monte_carlo(&self, draws: usize, seed: u64) -> Result<(f64, f64)> {
        self.validate()?;
        if draws < 2 {
            return Err(Error::InvalidParameter("need at least two draws".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut mean, mut m2) = (0.0, 0.0);
        for i in 0..draws {
            let v = h(self.sample(&mut rng));
            let delta = v - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (v - mean);
        }
        let var = m2 / (draws - 1) as f64;
        Ok((mean, math::sqrt(var / draws as f64)))
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Chambers–Mallows–Stuck map for `S(alpha, 0, 1, 0)` from `V ~ U(-pi/2, pi/2)`
/// and `W ~ Exp(1)`.
pub fn stable_cms(alpha: f64, v: f64, w: f64) -> f64 {
    stable_kernel(alpha, v) * math::powf(w, (alpha - 1.0) / alpha)
}

fn stable_kernel(alpha: f64, v: f64) -> f64 {
    stable_kernel_parts(alpha, v, math::cos(v))
}

// `cos_v` is passed separately so callers near `v = pi/2` can supply it
// without cancellation.
fn stable_kernel_parts(alpha: f64, v: f64, cos_v: f64) -> f64 {
    math::sin(alpha * v) / math::powf(cos_v, 1.0 / alpha)
        * math::powf(math::cos((1.0 - alpha) * v), (1.0 - alpha) / alpha)
}

/// `2 int_0^inf h(c x) p(x) dx` for a symmetric density `p`. The tail beyond 1
/// is integrated through `x = w^-m`.
fn symmetric_psi<P: Fn(f64) -> f64>(c: f64, pdf: P, m: f64, settings: QuadSettings) -> Result<f64> {
    let half = QuadSettings {
        abs_tol: 0.25 * settings.abs_tol,
        ..settings
    };
    let body = integrate(|x| h(c * x) * pdf(x), 0.0, 1.0, half)?;
    let tail = integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let x = math::powf(w, -m);
            let v = h(c * x) * pdf(x) * m * math::powf(w, -m - 1.0);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        half,
    )?;
    Ok(2.0 * (body.value + tail.value))
}

/// `psi` of `c S(alpha, 0, 1, 0)` by integrating `h` over the CMS representation:
/// `(2/pi) int_0^{pi/2} int_0^inf h(c K(v) w^g) e^-w dw dv`.
fn stable_psi(alpha: f64, c: f64, tol: f64) -> Result<f64> {
    let gamma = (alpha - 1.0) / alpha;
    // v = pi/2 - s^m removes the (pi/2 - v)^(-1/alpha) blow-up of K
    let m = (2.0 * alpha / (alpha - 1.0)).min(40.0);
    let outer = QuadSettings::absolute(0.5 * tol);
    let inner = QuadSettings {
        abs_tol: 0.1 * tol,
        rel_tol: 1e-11,
        max_intervals: 4000,
    };
    let limit = math::powf(math::FRAC_PI_2, 1.0 / m);
    let mut failure = None;
    let r = integrate(
        |s| {
            if s <= 0.0 || failure.is_some() {
                return 0.0;
            }
            let u = math::powf(s, m);
            let k = c * stable_kernel_parts(alpha, math::FRAC_PI_2 - u, math::sin(u)).abs();
            let jac = m * math::powf(s, m - 1.0);
            let e = match integrate_to_infinity(|w| h(k * math::powf(w, gamma)) * math::exp(-w), 0.0, inner) {
                Ok(r) => r.value,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            };
            e * jac
        },
        0.0,
        limit,
        outer,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r?.value / math::FRAC_PI_2)
}

/// Scale `c` such that `psi(c X) = 1` for the given base law.
pub fn calibrate_scale(family: Family, shape: f64, tol: f64) -> Result<f64> {
    calibrate_scale_of(&InnovationDist::new(family, 1.0, shape), tol)
}

/// Scale calibration for an arbitrary base law (including empirical samples).
pub fn calibrate_scale_of(base: &InnovationDist, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let quad_tol = (1e-2 * tol).min(1e-9);
    let psi_at = |c: f64| base.with_scale(c).psi(quad_tol);
    let (mut lo, mut hi) = (0.5, 2.0);
    let mut psi_lo = psi_at(lo)?;
    while psi_lo > 1.0 {
        lo *= 0.25;
        if lo < 1e-6 {
            return Err(Error::BracketFailure(format!("{} scale", base.family.name())));
        }
        psi_lo = psi_at(lo)?;
    }
    let mut psi_hi = psi_at(hi)?;
    while psi_hi < 1.0 {
        hi *= 4.0;
        if hi > 1e6 {
            return Err(Error::BracketFailure(format!("{} scale", base.family.name())));
        }
        psi_hi = psi_at(hi)?;
    }
    let mut best = if (psi_lo - 1.0).abs() < (psi_hi - 1.0).abs() {
        lo
    } else {
        hi
    };
    let mut best_gap = (psi_at(best)? - 1.0).abs();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = psi_at(mid)?;
        if (p - 1.0).abs() < best_gap {
            best = mid;
            best_gap = (p - 1.0).abs();
        }
        if p < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if best_gap <= tol && hi - lo <= 1e-10 * hi {
            break;
        }
    }
    if best_gap > tol {
        return Err(Error::BracketFailure(format!("{} scale", base.family.name())));
    }
    Ok(best)
}

/// Stability index `alpha` in `(1, 2]` with `psi(S(alpha, 0, 1, 0)) = 1`.
///
/// `psi` falls as `alpha` rises, so the bracket is `[1.05, 2]`.
pub fn calibrate_stable_index(tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let quad_tol = (1e-2 * tol).min(1e-7);
    let psi_at = |a: f64| InnovationDist::stable(a, 1.0).psi(quad_tol);
    let (mut lo, mut hi) = (1.05, 2.0);
    let (psi_lo, psi_hi) = (psi_at(lo)?, psi_at(hi)?);
    if !(psi_lo > 1.0 && psi_hi < 1.0) {
        return Err(Error::BracketFailure("stable index".into()));
    }
    let mut prev = (lo, psi_lo);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let p = psi_at(mid)?;
        // monotonicity spot check against the last evaluation
        if (mid - prev.0) * (p - prev.1) > 0.0 {
            return Err(Error::BracketFailure("stable index (psi not monotone)".into()));
        }
        prev = (mid, p);
        if p > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-4 && (p - 1.0).abs() <= tol {
            break;
        }
    }
    Ok(mid)
}
