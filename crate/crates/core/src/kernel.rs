//! Standard logistic density, distribution function, and the `h` transform
//! used by the identifiability normalisation `E h(eta) = 1`.
//!
//! Everything here is evaluated through `exp(-|x|)` so no intermediate
//! overflows for any finite input.

use crate::math;

/// Density of the standard logistic distribution, `e^{-x} / (1 + e^{-x})^2`.
pub fn logistic_pdf(x: f64) -> f64 {
    let e = math::exp(-x.abs());
    let d = 1.0 + e;
    e / (d * d)
}

/// Distribution function of the standard logistic distribution.
pub fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

/// `log f(x) = -|x| - 2 log(1 + e^{-|x|})`.
pub fn log_logistic_pdf(x: f64) -> f64 {
    let a = x.abs();
    -a - 2.0 * math::ln_1p(math::exp(-a))
}

/// `2F(x) - 1`, computed as `tanh(x/2)` to avoid cancellation near zero.
#[inline]
pub fn centered_cdf(x: f64) -> f64 {
    math::tanh(0.5 * x)
}

/// `h(x) = x (2F(x) - 1)`. Even, nonnegative, and asymptotically `|x|`.
pub fn h(x: f64) -> f64 {
    x * centered_cdf(x)
}

/// Derivative of `log f`, equal to `1 - 2F(x)`.
#[inline]
pub fn score_kernel(x: f64) -> f64 {
    -centered_cdf(x)
}
