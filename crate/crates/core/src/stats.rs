//! Sample statistics used by the simulation and diagnostic layers.

use alloc::vec::Vec;

use crate::math;

/// Mean and sample standard deviation (`n - 1` divisor; zero for `n < 2`).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, math::sqrt(ss / (n - 1) as f64))
}

/// Linearly interpolated quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = math::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against `cdf`.
pub fn ks_test(x: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let v = sorted(x);
    let n = v.len();
    if n == 0 {
        return KsResult {
            statistic: f64::NAN,
            p_value: f64::NAN,
        };
    }
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &xi) in v.iter().enumerate() {
        let f = cdf(xi);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let en = math::sqrt(nf);
    KsResult {
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    }
}

/// KS test against the standard normal.
pub fn ks_normal(x: &[f64]) -> KsResult {
    ks_test(x, math::normal_cdf)
}

/// `Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2)`.
fn kolmogorov_q(l: f64) -> f64 {
    if l < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = sign * math::exp(-2.0 * kf * kf * l * l);
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn kolmogorov_critical_values() {
        // asymptotic 5% and 1% points
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn normal_draws_pass_shifted_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_normal(&x).p_value > 0.01);
        let y: Vec<f64> = x.iter().map(|v| v + 0.5).collect();
        assert!(ks_normal(&y).p_value < 1e-6);
    }

    #[test]
    fn quantiles_and_moments() {
        let v = sorted(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
