//! Closed-form bounds and rate expressions used to overlay theory on measurements.

use crate::cloud::PointCloud;
use crate::error::{invalid_param, Result};

/// The exponent `d'` appearing in the logarithmic factor of the convergence rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DPrime {
    Infinite,
    Finite(f64),
}

impl DPrime {
    /// `1/d'`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            DPrime::Infinite => 0.0,
            DPrime::Finite(v) => 1.0 / v,
        }
    }
}

pub fn d_prime(d: usize) -> Result<DPrime> {
    match d {
        0 => Err(invalid_param("d", "dimension must be at least 1")),
        1 => Ok(DPrime::Infinite),
        2 => Ok(DPrime::Finite(4.0 / 3.0)),
        d => Ok(DPrime::Finite(d as f64)),
    }
}

/// `C (γ N^{-1/(d∨2)} (log N)^{1/d'} + (1+λ) γ^{-1/3})`.
pub fn rate_bound(n: usize, d: usize, gamma: f64, lambda: f64, c: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid_param("N", "rate bound needs N >= 2 so that log N > 0"));
    }
    let inv_dp = d_prime(d)?.reciprocal();
    let nf = n as f64;
    let sampling = gamma * nf.powf(-1.0 / d.max(2) as f64) * nf.ln().powf(inv_dp);
    let localization = (1.0 + lambda) * gamma.powf(-1.0 / 3.0);
    Ok(c * (sampling + localization))
}

/// `max(1, c0 N^{3/(4d)})`.
pub fn gamma_schedule(n: usize, d: usize, c0: f64) -> f64 {
    let g = c0 * (n as f64).powf(3.0 / (4.0 * d as f64));
    g.max(1.0)
}

/// `(1/N) Σ |x_n - x̄|²`, the value of the functional at the constant map to the mean.
pub fn variance_upper_bound(cloud: &PointCloud) -> f64 {
    let mean = cloud.mean();
    let sum: f64 = cloud
        .points()
        .map(|p| p.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
        .sum();
    sum / cloud.len() as f64
}

/// `3 M e^{2γW} W + (e^{2γW} - 1) M²`: how far the optimal value can move when
/// the data are displaced by at most `W`.
pub fn stability_bound(diameter: f64, gamma: f64, w: f64) -> f64 {
    let growth = (2.0 * gamma * w).exp();
    3.0 * diameter * growth * w + (2.0 * gamma * w).exp_m1() * diameter * diameter
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn d_prime_values() {
        assert_eq!(d_prime(1).unwrap(), DPrime::Infinite);
        assert_eq!(d_prime(2).unwrap(), DPrime::Finite(4.0 / 3.0));
        assert_eq!(d_prime(5).unwrap(), DPrime::Finite(5.0));
        assert!(d_prime(0).is_err());
        assert_eq!(DPrime::Infinite.reciprocal(), 0.0);
    }

    #[test]
    fn rate_bound_d1_ignores_log() {
        // (log N)^0 = 1, so only γ N^{-1/2} + (1+λ)γ^{-1/3} remains.
        let v = rate_bound(100, 1, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 0.1 + 1.0, max_relative = 1e-15);
    }

    #[test]
    fn rate_bound_d2_n16() {
        // independent evaluation: 16^{-1/2} (ln 16)^{3/4} + 1
        let expected = 0.25 * 2.772588722239781_f64.powf(0.75) + 1.0;
        let v = rate_bound(16, 2, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(v, expected, max_relative = 1e-14);
        assert_relative_eq!(v, 1.537_160_535_308_644_8, max_relative = 1e-12);
    }

    #[test]
    fn rate_bound_localization_homogeneity() {
        let a = rate_bound(1000, 3, 2.0, 1.5, 1.0).unwrap();
        let b = rate_bound(1000, 3, 16.0, 1.5, 1.0).unwrap();
        let samp = |g: f64| g * 1000f64.powf(-1.0 / 3.0) * 1000f64.ln().powf(1.0 / 3.0);
        assert_relative_eq!((b - samp(16.0)) / (a - samp(2.0)), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn rate_bound_rejects_small_n() {
        assert!(rate_bound(1, 2, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn schedule() {
        assert_eq!(gamma_schedule(1, 3, 0.5), 1.0);
        assert_eq!(gamma_schedule(1, 3, 2.5), 2.5);
        assert_relative_eq!(gamma_schedule(16, 1, 1.0), 8.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_schedule(256, 2, 1.0), 8.0, max_relative = 1e-15);
    }

    #[test]
    fn variance() {
        let one = PointCloud::from_rows(&[[4.0, 2.0]]).unwrap();
        assert_eq!(variance_upper_bound(&one), 0.0);
        let two = PointCloud::from_rows(&[[-1.0], [1.0]]).unwrap();
        assert_eq!(variance_upper_bound(&two), 1.0);
        let three = PointCloud::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert_relative_eq!(variance_upper_bound(&three), 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn stability_bound_monotone_and_zero_at_origin() {
        assert_eq!(stability_bound(2.0, 5.0, 0.0), 0.0);
        let mut prev = 0.0;
        for k in 1..50 {
            let v = stability_bound(2.0, 5.0, k as f64 * 1e-3);
            assert!(v > prev);
            prev = v;
        }
    }
}
