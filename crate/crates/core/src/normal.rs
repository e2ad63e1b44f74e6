//! Standard normal distribution function and quantile.

use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

/// `Phi(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Phi^{-1}(p)`; returns `-inf` at 0 and `+inf` at 1.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let x = -SQRT_2 * erfc_inv(2.0 * p);
        // one Halley step against the accurate cdf
        let e = (cdf(x) - p) / pdf(x);
        if e.is_finite() {
            x - e / (1.0 + 0.5 * x * e)
        } else {
            x
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn known_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert_abs_diff_eq!(cdf(1.959963984540054), 0.975, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile(0.975), 1.959963984540054, epsilon = 1e-12);
        assert_abs_diff_eq!(quantile(0.8), 0.8416212335729143, epsilon = 1e-12);
        assert_eq!(quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(quantile(1.0), f64::INFINITY);
    }

    #[test]
    fn roundtrip() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert_abs_diff_eq!(cdf(quantile(p)), p, epsilon = 1e-13);
        }
        for p in [1e-10, 1e-6, 1.0 - 1e-6] {
            assert_abs_diff_eq!(cdf(quantile(p)), p, epsilon = 1e-13);
        }
    }
}
