use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Standard normal CDF through the complementary error function, which keeps
/// full relative accuracy in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Phi^{-1}(p)`: an `erfc_inv` starting point polished by two Newton steps.
pub fn gaussian_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile level {p} outside (0, 1)")));
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let d = normal_pdf(x);
        if d > 0.0 {
            x -= (normal_cdf(x) - p) / d;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::normal_cdf_series;

    #[test]
    fn reference_points() {
        assert_eq!(gaussian_quantile(0.5).unwrap(), 0.0);
        assert!((gaussian_quantile(0.841_344_7).unwrap() - 0.999_999_81).abs() < 1e-7);
        assert!((gaussian_quantile(0.1).unwrap() + 1.281_551_565_544_600_5).abs() < 1e-12);
        assert!(gaussian_quantile(0.0).is_err());
        assert!(gaussian_quantile(1.0).is_err());
    }

    #[test]
    fn cdf_agrees_with_series() {
        for i in -80..=80 {
            let x = i as f64 / 10.0;
            let a = normal_cdf(x);
            let b = normal_cdf_series(x);
            assert!((a - b).abs() < 1e-14, "x = {x}: {a} vs {b}");
        }
    }
}
