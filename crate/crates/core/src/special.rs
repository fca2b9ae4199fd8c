//! Gaussian density and distribution helpers.

use std::f64::consts::{PI, SQRT_2};

/// `N(x; μ, σ²)`.
pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let t = (x - mu) / sigma;
    (-0.5 * t * t).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// `Φ(x; μ, σ²)`, evaluated through `erfc` so the lower tail keeps full
/// relative accuracy.
pub fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * libm::erfc(-(x - mu) / (sigma * SQRT_2))
}

/// `Φ(b; μ, σ²) − Φ(a; μ, σ²)` without subtracting two numbers near 1/2 or 1.
pub fn normal_mass(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    let s = sigma * SQRT_2;
    let (ta, tb) = ((a - mu) / s, (b - mu) / s);
    if ta >= 0.0 {
        // Both in the upper half: difference of upper tails.
        0.5 * (libm::erfc(ta) - libm::erfc(tb))
    } else if tb <= 0.0 {
        0.5 * (libm::erfc(-tb) - libm::erfc(-ta))
    } else {
        0.5 * (libm::erf(tb) - libm::erf(ta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_integrate;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0, 0.0, 1.0), 0.5);
        // Φ(1.96) to 15 digits.
        assert_relative_eq!(normal_cdf(1.96, 0.0, 1.0), 0.975_002_104_851_780, max_relative = 1e-14);
        assert_relative_eq!(
            normal_cdf(-10.0, 0.0, 1.0),
            7.619_853_024_160_527e-24,
            max_relative = 1e-13
        );
    }

    #[test]
    fn mass_matches_integrated_density() {
        for &(a, b, mu, s) in &[
            (-0.3, 0.4, 0.05, 0.7),
            (1.0, 3.0, 0.0, 1.0),
            (-5.0, -4.0, 0.0, 1.0),
            (0.0, 1.0, 0.5, 1e3),
        ] {
            let quad = adaptive_integrate(|x| normal_pdf(x, mu, s), a, b, 1e-14).unwrap();
            assert_relative_eq!(normal_mass(a, b, mu, s), quad, max_relative = 1e-12);
        }
    }
}
