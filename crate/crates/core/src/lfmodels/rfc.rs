use std::f64::consts::PI;

use super::{radial_identity_score, ClosedFormSet, LikelihoodModel, ModelError};
use crate::linalg::{norm, Matrix, SymMatrix, Vector};
use crate::quadrature::adaptive_integrate;

/// Raised fractional cosine noise in the plane,
/// `p(w) = k (1 + β cos(π‖w‖/a))` on `‖w‖ ≤ a`, with the radius fixed at
/// `a = π` (the closed forms below only hold there).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfcModel {
    beta: f64,
    norm_const: f64,
}

impl RfcModel {
    pub const RADIUS: f64 = PI;
    /// Below this β the bound is taken from its analytic β → 0 limit.
    pub const MIN_QUADRATURE_BETA: f64 = 1e-3;

    pub fn new(beta: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(ModelError::InvalidParameter(format!(
                "beta must lie in [0, 1], got {beta}"
            )));
        }
        let a = Self::RADIUS;
        Ok(Self {
            beta,
            norm_const: 1.0 / (PI * a * a - 4.0 * beta * a * a / PI),
        })
    }

    /// Only `a = π` is supported; anything else is rejected.
    pub fn with_radius(beta: f64, a: f64) -> Result<Self, ModelError> {
        if (a - PI).abs() > 1e-12 {
            return Err(ModelError::InvalidParameter(format!(
                "the RFC model is only defined for a = π, got a = {a}"
            )));
        }
        Self::new(beta)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Normalization constant `k_RFC = (πa² − 4βa²/π)⁻¹`.
    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn radial_integral(&self) -> f64 {
        rfc_radial_integral(self.beta)
    }
}

/// `I(β) = ∫₀^π r sin²r / (1 + β cos r) dr`, by adaptive Gauss-Kronrod.
///
/// At `β = 1` the denominator vanishes at `r = π` together with `sin²r`, so
/// the integrand is evaluated through `sin²r/(1+cos r) = 1 − cos r` there.
pub fn rfc_radial_integral(beta: f64) -> f64 {
    let f = |r: f64| {
        let c = r.cos();
        if beta == 1.0 {
            r * (1.0 - c)
        } else {
            r * r.sin().powi(2) / (1.0 + beta * c)
        }
    };
    adaptive_integrate(f, 0.0, PI, 1e-13).expect("I(β) integrand is smooth on [0, π]")
}

impl LikelihoodModel for RfcModel {
    fn name(&self) -> &'static str {
        "rfc"
    }

    fn dim_x(&self) -> usize {
        2
    }

    fn dim_z(&self) -> usize {
        2
    }

    fn support_radius(&self) -> f64 {
        Self::RADIUS
    }

    fn centre(&self, x: &[f64]) -> Vector {
        x.to_vec()
    }

    fn noise_pdf(&self, w: &[f64]) -> f64 {
        let r = norm(w);
        if r > Self::RADIUS {
            0.0
        } else {
            self.norm_const * (1.0 + self.beta * (PI * r / Self::RADIUS).cos())
        }
    }

    fn pdf_max(&self) -> f64 {
        self.norm_const * (1.0 + self.beta)
    }

    fn score_into(&self, z: &[f64], x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let r = norm(&[z[0] - x[0], z[1] - x[1]]);
        // d ln p / dr = −β sin r / (1 + β cos r); divide by r via sinc.
        let sinc = if r == 0.0 { 1.0 } else { r.sin() / r };
        let denom = 1.0 + self.beta * r.cos();
        let slope_over_r = if self.beta == 0.0 {
            0.0
        } else {
            -self.beta * sinc / denom
        };
        radial_identity_score(z, x, slope_over_r, out);
        Ok(())
    }

    fn mle_into(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(z);
    }

    fn observation_jacobian(&self) -> Matrix {
        Matrix::identity(2)
    }

    fn degenerate_score(&self) -> bool {
        self.beta < Self::MIN_QUADRATURE_BETA
    }

    fn closed_form(&self, _x: &[f64]) -> Option<ClosedFormSet> {
        let b = self.beta;
        let pi2 = PI * PI;
        let i_beta = self.radial_integral();
        let denom = pi2 - 4.0 * b;
        let crllb = (pi2 - 4.0).powi(2) / (denom * i_beta);
        let cov = (PI.powi(4) / 4.0 + b * (12.0 - 3.0 * pi2)) / denom;
        Some(ClosedFormSet {
            fim: SymMatrix::scaled_identity(2, b * b / denom * i_beta),
            leibniz: Matrix::identity(2).scale(pi2 * (1.0 - b) / denom),
            crllb: SymMatrix::scaled_identity(2, crllb),
            mle_cov: SymMatrix::scaled_identity(2, cov),
            efficient: false,
        })
    }
}
