use std::f64::consts::PI;

use super::{check_positive, ClosedFormSet, LikelihoodModel, ModelError};
use crate::linalg::{norm, Matrix, SymMatrix, Vector};

/// Laplace noise truncated to the disk of radius `a`:
/// `p(w) = k_TL exp(−α‖w‖)` on `‖w‖ ≤ a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncLaplaceModel {
    alpha: f64,
    a: f64,
    norm_const: f64,
}

impl TruncLaplaceModel {
    pub fn new(alpha: f64, a: f64) -> Result<Self, ModelError> {
        check_positive("alpha", alpha)?;
        check_positive("a", a)?;
        let q = mass_factor(a * alpha);
        Ok(Self {
            alpha,
            a,
            norm_const: alpha * alpha / (2.0 * PI * q),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `k_TL = α² / (2π(1 − e^{−aα} − aα e^{−aα}))`.
    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// The product `aα` that every closed form depends on.
    pub fn shape(&self) -> f64 {
        self.a * self.alpha
    }

    /// Diagonal of the closed-form CRLLB and MLE covariance with the common
    /// factor `(2α²(1 − e^{−aα} − aα e^{−aα}))⁻¹` removed.
    pub fn normalized_diagonals(&self) -> (f64, f64) {
        let t = self.shape();
        let e = (-t).exp();
        let q = mass_factor(t);
        let l_num = 2.0 * q - t * t * e;
        let cov_num = 6.0 * q - 3.0 * t * t * e - t.powi(3) * e;
        (l_num * l_num / q, cov_num)
    }
}

/// `1 − e^{−t} − t e^{−t}`.
fn mass_factor(t: f64) -> f64 {
    -libm::expm1(-t) - t * (-t).exp()
}

impl LikelihoodModel for TruncLaplaceModel {
    fn name(&self) -> &'static str {
        "laplace"
    }

    fn dim_x(&self) -> usize {
        2
    }

    fn dim_z(&self) -> usize {
        2
    }

    fn support_radius(&self) -> f64 {
        self.a
    }

    fn centre(&self, x: &[f64]) -> Vector {
        x.to_vec()
    }

    fn noise_pdf(&self, w: &[f64]) -> f64 {
        let r = norm(w);
        if r > self.a {
            0.0
        } else {
            self.norm_const * (-self.alpha * r).exp()
        }
    }

    fn pdf_max(&self) -> f64 {
        self.norm_const
    }

    fn score_into(&self, z: &[f64], x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let w = [z[0] - x[0], z[1] - x[1]];
        let r = norm(&w);
        if r == 0.0 {
            return Err(ModelError::UndefinedAtPoint(z.to_vec()));
        }
        out[0] = self.alpha * w[0] / r;
        out[1] = self.alpha * w[1] / r;
        Ok(())
    }

    fn mle_into(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(z);
    }

    fn observation_jacobian(&self) -> Matrix {
        Matrix::identity(2)
    }

    fn closed_form(&self, _x: &[f64]) -> Option<ClosedFormSet> {
        let alpha2 = self.alpha * self.alpha;
        let t = self.shape();
        let q = mass_factor(t);
        let (crllb_scaled, cov_scaled) = self.normalized_diagonals();
        let common = 1.0 / (2.0 * alpha2 * q);
        Some(ClosedFormSet {
            fim: SymMatrix::scaled_identity(2, alpha2 / 2.0),
            leibniz: Matrix::identity(2).scale(self.norm_const * PI * self.a * self.a * (-t).exp()),
            crllb: SymMatrix::scaled_identity(2, crllb_scaled * common),
            mle_cov: SymMatrix::scaled_identity(2, cov_scaled * common),
            efficient: false,
        })
    }
}
