use std::f64::consts::PI;

use super::{check_positive, radial_identity_score, ClosedFormSet, LikelihoodModel, ModelError};
use crate::linalg::{norm, Matrix, SymMatrix, Vector, MAX_DIM};
use crate::quadrature::{gaussian_radial_moment, gaussian_series, sin_power_integral};

/// Surface measure of the unit `(n−1)`-sphere in `ℝⁿ`:
/// `2π ∏_{i=1}^{n−2} ∫₀^π sin^{n−1−i}θ dθ`, and `2` (two points) for `n = 1`.
pub fn sphere_surface_area(n: usize) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    if n == 1 {
        return 2.0;
    }
    (1..=n - 2).fold(2.0 * PI, |acc, i| acc * sin_power_integral((n - 1 - i) as u32))
}

/// Isotropic Gaussian noise in `ℝⁿ` truncated to the ball `‖w‖ ≤ a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncGaussianSphereModel {
    n: usize,
    sigma: f64,
    a: f64,
    norm_const: f64,
}

impl TruncGaussianSphereModel {
    pub fn new(n: usize, sigma: f64, a: f64) -> Result<Self, ModelError> {
        if n == 0 || n > MAX_DIM {
            return Err(ModelError::InvalidParameter(format!(
                "n must lie in 1..={MAX_DIM}, got {n}"
            )));
        }
        check_positive("sigma", sigma)?;
        check_positive("a", a)?;
        let norm_const = sphere_surface_area(n) * gaussian_radial_moment(n as i32 - 2, a, sigma);
        Ok(Self {
            n,
            sigma,
            a,
            norm_const,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `kⁿ_TG = ∫_{‖w‖≤a} exp(−‖w‖²/2σ²) dw`; the density is `exp(·)/k`.
    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// `d = aⁿ e^{−a²/2σ²} / (n ∫₀^a e^{−r²/2σ²} r^{n−1} dr)`, the boundary
    /// term that scales the identity Leibniz matrix.
    pub fn boundary_factor(&self) -> f64 {
        boundary_factor(self.n, self.sigma, self.a)
    }

    /// `c = σ²(1 − d)`, the per-axis MLE variance (equal to the CRLLB).
    pub fn variance_factor(&self) -> f64 {
        self.sigma * self.sigma * one_minus_boundary_factor(self.n, self.sigma, self.a)
    }
}

pub(super) fn boundary_factor(n: usize, sigma: f64, a: f64) -> f64 {
    let moment = gaussian_radial_moment(n as i32 - 2, a, sigma);
    a.powi(n as i32) * (-a * a / (2.0 * sigma * sigma)).exp() / (n as f64 * moment)
}

/// `1 − d`, summed as a series when `a/σ` is small so the cancellation
/// between `1` and `d ≈ 1` does not destroy it.
pub(super) fn one_minus_boundary_factor(n: usize, sigma: f64, a: f64) -> f64 {
    let b = a / sigma;
    if b < 2.0 {
        let n = n as i32;
        b * b * gaussian_series(n, b) / (n as f64 * gaussian_series(n - 2, b))
    } else {
        1.0 - boundary_factor(n, sigma, a)
    }
}

impl LikelihoodModel for TruncGaussianSphereModel {
    fn name(&self) -> &'static str {
        "tg"
    }

    fn dim_x(&self) -> usize {
        self.n
    }

    fn dim_z(&self) -> usize {
        self.n
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
            (-r * r / (2.0 * self.sigma * self.sigma)).exp() / self.norm_const
        }
    }

    fn pdf_max(&self) -> f64 {
        1.0 / self.norm_const
    }

    fn score_into(&self, z: &[f64], x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        radial_identity_score(z, x, -1.0 / (self.sigma * self.sigma), out);
        Ok(())
    }

    fn mle_into(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(z);
    }

    fn observation_jacobian(&self) -> Matrix {
        Matrix::identity(self.n)
    }

    fn log_hessian(&self, _z: &[f64], _x: &[f64]) -> Option<SymMatrix> {
        Some(SymMatrix::scaled_identity(self.n, -1.0 / (self.sigma * self.sigma)))
    }

    fn closed_form(&self, _x: &[f64]) -> Option<ClosedFormSet> {
        let c = self.variance_factor();
        let s2 = self.sigma * self.sigma;
        Some(ClosedFormSet {
            fim: SymMatrix::scaled_identity(self.n, c / (s2 * s2)),
            leibniz: Matrix::identity(self.n).scale(self.boundary_factor()),
            crllb: SymMatrix::scaled_identity(self.n, c),
            mle_cov: SymMatrix::scaled_identity(self.n, c),
            efficient: true,
        })
    }
}
