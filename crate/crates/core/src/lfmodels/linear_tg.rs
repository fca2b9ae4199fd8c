use super::tg::{boundary_factor, one_minus_boundary_factor, sphere_surface_area};
use super::{check_positive, ClosedFormSet, LikelihoodModel, ModelError};
use crate::linalg::{norm, Matrix, SymMatrix, Vector};
use crate::quadrature::gaussian_radial_moment;

/// `z = Hx + w` with `H` a full-rank 3×2 matrix and `w` unit-variance Gaussian
/// noise truncated to the ball `‖w‖ ≤ a` in `ℝ³`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTgModel {
    h: Matrix,
    a: f64,
    gram: SymMatrix,
    gram_inv: SymMatrix,
    pinv: Matrix,
    norm_const: f64,
}

impl LinearTgModel {
    pub const RANK_TOL: f64 = 1e-10;

    pub fn new(h: Matrix, a: f64) -> Result<Self, ModelError> {
        if h.rows() != 3 || h.cols() != 2 {
            return Err(ModelError::DimMismatch {
                expected: 6,
                got: h.rows() * h.cols(),
            });
        }
        check_positive("a", a)?;
        let rank = h.rank(Self::RANK_TOL);
        if rank < 2 {
            return Err(ModelError::RankDeficient { rank, needed: 2 });
        }
        let ht = h.transpose();
        let gram = ht.mul(&h).expect("2×3 by 3×2").symmetrize();
        let gram_inv = gram
            .invert()
            .map_err(|_| ModelError::RankDeficient { rank: 1, needed: 2 })?;
        let pinv = Matrix::from(&gram_inv).mul(&ht).expect("2×2 by 2×3");
        let norm_const = sphere_surface_area(3) * gaussian_radial_moment(1, a, 1.0);
        Ok(Self {
            h,
            a,
            gram,
            gram_inv,
            pinv,
            norm_const,
        })
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `HᵀH`.
    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    /// `H† = (HᵀH)⁻¹Hᵀ`.
    pub fn pseudo_inverse(&self) -> &Matrix {
        &self.pinv
    }

    /// `d` of the three-dimensional unit-σ truncated Gaussian.
    pub fn boundary_factor(&self) -> f64 {
        boundary_factor(3, 1.0, self.a)
    }

    /// `c = 1 − d`, the per-axis noise variance.
    pub fn variance_factor(&self) -> f64 {
        one_minus_boundary_factor(3, 1.0, self.a)
    }
}

impl LikelihoodModel for LinearTgModel {
    fn name(&self) -> &'static str {
        "linear_tg"
    }

    fn dim_x(&self) -> usize {
        2
    }

    fn dim_z(&self) -> usize {
        3
    }

    fn support_radius(&self) -> f64 {
        self.a
    }

    fn centre(&self, x: &[f64]) -> Vector {
        self.h.mul_vec(x)
    }

    fn noise_pdf(&self, w: &[f64]) -> f64 {
        let r = norm(w);
        if r > self.a {
            0.0
        } else {
            (-0.5 * r * r).exp() / self.norm_const
        }
    }

    fn pdf_max(&self) -> f64 {
        1.0 / self.norm_const
    }

    fn score_into(&self, z: &[f64], x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let c = self.h.mul_vec(x);
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|i| self.h.get(i, j) * (z[i] - c[i])).sum();
        }
        Ok(())
    }

    fn mle_into(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.pinv.mul_vec(z));
    }

    fn observation_jacobian(&self) -> Matrix {
        self.h.transpose()
    }

    fn log_hessian(&self, _z: &[f64], _x: &[f64]) -> Option<SymMatrix> {
        Some(self.gram.scale(-1.0))
    }

    fn closed_form(&self, _x: &[f64]) -> Option<ClosedFormSet> {
        let c = self.variance_factor();
        Some(ClosedFormSet {
            fim: self.gram.scale(c),
            leibniz: Matrix::identity(2).scale(self.boundary_factor()),
            crllb: self.gram_inv.scale(c),
            mle_cov: self.gram_inv.scale(c),
            efficient: true,
        })
    }
}
