//! Likelihood models with parameter-dependent (ball) support.
//!
//! Every model here is additive, `z = f(x) + w`, with noise `w` supported on
//! the ball `‖w‖ ≤ a`. The support of `p(z|x)` therefore moves with `x`,
//! which is exactly the situation the classical CRLB does not cover.

mod config;
mod laplace;
mod linear_tg;
mod rfc;
mod tg;

use std::fmt;

use thiserror::Error;

use crate::linalg::{norm, Matrix, SymMatrix, Vector};

pub use config::{parse_h, ModelConfig, ModelKind};
pub use laplace::TruncLaplaceModel;
pub use linear_tg::LinearTgModel;
pub use rfc::{rfc_radial_integral, RfcModel};
pub use tg::{sphere_surface_area, TruncGaussianSphereModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("score undefined at {0:?} (measure-zero point)")]
    UndefinedAtPoint(Vector),
    #[error("observation matrix must have full column rank (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },
    #[error("expected dimension {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("config error: {0}")]
    Config(String),
}

/// Closed-form reference values for one model at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormSet {
    pub fim: SymMatrix,
    pub leibniz: Matrix,
    pub crllb: SymMatrix,
    pub mle_cov: SymMatrix,
    pub efficient: bool,
}

/// Behaviour needed to compute Fisher information, Leibniz terms and bounds
/// for an additive model with ball-shaped noise support.
pub trait LikelihoodModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn dim_x(&self) -> usize;

    fn dim_z(&self) -> usize;

    /// Radius `a` of the noise support.
    fn support_radius(&self) -> f64;

    /// Centre `f(x)` of the support in observation space.
    fn centre(&self, x: &[f64]) -> Vector;

    /// Noise density `p_w(w)`, zero outside the ball.
    fn noise_pdf(&self, w: &[f64]) -> f64;

    /// Upper bound on `p_w`, used as the rejection-sampling envelope.
    fn pdf_max(&self) -> f64;

    /// Writes `∇ₓ ln p(z|x)` into `out` (length `dim_x`).
    fn score_into(&self, z: &[f64], x: &[f64], out: &mut [f64]) -> Result<(), ModelError>;

    /// Writes the estimator `x̂(z)` into `out` (length `dim_x`).
    fn mle_into(&self, z: &[f64], out: &mut [f64]);

    /// `∇ₓ zᵀ` for a point riding on the moving boundary (`dim_x × dim_z`).
    fn observation_jacobian(&self) -> Matrix;

    /// Analytic Hessian of `ln p(z|x)` in `x`, when the model provides one.
    fn log_hessian(&self, _z: &[f64], _x: &[f64]) -> Option<SymMatrix> {
        None
    }

    /// True when the score is (nearly) identically zero, so `J` and `L`
    /// vanish together and only a closed-form limit of `LᵀJ⁻¹L` is reliable.
    fn degenerate_score(&self) -> bool {
        false
    }

    /// Closed-form reference values, when derived for this model.
    fn closed_form(&self, x: &[f64]) -> Option<ClosedFormSet>;

    fn pdf(&self, z: &[f64], x: &[f64]) -> f64 {
        let c = self.centre(x);
        let w: Vector = z.iter().zip(&c).map(|(zi, ci)| zi - ci).collect();
        self.noise_pdf(&w)
    }

    fn score(&self, z: &[f64], x: &[f64]) -> Result<Vector, ModelError> {
        let mut out = vec![0.0; self.dim_x()];
        self.score_into(z, x, &mut out)?;
        Ok(out)
    }

    fn mle(&self, z: &[f64]) -> Vector {
        let mut out = vec![0.0; self.dim_x()];
        self.mle_into(z, &mut out);
        out
    }

    /// Outward unit normal of the support boundary at `z`.
    fn boundary_normal(&self, z: &[f64], x: &[f64]) -> Vector {
        let c = self.centre(x);
        let w: Vector = z.iter().zip(&c).map(|(zi, ci)| zi - ci).collect();
        let r = norm(&w);
        w.into_iter().map(|v| v / r).collect()
    }
}

fn check_positive(name: &str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Score of a radially symmetric identity-observation model:
/// `∇ₓ ln p = −(d ln p/dr)·(z − x)/r`, with the ratio supplied as
/// `slope_over_r = (d ln p/dr)/r`.
fn radial_identity_score(z: &[f64], x: &[f64], slope_over_r: f64, out: &mut [f64]) {
    for ((o, zi), xi) in out.iter_mut().zip(z).zip(x) {
        *o = -slope_over_r * (zi - xi);
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::quadrature::QuadratureSpec;
    use proptest::prelude::*;

    fn grid_models() -> Vec<Box<dyn LikelihoodModel>> {
        let mut models: Vec<Box<dyn LikelihoodModel>> = Vec::new();
        for beta in [0.0, 0.25, 0.5, 0.75, 1.0] {
            models.push(Box::new(RfcModel::new(beta).unwrap()));
        }
        for t in [0.5, 1.0, 2.0, 5.0] {
            models.push(Box::new(TruncLaplaceModel::new(2.0, t / 2.0).unwrap()));
        }
        for n in [2, 3] {
            for sigma in [0.5, 1.0, 2.0] {
                models.push(Box::new(TruncGaussianSphereModel::new(n, sigma, 1.5).unwrap()));
            }
        }
        models.push(Box::new(
            LinearTgModel::new(
                Matrix::from_row_major(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]).unwrap(),
                1.5,
            )
            .unwrap(),
        ));
        models
    }

    #[test]
    fn every_pdf_normalizes() {
        let spec = QuadratureSpec::default();
        let spec3 = spec.with_nodes(96, 96);
        for model in grid_models() {
            let s = if model.dim_z() == 3 { spec3 } else { spec };
            let total = normalization(model.as_ref(), &s);
            assert!((total - 1.0).abs() < 1e-8, "{model:?}: {total}");
        }
    }

    #[test]
    fn outside_support_is_zero() {
        for model in grid_models() {
            let a = model.support_radius();
            let x = vec![0.3; model.dim_x()];
            let mut z = model.centre(&x);
            z[0] += 1.01 * a;
            assert_eq!(model.pdf(&z, &x), 0.0, "{model:?}");
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        for model in grid_models() {
            let x: Vector = (0..model.dim_x()).map(|i| 0.2 - 0.1 * i as f64).collect();
            let c = model.centre(&x);
            let s = model.support_radius() / 1.5;
            let offsets = [[0.3, -0.4, 0.2], [-0.5, 0.1, -0.25]];
            for off in offsets {
                let z: Vector = c.iter().zip(off).map(|(ci, o)| ci + s * o).collect();
                let analytic = model.score(&z, &x).unwrap();
                let fd = fd_score(model.as_ref(), &z, &x, 1e-5);
                let scale = norm(&analytic).max(1e-3);
                let err = norm(&analytic.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
                assert!(err / scale < 1e-6, "{model:?}: {analytic:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn boundary_normal_is_unit_and_outward() {
        let model = TruncGaussianSphereModel::new(3, 1.0, 2.0).unwrap();
        let x = [1.0, -1.0, 0.5];
        let z = [1.0, 1.0, 0.5];
        let n = model.boundary_normal(&z, &x);
        assert_eq!(n, vec![0.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn radial_models_are_rotation_invariant(angle in 0.0f64..std::f64::consts::TAU, r in 0.0f64..1.0) {
            let models: Vec<Box<dyn LikelihoodModel>> = vec![
                Box::new(RfcModel::new(0.6).unwrap()),
                Box::new(TruncLaplaceModel::new(1.3, 2.0).unwrap()),
                Box::new(TruncGaussianSphereModel::new(2, 0.8, 1.7).unwrap()),
            ];
            for m in models {
                let rr = r * m.support_radius();
                let a = m.noise_pdf(&[rr, 0.0]);
                let b = m.noise_pdf(&[rr * angle.cos(), rr * angle.sin()]);
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }

        #[test]
        fn pdf_is_translation_invariant(tx in -5.0f64..5.0, ty in -5.0f64..5.0, zx in -1.0f64..1.0, zy in -1.0f64..1.0) {
            let models: Vec<Box<dyn LikelihoodModel>> = vec![
                Box::new(RfcModel::new(0.3).unwrap()),
                Box::new(TruncLaplaceModel::new(2.0, 1.0).unwrap()),
                Box::new(TruncGaussianSphereModel::new(2, 1.0, 1.0).unwrap()),
            ];
            for m in models {
                let x = [0.1, -0.2];
                let z = [0.1 + zx, -0.2 + zy];
                let p0 = m.pdf(&z, &x);
                let p1 = m.pdf(&[z[0] + tx, z[1] + ty], &[x[0] + tx, x[1] + ty]);
                prop_assert!((p0 - p1).abs() <= 1e-12 * p0.max(1e-300));
            }
        }
    }
}
