//! Fisher information, the Leibniz boundary term, and the CRLB / CRLLB pair.
//!
//! Expectations are ball integrals over the noise support in observation
//! space, `z = f(x) + w` with `‖w‖ ≤ a`; the Leibniz term is the matching
//! boundary integral `∮ ∇ₓzᵀ n p (x̂ − x)ᵀ dS`.

use thiserror::Error;

use crate::lfmodels::{LikelihoodModel, LinearTgModel, ModelError};
use crate::linalg::{dot, invert, LinalgError, Matrix, SymMatrix, Vector};
use crate::quadrature::{integrate_ball_multi, integrate_boundary_multi, QuadratureError, QuadratureSpec};
use crate::sampling::SampleBatch;

/// `‖D_L‖_F` above which the classical CRLB is flagged as not a valid bound.
pub const LEIBNIZ_ZERO_TOL: f64 = 1e-8;

/// Relative collinearity residual below which an estimator is efficient.
pub const COLLINEARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("Fisher information is singular (rcond {rcond:.3e}): no meaningful CRLB or CRLLB exists")]
    SingularFim { rcond: f64 },
    #[error("no closed form available for model {0}")]
    NoClosedForm(&'static str),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Closed form when the model has one, quadrature otherwise.
    #[default]
    Auto,
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    ClosedForm,
    Quadrature,
}

impl BoundMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::Quadrature => "quadrature",
        }
    }
}

/// Relative Frobenius gaps between quadrature results and closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormDeltas {
    pub fim: f64,
    pub leibniz: f64,
    pub crllb: f64,
    pub mle_cov: f64,
}

impl ClosedFormDeltas {
    pub fn max(&self) -> f64 {
        self.fim.max(self.leibniz).max(self.crllb).max(self.mle_cov)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub x: Vector,
    pub fim: SymMatrix,
    pub leibniz: Matrix,
    pub l_matrix: Matrix,
    /// `J⁻¹`, absent when `J` is singular.
    pub crlb: Option<SymMatrix>,
    /// False whenever the Leibniz term is nonzero.
    pub crlb_valid: bool,
    pub crllb: SymMatrix,
    pub mle_cov: SymMatrix,
    /// `E‖ε − Cγ‖ / √E‖ε‖²`; absent when `J` is singular.
    pub collinearity_residual: Option<f64>,
    pub efficient: bool,
    pub method: BoundMethod,
    pub closed_form_deltas: Option<ClosedFormDeltas>,
}

impl BoundReport {
    /// `C = LᵀJ⁻¹`, mapping the score onto the estimation error.
    pub fn collinearity_matrix(&self) -> Option<Matrix> {
        let inv = self.crlb.as_ref()?;
        self.l_matrix.transpose().mul(&Matrix::from(inv)).ok()
    }
}

/// Expectations gathered in one pass over the support.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub fim: SymMatrix,
    /// `E[γ εᵀ]`, which equals `I − D_L`.
    pub l_direct: Matrix,
    pub mle_cov: SymMatrix,
    pub mean_error: Vector,
}

fn support_spec(model: &dyn LikelihoodModel, spec: &QuadratureSpec) -> QuadratureSpec {
    spec.with_dim(model.dim_z())
}

/// One quadrature pass for `J`, `E[γεᵀ]` and the MLE covariance.
pub fn moments(model: &dyn LikelihoodModel, x: &[f64], spec: &QuadratureSpec) -> Result<Moments, BoundsError> {
    let d = model.dim_x();
    let centre = model.centre(x);
    let mut z = vec![0.0; model.dim_z()];
    let mut score = vec![0.0; d];
    let mut err = vec![0.0; d];
    let mut failure = None;
    // Layout: mass | J (d²) | E[γεᵀ] (d²) | P (d²) | E[ε] (d).
    let comps = 1 + 3 * d * d + d;
    let totals = integrate_ball_multi(
        comps,
        |p, out| {
            p.offset_into(&centre, &mut z);
            let dens = model.pdf(&z, x);
            if dens == 0.0 {
                return;
            }
            match model.score_into(&z, x, &mut score) {
                Ok(()) => {}
                Err(ModelError::UndefinedAtPoint(_)) => return,
                Err(e) => {
                    failure.get_or_insert(e);
                    return;
                }
            }
            model.mle_into(&z, &mut err);
            err.iter_mut().zip(x).for_each(|(e, xi)| *e -= xi);
            out[0] = dens;
            for i in 0..d {
                for j in 0..d {
                    out[1 + i * d + j] = dens * score[i] * score[j];
                    out[1 + d * d + i * d + j] = dens * score[i] * err[j];
                    out[1 + 2 * d * d + i * d + j] = dens * err[i] * err[j];
                }
                out[1 + 3 * d * d + i] = dens * err[i];
            }
        },
        model.support_radius(),
        &support_spec(model, spec),
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let block = |k: usize| &totals[1 + k * d * d..1 + (k + 1) * d * d];
    Ok(Moments {
        mass: totals[0],
        fim: SymMatrix::from_row_major(d, block(0))?,
        l_direct: Matrix::from_row_major(d, d, block(1))?,
        mle_cov: SymMatrix::from_row_major(d, block(2))?,
        mean_error: totals[1 + 3 * d * d..].to_vec(),
    })
}

/// `J(x) = E[γγᵀ]` by quadrature.
pub fn fim(model: &dyn LikelihoodModel, x: &[f64], spec: &QuadratureSpec) -> Result<SymMatrix, BoundsError> {
    Ok(moments(model, x, spec)?.fim)
}

/// `E[(x̂ − x)(x̂ − x)ᵀ]` by quadrature.
pub fn mle_covariance(model: &dyn LikelihoodModel, x: &[f64], spec: &QuadratureSpec) -> Result<SymMatrix, BoundsError> {
    Ok(moments(model, x, spec)?.mle_cov)
}

/// `L(x) = E[γ(x̂ − x)ᵀ]` by quadrature over the interior.
pub fn l_matrix(model: &dyn LikelihoodModel, x: &[f64], spec: &QuadratureSpec) -> Result<Matrix, BoundsError> {
    Ok(moments(model, x, spec)?.l_direct)
}

/// `D_L(x) = ∮ ∇ₓzᵀ n p (x̂ − x)ᵀ dS` over the moving boundary.
pub fn leibniz_term(model: &dyn LikelihoodModel, x: &[f64], spec: &QuadratureSpec) -> Result<Matrix, BoundsError> {
    let d = model.dim_x();
    let dz = model.dim_z();
    let centre = model.centre(x);
    let jac = model.observation_jacobian();
    // Density taken as the interior limit on the noise side: forming `z − f(x)`
    // would lose the edge to rounding whenever `‖f(x)‖ ≫ a`.
    let a = model.support_radius();
    let inner = a * (1.0 - 4.0 * f64::EPSILON);
    let mut z = vec![0.0; dz];
    let mut w = vec![0.0; dz];
    let mut err = vec![0.0; d];
    let totals = integrate_boundary_multi(
        d * d,
        |p, out| {
            let u = p.direction();
            for k in 0..dz {
                w[k] = inner * u[k];
                z[k] = centre[k] + w[k];
            }
            let dens = model.noise_pdf(&w);
            model.mle_into(&z, &mut err);
            err.iter_mut().zip(x).for_each(|(e, xi)| *e -= xi);
            let flux = jac.mul_vec(u);
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = flux[i] * dens * err[j];
                }
            }
        },
        a,
        &support_spec(model, spec),
    )?;
    Ok(Matrix::from_row_major(d, d, &totals)?)
}

/// `−E[∇ₓ∇ₓᵀ ln p]`, the Hessian form of the information, for models that
/// expose an analytic Hessian.
pub fn hessian_fim(
    model: &dyn LikelihoodModel,
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<Option<SymMatrix>, BoundsError> {
    let d = model.dim_x();
    let centre = model.centre(x);
    if model.log_hessian(&centre, x).is_none() {
        return Ok(None);
    }
    let mut z = vec![0.0; model.dim_z()];
    let totals = integrate_ball_multi(
        d * d,
        |p, out| {
            p.offset_into(&centre, &mut z);
            let dens = model.pdf(&z, x);
            if let Some(h) = model.log_hessian(&z, x) {
                for (o, v) in out.iter_mut().zip(h.as_slice()) {
                    *o = -dens * v;
                }
            }
        },
        model.support_radius(),
        &support_spec(model, spec),
    )?;
    Ok(Some(SymMatrix::from_row_major(d, &totals)?))
}

fn rcond(m: &SymMatrix) -> f64 {
    let ev = m.eigenvalues();
    let big = ev.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if big == 0.0 {
        0.0
    } else {
        ev.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs())) / big
    }
}

fn try_invert(m: &SymMatrix) -> Result<SymMatrix, BoundsError> {
    invert(m).map_err(|_| BoundsError::SingularFim { rcond: rcond(m) })
}

/// `LᵀJ⁻¹L`, explicitly symmetrized.
pub fn crllb_from_parts(fim: &SymMatrix, l: &Matrix) -> Result<SymMatrix, BoundsError> {
    Ok(try_invert(fim)?.congruence(l)?)
}

/// Classical bound `J⁻¹` together with whether it is a valid bound for this
/// model (it is not once the support moves with `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult {
    pub bound: SymMatrix,
    pub valid: bool,
}

pub fn crlb(model: &dyn LikelihoodModel, x: &[f64], spec: &QuadratureSpec) -> Result<CrlbResult, BoundsError> {
    let bound = try_invert(&fim(model, x, spec)?)?;
    let leibniz = leibniz_term(model, x, spec)?;
    Ok(CrlbResult {
        bound,
        valid: leibniz.frobenius_norm() <= LEIBNIZ_ZERO_TOL,
    })
}

/// Relative Frobenius gap, falling back to the absolute gap for a zero target.
pub fn rel_frobenius(got: &Matrix, want: &Matrix) -> f64 {
    let diff = got
        .checked_sub(want)
        .map(|m| m.frobenius_norm())
        .unwrap_or(f64::INFINITY);
    let scale = want.frobenius_norm();
    if scale > 1e-12 {
        diff / scale
    } else {
        diff
    }
}

fn rel_sym(got: &SymMatrix, want: &SymMatrix) -> f64 {
    rel_frobenius(&Matrix::from(got), &Matrix::from(want))
}

/// Collinearity residual `E‖ε − Cγ‖ / √E‖ε‖²` by quadrature.
pub fn collinearity_residual_quadrature(
    model: &dyn LikelihoodModel,
    x: &[f64],
    c: &Matrix,
    spec: &QuadratureSpec,
) -> Result<f64, BoundsError> {
    let d = model.dim_x();
    let centre = model.centre(x);
    let mut z = vec![0.0; model.dim_z()];
    let mut score = vec![0.0; d];
    let mut err = vec![0.0; d];
    let totals = integrate_ball_multi(
        2,
        |p, out| {
            p.offset_into(&centre, &mut z);
            let dens = model.pdf(&z, x);
            if dens == 0.0 || model.score_into(&z, x, &mut score).is_err() {
                return;
            }
            model.mle_into(&z, &mut err);
            err.iter_mut().zip(x).for_each(|(e, xi)| *e -= xi);
            let cg = c.mul_vec(&score);
            let gap: f64 = err.iter().zip(&cg).map(|(e, g)| (e - g).powi(2)).sum();
            out[0] = dens * gap.sqrt();
            out[1] = dens * dot(&err, &err);
        },
        model.support_radius(),
        &support_spec(model, spec),
    )?;
    Ok(totals[0] / totals[1].sqrt())
}

/// Collinearity residual over Monte Carlo draws; draws where the score is
/// undefined (a measure-zero set) are skipped.
pub fn collinearity_residual(
    model: &dyn LikelihoodModel,
    x: &[f64],
    report: &BoundReport,
    batch: &SampleBatch,
) -> Option<f64> {
    let c = report.collinearity_matrix()?;
    let d = model.dim_x();
    let centre = model.centre(x);
    let mut z = vec![0.0; model.dim_z()];
    let mut score = vec![0.0; d];
    let mut err = vec![0.0; d];
    let (mut gap_sum, mut sq_sum, mut used) = (0.0, 0.0, 0usize);
    for w in &batch.draws {
        for k in 0..z.len() {
            z[k] = centre[k] + w[k];
        }
        if model.score_into(&z, x, &mut score).is_err() {
            continue;
        }
        model.mle_into(&z, &mut err);
        err.iter_mut().zip(x).for_each(|(e, xi)| *e -= xi);
        let cg = c.mul_vec(&score);
        gap_sum += err.iter().zip(&cg).map(|(e, g)| (e - g).powi(2)).sum::<f64>().sqrt();
        sq_sum += dot(&err, &err);
        used += 1;
    }
    if used == 0 {
        return None;
    }
    Some((gap_sum / used as f64) / (sq_sum / used as f64).sqrt())
}

fn closed_form_report(model: &dyn LikelihoodModel, x: &[f64]) -> Result<BoundReport, BoundsError> {
    let cf = model.closed_form(x).ok_or(BoundsError::NoClosedForm(model.name()))?;
    let d = model.dim_x();
    let l_matrix = Matrix::identity(d).checked_sub(&cf.leibniz)?;
    let crlb = invert(&cf.fim).ok();
    Ok(BoundReport {
        x: x.to_vec(),
        crlb_valid: cf.leibniz.frobenius_norm() <= LEIBNIZ_ZERO_TOL,
        fim: cf.fim,
        leibniz: cf.leibniz,
        l_matrix,
        crlb,
        crllb: cf.crllb,
        mle_cov: cf.mle_cov,
        collinearity_residual: None,
        efficient: cf.efficient,
        method: BoundMethod::ClosedForm,
        closed_form_deltas: None,
    })
}

fn quadrature_report(
    model: &dyn LikelihoodModel,
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<BoundReport, BoundsError> {
    let m = moments(model, x, spec)?;
    let leibniz = leibniz_term(model, x, spec)?;
    let l_matrix = Matrix::identity(model.dim_x()).checked_sub(&leibniz)?;
    let crlb = try_invert(&m.fim)?;
    let crllb = crlb.congruence(&l_matrix)?;
    let closed_form_deltas = model.closed_form(x).map(|cf| ClosedFormDeltas {
        fim: rel_sym(&m.fim, &cf.fim),
        leibniz: rel_frobenius(&leibniz, &cf.leibniz),
        crllb: rel_sym(&crllb, &cf.crllb),
        mle_cov: rel_sym(&m.mle_cov, &cf.mle_cov),
    });
    Ok(BoundReport {
        x: x.to_vec(),
        fim: m.fim,
        crlb_valid: leibniz.frobenius_norm() <= LEIBNIZ_ZERO_TOL,
        leibniz,
        l_matrix,
        crlb: Some(crlb),
        crllb,
        mle_cov: m.mle_cov,
        collinearity_residual: None,
        efficient: false,
        method: BoundMethod::Quadrature,
        closed_form_deltas,
    })
}

/// Full bound report. Models whose score nearly vanishes (so that `LᵀJ⁻¹L`
/// is a numerical 0/0) are always served from their closed form.
pub fn crllb(
    model: &dyn LikelihoodModel,
    x: &[f64],
    spec: &QuadratureSpec,
    method: Method,
) -> Result<BoundReport, BoundsError> {
    let use_closed = match method {
        Method::ClosedForm => true,
        Method::Auto => model.closed_form(x).is_some(),
        Method::Quadrature => model.degenerate_score() && model.closed_form(x).is_some(),
    };
    let mut report = if use_closed {
        closed_form_report(model, x)?
    } else {
        quadrature_report(model, x, spec)?
    };
    if let Some(c) = report.collinearity_matrix() {
        let r = collinearity_residual_quadrature(model, x, &c, spec)?;
        report.collinearity_residual = Some(r);
        report.efficient = r < COLLINEARITY_TOL;
    } else {
        report.efficient = false;
    }
    Ok(report)
}

/// Bound for `m` i.i.d. measurements: the single-measurement CRLLB over `m`.
pub fn iid_scaled_bound(report: &BoundReport, m: usize) -> SymMatrix {
    assert!(m >= 1, "need at least one measurement");
    report.crllb.scale(1.0 / m as f64)
}

/// One end of a scalar interval support: position and velocity in `x`.
pub type Endpoint<'a> = &'a dyn Fn(f64) -> (f64, f64);

/// Scalar Leibniz term for support `[l(x), u(x)]`:
/// `u′ p(u)(x̂(u) − x) − l′ p(l)(x̂(l) − x)`.
pub fn scalar_leibniz(
    lower: Endpoint<'_>,
    upper: Endpoint<'_>,
    pdf: &dyn Fn(f64, f64) -> f64,
    estimator: &dyn Fn(f64) -> f64,
    x: f64,
) -> f64 {
    let (l, dl) = lower(x);
    let (u, du) = upper(x);
    du * pdf(u, x) * (estimator(u) - x) - dl * pdf(l, x) * (estimator(l) - x)
}

/// The non-identity observation example, evaluated from its end formulas
/// and cross-checked against quadrature of `J`, `D_L` and the covariance.
pub fn linear_tg_bounds(model: &LinearTgModel, x: &[f64], spec: &QuadratureSpec) -> Result<BoundReport, BoundsError> {
    let mut report = crllb(model, x, spec, Method::ClosedForm)?;
    let quad = quadrature_report(model, x, spec)?;
    report.closed_form_deltas = quad.closed_form_deltas;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lfmodels::{rfc_radial_integral, RfcModel, TruncGaussianSphereModel, TruncLaplaceModel};
    use crate::linalg::loewner_geq;
    use crate::quadrature::{gaussian_radial_moment, integrate_ball};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn spec3() -> QuadratureSpec {
        QuadratureSpec::default().with_nodes(64, 64)
    }

    fn h() -> Matrix {
        Matrix::from_row_major(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]).unwrap()
    }

    #[test]
    fn laplace_fim_is_half_alpha_squared() {
        let m = TruncLaplaceModel::new(2.0, 3.0).unwrap();
        let j = fim(&m, &[0.0, 0.0], &spec()).unwrap();
        assert!(j.rel_diff(&SymMatrix::scaled_identity(2, 2.0)) < 1e-6, "{j}");
        let b = crlb(&m, &[0.0, 0.0], &spec()).unwrap();
        assert!(b.bound.rel_diff(&SymMatrix::scaled_identity(2, 0.5)) < 1e-6);
        assert!(!b.valid);
    }

    #[test]
    fn flat_rfc_has_zero_fim_and_uses_closed_form() {
        let m = RfcModel::new(0.0).unwrap();
        assert_eq!(fim(&m, &[0.0, 0.0], &spec()).unwrap(), SymMatrix::zeros(2));
        let r = crllb(&m, &[0.0, 0.0], &spec(), Method::Quadrature).unwrap();
        assert_eq!(r.method, BoundMethod::ClosedForm);
        assert!((r.crllb.get(0, 0) - 1.4147).abs() < 1e-3);
        assert!(!r.efficient);
        assert!(r.collinearity_residual.is_none());
        assert!(matches!(
            crlb(&m, &[0.0, 0.0], &spec()),
            Err(BoundsError::SingularFim { .. })
        ));
    }

    #[test]
    fn rfc_fim_matches_one_dimensional_oracle() {
        let beta = 0.5;
        let m = RfcModel::new(beta).unwrap();
        let oracle = beta * beta / (PI * PI - 4.0 * beta) * rfc_radial_integral(beta);
        let j = fim(&m, &[0.0, 0.0], &spec()).unwrap();
        assert!(
            j.rel_diff(&SymMatrix::scaled_identity(2, oracle)) < 1e-9,
            "{j} vs {oracle}"
        );
    }

    #[test]
    fn rfc_leibniz_and_covariance() {
        for beta in [0.25, 0.5, 1.0] {
            let m = RfcModel::new(beta).unwrap();
            let dl = leibniz_term(&m, &[0.4, -0.2], &spec()).unwrap();
            let want = PI * PI * (1.0 - beta) / (PI * PI - 4.0 * beta);
            assert!(rel_frobenius(&dl, &Matrix::identity(2).scale(want)) < 1e-9);
        }
        let m = RfcModel::new(1.0).unwrap();
        let p = mle_covariance(&m, &[0.0, 0.0], &spec()).unwrap();
        let pi2 = PI * PI;
        let want = (PI.powi(4) / 4.0 + 12.0 - 3.0 * pi2) / (pi2 - 4.0);
        assert!(p.rel_diff(&SymMatrix::scaled_identity(2, want)) < 1e-9);
    }

    #[test]
    fn l_identity_holds_for_every_model() {
        let models: Vec<Box<dyn LikelihoodModel>> = vec![
            Box::new(RfcModel::new(0.5).unwrap()),
            Box::new(TruncLaplaceModel::new(2.0, 1.0).unwrap()),
            Box::new(TruncGaussianSphereModel::new(2, 1.0, 1.0).unwrap()),
            Box::new(TruncGaussianSphereModel::new(3, 0.5, 1.5).unwrap()),
            Box::new(LinearTgModel::new(h(), 1.5).unwrap()),
        ];
        for m in models {
            let s = if m.dim_z() == 3 { spec3() } else { spec() };
            let x = vec![0.3; m.dim_x()];
            let direct = l_matrix(m.as_ref(), &x, &s).unwrap();
            let via_leibniz = Matrix::identity(m.dim_x())
                .checked_sub(&leibniz_term(m.as_ref(), &x, &s).unwrap())
                .unwrap();
            let gap = direct.checked_sub(&via_leibniz).unwrap().frobenius_norm();
            assert!(gap < 1e-10, "{m:?}: {gap:e}");
        }
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let models: Vec<Box<dyn LikelihoodModel>> = vec![
            Box::new(RfcModel::new(0.25).unwrap()),
            Box::new(RfcModel::new(0.75).unwrap()),
            Box::new(TruncLaplaceModel::new(1.0, 0.5).unwrap()),
            Box::new(TruncLaplaceModel::new(1.0, 5.0).unwrap()),
            Box::new(TruncGaussianSphereModel::new(2, 2.0, 1.0).unwrap()),
            Box::new(TruncGaussianSphereModel::new(3, 1.0, 2.0).unwrap()),
            Box::new(LinearTgModel::new(h(), 1.5).unwrap()),
        ];
        for m in models {
            let s = if m.dim_z() == 3 { spec3() } else { spec() };
            let r = crllb(m.as_ref(), &[0.1, 0.2, 0.3][..m.dim_x()], &s, Method::Quadrature).unwrap();
            assert_eq!(r.method, BoundMethod::Quadrature);
            let deltas = r.closed_form_deltas.unwrap();
            assert!(deltas.max() < 1e-6, "{m:?}: {deltas:?}");
            assert!(loewner_geq(&r.mle_cov, &r.crllb, 1e-8).unwrap());
        }
    }

    #[test]
    fn efficiency_dichotomy() {
        let cases: Vec<(Box<dyn LikelihoodModel>, bool)> = vec![
            (Box::new(TruncGaussianSphereModel::new(2, 1.0, 1.0).unwrap()), true),
            (Box::new(TruncGaussianSphereModel::new(3, 0.5, 2.0).unwrap()), true),
            (Box::new(LinearTgModel::new(h(), 1.5).unwrap()), true),
            (Box::new(TruncLaplaceModel::new(1.0, 2.0).unwrap()), false),
            (Box::new(RfcModel::new(0.5).unwrap()), false),
        ];
        for (m, efficient) in cases {
            let s = if m.dim_z() == 3 { spec3() } else { spec() };
            let r = crllb(m.as_ref(), &vec![0.0; m.dim_x()], &s, Method::Auto).unwrap();
            let res = r.collinearity_residual.unwrap();
            assert_eq!(r.efficient, efficient, "{m:?}: residual {res:e}");
            if !efficient {
                assert!(res > 1e-2, "{m:?}: {res}");
            }
        }
    }

    #[test]
    fn vanishing_leibniz_gives_crlb_at_rfc_beta_one() {
        let m = RfcModel::new(1.0).unwrap();
        let r = crllb(&m, &[0.0, 0.0], &spec(), Method::Quadrature).unwrap();
        assert!(r.leibniz.frobenius_norm() < 1e-10);
        assert!(r.crlb_valid);
        let gap = r.crllb.checked_sub(r.crlb.as_ref().unwrap()).unwrap().frobenius_norm();
        assert!(gap < 1e-8);
    }

    #[test]
    fn reports_are_translation_invariant_and_isotropic() {
        let m = TruncLaplaceModel::new(1.5, 1.2).unwrap();
        let a = crllb(&m, &[0.0, 0.0], &spec(), Method::Quadrature).unwrap();
        let b = crllb(&m, &[3.7, -12.5], &spec(), Method::Quadrature).unwrap();
        assert!(a.fim.checked_sub(&b.fim).unwrap().max_abs() < 1e-10);
        assert!(a.crllb.checked_sub(&b.crllb).unwrap().max_abs() < 1e-10);
        assert!(a.mle_cov.checked_sub(&b.mle_cov).unwrap().max_abs() < 1e-10);
        for s in [&a.fim, &a.crllb, &a.mle_cov] {
            assert!(s.as_scaled_identity(1e-9).is_some(), "{s}");
        }
    }

    #[test]
    fn hessian_form_disagrees_for_truncated_gaussian() {
        let m = TruncGaussianSphereModel::new(2, 1.0, 1.0).unwrap();
        let hf = hessian_fim(&m, &[0.0, 0.0], &spec()).unwrap().unwrap();
        let j = fim(&m, &[0.0, 0.0], &spec()).unwrap();
        assert!(hf.rel_diff(&SymMatrix::identity(2)) < 1e-10);
        let gap = hf.checked_sub(&j).unwrap().frobenius_norm();
        assert!(gap > 10.0 * 1e-6, "{gap}");
        assert!(hessian_fim(&RfcModel::new(0.5).unwrap(), &[0.0, 0.0], &spec())
            .unwrap()
            .is_none());
    }

    #[test]
    fn leibniz_survives_far_parameter() {
        let m = TruncLaplaceModel::new(2.0, 0.25).unwrap();
        let near = leibniz_term(&m, &[0.0, 0.0], &spec()).unwrap();
        let far = leibniz_term(&m, &[4.7, -3.9], &spec()).unwrap();
        assert!(near.get(0, 0) > 0.1);
        assert!(far.checked_sub(&near).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn iid_scaling() {
        let r = crllb(&RfcModel::new(0.0).unwrap(), &[0.0, 0.0], &spec(), Method::Auto).unwrap();
        assert_eq!(iid_scaled_bound(&r, 1), r.crllb);
        assert!((iid_scaled_bound(&r, 10).get(0, 0) - 0.14147).abs() < 1e-4);
    }

    #[test]
    fn product_model_doubles_fim() {
        // Two independent measurements: the joint score is γ₁ + γ₂.
        let m = TruncLaplaceModel::new(1.5, 1.0).unwrap();
        let s = QuadratureSpec::default().with_nodes(48, 48);
        let x = [0.0, 0.0];
        let total = integrate_ball(
            |p1| {
                let z1 = p1.cartesian();
                let g1 = m.score(&z1, &x).unwrap();
                let p = m.pdf(&z1, &x);
                p * integrate_ball(
                    |p2| {
                        let z2 = p2.cartesian();
                        let g2 = m.score(&z2, &x).unwrap();
                        m.pdf(&z2, &x) * (g1[0] + g2[0]).powi(2)
                    },
                    1.0,
                    &s,
                )
                .unwrap()
            },
            1.0,
            &s,
        )
        .unwrap();
        let single = fim(&m, &x, &s).unwrap().get(0, 0);
        assert_relative_eq!(total, 2.0 * single, max_relative = 1e-6);
    }

    #[test]
    fn scalar_leibniz_cases() {
        let fixed = |_: f64| (-1.0, 0.0);
        let fixed_u = |_: f64| (1.0, 0.0);
        assert_eq!(scalar_leibniz(&fixed, &fixed_u, &|_, _| 0.5, &|z| z, 0.0), 0.0);

        let a = 0.8;
        let lo = move |x: f64| (x - a, 1.0);
        let hi = move |x: f64| (x + a, 1.0);
        let uniform = move |_: f64, _: f64| 1.0 / (2.0 * a);
        let dl = scalar_leibniz(&lo, &hi, &uniform, &|z| z, 0.3);
        assert_relative_eq!(dl, 1.0, max_relative = 1e-15);

        // Truncated Gaussian on [x − a, x + a] against the general integrator at n = 1.
        let (sigma, a) = (0.7, 1.1);
        let m = TruncGaussianSphereModel::new(1, sigma, a).unwrap();
        let lo = move |x: f64| (x - a, 1.0);
        let hi = move |x: f64| (x + a, 1.0);
        let pdf = |z: f64, x: f64| m.pdf(&[z], &[x]);
        let scalar = scalar_leibniz(&lo, &hi, &pdf, &|z| z, 0.2);
        let k = 2.0 * gaussian_radial_moment(-1, a, sigma);
        assert_relative_eq!(
            scalar,
            2.0 * a * (-a * a / (2.0 * sigma * sigma)).exp() / k,
            max_relative = 1e-12
        );
        let general = leibniz_term(&m, &[0.2], &spec()).unwrap().get(0, 0);
        assert!((scalar - general).abs() < 1e-9);
    }

    #[test]
    fn linear_tg_reference_factor() {
        let e = Matrix::from_row_major(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let a: f64 = 2.0;
        let m = LinearTgModel::new(e, a).unwrap();
        let r = linear_tg_bounds(&m, &[0.5, -0.5], &spec3()).unwrap();
        let k = 1.0 / (4.0 * PI * gaussian_radial_moment(1, a, 1.0));
        let factor = 1.0 - 4.0 * PI * k / 3.0 * a.powi(3) * (-a * a / 2.0).exp();
        assert!(r.crllb.rel_diff(&SymMatrix::scaled_identity(2, factor)) < 1e-12);
        assert_eq!(r.crllb, r.mle_cov);
        assert!(r.efficient);
        assert!(r.closed_form_deltas.unwrap().max() < 1e-6);
        let wide = LinearTgModel::new(h(), 40.0).unwrap();
        let r = crllb(&wide, &[0.0, 0.0], &spec3(), Method::ClosedForm).unwrap();
        assert!(r.crllb.rel_diff(&wide.gram().invert().unwrap()) < 1e-12);
    }

    #[test]
    fn singular_fim_message() {
        let err = crllb_from_parts(&SymMatrix::zeros(2), &Matrix::identity(2)).unwrap_err();
        assert!(err.to_string().contains("no meaningful CRLB or CRLLB"));
    }
}
