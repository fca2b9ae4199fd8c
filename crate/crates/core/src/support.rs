//! Estimating both endpoints of `U(x₁, x₂)` from `n` samples.
//!
//! The sufficient statistic `(z_m, z_M)` lives on the triangle
//! `x₁ ≤ z_m ≤ z_M ≤ x₂`, whose edges all move with `x`. The classical FIM is
//! singular, so the density is approximated by a Gaussian of variance `σ²`
//! truncated to `[x₁, x₂]`; the bound is studied as `σ → ∞`.

use thiserror::Error;

use crate::bounds::{crllb_from_parts, BoundsError};
use crate::linalg::{Matrix, SymMatrix, Vector};
use crate::quadrature::{adaptive_integrate, GaussLegendre, QuadratureError};
use crate::sampling::{CovarianceEstimate, SamplingError, Stream};
use crate::special::{normal_mass, normal_pdf};

/// Relative tolerance for the inner `∫[Φ − Φ]^{n−1}` integrals.
const INNER_TOL: f64 = 1e-13;

/// Default ladder of `σ/(x₂ − x₁)`.
pub const DEFAULT_LADDER: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupportError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample count n must be at least 2, got {0}")]
    DegenerateN(usize),
    #[error("need x1 < x2, got [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformSupportProblem {
    pub x1: f64,
    pub x2: f64,
    /// Number of samples per trial (not a dimension).
    pub n_samples: usize,
}

impl UniformSupportProblem {
    pub fn new(x1: f64, x2: f64, n_samples: usize) -> Result<Self, SupportError> {
        if !(x1.is_finite() && x2.is_finite() && x1 < x2) {
            return Err(SupportError::InvalidInterval(x1, x2));
        }
        if n_samples < 2 {
            return Err(SupportError::DegenerateN(n_samples));
        }
        Ok(Self { x1, x2, n_samples })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    fn n(&self) -> f64 {
        self.n_samples as f64
    }

    /// Density of `(z_m, z_M)`: `n(n−1)(z_M − z_m)^{n−2}/(x₂ − x₁)ⁿ` on the triangle.
    pub fn statistic_pdf(&self, z_m: f64, z_max: f64) -> f64 {
        if !(self.x1 <= z_m && z_m <= z_max && z_max <= self.x2) {
            return 0.0;
        }
        let n = self.n();
        n * (n - 1.0) * (z_max - z_m).powi(self.n_samples as i32 - 2) / self.width().powi(self.n_samples as i32)
    }

    /// `∫∫ f(z_m, z_M)` over the triangle by tensor Gauss-Legendre.
    pub fn triangle_integral(&self, nodes: usize, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let gl = GaussLegendre::new(nodes);
        gl.integrate(self.x1, self.x2, |z_m| {
            gl.integrate(z_m, self.x2, |z_max| f(z_m, z_max))
        })
    }
}

/// `(min, max)` of the samples.
pub fn order_statistics(samples: &[f64]) -> Result<(f64, f64), SupportError> {
    if samples.len() < 2 {
        return Err(SupportError::TooFewSamples(samples.len()));
    }
    Ok(samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
        (lo.min(z), hi.max(z))
    }))
}

/// Unbiased endpoint estimates `((n z_m − z_M)/(n−1), (n z_M − z_m)/(n−1))`.
pub fn unbiased_endpoints(z_m: f64, z_max: f64, n: usize) -> Result<(f64, f64), SupportError> {
    if n < 2 {
        return Err(SupportError::DegenerateN(n));
    }
    let n = n as f64;
    Ok(((n * z_m - z_max) / (n - 1.0), (n * z_max - z_m) / (n - 1.0)))
}

/// Exact covariance of the unbiased endpoint estimates.
pub fn estimator_covariance(x1: f64, x2: f64, n: usize) -> SymMatrix {
    let nf = n as f64;
    let d2 = (x2 - x1).powi(2);
    let den = (nf - 1.0) * (nf + 1.0) * (nf + 2.0);
    SymMatrix::from_row_major(2, &[nf * d2 / den, -d2 / den, -d2 / den, nf * d2 / den]).expect("2×2")
}

/// `n²/(x₂ − x₁)² · [[1, −1], [−1, 1]]`, singular by construction.
pub fn classical_fim(x1: f64, x2: f64, n: usize) -> SymMatrix {
    let c = (n as f64).powi(2) / (x2 - x1).powi(2);
    SymMatrix::from_row_major(2, &[c, -c, -c, c]).expect("2×2")
}

/// Truncated-Gaussian approximation of the flat likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgApproxConfig {
    pub sigma: f64,
    pub mu: f64,
    /// Gauss-Legendre order for the direct boundary quadrature.
    pub quad_nodes: usize,
}

impl TgApproxConfig {
    pub fn new(problem: &UniformSupportProblem, sigma: f64) -> Result<Self, SupportError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(SupportError::InvalidSigma(sigma));
        }
        Ok(Self {
            sigma,
            mu: 0.5 * (problem.x1 + problem.x2),
            quad_nodes: 128,
        })
    }

    fn pdf(&self, z: f64) -> f64 {
        normal_pdf(z, self.mu, self.sigma)
    }

    /// `Φ(b) − Φ(a)`.
    fn mass(&self, a: f64, b: f64) -> f64 {
        normal_mass(a, b, self.mu, self.sigma)
    }
}

/// Approximate density of `(z_m, z_M)` under the truncated Gaussian.
pub fn tg_statistic_pdf(problem: &UniformSupportProblem, cfg: &TgApproxConfig, z_m: f64, z_max: f64) -> f64 {
    if !(problem.x1 <= z_m && z_m <= z_max && z_max <= problem.x2) {
        return 0.0;
    }
    let n = problem.n();
    let k = problem.n_samples as i32;
    n * (n - 1.0) * cfg.pdf(z_m) * cfg.pdf(z_max) * cfg.mass(z_m, z_max).powi(k - 2)
        / cfg.mass(problem.x1, problem.x2).powi(k)
}

/// `J′`: entries `±p + q` with `p = n²N(h)²/[1 − 2Φ(−h)]²`, `h = (x₂ − x₁)/2`,
/// and `q = n/(4σ²)`.
pub fn tg_fim(problem: &UniformSupportProblem, cfg: &TgApproxConfig) -> SymMatrix {
    let n = problem.n();
    let h = 0.5 * problem.width();
    let ratio = normal_pdf(h, 0.0, cfg.sigma) / normal_mass(-h, h, 0.0, cfg.sigma);
    let p = n * n * ratio * ratio;
    let q = n / (4.0 * cfg.sigma * cfg.sigma);
    SymMatrix::from_row_major(2, &[p + q, -p + q, -p + q, p + q]).expect("2×2")
}

/// The two edge contributions to the Leibniz term, in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct TgLeibniz {
    /// Edge `z_m = x₁`; only the (1,1) entry is nonzero.
    pub d1: Matrix,
    /// Edge `z_M = x₂`; only the (2,2) entry is nonzero.
    pub d2: Matrix,
}

impl TgLeibniz {
    pub fn total(&self) -> Matrix {
        Matrix::from_fn(2, 2, |i, j| self.d1.get(i, j) + self.d2.get(i, j))
    }

    /// `L′ = I − D′₁ − D′₂`.
    pub fn l_matrix(&self) -> Matrix {
        Matrix::identity(2).checked_sub(&self.total()).expect("2×2")
    }
}

pub fn tg_leibniz(problem: &UniformSupportProblem, cfg: &TgApproxConfig) -> Result<TgLeibniz, SupportError> {
    let (x1, x2) = (problem.x1, problem.x2);
    let n = problem.n();
    let k = problem.n_samples as i32;
    let width = problem.width();
    let total = cfg.mass(x1, x2);
    let inner1 = adaptive_integrate(|z| cfg.mass(x1, z).powi(k - 1), x1, x2, INNER_TOL)?;
    let inner2 = adaptive_integrate(|z| cfg.mass(z, x2).powi(k - 1), x1, x2, INNER_TOL)?;
    let edge =
        |dens: f64, inner: f64| n * dens * width / ((n - 1.0) * total) - n * dens * inner / ((n - 1.0) * total.powi(k));
    let mut d1 = Matrix::zeros(2, 2);
    d1.set(0, 0, edge(cfg.pdf(x1), inner1));
    let mut d2 = Matrix::zeros(2, 2);
    d2.set(1, 1, edge(cfg.pdf(x2), inner2));
    Ok(TgLeibniz { d1, d2 })
}

/// Direct quadrature of `∫ ∇ₓzᵀ n p′ (x̂ − x)ᵀ dc` along each boundary edge,
/// keeping every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLeibniz {
    /// Edge `z_m = x₁`, normal `(−1, 0)`.
    pub c1: Matrix,
    /// Edge `z_M = x₂`, normal `(0, 1)`.
    pub c2: Matrix,
    /// Diagonal `z_m = z_M`, normal `(1, −1)/√2`.
    pub c3: Matrix,
}

pub fn tg_leibniz_segments(problem: &UniformSupportProblem, cfg: &TgApproxConfig) -> SegmentLeibniz {
    let (x1, x2) = (problem.x1, problem.x2);
    let width = problem.width();
    let n = problem.n_samples;
    let gl = GaussLegendre::new(cfg.quad_nodes);
    let err = |z_m: f64, z_max: f64| {
        let (e1, e2) = unbiased_endpoints(z_m, z_max, n).expect("n ≥ 2");
        [e1 - x1, e2 - x2]
    };
    // ∇ₓzᵀ for a point (z_m, z_M) riding on the given edge.
    let jac = |edge: usize, z_m: f64, z_max: f64| -> [[f64; 2]; 2] {
        let a = |z: f64| (x2 - z) / width;
        let b = |z: f64| (z - x1) / width;
        match edge {
            1 => [[1.0, a(z_max)], [0.0, b(z_max)]],
            2 => [[a(z_m), 0.0], [b(z_m), 1.0]],
            _ => [[a(z_m), a(z_max)], [b(z_m), b(z_max)]],
        }
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let edges: [(usize, [f64; 2], f64); 3] = [(1, [-1.0, 0.0], 1.0), (2, [0.0, 1.0], 1.0), (3, [s, -s], 2f64.sqrt())];
    let mut out = Vec::new();
    for (edge, normal, arc) in edges {
        let mut m = [0.0; 4];
        for (idx, slot) in m.iter_mut().enumerate() {
            let (i, j) = (idx / 2, idx % 2);
            *slot = arc
                * gl.integrate(x1, x2, |t| {
                    let (z_m, z_max) = match edge {
                        1 => (x1, t),
                        2 => (t, x2),
                        _ => (t, t),
                    };
                    let g = jac(edge, z_m, z_max);
                    let flux = g[i][0] * normal[0] + g[i][1] * normal[1];
                    flux * tg_statistic_pdf(problem, cfg, z_m, z_max) * err(z_m, z_max)[j]
                });
        }
        out.push(Matrix::from_row_major(2, 2, &m).expect("2×2"));
    }
    SegmentLeibniz {
        c1: out[0].clone(),
        c2: out[1].clone(),
        c3: out[2].clone(),
    }
}

/// `L′ᵀ J′⁻¹ L′`.
pub fn uniform_support_crllb(problem: &UniformSupportProblem, cfg: &TgApproxConfig) -> Result<SymMatrix, SupportError> {
    let l = tg_leibniz(problem, cfg)?.l_matrix();
    Ok(crllb_from_parts(&tg_fim(problem, cfg), &l)?)
}

/// One rung of the `σ → ∞` ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub sigma: f64,
    pub fim: SymMatrix,
    pub leibniz: Matrix,
    pub l_matrix: Matrix,
    pub crllb: SymMatrix,
    /// `‖J′ − J‖_F / ‖J‖_F` against the classical (singular) FIM.
    pub fim_gap: f64,
    /// Whether the exact covariance dominates the approximate bound here.
    pub covariance_dominates: bool,
}

pub fn sigma_ladder(problem: &UniformSupportProblem, scales: &[f64]) -> Result<Vec<LadderRung>, SupportError> {
    let classical = classical_fim(problem.x1, problem.x2, problem.n_samples);
    let cov = estimator_covariance(problem.x1, problem.x2, problem.n_samples);
    scales
        .iter()
        .map(|&s| {
            let cfg = TgApproxConfig::new(problem, s * problem.width())?;
            let fim = tg_fim(problem, &cfg);
            let leibniz = tg_leibniz(problem, &cfg)?;
            let l_matrix = leibniz.l_matrix();
            let crllb = crllb_from_parts(&fim, &l_matrix)?;
            let fim_gap = fim.rel_diff(&classical);
            let covariance_dominates = cov
                .checked_sub(&crllb)
                .map(|m| m.min_eigenvalue() >= -1e-12)
                .unwrap_or(false);
            Ok(LadderRung {
                sigma: cfg.sigma,
                fim,
                leibniz: leibniz.total(),
                l_matrix,
                crllb,
                fim_gap,
                covariance_dominates,
            })
        })
        .collect()
}

/// Monte Carlo summary of repeated endpoint estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSimulation {
    pub trials: usize,
    /// Mean of `z_m` and `z_M`.
    pub order_means: [f64; 2],
    /// Statistics of `(x̂₁ − x₁, x̂₂ − x₂)`.
    pub errors: CovarianceEstimate,
}

pub fn simulate_endpoints(
    problem: &UniformSupportProblem,
    seed: u64,
    trials: usize,
) -> Result<EndpointSimulation, SupportError> {
    let mut rng = Stream::new(seed, 0);
    let mut samples = vec![0.0; problem.n_samples];
    let mut errors: Vec<Vector> = Vec::with_capacity(trials);
    let mut sums = [0.0; 2];
    for _ in 0..trials {
        samples
            .iter_mut()
            .for_each(|z| *z = rng.uniform_in(problem.x1, problem.x2));
        let (z_m, z_max) = order_statistics(&samples)?;
        sums[0] += z_m;
        sums[1] += z_max;
        let (e1, e2) = unbiased_endpoints(z_m, z_max, problem.n_samples)?;
        errors.push(vec![e1 - problem.x1, e2 - problem.x2]);
    }
    Ok(EndpointSimulation {
        trials,
        order_means: [sums[0] / trials as f64, sums[1] / trials as f64],
        errors: CovarianceEstimate::from_vectors(&errors)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::invert;
    use crate::sampling::compare_to_target;
    use approx::assert_relative_eq;

    fn unit(n: usize) -> UniformSupportProblem {
        UniformSupportProblem::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn order_statistics_examples() {
        assert_eq!(order_statistics(&[0.3, 0.7, 0.1]).unwrap(), (0.1, 0.7));
        assert_eq!(order_statistics(&[2.5; 4]).unwrap(), (2.5, 2.5));
        assert!(matches!(order_statistics(&[1.0]), Err(SupportError::TooFewSamples(1))));
    }

    #[test]
    fn unbiased_endpoint_examples() {
        let (a, b) = unbiased_endpoints(0.2, 0.8, 2).unwrap();
        assert_relative_eq!(a, -0.4, max_relative = 1e-15);
        assert_relative_eq!(b, 1.4, max_relative = 1e-15);
        assert_eq!(
            unbiased_endpoints(1.0, 3.0, 5).unwrap(),
            ((5.0 - 3.0) / 4.0, (15.0 - 1.0) / 4.0)
        );
        assert!(matches!(
            unbiased_endpoints(0.0, 1.0, 1),
            Err(SupportError::DegenerateN(1))
        ));
    }

    #[test]
    fn covariance_examples() {
        let p = estimator_covariance(0.0, 1.0, 3);
        assert_relative_eq!(p.get(0, 0), 3.0 / 40.0, max_relative = 1e-15);
        assert_relative_eq!(p.get(0, 1), -1.0 / 40.0, max_relative = 1e-15);
        let wide = estimator_covariance(0.0, 2.0, 3);
        assert!(wide.rel_diff(&p.scale(4.0)) < 1e-15);
        let big = estimator_covariance(0.0, 1.0, 1000);
        assert!((big.get(0, 0) * 1e6 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn covariance_matches_triangle_quadrature() {
        for n in [2, 3, 5, 10] {
            let pr = unit(n);
            let mut m = [0.0; 4];
            for (k, v) in m.iter_mut().enumerate() {
                *v = pr.triangle_integral(24, |zm, zx| {
                    let (a, b) = unbiased_endpoints(zm, zx, n).unwrap();
                    let e = [a, b - 1.0];
                    pr.statistic_pdf(zm, zx) * e[k / 2] * e[k % 2]
                });
            }
            let quad = SymMatrix::from_row_major(2, &m).unwrap();
            assert!(quad.rel_diff(&estimator_covariance(0.0, 1.0, n)) < 1e-12);
        }
    }

    #[test]
    fn statistic_density_normalizes() {
        for n in [2, 3, 5, 10] {
            let pr = UniformSupportProblem::new(-0.4, 1.3, n).unwrap();
            let total = pr.triangle_integral(16, |a, b| pr.statistic_pdf(a, b));
            assert!((total - 1.0).abs() < 1e-8, "{n}: {total}");
            let cfg = TgApproxConfig::new(&pr, 0.8).unwrap();
            let total = pr.triangle_integral(48, |a, b| tg_statistic_pdf(&pr, &cfg, a, b));
            assert!((total - 1.0).abs() < 1e-8, "{n}: {total}");
        }
    }

    #[test]
    fn classical_fim_is_rank_one() {
        let j = classical_fim(0.0, 1.0, 2);
        assert_eq!(j, SymMatrix::from_row_major(2, &[4.0, -4.0, -4.0, 4.0]).unwrap());
        assert_eq!(j.determinant(), 0.0);
        assert!(j.min_eigenvalue().abs() < 1e-14);
        assert_relative_eq!(j.max_eigenvalue(), 8.0, max_relative = 1e-14);
        assert!(invert(&j).is_err());
    }

    #[test]
    fn tg_fim_limits() {
        let pr = unit(5);
        let cfg = TgApproxConfig::new(&pr, 1e3).unwrap();
        let j = tg_fim(&pr, &cfg);
        assert!(j.rel_diff(&classical_fim(0.0, 1.0, 5)) < 1e-3);
        let h = 0.5;
        let ratio = normal_pdf(h, 0.0, 1e3) / normal_mass(-h, h, 0.0, 1e3);
        let det = 4.0 * (25.0 * ratio * ratio) * (5.0 / 4e6);
        assert_relative_eq!(j.determinant(), det, max_relative = 1e-6);
        assert!(invert(&j).is_ok());
        // Narrow Gaussian: the n/(4σ²) term dominates every entry.
        let cfg = TgApproxConfig::new(&pr, 1e-2).unwrap();
        let j = tg_fim(&pr, &cfg);
        assert!((j.get(0, 1) / j.get(0, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn leibniz_closed_form_matches_edge_quadrature() {
        for n in [2, 3, 5] {
            let pr = unit(n);
            for sigma in [0.5, 1.0, 10.0] {
                let cfg = TgApproxConfig::new(&pr, sigma).unwrap();
                let closed = tg_leibniz(&pr, &cfg).unwrap();
                let seg = tg_leibniz_segments(&pr, &cfg);
                assert!((seg.c1.get(0, 0) - closed.d1.get(0, 0)).abs() < 1e-8);
                assert!((seg.c2.get(1, 1) - closed.d2.get(1, 1)).abs() < 1e-8);
                assert_eq!(seg.c1.get(1, 0), 0.0);
                assert_eq!(seg.c2.get(0, 1), 0.0);
                assert!(seg.c3.frobenius_norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dropped_off_diagonal_vanishes_only_in_the_limit() {
        let pr = unit(3);
        let near = tg_leibniz_segments(&pr, &TgApproxConfig::new(&pr, 0.5).unwrap());
        assert!(near.c1.get(0, 1).abs() > 1e-3);
        let far = tg_leibniz_segments(&pr, &TgApproxConfig::new(&pr, 1e3).unwrap());
        assert!(far.c1.get(0, 1).abs() < 1e-5);
    }

    #[test]
    fn leibniz_tends_to_identity() {
        let pr = unit(5);
        let cfg = TgApproxConfig::new(&pr, 1e3).unwrap();
        let d = tg_leibniz(&pr, &cfg).unwrap();
        assert!(d.total().checked_sub(&Matrix::identity(2)).unwrap().frobenius_norm() < 1e-3);
        assert!(d.l_matrix().frobenius_norm() < 1e-3);
    }

    #[test]
    fn ladder_decreases() {
        let pr = unit(5);
        let rungs = sigma_ladder(&pr, &DEFAULT_LADDER).unwrap();
        for w in rungs.windows(2) {
            assert!(w[1].crllb.frobenius_norm() < w[0].crllb.frobenius_norm());
            assert!(w[1].l_matrix.frobenius_norm() < w[0].l_matrix.frobenius_norm());
            assert!(w[1].fim_gap < w[0].fim_gap);
        }
        assert!(rungs[3].l_matrix.frobenius_norm() < 1e-3);
        assert!(rungs[3].covariance_dominates);
    }

    #[test]
    fn simulation_is_unbiased() {
        for n in [2, 3, 5, 10] {
            let pr = unit(n);
            let sim = simulate_endpoints(&pr, 17 + n as u64, 100_000).unwrap();
            assert!(
                sim.errors.mean_z_scores().iter().all(|z| z.abs() <= 5.0),
                "{n}: {sim:?}"
            );
            let target = estimator_covariance(0.0, 1.0, n);
            assert!(compare_to_target(&sim.errors, &target).unwrap().pass);
        }
        let pr = unit(5);
        let sim = simulate_endpoints(&pr, 3, 100_000).unwrap();
        // E[z_m] = 1/6 with Var(z_m) = n/((n+1)²(n+2)).
        let se = (5.0 / (36.0 * 7.0) / 1e5f64).sqrt();
        assert!((sim.order_means[0] - 1.0 / 6.0).abs() < 5.0 * se);
    }
}
