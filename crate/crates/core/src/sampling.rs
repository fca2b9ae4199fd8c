//! Seeded Monte Carlo: rejection sampling of ball-supported noise, empirical
//! covariances with fourth-moment standard errors, and bound verdicts.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`); parallel streams are separated with
//! its `jump()` (2¹²⁸ steps). Uniform reals are `(next_u64 >> 11)·2⁻⁵³`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::bounds::BoundReport;
use crate::lfmodels::LikelihoodModel;
use crate::linalg::{LinalgError, Matrix, SymMatrix, Vector};

/// Width of the acceptance band in standard errors.
pub const SE_BAND: f64 = 5.0;

/// Proposals per accepted draw before sampling is abandoned.
const MAX_PROPOSALS_PER_DRAW: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("density {pdf} exceeds declared maximum {max} at {point:?}")]
    Envelope { pdf: f64, max: f64, point: Vector },
    #[error("count must be at least {min}, got {got}")]
    Count { min: usize, got: usize },
    #[error("acceptance rate collapsed (no draw after {0} proposals)")]
    Stalled(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Seeded uniform source on top of xoshiro256++.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: Xoshiro256PlusPlus,
}

impl Stream {
    /// Stream `index` of `seed`: the seeded state advanced by `index` jumps.
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..index {
            rng.jump();
        }
        Self { rng }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform point of the ball of `radius` in `dim` dimensions (cube rejection).
    pub fn in_ball(&mut self, dim: usize, radius: f64, out: &mut [f64]) {
        loop {
            let mut r2 = 0.0;
            for o in out.iter_mut().take(dim) {
                *o = self.uniform_in(-1.0, 1.0);
                r2 += *o * *o;
            }
            if r2 <= 1.0 {
                out.iter_mut().for_each(|o| *o *= radius);
                return;
            }
        }
    }
}

/// Noise realizations drawn from a model.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub count: usize,
    pub draws: Vec<Vector>,
    /// Accepted over proposed (uniform-ball proposals).
    pub accepted_ratio: f64,
}

/// `count` i.i.d. draws of the noise `w` by rejection against the uniform
/// ball scaled by `pdf_max`.
pub fn sample_noise(model: &dyn LikelihoodModel, seed: u64, count: usize) -> Result<SampleBatch, SamplingError> {
    sample_noise_stream(model, seed, 0, count)
}

pub fn sample_noise_stream(
    model: &dyn LikelihoodModel,
    seed: u64,
    stream: u64,
    count: usize,
) -> Result<SampleBatch, SamplingError> {
    if count == 0 {
        return Err(SamplingError::Count { min: 1, got: 0 });
    }
    let mut rng = Stream::new(seed, stream);
    let dim = model.dim_z();
    let a = model.support_radius();
    let max = model.pdf_max();
    let mut draws = Vec::with_capacity(count);
    let mut proposals = 0usize;
    let mut w = vec![0.0; dim];
    while draws.len() < count {
        let mut tries = 0;
        loop {
            rng.in_ball(dim, a, &mut w);
            proposals += 1;
            tries += 1;
            let p = model.noise_pdf(&w);
            if p > max * (1.0 + 1e-12) {
                return Err(SamplingError::Envelope {
                    pdf: p,
                    max,
                    point: w.clone(),
                });
            }
            if rng.uniform() * max <= p {
                draws.push(w.clone());
                break;
            }
            if tries >= MAX_PROPOSALS_PER_DRAW {
                return Err(SamplingError::Stalled(tries));
            }
        }
    }
    Ok(SampleBatch {
        seed,
        count,
        draws,
        accepted_ratio: count as f64 / proposals as f64,
    })
}

/// Sample mean and covariance of a set of vectors, with plug-in standard
/// errors: `SE(P_ij)² = (mean[(dᵢdⱼ)²] − P_ij²)/N` for centred `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub count: usize,
    pub mean: Vector,
    pub mean_se: Vector,
    pub cov: SymMatrix,
    pub cov_se: SymMatrix,
}

impl CovarianceEstimate {
    pub fn from_vectors(data: &[Vector]) -> Result<Self, SamplingError> {
        if data.len() < 2 {
            return Err(SamplingError::Count {
                min: 2,
                got: data.len(),
            });
        }
        let d = data[0].len();
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for v in data {
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut second = vec![0.0; d * d];
        let mut fourth = vec![0.0; d * d];
        let mut c = vec![0.0; d];
        for v in data {
            for k in 0..d {
                c[k] = v[k] - mean[k];
            }
            for i in 0..d {
                for j in 0..d {
                    let prod = c[i] * c[j];
                    second[i * d + j] += prod;
                    fourth[i * d + j] += prod * prod;
                }
            }
        }
        let cov_flat: Vec<f64> = second.iter().map(|s| s / (n - 1.0)).collect();
        let se_flat: Vec<f64> = (0..d * d)
            .map(|k| {
                let m2 = second[k] / n;
                ((fourth[k] / n - m2 * m2).max(0.0) / n).sqrt()
            })
            .collect();
        let mean_se = (0..d).map(|i| (cov_flat[i * d + i] / n).sqrt()).collect();
        Ok(Self {
            count: data.len(),
            mean,
            mean_se,
            cov: SymMatrix::from_row_major(d, &cov_flat)?,
            cov_se: SymMatrix::from_row_major(d, &se_flat)?,
        })
    }

    /// Largest standard error over the covariance entries.
    pub fn max_se(&self) -> f64 {
        self.cov_se.max_abs()
    }

    /// `(mean_i) / SE_i`, the unbiasedness statistic.
    pub fn mean_z_scores(&self) -> Vector {
        self.mean.iter().zip(&self.mean_se).map(|(m, s)| m / s).collect()
    }
}

/// Estimation errors `x̂(f(x) + w) − x` for a batch of noise draws.
pub fn estimator_errors(model: &dyn LikelihoodModel, x: &[f64], batch: &SampleBatch) -> Vec<Vector> {
    let centre = model.centre(x);
    let mut z = vec![0.0; model.dim_z()];
    batch
        .draws
        .iter()
        .map(|w| {
            for k in 0..z.len() {
                z[k] = centre[k] + w[k];
            }
            let mut e = model.mle(&z);
            e.iter_mut().zip(x).for_each(|(e, xi)| *e -= xi);
            e
        })
        .collect()
}

/// Monte Carlo covariance of the estimator error at `x`.
pub fn empirical_covariance(
    model: &dyn LikelihoodModel,
    x: &[f64],
    seed: u64,
    count: usize,
) -> Result<CovarianceEstimate, SamplingError> {
    if count < 1000 {
        return Err(SamplingError::Count { min: 1000, got: count });
    }
    let batch = sample_noise(model, seed, count)?;
    CovarianceEstimate::from_vectors(&estimator_errors(model, x, &batch))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    /// Every entry within the SE band of the target.
    Match,
    /// `λ_min(empirical − target) ≥ −band·max SE`.
    Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McVerdict {
    pub kind: VerdictKind,
    pub empirical_cov: SymMatrix,
    pub target: SymMatrix,
    /// `(empirical − target)/SE`, entrywise.
    pub componentwise_z_scores: Matrix,
    /// `λ_min(empirical − target)`.
    pub min_eigen_gap: f64,
    pub std_error_scale: f64,
    pub pass: bool,
}

impl McVerdict {
    pub fn max_abs_z(&self) -> f64 {
        self.componentwise_z_scores
            .as_slice()
            .iter()
            .fold(0.0f64, |m, z| m.max(z.abs()))
    }
}

fn z_scores(est: &CovarianceEstimate, target: &SymMatrix) -> Matrix {
    let d = target.dim();
    Matrix::from_fn(d, d, |i, j| {
        let se = est.cov_se.get(i, j);
        let diff = est.cov.get(i, j) - target.get(i, j);
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    })
}

fn verdict(est: &CovarianceEstimate, target: &SymMatrix, kind: VerdictKind) -> Result<McVerdict, SamplingError> {
    let z = z_scores(est, target);
    let gap = est.cov.checked_sub(target)?.min_eigenvalue();
    let scale = est.max_se();
    let mut v = McVerdict {
        kind,
        empirical_cov: est.cov.clone(),
        target: target.clone(),
        componentwise_z_scores: z,
        min_eigen_gap: gap,
        std_error_scale: scale,
        pass: false,
    };
    v.pass = match kind {
        VerdictKind::Match => v.max_abs_z() <= SE_BAND,
        VerdictKind::Bound => gap >= -SE_BAND * scale,
    };
    Ok(v)
}

/// Checks an empirical covariance against an expected value, entrywise.
pub fn compare_to_target(est: &CovarianceEstimate, target: &SymMatrix) -> Result<McVerdict, SamplingError> {
    verdict(est, target, VerdictKind::Match)
}

/// Checks an empirical covariance against a lower bound in the Loewner order.
pub fn check_bound(est: &CovarianceEstimate, bound: &SymMatrix) -> Result<McVerdict, SamplingError> {
    verdict(est, bound, VerdictKind::Bound)
}

/// Draws `count` samples at `x` and checks `report.crllb` as a lower bound.
pub fn verify_bound(
    model: &dyn LikelihoodModel,
    x: &[f64],
    report: &BoundReport,
    seed: u64,
    count: usize,
) -> Result<McVerdict, SamplingError> {
    let est = empirical_covariance(model, x, seed, count)?;
    check_bound(&est, &report.crllb)
}
