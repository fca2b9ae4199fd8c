//! Deterministic integration over balls, sphere boundaries and intervals.
//!
//! Ball and sphere integrals use hyperspherical coordinates
//!
//! ```text
//! z − c = r·u(θ),  u = (cos θ₁, sin θ₁ cos θ₂, …, sin θ₁⋯sin θₙ₋₂ cos θₙ₋₁, sin θ₁⋯sin θₙ₋₁)
//! ```
//!
//! with θ₁…θₙ₋₂ ∈ [0, π], θₙ₋₁ ∈ [0, 2π] and volume element
//! `r^{n−1} sin^{n−2}θ₁ ⋯ sin θₙ₋₂ dr dθ`. Every coordinate gets a
//! Gauss-Legendre rule, so nodes are strictly interior and an integrable
//! singularity at `r = 0` is never evaluated. For `n = 1` the "sphere" is the
//! two points `±1` with counting measure.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("integrand returned a non-finite value at r = {r}, angles = {angles:?}")]
    NonFinite { r: f64, angles: Vec<f64> },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    NotConverged { tol: f64, estimate: f64 },
}

/// Node counts and tolerance for ball/boundary integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub radial_nodes: usize,
    /// Nodes per angular coordinate.
    pub angular_nodes: usize,
    pub rel_tol: f64,
    pub dim: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            radial_nodes: 256,
            angular_nodes: 256,
            rel_tol: 1e-9,
            dim: 2,
        }
    }
}

impl QuadratureSpec {
    pub fn with_dim(self, dim: usize) -> Self {
        Self { dim, ..self }
    }

    pub fn with_nodes(self, radial_nodes: usize, angular_nodes: usize) -> Self {
        Self {
            radial_nodes,
            angular_nodes,
            ..self
        }
    }

    /// Same layout with every node count doubled.
    pub fn refined(self) -> Self {
        self.with_nodes(2 * self.radial_nodes, 2 * self.angular_nodes)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.radial_nodes < 8 || self.angular_nodes < 8 {
            return Err(QuadratureError::InvalidSpec(format!(
                "node counts must be at least 8 (radial {}, angular {})",
                self.radial_nodes, self.angular_nodes
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(QuadratureError::InvalidSpec(format!(
                "rel_tol {} outside (0, 1e-2]",
                self.rel_tol
            )));
        }
        if self.dim == 0 || self.dim > crate::linalg::MAX_DIM {
            return Err(QuadratureError::InvalidSpec(format!(
                "dimension {} unsupported",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let nodes = self.nodes.iter().map(|x| mid + half * x).collect();
        let weights = self.weights.iter().map(|w| half * w).collect();
        (nodes, weights)
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A point of the ball in hyperspherical coordinates, with its unit
/// direction precomputed.
#[derive(Debug, Clone, Copy)]
pub struct SphericalPoint<'a> {
    pub r: f64,
    pub angles: &'a [f64],
    direction: &'a [f64],
}

impl<'a> SphericalPoint<'a> {
    /// Unit direction `u(θ)`; for `n = 1` this is `[±1]`.
    pub fn direction(&self) -> &'a [f64] {
        self.direction
    }

    /// Cartesian offset `r·u(θ)` from the ball centre.
    pub fn cartesian(&self) -> Vec<f64> {
        self.direction.iter().map(|u| self.r * u).collect()
    }

    /// Writes `centre + r·u(θ)` into `out`.
    pub fn offset_into(&self, centre: &[f64], out: &mut [f64]) {
        for ((o, c), u) in out.iter_mut().zip(centre).zip(self.direction) {
            *o = c + self.r * u;
        }
    }
}

/// Unit direction for hyperspherical angles (length `angles.len() + 1`).
pub fn unit_direction(angles: &[f64]) -> Vec<f64> {
    let n = angles.len() + 1;
    let mut out = vec![0.0; n];
    let mut sin_prod = 1.0;
    for (k, theta) in angles.iter().enumerate() {
        out[k] = sin_prod * theta.cos();
        sin_prod *= theta.sin();
    }
    out[n - 1] = sin_prod;
    out
}

/// Tensor grid over the angular coordinates with the `sin` powers of the
/// surface element folded into the weights.
struct AngularGrid {
    dim: usize,
    angles: Vec<f64>,
    directions: Vec<f64>,
    weights: Vec<f64>,
}

impl AngularGrid {
    fn new(dim: usize, nodes: usize) -> Self {
        if dim == 1 {
            return Self {
                dim,
                angles: Vec::new(),
                directions: vec![-1.0, 1.0],
                weights: vec![1.0, 1.0],
            };
        }
        let gl = GaussLegendre::new(nodes);
        let (polar_nodes, polar_weights) = gl.mapped(0.0, PI);
        let (azimuth_nodes, azimuth_weights) = gl.mapped(0.0, 2.0 * PI);
        let n_angles = dim - 1;
        let count = nodes.pow(n_angles as u32);
        let mut angles = Vec::with_capacity(count * n_angles);
        let mut directions = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        let mut index = vec![0usize; n_angles];
        let mut theta = vec![0.0; n_angles];
        for _ in 0..count {
            let mut w = 1.0;
            for k in 0..n_angles {
                if k + 1 == n_angles {
                    theta[k] = azimuth_nodes[index[k]];
                    w *= azimuth_weights[index[k]];
                } else {
                    theta[k] = polar_nodes[index[k]];
                    // θ_k carries sin^{n−1−k} in the surface element (k from 1).
                    w *= polar_weights[index[k]] * theta[k].sin().powi((dim - 2 - k) as i32);
                }
            }
            angles.extend_from_slice(&theta);
            directions.extend(unit_direction(&theta));
            weights.push(w);
            for k in (0..n_angles).rev() {
                index[k] += 1;
                if index[k] < nodes {
                    break;
                }
                index[k] = 0;
            }
        }
        Self {
            dim,
            angles,
            directions,
            weights,
        }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn point(&self, k: usize, r: f64) -> SphericalPoint<'_> {
        let n_angles = self.dim - 1;
        SphericalPoint {
            r,
            angles: &self.angles[k * n_angles..(k + 1) * n_angles],
            direction: &self.directions[k * self.dim..(k + 1) * self.dim],
        }
    }
}

fn non_finite(p: &SphericalPoint<'_>) -> QuadratureError {
    QuadratureError::NonFinite {
        r: p.r,
        angles: p.angles.to_vec(),
    }
}

/// Integrates a `components`-valued field over the ball of `radius`
/// (dimension `spec.dim`). The integrand writes its values into the provided
/// buffer; the result holds one integral per component.
pub fn integrate_ball_multi<F>(
    components: usize,
    mut f: F,
    radius: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, QuadratureError>
where
    F: FnMut(&SphericalPoint<'_>, &mut [f64]),
{
    spec.validate()?;
    let grid = AngularGrid::new(spec.dim, spec.angular_nodes);
    let (r_nodes, r_weights) = GaussLegendre::new(spec.radial_nodes).mapped(0.0, radius);
    let mut total = vec![0.0; components];
    let mut shell = vec![0.0; components];
    let mut value = vec![0.0; components];
    for (&r, &wr) in r_nodes.iter().zip(&r_weights) {
        shell.iter_mut().for_each(|s| *s = 0.0);
        for k in 0..grid.len() {
            let p = grid.point(k, r);
            value.iter_mut().for_each(|v| *v = 0.0);
            f(&p, &mut value);
            let w = grid.weights[k];
            for (s, v) in shell.iter_mut().zip(&value) {
                if !v.is_finite() {
                    return Err(non_finite(&p));
                }
                *s += w * v;
            }
        }
        let jac = wr * r.powi(spec.dim as i32 - 1);
        for (t, s) in total.iter_mut().zip(&shell) {
            *t += jac * s;
        }
    }
    Ok(total)
}

/// Scalar ball integral, Jacobian included.
pub fn integrate_ball<F>(mut f: F, radius: f64, spec: &QuadratureSpec) -> Result<f64, QuadratureError>
where
    F: FnMut(&SphericalPoint<'_>) -> f64,
{
    integrate_ball_multi(1, |p, out| out[0] = f(p), radius, spec).map(|v| v[0])
}

/// Integrates a `components`-valued field over the sphere `r = radius` with
/// surface measure `radius^{n−1} sin^{n−2}θ₁⋯ dθ` (counting measure on the
/// two endpoints when `n = 1`).
pub fn integrate_boundary_multi<F>(
    components: usize,
    mut f: F,
    radius: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, QuadratureError>
where
    F: FnMut(&SphericalPoint<'_>, &mut [f64]),
{
    spec.validate()?;
    let grid = AngularGrid::new(spec.dim, spec.angular_nodes);
    let mut total = vec![0.0; components];
    let mut value = vec![0.0; components];
    for k in 0..grid.len() {
        let p = grid.point(k, radius);
        value.iter_mut().for_each(|v| *v = 0.0);
        f(&p, &mut value);
        let w = grid.weights[k];
        for (t, v) in total.iter_mut().zip(&value) {
            if !v.is_finite() {
                return Err(non_finite(&p));
            }
            *t += w * v;
        }
    }
    let scale = radius.powi(spec.dim as i32 - 1);
    total.iter_mut().for_each(|t| *t *= scale);
    Ok(total)
}

pub fn integrate_boundary<F>(mut f: F, radius: f64, spec: &QuadratureSpec) -> Result<f64, QuadratureError>
where
    F: FnMut(&SphericalPoint<'_>) -> f64,
{
    integrate_boundary_multi(1, |p, out| out[0] = f(p), radius, spec).map(|v| v[0])
}

/// Result of evaluating an integral at node counts `N` and `2N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCheck {
    pub value: f64,
    pub coarse: f64,
    pub rel_change: f64,
}

impl ConvergenceCheck {
    pub fn converged(&self, rel_tol: f64) -> bool {
        self.rel_change <= rel_tol
    }
}

/// Richardson-style self-convergence: evaluates `integral` at `spec` and at
/// `spec.refined()` and reports the relative change.
pub fn self_convergence<F>(integral: F, spec: &QuadratureSpec) -> Result<ConvergenceCheck, QuadratureError>
where
    F: Fn(&QuadratureSpec) -> Result<f64, QuadratureError>,
{
    let coarse = integral(spec)?;
    let value = integral(&spec.refined())?;
    let scale = value.abs().max(f64::MIN_POSITIVE);
    Ok(ConvergenceCheck {
        value,
        coarse,
        rel_change: (value - coarse).abs() / scale,
    })
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (positive half).
const GK15_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let centre = f(mid);
    let mut kronrod = GK15_WEIGHTS[7] * centre;
    let mut gauss = G7_WEIGHTS[3] * centre;
    for (k, (&x, &w)) in GK15_NODES.iter().zip(&GK15_WEIGHTS).take(7).enumerate() {
        let pair = f(mid - half * x) + f(mid + half * x);
        kronrod += w * pair;
        if k % 2 == 1 {
            gauss += G7_WEIGHTS[k / 2] * pair;
        }
    }
    (half * kronrod, (half * (kronrod - gauss)).abs())
}

/// Globally adaptive Gauss-Kronrod 7/15 on a finite interval, refined until
/// the summed error estimate is within `rel_tol` of the integral (or below
/// `1e-300` absolute).
pub fn adaptive_integrate<F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64, QuadratureError>
where
    F: FnMut(f64) -> f64,
{
    const MAX_INTERVALS: usize = 4096;
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gauss_kronrod_15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Err(QuadratureError::NonFinite {
                r: f64::NAN,
                angles: Vec::new(),
            });
        }
        if error <= rel_tol * value.abs() || error <= 1e-300 {
            return Ok(value);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(QuadratureError::NotConverged {
                tol: rel_tol,
                estimate: error / value.abs().max(f64::MIN_POSITIVE),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (lv, le) = gauss_kronrod_15(&mut f, lo, mid);
        let (rv, re) = gauss_kronrod_15(&mut f, mid, hi);
        pieces.push((lo, mid, lv, le));
        pieces.push((mid, hi, rv, re));
    }
}

/// `∫₀^π sinⁿθ dθ` from the reduction `Iₙ = (n−1)/n · Iₙ₋₂` with `I₀ = π`,
/// `I₁ = 2`.
pub fn sin_power_integral(n: u32) -> f64 {
    match n {
        0 => PI,
        1 => 2.0,
        _ => (n as f64 - 1.0) / n as f64 * sin_power_integral(n - 2),
    }
}

/// `∫₀^a exp(−r²/2σ²) r^{n+1} dr` for integer `n ≥ −1`.
///
/// Uses the integration-by-parts reduction
/// `Mₙ = −bⁿ e^{−b²/2} + n Mₙ₋₂` in the scaled variable `b = a/σ`, bottoming
/// out at `M₀ = 1 − e^{−b²/2}` and `M₋₁ = √(π/2) erf(b/√2)`. `a` may be
/// `f64::INFINITY`.
pub fn gaussian_radial_moment(n: i32, a: f64, sigma: f64) -> f64 {
    assert!(n >= -1, "moment order must be at least -1");
    assert!(a > 0.0 && sigma > 0.0, "a and sigma must be positive");
    let b = a / sigma;
    sigma.powi(n + 2) * unit_gaussian_moment(n, b)
}

fn unit_gaussian_moment(n: i32, b: f64) -> f64 {
    // The reduction cancels badly for small b; sum the power series instead.
    if b < 1.0 && n >= 1 {
        return b.powi(n + 2) * gaussian_series(n, b);
    }
    let tail = if b.is_finite() {
        b.powi(n) * (-0.5 * b * b).exp()
    } else {
        0.0
    };
    match n {
        -1 => (PI / 2.0).sqrt() * libm::erf(b / std::f64::consts::SQRT_2),
        0 => -libm::expm1(-0.5 * b * b),
        _ => -tail + n as f64 * unit_gaussian_moment(n - 2, b),
    }
}

/// `Σ_{k≥0} (−b²/2)^k/k! / (n+2+2k)`, so that the unit moment is
/// `b^{n+2}` times this sum.
pub(crate) fn gaussian_series(n: i32, b: f64) -> f64 {
    let x = -0.5 * b * b;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut k = 0u32;
    loop {
        let add = term / (n as f64 + 2.0 + 2.0 * k as f64);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() || k > 200 {
            return sum;
        }
        k += 1;
        term *= x / k as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gamma_half_integer(twice: u32) -> f64 {
        // Γ(k/2) for positive integer k.
        match twice {
            1 => PI.sqrt(),
            2 => 1.0,
            k => (k as f64 / 2.0 - 1.0) * gamma_half_integer(k - 2),
        }
    }

    fn ball_volume(n: usize, a: f64) -> f64 {
        PI.powf(n as f64 / 2.0) / gamma_half_integer(n as u32 + 2) * a.powi(n as i32)
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(5);
        // Degree 9 is the highest exact degree for 5 nodes.
        let v = gl.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (32.0 + 1.0) / 5.0;
        assert_relative_eq!(v, exact, max_relative = 1e-14);
        let weights: f64 = GaussLegendre::new(256).mapped(-1.0, 1.0).1.iter().sum();
        assert_relative_eq!(weights, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn unit_disk_area_and_ball_volume() {
        let spec = QuadratureSpec::default();
        let area = integrate_ball(|_| 1.0, 1.0, &spec.with_dim(2)).unwrap();
        assert_relative_eq!(area, PI, max_relative = 1e-12);
        let spec3 = spec.with_dim(3).with_nodes(32, 32);
        let a = 1.7;
        let vol = integrate_ball(|_| 1.0, a, &spec3).unwrap();
        assert_relative_eq!(vol, 4.0 / 3.0 * PI * a.powi(3), max_relative = 1e-12);
    }

    #[test]
    fn ball_volume_for_dims_one_to_four() {
        for n in 1..=4 {
            let spec = QuadratureSpec::default().with_dim(n).with_nodes(16, 16);
            let vol = integrate_ball(|_| 1.0, 1.3, &spec).unwrap();
            assert_relative_eq!(vol, ball_volume(n, 1.3), max_relative = 1e-9);
        }
    }

    #[test]
    fn gaussian_disk_integral() {
        // 2π ∫₀^π r e^{−r²/2} dr = 2π(1 − e^{−π²/2})
        let spec = QuadratureSpec::default();
        let v = integrate_ball(|p| (-0.5 * p.r * p.r).exp(), PI, &spec).unwrap();
        assert_relative_eq!(v, 2.0 * PI * (1.0 - (-PI * PI / 2.0).exp()), max_relative = 1e-12);
    }

    #[test]
    fn boundary_measures() {
        let spec = QuadratureSpec::default();
        let a = 2.5;
        assert_relative_eq!(
            integrate_boundary(|_| 1.0, a, &spec.with_dim(2)).unwrap(),
            2.0 * PI * a,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            integrate_boundary(|_| 1.0, a, &spec.with_dim(3).with_nodes(32, 32)).unwrap(),
            4.0 * PI * a * a,
            max_relative = 1e-12
        );
        // cos²θ over the circle of radius π: π · π.
        let v = integrate_boundary(|p| p.direction()[0].powi(2), PI, &spec.with_dim(2)).unwrap();
        assert_relative_eq!(v, PI * PI, max_relative = 1e-12);
        // n = 1: the two endpoints.
        let v = integrate_boundary(|p| p.cartesian()[0] + 3.0, 2.0, &spec.with_dim(1)).unwrap();
        assert_relative_eq!(v, 6.0, max_relative = 1e-15);
    }

    #[test]
    fn directions_are_unit_and_match_cartesian() {
        let d = unit_direction(&[0.3, 1.1, 4.0]);
        assert_relative_eq!(d.iter().map(|v| v * v).sum::<f64>(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(d[0], 0.3f64.cos());
        assert_relative_eq!(d[3], 0.3f64.sin() * 1.1f64.sin() * 4.0f64.sin());
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let spec = QuadratureSpec::default().with_nodes(8, 8);
        let err = integrate_ball(|p| if p.r > 0.5 { f64::NAN } else { 1.0 }, 1.0, &spec).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite { .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().with_nodes(4, 16).validate().is_err());
        let bad_tol = QuadratureSpec {
            rel_tol: 0.5,
            ..Default::default()
        };
        assert!(bad_tol.validate().is_err());
        assert!(QuadratureSpec::default().with_dim(0).validate().is_err());
    }

    #[test]
    fn sin_power_recursion() {
        assert_eq!(sin_power_integral(0), PI);
        assert_relative_eq!(sin_power_integral(2), PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(sin_power_integral(3), 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(sin_power_integral(4), 3.0 * PI / 8.0, max_relative = 1e-15);
        for n in 2..12 {
            let lhs = sin_power_integral(n);
            let rhs = (n as f64 - 1.0) / n as f64 * sin_power_integral(n - 2);
            assert_eq!(lhs, rhs);
            let quad = adaptive_integrate(|t| t.sin().powi(n as i32), 0.0, PI, 1e-13).unwrap();
            assert_relative_eq!(lhs, quad, max_relative = 1e-10);
        }
    }

    #[test]
    fn sin_squared_over_full_turn() {
        let v = adaptive_integrate(|t| t.sin().powi(2), 0.0, 2.0 * PI, 1e-14).unwrap();
        assert!((v - PI).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moment_examples() {
        // ∫₀^∞ r³ e^{−r²/2} dr = 2 (order n = 2 in the r^{n+1} convention).
        assert_relative_eq!(gaussian_radial_moment(2, f64::INFINITY, 1.0), 2.0, max_relative = 1e-15);
        assert_relative_eq!(
            gaussian_radial_moment(1, f64::INFINITY, 1.0),
            (PI / 2.0).sqrt(),
            max_relative = 1e-15
        );
        let e = (-0.5f64).exp();
        // One reduction step: −a e^{−a²/2} + ∫₀^a e^{−r²/2} dr at a = 1.
        let erf_half = libm::erf(std::f64::consts::FRAC_1_SQRT_2);
        assert_relative_eq!(
            gaussian_radial_moment(1, 1.0, 1.0),
            -e + (PI / 2.0).sqrt() * erf_half,
            max_relative = 1e-14
        );
        assert_relative_eq!(gaussian_radial_moment(0, 1.0, 1.0), 1.0 - e, max_relative = 1e-15);
    }

    #[test]
    fn gaussian_moment_matches_direct_quadrature() {
        for &(a, sigma) in &[(0.5, 1.0), (1.0, 1.0), (2.0, 0.5), (3.0, 2.0)] {
            for n in -1..8 {
                let direct = adaptive_integrate(
                    |r| (-r * r / (2.0 * sigma * sigma)).exp() * r.powi(n + 1),
                    0.0,
                    a,
                    1e-13,
                )
                .unwrap();
                let got = gaussian_radial_moment(n, a, sigma);
                assert_relative_eq!(got, direct, max_relative = 1e-10);
                if n >= 1 {
                    // Reduction identity in unscaled form.
                    let s2 = sigma * sigma;
                    let rhs = s2
                        * (-a.powi(n) * (-a * a / (2.0 * s2)).exp()
                            + n as f64 * gaussian_radial_moment(n - 2, a, sigma));
                    assert_relative_eq!(got, rhs, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn gaussian_moment_small_support() {
        // b = 1e-4: leading terms b^{n+2}/(n+2) − b^{n+4}/(2(n+4)).
        for n in 1..6 {
            let b: f64 = 1e-4;
            let expect = b.powi(n + 2) / (n as f64 + 2.0) - b.powi(n + 4) / (2.0 * (n as f64 + 4.0));
            assert_relative_eq!(gaussian_radial_moment(n, b, 1.0), expect, max_relative = 1e-14);
        }
        // Both branches agree at the switch point.
        for n in 1..6 {
            let below = gaussian_radial_moment(n, 1.0 - 1e-12, 1.0);
            let above = gaussian_radial_moment(n, 1.0 + 1e-12, 1.0);
            assert_relative_eq!(below, above, max_relative = 1e-10);
        }
    }

    #[test]
    fn doubling_nodes_is_stable() {
        let spec = QuadratureSpec::default().with_nodes(64, 64);
        let check = self_convergence(
            |s| integrate_ball(|p| p.r * (p.r).sin().powi(2) / (1.0 + 0.99 * p.r.cos()), PI, s),
            &spec,
        )
        .unwrap();
        assert!(check.converged(1e-9), "{check:?}");
    }

    #[test]
    fn adaptive_reaches_tolerance_on_peaked_integrand() {
        let v = adaptive_integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert_relative_eq!(v, exact, max_relative = 1e-11);
    }
}
