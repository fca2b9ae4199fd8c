use std::f64::consts::PI;
use std::fmt;

use anyhow::anyhow;
use crllb::bounds::{crllb, BoundReport, BoundsError, Method};
use crllb::lfmodels::{LikelihoodModel, ModelConfig, ModelError, ModelKind, TruncLaplaceModel};
use crllb::linalg::{min_eigenvalue, Matrix, SymMatrix};
use crllb::quadrature::{
    adaptive_integrate, gaussian_radial_moment, integrate_boundary_multi, sin_power_integral, QuadratureError,
    QuadratureSpec,
};
use crllb::sampling::{
    check_bound, compare_to_target, estimator_errors, sample_noise, CovarianceEstimate, SamplingError, SE_BAND,
};
use crllb::support::{estimator_covariance, sigma_ladder, SupportError, UniformSupportProblem};

use crate::config::{Grid, RunConfig, DEFAULT_COUNT, MIN_MC_COUNT};
use crate::output::{diag_cell, matrix_text, num, spec_text, sym_diag_cell, vector_cell, Table};

pub const IDENTITY_TOL: f64 = 1e-8;
const ORDER_TOL: f64 = 1e-9;

/// Failure split along the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or grid (exit 1).
    Usage(anyhow::Error),
    /// The numbers themselves failed (exit 2).
    Math(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Math(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "error: {e:#}"),
            Failure::Math(e) => write!(f, "failure: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Usage(e.into())
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Model(m) => m.into(),
            BoundsError::NoClosedForm(_) => Failure::Usage(e.into()),
            _ => Failure::Math(e.into()),
        }
    }
}

impl From<SamplingError> for Failure {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::Count { .. } => Failure::Usage(e.into()),
            _ => Failure::Math(e.into()),
        }
    }
}

impl From<SupportError> for Failure {
    fn from(e: SupportError) -> Self {
        match e {
            SupportError::Bounds(b) => b.into(),
            SupportError::Sampling(s) => s.into(),
            SupportError::Quadrature(_) => Failure::Math(e.into()),
            _ => Failure::Usage(e.into()),
        }
    }
}

impl From<QuadratureError> for Failure {
    fn from(e: QuadratureError) -> Self {
        Failure::Math(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

/// `beta=0.5`-style summary of the parameters the model uses.
pub fn model_params(cfg: &ModelConfig) -> String {
    let mut parts = Vec::new();
    let mut put = |k: &str, v: Option<f64>| {
        if let Some(v) = v {
            parts.push(format!("{k}={}", num(v)));
        }
    };
    match cfg.kind {
        Some(ModelKind::Rfc) => put("beta", cfg.beta),
        Some(ModelKind::Laplace) => {
            put("alpha", cfg.alpha);
            put("a", cfg.a);
        }
        Some(ModelKind::Tg) => {
            put("n", cfg.n.map(|n| n as f64));
            put("sigma", cfg.sigma);
            put("a", cfg.a);
        }
        Some(ModelKind::LinearTg) => {
            put("a", cfg.a);
            if let Some(h) = &cfg.h {
                parts.push(format!("H={}", vector_cell(h.as_slice())));
            }
        }
        None => {}
    }
    parts.join(" ")
}

fn print_report(model: &dyn LikelihoodModel, params: &str, spec: &QuadratureSpec, r: &BoundReport) {
    println!("model: {} ({params})", model.name());
    println!("x: [{}]", r.x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", "));
    println!("method: {}", r.method.as_str());
    if r.method == crllb::bounds::BoundMethod::Quadrature {
        println!("quadrature: {}", spec_text(spec));
    }
    println!("Fisher information J:\n{}", matrix_text(&Matrix::from(&r.fim)));
    println!("Leibniz term D_L:\n{}", matrix_text(&r.leibniz));
    println!("L = I - D_L:\n{}", matrix_text(&r.l_matrix));
    match &r.crlb {
        Some(c) => println!(
            "CRLB J^-1 ({}):\n{}",
            if r.crlb_valid {
                "valid"
            } else {
                "invalid: support depends on x"
            },
            matrix_text(&Matrix::from(c))
        ),
        None => println!("CRLB: none, J is singular"),
    }
    println!("CRLLB L^T J^-1 L:\n{}", matrix_text(&Matrix::from(&r.crllb)));
    println!("MLE covariance:\n{}", matrix_text(&Matrix::from(&r.mle_cov)));
    match r.collinearity_residual {
        Some(res) => println!("collinearity residual: {}", num(res)),
        None => println!("collinearity residual: n/a"),
    }
    println!("efficient: {}", r.efficient);
    if let Some(d) = &r.closed_form_deltas {
        println!(
            "closed-form deltas: fim {} leibniz {} crllb {} cov {}",
            num(d.fim),
            num(d.leibniz),
            num(d.crllb),
            num(d.mle_cov)
        );
    }
    println!();
}

pub const BOUND_COLUMNS: [&str; 13] = [
    "model",
    "params",
    "method",
    "fim_diag",
    "leibniz_diag",
    "l_diag",
    "crlb_diag",
    "crlb_valid",
    "crllb_diag",
    "cov_diag",
    "collinearity_residual",
    "efficient",
    "max_closed_form_delta",
];

pub fn bound(cfg: &RunConfig) -> CmdResult {
    let model = cfg.model.build()?;
    let x = cfg.point(model.dim_x())?;
    let spec = cfg.spec(model.dim_z());
    let method = cfg.method.unwrap_or(Method::Quadrature);
    let params = model_params(&cfg.model);
    let report = crllb(model.as_ref(), &x, &spec, method)?;
    print_report(model.as_ref(), &params, &spec, &report);

    let mut t = Table::new(&BOUND_COLUMNS);
    t.meta("command", "bound")
        .meta("model", format!("{} {params}", model.name()))
        .meta("x", vector_cell(&x))
        .meta("quadrature", spec_text(&spec));
    t.push(vec![
        model.name().to_string(),
        params,
        report.method.as_str().to_string(),
        sym_diag_cell(&report.fim),
        diag_cell(&report.leibniz),
        diag_cell(&report.l_matrix),
        report.crlb.as_ref().map(sym_diag_cell).unwrap_or_default(),
        report.crlb_valid.to_string(),
        sym_diag_cell(&report.crllb),
        sym_diag_cell(&report.mle_cov),
        report.collinearity_residual.map(num).unwrap_or_default(),
        report.efficient.to_string(),
        report.closed_form_deltas.map(|d| num(d.max())).unwrap_or_default(),
    ]);
    t.emit(cfg.out.as_deref())?;
    Ok(())
}

pub fn mc(cfg: &RunConfig) -> CmdResult {
    let model = cfg.model.build()?;
    let x = cfg.point(model.dim_x())?;
    let spec = cfg.spec(model.dim_z());
    let count = cfg.count.unwrap_or(DEFAULT_COUNT);
    if count < MIN_MC_COUNT {
        return Err(Failure::Usage(anyhow!(
            "--count must be at least {MIN_MC_COUNT}, got {count}"
        )));
    }
    let seed = cfg.seed();
    let params = model_params(&cfg.model);
    let report = crllb(model.as_ref(), &x, &spec, cfg.method.unwrap_or(Method::Auto))?;
    let batch = sample_noise(model.as_ref(), seed, count)?;
    let est = CovarianceEstimate::from_vectors(&estimator_errors(model.as_ref(), &x, &batch))?;
    let bound = check_bound(&est, &report.crllb)?;
    let matched = compare_to_target(&est, &report.mle_cov)?;
    let mean_z = est.mean_z_scores();
    let unbiased = mean_z.iter().all(|z| z.abs() <= SE_BAND);
    let residual = crllb::bounds::collinearity_residual(model.as_ref(), &x, &report, &batch);

    println!("model: {} ({params})", model.name());
    println!("draws: {count} (seed {seed}, acceptance {:.4})", batch.accepted_ratio);
    println!("empirical covariance:\n{}", matrix_text(&Matrix::from(&est.cov)));
    println!(
        "bound check vs CRLLB: min eigen gap {} (slack -{} ) -> {}",
        num(bound.min_eigen_gap),
        num(SE_BAND * bound.std_error_scale),
        if bound.pass { "PASS" } else { "FAIL" }
    );
    println!(
        "covariance vs expected: max |z| {:.3} -> {}",
        matched.max_abs_z(),
        if matched.pass { "PASS" } else { "FAIL" }
    );
    println!(
        "mean error z-scores: [{}] -> {}",
        mean_z.iter().map(|z| format!("{z:.3}")).collect::<Vec<_>>().join(", "),
        if unbiased { "PASS" } else { "FAIL" }
    );
    match residual {
        Some(r) => println!("collinearity residual (draws): {}", num(r)),
        None => println!("collinearity residual (draws): n/a"),
    }
    println!();

    let mut t = Table::new(&[
        "model",
        "params",
        "count",
        "seed",
        "accepted_ratio",
        "empirical_cov_diag",
        "crllb_diag",
        "min_eigen_gap",
        "std_error_scale",
        "bound_pass",
        "expected_cov_diag",
        "max_abs_z",
        "match_pass",
        "mean_z",
        "unbiased",
        "collinearity_residual",
    ]);
    t.meta("command", "mc")
        .meta("model", format!("{} {params}", model.name()))
        .meta("x", vector_cell(&x))
        .meta("quadrature", spec_text(&spec))
        .meta("seed", seed.to_string())
        .meta("rng", "xoshiro256++ seeded by splitmix64");
    t.push(vec![
        model.name().to_string(),
        params,
        count.to_string(),
        seed.to_string(),
        num(batch.accepted_ratio),
        sym_diag_cell(&est.cov),
        sym_diag_cell(&report.crllb),
        num(bound.min_eigen_gap),
        num(bound.std_error_scale),
        bound.pass.to_string(),
        sym_diag_cell(&report.mle_cov),
        num(matched.max_abs_z()),
        matched.pass.to_string(),
        vector_cell(&mean_z),
        unbiased.to_string(),
        residual.map(num).unwrap_or_default(),
    ]);
    t.emit(cfg.out.as_deref())?;
    if !(bound.pass && matched.pass && unbiased) {
        return Err(Failure::Math(anyhow!("Monte Carlo verdict failed")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureKind {
    /// CRLLB and MLE covariance over the RFC shape β.
    Rfc,
    /// Truncated Laplace bounds over the shape aα.
    Laplace,
    /// Uniform-support CRLLB over a ladder of σ scales (grid in log10).
    Uniform,
}

fn grid_or(cfg: &RunConfig, default: &str) -> Result<Grid, Failure> {
    match cfg.grid {
        Some(g) => Ok(g),
        None => Ok(Grid::parse(default)?),
    }
}

fn loewner_ordered(cov: &SymMatrix, bound: &SymMatrix) -> bool {
    cov.checked_sub(bound)
        .map(|d| min_eigenvalue(&d) >= -ORDER_TOL)
        .unwrap_or(false)
}

pub fn figure(kind: FigureKind, cfg: &RunConfig) -> CmdResult {
    match kind {
        FigureKind::Rfc => figure_rfc(cfg),
        FigureKind::Laplace => figure_laplace(cfg),
        FigureKind::Uniform => figure_uniform(cfg),
    }
}

fn figure_rfc(cfg: &RunConfig) -> CmdResult {
    let grid = grid_or(cfg, "0:1:20")?;
    let spec = cfg.spec(2);
    let base = ModelConfig {
        kind: Some(ModelKind::Rfc),
        ..Default::default()
    };
    let mut t = Table::new(&[
        "param",
        "crllb_diag",
        "cov_diag",
        "crllb_closed",
        "cov_closed",
        "ordered",
    ]);
    t.meta("figure", "rfc")
        .meta("model", "rfc a=pi")
        .meta("param", "beta")
        .meta("grid", grid.to_string())
        .meta("quadrature", spec_text(&spec))
        .meta("seed", "none");
    let mut all_ordered = true;
    for beta in grid.points() {
        let model = base.with_param("beta", beta)?.build()?;
        let report = crllb(model.as_ref(), &[0.0, 0.0], &spec, Method::Quadrature)?;
        let cf = model
            .closed_form(&[0.0, 0.0])
            .ok_or_else(|| anyhow!("rfc closed form missing"))?;
        let ordered = loewner_ordered(&report.mle_cov, &report.crllb);
        all_ordered &= ordered;
        t.push(vec![
            num(beta),
            sym_diag_cell(&report.crllb),
            sym_diag_cell(&report.mle_cov),
            sym_diag_cell(&cf.crllb),
            sym_diag_cell(&cf.mle_cov),
            ordered.to_string(),
        ]);
    }
    t.emit(cfg.out.as_deref())?;
    if !all_ordered {
        return Err(Failure::Math(anyhow!("CRLLB exceeds the MLE covariance on some row")));
    }
    Ok(())
}

fn figure_laplace(cfg: &RunConfig) -> CmdResult {
    let grid = grid_or(cfg, "0.5:20:39")?;
    let alpha = cfg.model.alpha.unwrap_or(1.0);
    let spec = cfg.spec(2);
    let base = ModelConfig {
        kind: Some(ModelKind::Laplace),
        alpha: Some(alpha),
        ..Default::default()
    };
    let mut t = Table::new(&[
        "param",
        "crllb_diag",
        "cov_diag",
        "crllb_scaled",
        "cov_scaled",
        "cov_over_crllb",
    ]);
    t.meta("figure", "laplace")
        .meta("model", format!("laplace alpha={}", num(alpha)))
        .meta("param", "a*alpha")
        .meta("grid", grid.to_string())
        .meta("quadrature", spec_text(&spec))
        .meta("seed", "none")
        .meta(
            "scaled",
            "diagonals multiplied by 2 alpha^2 Q, Q = 1 - (1 + a alpha) exp(-a alpha)",
        );
    let mut all_ordered = true;
    for shape in grid.points() {
        if shape <= 0.0 {
            return Err(Failure::Usage(anyhow!("a*alpha must be positive, got {shape}")));
        }
        let model_cfg = base.with_param("a", shape / alpha)?;
        let model = model_cfg.build()?;
        let typed = TruncLaplaceModel::new(alpha, shape / alpha)?;
        let report = crllb(model.as_ref(), &[0.0, 0.0], &spec, Method::Quadrature)?;
        let (crllb_scaled, cov_scaled) = typed.normalized_diagonals();
        all_ordered &= loewner_ordered(&report.mle_cov, &report.crllb);
        t.push(vec![
            num(shape),
            sym_diag_cell(&report.crllb),
            sym_diag_cell(&report.mle_cov),
            num(crllb_scaled),
            num(cov_scaled),
            num(cov_scaled / crllb_scaled),
        ]);
    }
    t.emit(cfg.out.as_deref())?;
    if !all_ordered {
        return Err(Failure::Math(anyhow!("CRLLB exceeds the MLE covariance on some row")));
    }
    Ok(())
}

fn figure_uniform(cfg: &RunConfig) -> CmdResult {
    let grid = grid_or(cfg, "0:3:3")?;
    let n = cfg.model.n.unwrap_or(5);
    let problem = UniformSupportProblem::new(0.0, 1.0, n)?;
    let scales: Vec<f64> = grid.points().iter().map(|g| 10f64.powf(*g)).collect();
    let rungs = sigma_ladder(&problem, &scales)?;
    let cov = estimator_covariance(0.0, 1.0, n);
    let mut t = Table::new(&[
        "log10_scale",
        "sigma",
        "fim_gap",
        "leibniz_frob",
        "l_frob",
        "crllb_11",
        "crllb_12",
        "crllb_22",
        "cov_11",
        "cov_12",
        "cov_22",
        "covariance_dominates",
    ]);
    t.meta("figure", "uniform")
        .meta("model", format!("uniform support [0, 1], n={n}"))
        .meta("param", "log10(sigma / (x2 - x1))")
        .meta("grid", grid.to_string())
        .meta(
            "quadrature",
            "gauss-legendre triangle nodes=128, adaptive gauss-kronrod inner",
        )
        .meta("seed", "none");
    for (g, rung) in grid.points().iter().zip(&rungs) {
        t.push(vec![
            num(*g),
            num(rung.sigma),
            num(rung.fim_gap),
            num(rung.leibniz.frobenius_norm()),
            num(rung.l_matrix.frobenius_norm()),
            num(rung.crllb.get(0, 0)),
            num(rung.crllb.get(0, 1)),
            num(rung.crllb.get(1, 1)),
            num(cov.get(0, 0)),
            num(cov.get(0, 1)),
            num(cov.get(1, 1)),
            rung.covariance_dominates.to_string(),
        ]);
    }
    t.emit(cfg.out.as_deref())?;
    Ok(())
}

/// One identity check: computed value, reference, relative residual.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub residual: f64,
}

impl IdentityCheck {
    fn new(name: impl Into<String>, value: f64, reference: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            residual: (value - reference).abs() / reference.abs().max(1.0),
        }
    }

    pub fn pass(&self) -> bool {
        self.residual <= IDENTITY_TOL
    }
}

fn quad(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64, Failure> {
    Ok(adaptive_integrate(f, a, b, 1e-14)?)
}

pub fn identity_checks() -> Result<Vec<IdentityCheck>, Failure> {
    let mut out = Vec::new();
    for n in 0..=8u32 {
        let q = quad(|t| t.sin().powi(n as i32), 0.0, PI)?;
        out.push(IdentityCheck::new(format!("sin_power n={n}"), sin_power_integral(n), q));
    }
    out.push(IdentityCheck::new(
        "sin_power n=4 = 3pi/8",
        sin_power_integral(4),
        3.0 * PI / 8.0,
    ));
    for &(a, sigma) in &[(1.0, 1.0), (2.0, 0.5), (3.0, 2.0), (0.5, 4.0)] {
        for n in -1..=4 {
            let q = quad(|r| (-r * r / (2.0 * sigma * sigma)).exp() * r.powi(n + 1), 0.0, a)?;
            out.push(IdentityCheck::new(
                format!("gaussian_radial_moment n={n} a={a} sigma={sigma}"),
                gaussian_radial_moment(n, a, sigma),
                q,
            ));
        }
    }
    out.push(IdentityCheck::new(
        "int_0^2pi sin^2",
        quad(|t| t.sin().powi(2), 0.0, 2.0 * PI)?,
        PI,
    ));

    // Gradient of ∫_{B(x,a)} F dz with F independent of x is the pure
    // boundary term ∮ n F ds (∇ₓzᵀ = I on a translated ball).
    let (x, a) = ([0.7, -0.3], 1.3);
    let area = PI * a * a;
    let want = [area * (2.0 * x[0] + x[1]), area * x[0]];
    let f2 = |z: &[f64]| z[0] * z[1] + z[0] * z[0];
    let spec2 = QuadratureSpec::default().with_dim(2).with_nodes(64, 64);
    let normal_form = integrate_boundary_multi(
        2,
        |p, o| {
            let n = p.direction();
            let z = [x[0] + a * n[0], x[1] + a * n[1]];
            let v = f2(&z);
            o[0] = v * n[0];
            o[1] = v * n[1];
        },
        a,
        &spec2,
    )?;
    // Contour form ∮ F (v₁ dz₂ − v₂ dz₁) along z(θ) = x + a(cos θ, sin θ).
    let contour = |v: [f64; 2]| {
        quad(
            |t| {
                let z = [x[0] + a * t.cos(), x[1] + a * t.sin()];
                let (dz1, dz2) = (-a * t.sin(), a * t.cos());
                f2(&z) * (v[0] * dz2 - v[1] * dz1)
            },
            0.0,
            2.0 * PI,
        )
    };
    for (i, v) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        out.push(IdentityCheck::new(
            format!("leibniz_2d normal d/dx{}", i + 1),
            normal_form[i],
            want[i],
        ));
        out.push(IdentityCheck::new(
            format!("leibniz_2d contour d/dx{}", i + 1),
            contour(v)?,
            want[i],
        ));
    }

    let (x3, a3) = ([0.4, -1.1, 0.25], 0.9);
    let vol = 4.0 / 3.0 * PI * a3 * a3 * a3;
    let want3 = [vol * (x3[1] + 2.0 * x3[0]), vol * x3[0], vol];
    let f3 = |z: &[f64]| z[0] * z[1] + z[0] * z[0] + z[2];
    let spec3 = QuadratureSpec::default().with_dim(3).with_nodes(48, 48);
    let surface = integrate_boundary_multi(
        3,
        |p, o| {
            let n = p.direction();
            let z: Vec<f64> = (0..3).map(|k| x3[k] + a3 * n[k]).collect();
            let v = f3(&z);
            (0..3).for_each(|k| o[k] = v * n[k]);
        },
        a3,
        &spec3,
    )?;
    for i in 0..3 {
        out.push(IdentityCheck::new(
            format!("leibniz_3d normal d/dx{}", i + 1),
            surface[i],
            want3[i],
        ));
    }
    Ok(out)
}

pub fn identities(cfg: &RunConfig) -> CmdResult {
    let checks = identity_checks()?;
    let mut t = Table::new(&["identity", "value", "reference", "residual", "pass"]);
    t.meta("command", "identities").meta("tolerance", num(IDENTITY_TOL));
    for c in &checks {
        t.push(vec![
            c.name.clone(),
            num(c.value),
            num(c.reference),
            num(c.residual),
            if c.pass() { "PASS" } else { "FAIL" }.to_string(),
        ]);
    }
    t.emit(cfg.out.as_deref())?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Math(anyhow!(
            "identity residual above {IDENTITY_TOL:e}: {}",
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_identities_hold_tightly() {
        for c in identity_checks().unwrap() {
            assert!(c.residual < 1e-10, "{} residual {}", c.name, c.residual);
        }
    }

    #[test]
    fn sin_power_four() {
        let checks = identity_checks().unwrap();
        let c = checks.iter().find(|c| c.name == "sin_power n=4 = 3pi/8").unwrap();
        assert!(c.residual < 1e-15);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(Failure::from(BoundsError::SingularFim { rcond: 0.0 }).exit_code(), 2);
        assert_eq!(Failure::from(ModelError::Config("x".into())).exit_code(), 1);
        assert_eq!(Failure::from(SamplingError::Count { min: 1000, got: 5 }).exit_code(), 1);
        assert_eq!(Failure::from(SamplingError::Stalled(3)).exit_code(), 2);
    }

    #[test]
    fn params_summary() {
        let cfg = ModelConfig {
            kind: Some(ModelKind::Laplace),
            alpha: Some(2.0),
            a: Some(3.0),
            ..Default::default()
        };
        assert_eq!(model_params(&cfg), "alpha=2 a=3");
    }
}
