use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use crllb::linalg::{Matrix, SymMatrix};
use crllb::quadrature::QuadratureSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e9)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e9).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A single value when the matrix is a multiple of the identity (to `1e-9`
/// relative), otherwise the diagonal joined by `;`.
pub fn diag_cell(m: &Matrix) -> String {
    let d = m.rows();
    let diag: Vec<f64> = (0..d).map(|i| m.get(i, i)).collect();
    let scale = m.as_slice().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let mean = diag.iter().sum::<f64>() / d as f64;
    let isotropic = (0..d).all(|i| {
        (0..d).all(|j| {
            let want = if i == j { mean } else { 0.0 };
            (m.get(i, j) - want).abs() <= tol
        })
    });
    if isotropic {
        num(mean)
    } else {
        diag.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
    }
}

pub fn sym_diag_cell(m: &SymMatrix) -> String {
    diag_cell(&Matrix::from(m))
}

pub fn vector_cell(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

pub fn matrix_text(m: &Matrix) -> String {
    (0..m.rows())
        .map(|i| {
            let row: Vec<String> = (0..m.cols()).map(|j| format!("{:>16.8e}", m.get(i, j))).collect();
            format!("  [{}]", row.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn spec_text(spec: &QuadratureSpec) -> String {
    format!(
        "gauss-legendre radial={} angular={} dim={}",
        spec.radial_nodes, spec.angular_nodes, spec.dim
    )
}

/// CSV document: `#` metadata lines, a header row, then data rows.
#[derive(Debug, Clone)]
pub struct Table {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            meta: vec![("version".into(), format!("crllb {VERSION}"))],
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.meta.push((key.into(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<String> {
        let mut buf = Vec::new();
        for (k, v) in &self.meta {
            buf.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        Ok(String::from_utf8(bytes)?)
    }

    /// Writes to `path`, or to stdout when absent.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        let text = self.render()?;
        match path {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    }
}
