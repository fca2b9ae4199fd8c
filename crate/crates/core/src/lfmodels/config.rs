use std::fmt;
use std::str::FromStr;

use super::{LikelihoodModel, LinearTgModel, ModelError, RfcModel, TruncGaussianSphereModel, TruncLaplaceModel};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rfc,
    Laplace,
    Tg,
    LinearTg,
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rfc" => Ok(Self::Rfc),
            "laplace" => Ok(Self::Laplace),
            "tg" => Ok(Self::Tg),
            "linear_tg" => Ok(Self::LinearTg),
            other => Err(ModelError::Config(format!(
                "unknown model `{other}` (expected rfc, laplace, tg or linear_tg)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rfc => "rfc",
            Self::Laplace => "laplace",
            Self::Tg => "tg",
            Self::LinearTg => "linear_tg",
        })
    }
}

/// Model selection plus whichever parameters the chosen model needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelConfig {
    pub kind: Option<ModelKind>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub a: Option<f64>,
    pub n: Option<usize>,
    pub h: Option<Matrix>,
}

/// Parses six reals (comma- or whitespace-separated) as a row-major 3×2 matrix.
pub fn parse_h(text: &str) -> Result<Matrix, ModelError> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| ModelError::Config(format!("H entry `{s}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != 6 {
        return Err(ModelError::Config(format!(
            "H needs 6 row-major entries, got {}",
            values.len()
        )));
    }
    Matrix::from_row_major(3, 2, &values).map_err(|e| ModelError::Config(e.to_string()))
}

fn parse_real(key: &str, value: &str) -> Result<f64, ModelError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| ModelError::Config(format!("`{key}` expects a number, got `{value}`")))
}

impl ModelConfig {
    /// Parses `key=value` lines; blank lines and `#` comments are ignored.
    /// Keys the model layer does not know are returned for the caller.
    pub fn parse(text: &str) -> Result<(Self, Vec<(String, String)>), ModelError> {
        let mut cfg = Self::default();
        let mut rest = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ModelError::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !cfg.set(key, value)? {
                rest.push((key.to_string(), value.to_string()));
            }
        }
        Ok((cfg, rest))
    }

    /// Applies one key. Returns `false` when the key is not a model key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ModelError> {
        match key {
            "model" => self.kind = Some(value.parse()?),
            "beta" => self.beta = Some(parse_real(key, value)?),
            "alpha" => self.alpha = Some(parse_real(key, value)?),
            "sigma" => self.sigma = Some(parse_real(key, value)?),
            "a" => self.a = Some(parse_real(key, value)?),
            "n" => {
                self.n = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|_| ModelError::Config(format!("`n` expects a positive integer, got `{value}`")))?,
                )
            }
            "H" | "h" => self.h = Some(parse_h(value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Overlays every field that `other` sets.
    pub fn merge(&mut self, other: &ModelConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(kind, beta, alpha, sigma, a, n, h);
    }

    /// Sets a scalar parameter by name, for parameter sweeps.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, ModelError> {
        let mut out = self.clone();
        match name {
            "beta" => out.beta = Some(value),
            "alpha" => out.alpha = Some(value),
            "sigma" => out.sigma = Some(value),
            "a" => out.a = Some(value),
            other => return Err(ModelError::Config(format!("cannot sweep parameter `{other}`"))),
        }
        Ok(out)
    }

    pub fn kind(&self) -> Result<ModelKind, ModelError> {
        self.kind.ok_or_else(|| ModelError::Config("missing `model`".into()))
    }

    pub fn build(&self) -> Result<Box<dyn LikelihoodModel>, ModelError> {
        fn need<T: Clone>(v: &Option<T>, key: &str, model: ModelKind) -> Result<T, ModelError> {
            v.clone()
                .ok_or_else(|| ModelError::Config(format!("model {model} needs `{key}`")))
        }
        let kind = self.kind()?;
        Ok(match kind {
            ModelKind::Rfc => match self.a {
                Some(a) => Box::new(RfcModel::with_radius(need(&self.beta, "beta", kind)?, a)?),
                None => Box::new(RfcModel::new(need(&self.beta, "beta", kind)?)?),
            },
            ModelKind::Laplace => Box::new(TruncLaplaceModel::new(
                need(&self.alpha, "alpha", kind)?,
                need(&self.a, "a", kind)?,
            )?),
            ModelKind::Tg => Box::new(TruncGaussianSphereModel::new(
                need(&self.n, "n", kind)?,
                need(&self.sigma, "sigma", kind)?,
                need(&self.a, "a", kind)?,
            )?),
            ModelKind::LinearTg => {
                if let Some(s) = self.sigma {
                    if s != 1.0 {
                        return Err(ModelError::Config(format!("linear_tg fixes sigma = 1, got {s}")));
                    }
                }
                Box::new(LinearTgModel::new(
                    need(&self.h, "H", kind)?,
                    need(&self.a, "a", kind)?,
                )?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_model() {
        let cases = [
            ("model=rfc\nbeta=0.5", "rfc"),
            ("model = laplace\nalpha=2\na=0.5  # comment", "laplace"),
            ("model=tg\nn=3\nsigma=1\na=1.5", "tg"),
            ("model=linear_tg\nH=1,0.5,-0.3,2,0.7,0.1\na=1.5", "linear_tg"),
        ];
        for (text, name) in cases {
            let (cfg, rest) = ModelConfig::parse(text).unwrap();
            assert!(rest.is_empty());
            assert_eq!(cfg.build().unwrap().name(), name);
        }
    }

    #[test]
    fn unknown_keys_are_passed_through() {
        let (_, rest) = ModelConfig::parse("model=rfc\nbeta=0\nseed=7\n\n# x\n").unwrap();
        assert_eq!(rest, vec![("seed".to_string(), "7".to_string())]);
    }

    #[test]
    fn errors_are_config_errors() {
        assert!(matches!(ModelConfig::parse("model=gauss"), Err(ModelError::Config(_))));
        assert!(matches!(ModelConfig::parse("beta"), Err(ModelError::Config(_))));
        assert!(matches!(ModelConfig::parse("beta=x"), Err(ModelError::Config(_))));
        assert!(matches!(parse_h("1 2 3"), Err(ModelError::Config(_))));
        let (cfg, _) = ModelConfig::parse("model=tg\nsigma=1").unwrap();
        assert!(matches!(cfg.build(), Err(ModelError::Config(_))));
        let (cfg, _) = ModelConfig::parse("model=rfc\nbeta=0.2\na=2").unwrap();
        assert!(matches!(cfg.build(), Err(ModelError::InvalidParameter(_))));
    }

    #[test]
    fn merge_prefers_overlay() {
        let (mut base, _) = ModelConfig::parse("model=laplace\nalpha=1\na=2").unwrap();
        let (over, _) = ModelConfig::parse("alpha=3").unwrap();
        base.merge(&over);
        assert_eq!(base.alpha, Some(3.0));
        assert_eq!(base.a, Some(2.0));
        assert_eq!(base.with_param("a", 4.0).unwrap().a, Some(4.0));
    }

    #[test]
    fn h_accepts_whitespace() {
        let h = parse_h("1 0.5\n-0.3 2 0.7 0.1").unwrap();
        assert_eq!(h.get(1, 1), 2.0);
    }
}
