use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use crllb::bounds::Method;
use crllb::lfmodels::ModelConfig;
use crllb::quadrature::QuadratureSpec;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_COUNT: usize = 100_000;
pub const MIN_MC_COUNT: usize = 1000;

/// Inclusive sweep `start, start + h, …, stop` with `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            bail!("grid must be start:stop:steps, got `{text}`");
        }
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| anyhow!("grid bound `{s}` is not a number"))?;
            if !v.is_finite() {
                bail!("grid bound `{s}` is not finite");
            }
            Ok(v)
        };
        let steps: usize = parts[2]
            .parse()
            .map_err(|_| anyhow!("grid steps `{}` is not a positive integer", parts[2]))?;
        if steps < 1 {
            bail!("grid steps must be at least 1");
        }
        Ok(Self {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            steps,
        })
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|i| {
                if i == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / self.steps as f64
                }
            })
            .collect()
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.steps)
    }
}

/// Flags shared by every subcommand that needs a model or run settings.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Plain-text `key=value` config file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// rfc | laplace | tg | linear_tg
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    /// Six comma-separated reals, row-major 3×2.
    #[arg(long = "H", allow_hyphen_values = true)]
    pub h: Option<String>,
    /// Parameter point, comma-separated (defaults to the origin).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// start:stop:steps, where steps counts intervals.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub count: Option<String>,
    /// auto | closed | quadrature
    #[arg(long)]
    pub method: Option<String>,
    /// Gauss-Legendre nodes per coordinate.
    #[arg(long)]
    pub nodes: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Fully resolved run settings (config file overlaid by flags).
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub x: Option<Vec<f64>>,
    pub grid: Option<Grid>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub method: Option<Method>,
    pub nodes: Option<usize>,
    pub out: Option<PathBuf>,
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| anyhow!("`{s}` is not a number")))
        .collect()
}

fn parse_method(text: &str) -> Result<Method> {
    match text {
        "auto" => Ok(Method::Auto),
        "closed" | "closed_form" => Ok(Method::ClosedForm),
        "quadrature" => Ok(Method::Quadrature),
        other => bail!("unknown method `{other}` (auto, closed, quadrature)"),
    }
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? {
            return Ok(());
        }
        match key {
            "x" => self.x = Some(parse_vector(value)?),
            "grid" => self.grid = Some(Grid::parse(value)?),
            "seed" => {
                self.seed = Some(
                    value
                        .parse()
                        .map_err(|_| anyhow!("seed `{value}` is not an unsigned integer"))?,
                )
            }
            "count" => {
                self.count = Some(
                    value
                        .parse()
                        .map_err(|_| anyhow!("count `{value}` is not an unsigned integer"))?,
                )
            }
            "method" => self.method = Some(parse_method(value)?),
            "nodes" => {
                self.nodes = Some(
                    value
                        .parse()
                        .map_err(|_| anyhow!("nodes `{value}` is not an unsigned integer"))?,
                )
            }
            "out" => self.out = Some(PathBuf::from(value)),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let (model, rest) = ModelConfig::parse(&text)?;
            cfg.model = model;
            for (k, v) in rest {
                cfg.set(&k, &v)?;
            }
        }
        let flags = [
            ("model", &args.model),
            ("beta", &args.beta),
            ("alpha", &args.alpha),
            ("sigma", &args.sigma),
            ("a", &args.a),
            ("n", &args.n),
            ("H", &args.h),
            ("x", &args.x),
            ("grid", &args.grid),
            ("seed", &args.seed),
            ("count", &args.count),
            ("method", &args.method),
            ("nodes", &args.nodes),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{key}"))?;
            }
        }
        if let Some(out) = &args.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Parameter point, checked against the model dimension.
    pub fn point(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.x {
            None => Ok(vec![0.0; dim]),
            Some(x) if x.len() == dim => Ok(x.clone()),
            Some(x) => bail!("--x has {} entries, model needs {dim}", x.len()),
        }
    }

    /// Default node counts keep every observation dimension at desk cost.
    pub fn spec(&self, dim_z: usize) -> QuadratureSpec {
        let nodes = self.nodes.unwrap_or(match dim_z {
            0..=2 => 256,
            3 => 96,
            4 => 32,
            5 => 16,
            6 => 12,
            _ => 8,
        });
        QuadratureSpec::default().with_dim(dim_z).with_nodes(nodes, nodes)
    }
}
