//! JSON run configuration.
//!
//! ```json
//! {
//!   "target": { "option": { "kind": "call", "side": "buy", "strike": 100, "maturity": 1 } },
//!   "spots": [90, 100, 110],
//!   "vols": [0.15, 0.25, 0.30],
//!   "rate": 0.03,
//!   "methods": {
//!     "analytic": true,
//!     "numerical": { "N": 1000 },
//!     "quantization": { "N": 1000 },
//!     "mc": { "N": 1000, "seed": 1592708320, "mode": "pds" },
//!     "sobol": { "N": 1000 }
//!   },
//!   "output": "out/single"
//! }
//! ```
//!
//! A portfolio target is `{ "portfolio": "netting10.txt" }`, resolved
//! against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exposure::{RectangleRule, SimulationMode};
use crate::market::{BucketGrid, OptionSpec, Portfolio};
use crate::sampling::DEFAULT_SEED;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetConfig,
    pub spots: Vec<f64>,
    pub vols: Vec<f64>,
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Bucket times in years; the weekly-to-yearly default when absent.
    #[serde(default)]
    pub buckets: Option<Vec<f64>>,
    pub methods: MethodsConfig,
    #[serde(default)]
    pub collateral: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory of cached grid files, keyed by size.
    #[serde(default)]
    pub grid_cache: Option<PathBuf>,
    #[serde(default)]
    pub discount: bool,
}

fn default_rate() -> f64 {
    0.03
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetConfig {
    Option(OptionSpec),
    Portfolio(PathBuf),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsConfig {
    #[serde(default)]
    pub analytic: bool,
    pub numerical: Option<NumericalConfig>,
    pub quantization: Option<QuantizationConfig>,
    pub mc: Option<McConfig>,
    pub sobol: Option<SobolConfig>,
    /// Sobol run used as the reference for netting sets.
    pub benchmark: Option<SobolConfig>,
}

impl MethodsConfig {
    pub fn count(&self) -> usize {
        usize::from(self.analytic)
            + usize::from(self.numerical.is_some())
            + usize::from(self.quantization.is_some())
            + usize::from(self.mc.is_some())
            + usize::from(self.sobol.is_some())
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericalConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_half_width() -> f64 {
    RectangleRule::DEFAULT_HALF_WIDTH
}

impl NumericalConfig {
    pub fn rule(&self) -> RectangleRule {
        RectangleRule {
            nodes: self.n,
            half_width: self.half_width,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One marginal grid per bucket.
    #[default]
    Djs,
    /// Marginal grids linked by transition matrices.
    Tree,
    /// One path quantizer of the bucket increments.
    Pds,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizationConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub prune_z: Option<f64>,
    /// Lloyd sample size for the `pds` variant.
    #[serde(default = "default_lloyd_samples")]
    pub samples: usize,
    /// Lloyd iterations for the `pds` variant.
    #[serde(default = "default_lloyd_iterations")]
    pub iterations: usize,
}

fn default_lloyd_samples() -> usize {
    50_000
}

fn default_lloyd_iterations() -> usize {
    30
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: SimulationMode,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_mode() -> SimulationMode {
    SimulationMode::Pds
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolConfig {
    #[serde(rename = "N")]
    pub n: usize,
}

/// Points in the default netting-set reference run.
pub const DEFAULT_BENCHMARK_POINTS: usize = 1_000_000;

impl RunConfig {
    /// Parses and validates a config; errors carry the offending key path
    /// and the line in the file.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::Config(format!(
                "{}:{}:{}: at `{}`: {}",
                origin.display(),
                inner.line(),
                inner.column(),
                e.path(),
                inner
            ))
        })?;
        cfg.validate()
            .map_err(|m| Error::Config(format!("{}: {m}", origin.display())))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        if let TargetConfig::Portfolio(p) = &mut cfg.target {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.methods.count() == 0 {
            return Err("`methods` must enable at least one method".into());
        }
        if self.spots.is_empty() || self.vols.is_empty() {
            return Err("`spots` and `vols` must be non-empty".into());
        }
        if let Some(s) = self.spots.iter().find(|s| !(**s > 0.0)) {
            return Err(format!("`spots` entries must be positive, got {s}"));
        }
        if let Some(v) = self.vols.iter().find(|v| !(**v > 0.0)) {
            return Err(format!("`vols` entries must be positive, got {v}"));
        }
        if !(self.collateral >= 0.0) {
            return Err(format!("`collateral` must be ≥ 0, got {}", self.collateral));
        }
        if let TargetConfig::Option(o) = &self.target {
            o.validate().map_err(|e| format!("`target.option`: {e}"))?;
        }
        if let Some(times) = &self.buckets {
            BucketGrid::new(times.clone()).map_err(|e| format!("`buckets`: {e}"))?;
        }
        let sizes = [
            ("methods.numerical.N", self.methods.numerical.map(|m| m.n)),
            (
                "methods.quantization.N",
                self.methods.quantization.map(|m| m.n),
            ),
            ("methods.sobol.N", self.methods.sobol.map(|m| m.n)),
            ("methods.benchmark.N", self.methods.benchmark.map(|m| m.n)),
        ];
        for (key, n) in sizes {
            if n == Some(0) {
                return Err(format!("`{key}` must be ≥ 1"));
            }
        }
        if let Some(mc) = self.methods.mc {
            if mc.n < 2 {
                return Err("`methods.mc.N` must be ≥ 2".into());
            }
        }
        Ok(())
    }

    pub fn bucket_grid(&self) -> Result<BucketGrid> {
        match &self.buckets {
            Some(times) => {
                BucketGrid::new(times.clone()).map_err(|e| Error::Config(format!("`buckets`: {e}")))
            }
            None => Ok(BucketGrid::default()),
        }
    }

    pub fn benchmark_points(&self) -> usize {
        self.methods
            .benchmark
            .map_or(DEFAULT_BENCHMARK_POINTS, |b| b.n)
    }

    pub fn load_target(&self) -> Result<crate::exposure::Target> {
        Ok(match &self.target {
            TargetConfig::Option(o) => crate::exposure::Target::Option(*o),
            TargetConfig::Portfolio(p) => crate::exposure::Target::Portfolio(Portfolio::load(p)?),
        })
    }
}
