//! Exposure profiles and the estimators that produce them.

mod estimators;
mod metrics;
mod pfe;

use std::fmt;
use std::slice;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{BucketGrid, MarketParams, OptionSpec, Portfolio, Side, Valuation};

pub use estimators::{
    ee_analytic, ee_mc, ee_numerical, ee_quantized_djs, ee_quantized_pds, ee_quantized_tree,
    ee_sobol, RectangleRule, SimulationMode, MC_BLOCK,
};
pub use metrics::{error_metrics, ErrorMetrics};
pub use pfe::{pfe_empirical, pfe_mc, pfe_quantized, pfe_weighted};

/// Which estimator produced a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Numerical,
    Quantization,
    QuantizationTree,
    QuantizationPds,
    Mc,
    Sobol,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Numerical => "numerical",
            Method::Quantization => "quantization",
            Method::QuantizationTree => "quantization-tree",
            Method::QuantizationPds => "quantization-pds",
            Method::Mc => "mc",
            Method::Sobol => "sobol",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Expected exposure per bucket with its time-averaged aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureProfile {
    pub buckets: BucketGrid,
    pub ee: Vec<f64>,
    pub epe: f64,
    pub eee: Vec<f64>,
    pub eepe: f64,
    /// `(alpha, per-bucket quantile)` pairs.
    pub pfe: Vec<(f64, Vec<f64>)>,
    /// Per-bucket standard error (Monte Carlo only).
    pub stderr: Option<Vec<f64>>,
    /// Standard error of the EPE estimate (Monte Carlo only).
    pub epe_stderr: Option<f64>,
    pub method: Method,
}

impl ExposureProfile {
    /// Fills EEE, EPE and EEPE from the EE column.
    pub fn from_ee(buckets: BucketGrid, ee: Vec<f64>, method: Method) -> Result<Self> {
        if ee.len() != buckets.len() {
            return Err(Error::Config(format!(
                "{} EE values for {} buckets",
                ee.len(),
                buckets.len()
            )));
        }
        if let Some(bad) = ee.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "expected exposure must be finite and ≥ 0, got {bad}"
            )));
        }
        let eee: Vec<f64> = ee
            .iter()
            .scan(f64::NEG_INFINITY, |m, &v| {
                *m = v.max(*m);
                Some(*m)
            })
            .collect();
        let epe = time_average(&buckets, &ee);
        let eepe = time_average(&buckets, &eee);
        Ok(Self {
            buckets,
            ee,
            epe,
            eee,
            eepe,
            pfe: Vec::new(),
            stderr: None,
            epe_stderr: None,
            method,
        })
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>, epe_stderr: f64) -> Result<Self> {
        if stderr.len() != self.ee.len() {
            return Err(Error::Config(
                "stderr length differs from bucket count".into(),
            ));
        }
        self.stderr = Some(stderr);
        self.epe_stderr = Some(epe_stderr);
        Ok(self)
    }

    pub fn with_pfe(mut self, alpha: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.ee.len() {
            return Err(Error::Config("PFE length differs from bucket count".into()));
        }
        self.pfe.push((alpha, values));
        Ok(self)
    }

    pub fn pfe_at(&self, alpha: f64) -> Option<&[f64]> {
        self.pfe
            .iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, v)| v.as_slice())
    }
}

/// `Σ_k v_k·Δ_k / t_K`.
pub fn time_average(buckets: &BucketGrid, values: &[f64]) -> f64 {
    values
        .iter()
        .zip(buckets.deltas())
        .map(|(v, d)| v * d)
        .sum::<f64>()
        / buckets.horizon()
}

/// What the exposure is measured on.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Option(OptionSpec),
    Portfolio(Portfolio),
}

impl Target {
    pub fn positions(&self) -> &[OptionSpec] {
        match self {
            Target::Option(o) => slice::from_ref(o),
            Target::Portfolio(p) => p.positions(),
        }
    }
}

/// A target priced in one market over one bucket grid.
#[derive(Debug, Clone)]
pub struct ExposureTask {
    pub target: Target,
    pub market: MarketParams,
    pub buckets: BucketGrid,
    /// Constant collateral `V ≥ 0` subtracted before the positive part.
    pub collateral: f64,
    /// Multiply each `EE_k` by `e^{−r·t_k}`.
    pub discount: bool,
}

impl ExposureTask {
    pub fn new(target: Target, market: MarketParams, buckets: BucketGrid) -> Result<Self> {
        for p in target.positions() {
            p.validate()?;
            if p.maturity < buckets.horizon() {
                return Err(Error::Config(format!(
                    "position maturing at {} ends before the last bucket {}",
                    p.maturity,
                    buckets.horizon()
                )));
            }
        }
        Ok(Self {
            target,
            market,
            buckets,
            collateral: 0.0,
            discount: false,
        })
    }

    pub fn with_collateral(mut self, collateral: f64) -> Result<Self> {
        if !(collateral >= 0.0) || !collateral.is_finite() {
            return Err(Error::Domain(format!(
                "collateral must be ≥ 0, got {collateral}"
            )));
        }
        self.collateral = collateral;
        Ok(self)
    }

    pub fn with_discount(mut self, discount: bool) -> Self {
        self.discount = discount;
        self
    }

    /// Exposure at bucket `k` as a function of the normalized coordinate
    /// `z = W_{t_k}/√t_k`.
    pub fn bucket_exposure(&self, k: usize) -> Result<BucketExposure> {
        let t = self.buckets.times()[k];
        Ok(BucketExposure {
            valuation: Valuation::new(self.target.positions(), &self.market, t)?,
            collateral: self.collateral,
            scale: if self.discount {
                (-self.market.rate * t).exp()
            } else {
                1.0
            },
        })
    }

    pub(crate) fn all_bucket_exposures(&self) -> Result<Vec<BucketExposure>> {
        (0..self.buckets.len())
            .map(|k| self.bucket_exposure(k))
            .collect()
    }

    pub(crate) fn is_single_buy(&self) -> Option<&OptionSpec> {
        match &self.target {
            Target::Option(o) if o.side == Side::Buy => Some(o),
            _ => None,
        }
    }
}

/// `(MtM(t_k) − V)^+`, optionally discounted, at one bucket.
#[derive(Debug, Clone)]
pub struct BucketExposure {
    valuation: Valuation,
    collateral: f64,
    scale: f64,
}

impl BucketExposure {
    #[inline]
    pub fn at_z(&self, z: f64) -> f64 {
        self.scale * (self.valuation.at_z(z) - self.collateral).max(0.0)
    }

    #[inline]
    pub fn at_spot(&self, spot: f64) -> f64 {
        self.scale * (self.valuation.at_spot(spot) - self.collateral).max(0.0)
    }

    /// Signed netting-set value, before collateral and positive part.
    pub fn mtm_at_z(&self, z: f64) -> f64 {
        self.valuation.at_z(z)
    }
}
