//! Counterparty credit exposure profiles of European options and netting
//! sets under Black–Scholes.
//!
//! The main estimator integrates each bucket's exposure against an optimal
//! quantizer of the standard normal law. Closed-form, rectangle-rule,
//! Monte Carlo and Sobol estimators serve as baselines, and a quantization
//! tree links per-bucket grids through transition probabilities.
//!
//! ```
//! use ccr_quant::exposure::{ee_analytic, ee_quantized_djs, ExposureTask, Target};
//! use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Side};
//! use ccr_quant::quantizer::build_grid;
//!
//! let call = OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0)?;
//! let market = MarketParams::new(100.0, 0.03, 0.25)?;
//! let task = ExposureTask::new(Target::Option(call), market, BucketGrid::default())?;
//!
//! let grid = build_grid(200, 1e-10, 100_000)?;
//! let quantized = ee_quantized_djs(&task, &[grid])?;
//! let exact = ee_analytic(&task)?;
//! assert!((quantized.epe / exact.epe - 1.0).abs() < 1e-4);
//! # Ok::<(), ccr_quant::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod exposure;
pub mod gaussnum;
pub mod market;
pub mod quadrature;
pub mod quantizer;
pub mod sampling;

pub use error::{Error, Result};
