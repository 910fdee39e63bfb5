use super::ExposureProfile;
use crate::error::{Error, Result};

/// Percent errors of a profile against a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    /// `100·(EE_k − EE_k^bench)/EE_k^bench`, NaN where the benchmark is 0.
    pub eps: Vec<f64>,
    pub epe_eps: f64,
    /// `100·stderr_k/EE_k` when the estimate carries standard errors.
    pub rsd: Option<Vec<f64>>,
    pub epe_rsd: Option<f64>,
}

fn relative(est: f64, bench: f64) -> f64 {
    if bench == 0.0 {
        f64::NAN
    } else {
        100.0 * (est - bench) / bench
    }
}

fn ratio(se: f64, est: f64) -> f64 {
    if est == 0.0 {
        f64::NAN
    } else {
        100.0 * se / est
    }
}

pub fn error_metrics(
    estimate: &ExposureProfile,
    benchmark: &ExposureProfile,
) -> Result<ErrorMetrics> {
    if estimate.buckets != benchmark.buckets {
        return Err(Error::Config(
            "estimate and benchmark use different bucket grids".into(),
        ));
    }
    let eps = estimate
        .ee
        .iter()
        .zip(&benchmark.ee)
        .map(|(&e, &b)| relative(e, b))
        .collect();
    let rsd = estimate.stderr.as_ref().map(|se| {
        se.iter()
            .zip(&estimate.ee)
            .map(|(&s, &e)| ratio(s, e))
            .collect()
    });
    Ok(ErrorMetrics {
        eps,
        epe_eps: relative(estimate.epe, benchmark.epe),
        rsd,
        epe_rsd: estimate.epe_stderr.map(|s| ratio(s, estimate.epe)),
    })
}
