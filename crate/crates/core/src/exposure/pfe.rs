use rayon::prelude::*;

use super::estimators::{simulate_blocks, Draws, SimulationMode};
use super::ExposureTask;
use crate::error::{Error, Result};
use crate::quantizer::QuantizerGrid;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "PFE level must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Left-continuous `alpha`-quantile of a weighted atomic law: the smallest
/// atom whose cumulative weight reaches `alpha`.
pub fn pfe_weighted(values: &[f64], weights: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} atoms with {} weights",
            values.len(),
            weights.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    // Slack absorbs rounding in the running sum, not genuine mass.
    let target = alpha * total * (1.0 - 4.0 * f64::EPSILON);
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum >= target {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("non-empty")])
}

/// Empirical `alpha`-quantile with equal weights, same convention as
/// [`pfe_weighted`]: the `⌈alpha·n⌉`-th order statistic.
pub fn pfe_empirical(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if samples.is_empty() {
        return Err(Error::Config("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((alpha * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Per-bucket PFE from the quantized exposure atoms.
pub fn pfe_quantized(task: &ExposureTask, grids: &[QuantizerGrid], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let k_count = task.buckets.len();
    if !(grids.len() == 1 || grids.len() == k_count) {
        return Err(Error::Config(format!(
            "{} grids for {k_count} buckets",
            grids.len()
        )));
    }
    (0..k_count)
        .into_par_iter()
        .map(|k| {
            let e = task.bucket_exposure(k)?;
            let g = &grids[if grids.len() == 1 { 0 } else { k }];
            let values: Vec<f64> = g.points().iter().map(|&x| e.at_z(x)).collect();
            pfe_weighted(&values, g.probs(), alpha)
        })
        .collect()
}

/// Per-bucket PFE from the same scenarios `ee_mc` would draw.
pub fn pfe_mc(
    task: &ExposureTask,
    paths: usize,
    mode: SimulationMode,
    seed: u64,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if paths < 2 {
        return Err(Error::Domain("Monte Carlo needs at least 2 paths".into()));
    }
    let exposures = task.all_bucket_exposures()?;
    let k_count = exposures.len();
    let blocks = simulate_blocks(task, paths, Draws::Pseudo { seed, mode }, |z| {
        let mut cols = vec![Vec::with_capacity(z.len() / k_count); k_count];
        for row in z.chunks_exact(k_count) {
            for k in 0..k_count {
                cols[k].push(exposures[k].at_z(row[k]));
            }
        }
        cols
    })?;
    (0..k_count)
        .map(|k| {
            let all: Vec<f64> = blocks.iter().flat_map(|b| b[k].iter().copied()).collect();
            pfe_empirical(&all, alpha)
        })
        .collect()
}
