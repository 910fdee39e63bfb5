//! EE, EEE and PFE profiles of a netting set from a quantizer and from
//! Monte Carlo.

use std::path::Path;

use ccr_quant::exposure::{
    ee_quantized_djs, pfe_mc, pfe_quantized, ExposureTask, SimulationMode, Target,
};
use ccr_quant::market::{BucketGrid, MarketParams, Portfolio};
use ccr_quant::quantizer::{build_grid, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use ccr_quant::sampling::DEFAULT_SEED;

const ALPHA: f64 = 0.95;

fn main() -> ccr_quant::Result<()> {
    let book = Portfolio::load(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../portfolios/netting10.txt"),
    )?;
    let task = ExposureTask::new(
        Target::Portfolio(book),
        MarketParams::new(100.0, 0.03, 0.25)?,
        BucketGrid::default(),
    )?;
    let grid = build_grid(1000, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
    let profile = ee_quantized_djs(&task, std::slice::from_ref(&grid))?;
    let pfe_q = pfe_quantized(&task, std::slice::from_ref(&grid), ALPHA)?;
    let pfe_s = pfe_mc(&task, 100_000, SimulationMode::Djs, DEFAULT_SEED, ALPHA)?;

    println!(
        "{:>4} {:>9} {:>9} {:>12} {:>12}",
        "t", "EE", "EEE", "PFE95 quant", "PFE95 MC"
    );
    for (k, label) in task.buckets.labels().iter().enumerate() {
        println!(
            "{label:>4} {:>9.4} {:>9.4} {:>12.4} {:>12.4}",
            profile.ee[k], profile.eee[k], pfe_q[k], pfe_s[k]
        );
    }
    println!("EPE {:.4}  EEPE {:.4}", profile.epe, profile.eepe);
    Ok(())
}
