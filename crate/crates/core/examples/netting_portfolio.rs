//! Netting-set EPE for the ten-option book in `portfolios/netting10.txt`
//! across the spot/vol sweep: quantization against a Sobol reference.

use std::path::Path;
use std::time::Instant;

use ccr_quant::exposure::{ee_quantized_djs, ee_sobol, ExposureTask, Target};
use ccr_quant::market::{BucketGrid, MarketParams, Portfolio};
use ccr_quant::quantizer::{build_grid, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};

fn main() -> ccr_quant::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../portfolios/netting10.txt");
    let book = Portfolio::load(&path)?;
    let grid = build_grid(1000, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
    // 2^18 points keeps the run short; the CLI default is 10^6.
    let reference_points = 1 << 18;

    println!("{} positions from {}", book.len(), path.display());
    println!(
        "{:>5} {:>5} {:>10} {:>12} {:>9}",
        "S", "σ", "sobol", "quantized", "ε%"
    );
    let start = Instant::now();
    for spot in [90.0, 100.0, 110.0] {
        for vol in [0.15, 0.25, 0.30] {
            let task = ExposureTask::new(
                Target::Portfolio(book.clone()),
                MarketParams::new(spot, 0.03, vol)?,
                BucketGrid::default(),
            )?;
            let reference = ee_sobol(&task, reference_points)?.epe;
            let q = ee_quantized_djs(&task, std::slice::from_ref(&grid))?.epe;
            println!(
                "{spot:>5} {vol:>5} {reference:>10.4} {q:>12.4} {:>9.4}",
                100.0 * (q - reference) / reference
            );
        }
    }
    println!("{:.2?}", start.elapsed());
    Ok(())
}
