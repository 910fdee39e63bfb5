//! Quantization tree over the default buckets: transition matrices, their
//! Chapman–Kolmogorov consistency, and the effect of pruning far jumps.

use ccr_quant::exposure::{ee_analytic, ee_quantized_tree, ExposureTask, Target};
use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Side};
use ccr_quant::quantizer::{build_grid, QuantizationTree, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};

fn main() -> ccr_quant::Result<()> {
    let buckets = BucketGrid::default();
    let times = buckets.times();
    let grid = build_grid(100, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
    let task = ExposureTask::new(
        Target::Option(OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0)?),
        MarketParams::new(100.0, 0.03, 0.25)?,
        buckets.clone(),
    )?;
    let analytic = ee_analytic(&task)?.epe;

    println!(
        "{:>7} {:>9} {:>12} {:>10} {:>9}",
        "prune", "zeroed", "chapman", "EPE", "ε%"
    );
    for prune in [None, Some(5.0), Some(4.0), Some(3.0)] {
        let tree = QuantizationTree::build(times, vec![grid.clone(); times.len()], prune)?;
        let zeroed: usize = tree.transitions().iter().map(|t| t.pruned_count()).sum();
        let total: usize = tree.transitions().iter().map(|t| t.rows() * t.cols()).sum();
        let epe = ee_quantized_tree(&task, &tree)?.epe;
        println!(
            "{:>7} {:>8.1}% {:>12.2e} {epe:>10.5} {:>9.4}",
            prune.map_or("none".to_string(), |z| z.to_string()),
            100.0 * zeroed as f64 / total as f64,
            tree.max_chapman_discrepancy()?,
            100.0 * (epe - analytic) / analytic
        );
    }

    let tree = QuantizationTree::build(
        &times[..2],
        vec![build_grid(5, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?; 2],
        None,
    )?;
    println!("\n5-point transition matrix 1w → 2w:");
    let tm = &tree.transitions()[0];
    for i in 0..tm.rows() {
        let row: Vec<String> = tm.row(i).iter().map(|p| format!("{p:.4}")).collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
