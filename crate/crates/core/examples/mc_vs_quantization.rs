//! Error against the closed form as the budget grows: Monte Carlo paths
//! versus quantizer points, for an out-of-the-money call.

use ccr_quant::exposure::{
    ee_analytic, ee_mc, ee_quantized_djs, ExposureTask, SimulationMode, Target,
};
use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Side};
use ccr_quant::quantizer::{build_grid, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use ccr_quant::sampling::DEFAULT_SEED;

fn main() -> ccr_quant::Result<()> {
    let task = ExposureTask::new(
        Target::Option(OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0)?),
        MarketParams::new(90.0, 0.03, 0.15)?,
        BucketGrid::default(),
    )?;
    let exact = ee_analytic(&task)?.epe;
    println!("analytic EPE {exact:.6}");
    println!(
        "{:>7} {:>14} {:>10} {:>14}",
        "N", "|ε| quant %", "|ε| MC %", "MC RSD %"
    );
    for n in [10, 30, 100, 300, 1000, 3000] {
        let q = ee_quantized_djs(
            &task,
            &[build_grid(n, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?],
        )?;
        let mc = ee_mc(&task, n.max(2), SimulationMode::Pds, DEFAULT_SEED)?;
        let rel = |x: f64| 100.0 * (x - exact).abs() / exact;
        println!(
            "{n:>7} {:>14.6} {:>10.4} {:>14.4}",
            rel(q.epe),
            rel(mc.epe),
            100.0 * mc.epe_stderr.unwrap_or(f64::NAN) / mc.epe
        );
    }
    Ok(())
}
