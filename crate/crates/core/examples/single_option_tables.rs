//! EE profile of a bought 1y call struck at 100 by every estimator, with
//! ε against the closed form.
//!
//! ```text
//! cargo run --example single_option_tables -- 110 0.15
//! ```

use ccr_quant::exposure::{
    ee_analytic, ee_mc, ee_numerical, ee_quantized_djs, ee_sobol, error_metrics, ExposureTask,
    RectangleRule, SimulationMode, Target,
};
use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Side};
use ccr_quant::quantizer::{build_grid, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use ccr_quant::sampling::DEFAULT_SEED;

fn main() -> ccr_quant::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (spot, vol) = match args[..] {
        [s, v] => (s, v),
        _ => (100.0, 0.25),
    };

    let call = OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0)?;
    let task = ExposureTask::new(
        Target::Option(call),
        MarketParams::new(spot, 0.03, vol)?,
        BucketGrid::default(),
    )?;
    let grid = build_grid(1000, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;

    let analytic = ee_analytic(&task)?;
    let others = [
        ("numerical", ee_numerical(&task, RectangleRule::new(1000))?),
        ("quantization", ee_quantized_djs(&task, &[grid])?),
        ("mc", ee_mc(&task, 1000, SimulationMode::Pds, DEFAULT_SEED)?),
        ("sobol", ee_sobol(&task, 1000)?),
    ];

    println!("S = {spot}, σ = {vol}");
    print!("{:>4} {:>10}", "t", "analytic");
    for (name, _) in &others {
        print!(" {name:>12} {:>8}", "ε%");
    }
    println!();
    let labels = task
        .buckets
        .labels()
        .iter()
        .map(String::as_str)
        .chain(["EPE"]);
    for (row, label) in labels.enumerate() {
        let pick = |ee: &[f64], epe: f64| ee.get(row).copied().unwrap_or(epe);
        print!("{label:>4} {:>10.4}", pick(&analytic.ee, analytic.epe));
        for (_, p) in &others {
            let m = error_metrics(p, &analytic)?;
            print!(
                " {:>12.4} {:>8.3}",
                pick(&p.ee, p.epe),
                pick(&m.eps, m.epe_eps)
            );
        }
        println!();
    }
    Ok(())
}
