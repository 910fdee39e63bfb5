//! Sobol versus pseudo-random draws at equal budgets on an at-the-money
//! call, with the Sobol normals' first moments for a sanity check.

use ccr_quant::exposure::{ee_analytic, ee_mc, ee_sobol, ExposureTask, SimulationMode, Target};
use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Side};
use ccr_quant::sampling::{NormalStream, DEFAULT_SEED};

fn main() -> ccr_quant::Result<()> {
    let mut sobol = NormalStream::sobol(9)?;
    let draws = sobol.draw_normals(1 << 14)?;
    for d in [0, 4, 8] {
        let (s1, s2) = draws
            .column(d)
            .fold((0.0, 0.0), |(a, b), z| (a + z, b + z * z));
        let n = draws.rows() as f64;
        println!("dim {d}: mean {:+.2e}, variance {:.6}", s1 / n, s2 / n);
    }

    let task = ExposureTask::new(
        Target::Option(OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0)?),
        MarketParams::new(100.0, 0.03, 0.25)?,
        BucketGrid::default(),
    )?;
    let exact = ee_analytic(&task)?.epe;
    println!("\n{:>8} {:>12} {:>12}", "N", "sobol ε%", "mc ε%");
    for n in [1 << 10, 1 << 12, 1 << 14, 1 << 16] {
        let s = ee_sobol(&task, n)?.epe;
        let m = ee_mc(&task, n, SimulationMode::Pds, DEFAULT_SEED)?.epe;
        println!(
            "{n:>8} {:>12.4} {:>12.4}",
            100.0 * (s - exact) / exact,
            100.0 * (m - exact) / exact
        );
    }
    Ok(())
}
