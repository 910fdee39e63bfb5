//! Path-wise (PDS) quantization: one vector quantizer of the nine bucket
//! increments, built by randomized Lloyd iterations.

use ccr_quant::exposure::{ee_analytic, ee_quantized_pds, ExposureTask, Target};
use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Side};
use ccr_quant::quantizer::{build_vector_quantizer, LloydConfig};

fn main() -> ccr_quant::Result<()> {
    let task = ExposureTask::new(
        Target::Option(OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0)?),
        MarketParams::new(100.0, 0.03, 0.25)?,
        BucketGrid::default(),
    )?;
    let exact = ee_analytic(&task)?;
    for n in [50, 200, 800] {
        let vq = build_vector_quantizer(
            n,
            task.buckets.len(),
            LloydConfig {
                samples: 40 * n,
                iterations: 30,
                ..LloydConfig::default()
            },
        )?;
        let p = ee_quantized_pds(&task, &vq)?;
        println!(
            "N={n:>4} ({} cells kept): EPE {:.4} vs {:.4}, ε = {:+.3}%",
            vq.size(),
            p.epe,
            exact.epe,
            100.0 * (p.epe - exact.epe) / exact.epe
        );
    }
    Ok(())
}
