//! Builds optimal quadratic grids for N(0, 1) and shows the N^-2 decay of
//! the distortion.
//!
//! ```text
//! cargo run --example build_grid -- 10 50 200 1000
//! ```

use ccr_quant::quantizer::{build_grid, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};

fn main() -> ccr_quant::Result<()> {
    let sizes: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("grid sizes are positive integers"))
        .collect();
    let sizes = if sizes.is_empty() {
        vec![10, 50, 200, 1000]
    } else {
        sizes
    };

    println!(
        "{:>6} {:>14} {:>10} {:>12} {:>12}",
        "N", "distortion", "N²·D", "x_max", "residual"
    );
    for n in sizes {
        let g = build_grid(n, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
        let d = g.distortion();
        println!(
            "{n:>6} {d:>14.6e} {:>10.5} {:>12.6} {:>12.2e}",
            (n * n) as f64 * d,
            g.points()[n - 1],
            g.stationarity_residual()
        );
    }
    Ok(())
}
