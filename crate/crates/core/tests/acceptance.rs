//! End-to-end acceptance checks. Run with
//! `cargo test -p ccr-quant --test acceptance`; prints one line per
//! criterion and exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ccr_quant::cli::{cmd_exposure, cmd_portfolio, Overrides, RunConfig, SobolConfig};
use ccr_quant::exposure::{
    ee_analytic, ee_mc, ee_quantized_djs, ee_sobol, ExposureProfile, ExposureTask, SimulationMode,
    Target,
};
use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Portfolio, Side};
use ccr_quant::quantizer::{
    build_grid, QuantizationTree, QuantizerGrid, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
use ccr_quant::sampling::{NormalStream, DEFAULT_SEED};

// Tolerances.
const QUANT_EPS_MAX: f64 = 0.005; // percent
const PORTFOLIO_REF_REL: f64 = 0.005;
const PORTFOLIO_ORACLE_REL: f64 = 0.001;
const MC_SEEDS: u64 = 50;
const MC_COVERAGE_MIN: usize = 43;
const MC_PATHS: usize = 1000;
const ZADOR_SLOPE: (f64, f64) = (-2.2, -1.8);
const ZADOR_CONST_REL: f64 = 0.15;
const ROW_SUM_TOL: f64 = 1e-8;
const CHAPMAN_TOL: f64 = 5e-6;
const CO_OCCUPANCY_PAIRS: usize = 1_000_000;
const CO_OCCUPANCY_SE: f64 = 3.0;
const CONVEX_SLACK: f64 = 1e-9;
const PUT_SLOPE_MAX: f64 = -1.5;

const SPOTS: [f64; 3] = [90.0, 100.0, 110.0];
const VOLS: [f64; 3] = [0.15, 0.25, 0.30];
const RATE: f64 = 0.03;
/// Printed fifth decimals differ from a 30-digit evaluation by up to
/// 1.4e-5, so cells are compared to at most 4 decimals.
const MAX_DECIMALS: usize = 4;

/// Reference analytic EE (9 buckets) then EPE, as printed, per single-call
/// case in `SPOTS × VOLS` order. The ITM 15% column has rows 3w to 9m
/// misprinted; those rows are taken from the quantization column of the
/// same table, which agrees with it elsewhere.
const REFERENCE_ANALYTIC: [[&str; 10]; 9] = [
    [
        "2.7600", "2.7616", "2.7632", "2.7649", "2.7723", "2.7792", "2.8001", "2.8212", "2.8424",
        "2.8088",
    ],
    [
        "6.2016", "6.2052", "6.2088", "6.2124", "6.2291", "6.2447", "6.2917", "6.3391", "6.3868",
        "6.3113",
    ],
    [
        "7.9807", "7.9853", "7.9899", "7.9945", "8.0160", "8.0361", "8.0966", "8.1575", "8.2189",
        "8.1218",
    ],
    [
        "7.48940", "7.49372", "7.49804", "7.50237", "7.52260", "7.54143", "7.59820", "7.65540",
        "7.7130", "7.6218",
    ],
    [
        "11.3550", "11.3616", "11.3681", "11.3747", "11.4054", "11.4339", "11.5200", "11.6067",
        "11.6941", "11.5558",
    ],
    [
        "13.291", "13.298", "13.306", "13.314", "13.349", "13.383", "13.484", "13.585", "13.687",
        "13.526",
    ],
    [
        "14.711", "14.719", "14.727", "14.736", "14.775", "14.812", "14.924", "15.036", "15.149",
        "14.970",
    ],
    [
        "18.0448", "18.0551", "18.0656", "18.0760", "18.1248", "18.1701", "18.3069", "18.4447",
        "18.5836", "18.3638",
    ],
    [
        "19.884", "19.896", "19.907", "19.918", "19.972", "20.022", "20.173", "20.325", "20.478",
        "20.236",
    ],
];

/// Reference quantized EPE of the netting set per case, `SPOTS × VOLS` order.
const REFERENCE_PORTFOLIO_EPE: [f64; 9] = [
    0.7033, 2.1505, 3.1325, 2.5954, 5.0099, 6.3811, 6.9310, 9.8666, 11.4160,
];

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "analytic benchmark reproduction",
            budget: Some(Duration::from_secs(1)),
            run: analytic_reproduction,
        },
        Criterion {
            name: "single-option quantization accuracy",
            budget: Some(Duration::from_secs(10)),
            run: quantization_accuracy,
        },
        Criterion {
            name: "netting-set reproduction",
            budget: Some(Duration::from_secs(130)),
            run: portfolio_reproduction,
        },
        Criterion {
            name: "monte carlo coverage",
            budget: None,
            run: mc_coverage,
        },
        Criterion {
            name: "zador rate",
            budget: Some(Duration::from_secs(30)),
            run: zador_rate,
        },
        Criterion {
            name: "transition matrices",
            budget: None,
            run: transition_matrices,
        },
        Criterion {
            name: "convex lower bound",
            budget: None,
            run: convex_lower_bound,
        },
        Criterion {
            name: "bought-put EPE rate",
            budget: None,
            run: put_rate,
        },
        Criterion {
            name: "determinism across runs and jobs",
            budget: None,
            run: determinism,
        },
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if let (Ok(msg), Some(budget)) = (&outcome, c.budget) {
            if elapsed > budget {
                outcome = Err(format!("{msg}; over the {budget:?} budget"));
            }
        }
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("[{tag}] {}. {} ({:.2?}): {msg}", i + 1, c.name, elapsed);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cases() -> impl Iterator<Item = (f64, f64)> {
    SPOTS
        .into_iter()
        .flat_map(|s| VOLS.into_iter().map(move |v| (s, v)))
}

fn call_task(spot: f64, vol: f64) -> ExposureTask {
    let call = OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0).unwrap();
    let market = MarketParams::new(spot, RATE, vol).unwrap();
    ExposureTask::new(Target::Option(call), market, BucketGrid::default()).unwrap()
}

fn netting_set() -> Portfolio {
    Portfolio::load(&repo_root().join("portfolios/netting10.txt")).unwrap()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn grid(n: usize) -> QuantizerGrid {
    build_grid(n, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap()
}

fn check<E: std::fmt::Display>(r: Result<f64, E>) -> Result<f64, String> {
    r.map_err(|e| e.to_string())
}

fn pct(est: f64, bench: f64) -> f64 {
    100.0 * (est - bench) / bench
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn analytic_reproduction() -> Outcome {
    let mut worst = 0.0_f64;
    for ((spot, vol), row) in cases().zip(REFERENCE_ANALYTIC) {
        let p = ee_analytic(&call_task(spot, vol)).map_err(|e| e.to_string())?;
        let ours = p.ee.iter().copied().chain([p.epe]);
        for ((x, printed), label) in ours.zip(row).zip(bucket_labels()) {
            let decimals = printed
                .split('.')
                .nth(1)
                .map_or(0, str::len)
                .min(MAX_DECIMALS);
            let unit = 10f64.powi(-(decimals as i32));
            let value: f64 = printed.parse().unwrap();
            let err = (x - value).abs() / unit;
            if err > 1.0 {
                return Err(format!("S={spot} σ={vol} {label}: {x:.6} vs {printed}"));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!(
        "90 cells, worst deviation {worst:.2} units of the last printed digit"
    ))
}

fn bucket_labels() -> impl Iterator<Item = String> {
    BucketGrid::default()
        .labels()
        .to_vec()
        .into_iter()
        .chain(["EPE".to_string()])
}

fn quantization_accuracy() -> Outcome {
    let g = grid(1000);
    let mut worst = 0.0_f64;
    for (spot, vol) in cases() {
        let task = call_task(spot, vol);
        let a = ee_analytic(&task).map_err(|e| e.to_string())?;
        let q = ee_quantized_djs(&task, std::slice::from_ref(&g)).map_err(|e| e.to_string())?;
        for (x, y) in q.ee.iter().chain([&q.epe]).zip(a.ee.iter().chain([&a.epe])) {
            worst = worst.max(pct(*x, *y).abs());
        }
    }
    let msg = format!("max |ε| = {worst:.2e}% over 9 cases × 10 cells");
    if worst <= QUANT_EPS_MAX {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn portfolio_reproduction() -> Outcome {
    let book = netting_set();
    let t0 = Instant::now();
    let g = grid(1000);
    let tasks: Vec<ExposureTask> = cases()
        .map(|(s, v)| {
            let m = MarketParams::new(s, RATE, v).unwrap();
            ExposureTask::new(Target::Portfolio(book.clone()), m, BucketGrid::default()).unwrap()
        })
        .collect();
    let quantized: Vec<ExposureProfile> = tasks
        .iter()
        .map(|t| ee_quantized_djs(t, std::slice::from_ref(&g)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let t_quant = t0.elapsed();
    let t1 = Instant::now();
    let oracle: Vec<ExposureProfile> = tasks
        .iter()
        .map(|t| ee_sobol(t, 1_000_000))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let t_oracle = t1.elapsed();
    let (mut worst_ref, mut worst_oracle) = (0.0_f64, 0.0_f64);
    for (((q, o), r), (s, v)) in quantized
        .iter()
        .zip(&oracle)
        .zip(REFERENCE_PORTFOLIO_EPE)
        .zip(cases())
    {
        let dr = (q.epe - r).abs() / r;
        let d_o = (q.epe - o.epe).abs() / o.epe;
        if dr > PORTFOLIO_REF_REL || d_o > PORTFOLIO_ORACLE_REL {
            return Err(format!(
                "S={s} σ={v}: EPE {:.5} vs reference {r} and Sobol oracle {:.5}",
                q.epe, o.epe
            ));
        }
        worst_ref = worst_ref.max(dr);
        worst_oracle = worst_oracle.max(d_o);
    }
    let msg = format!(
        "worst EPE deviation {:.4}% from reference, {:.4}% from Sobol-10⁶; quantization {t_quant:.2?}, oracle {t_oracle:.2?}",
        100.0 * worst_ref,
        100.0 * worst_oracle
    );
    if t_quant > Duration::from_secs(10) || t_oracle > Duration::from_secs(120) {
        return Err(format!("{msg}; over budget"));
    }
    Ok(msg)
}

fn mc_coverage() -> Outcome {
    let task = call_task(100.0, 0.25);
    let exact = ee_analytic(&task).map_err(|e| e.to_string())?.epe;
    let mut covered = 0;
    for seed in 0..MC_SEEDS {
        let p = ee_mc(&task, MC_PATHS, SimulationMode::Pds, seed).map_err(|e| e.to_string())?;
        let se = p
            .epe_stderr
            .ok_or("Monte Carlo profile without standard error")?;
        if (p.epe - exact).abs() <= 2.0 * se {
            covered += 1;
        }
    }
    let pinned =
        ee_mc(&task, MC_PATHS, SimulationMode::Pds, DEFAULT_SEED).map_err(|e| e.to_string())?;
    let se = pinned.epe_stderr.unwrap();
    let z = (pinned.epe - 11.5558) / se;
    let msg = format!(
        "{covered}/{MC_SEEDS} runs cover the analytic EPE at ±2 SE; pinned seed EPE {:.4} is {z:+.2} SE from 11.5558",
        pinned.epe
    );
    if covered >= MC_COVERAGE_MIN && z.abs() <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// `(1/12)·(∫ φ^{1/3})³` by the trapezoid rule.
fn zador_constant() -> f64 {
    let h = 1e-3;
    let s: f64 = (-40_000..=40_000)
        .map(|i| {
            let x = i as f64 * h;
            ((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).cbrt()
        })
        .sum::<f64>()
        * h;
    s.powi(3) / 12.0
}

fn zador_rate() -> Outcome {
    let ns = [50.0, 100.0, 200.0, 400.0];
    let d: Vec<f64> = ns.iter().map(|&n| grid(n as usize).distortion()).collect();
    let slope = log_slope(&ns, &d);
    let scaled = 400.0 * 400.0 * d[3];
    let limit = zador_constant();
    let rel = (scaled - limit).abs() / limit;
    let msg = format!(
        "slope {slope:.4}; N²·D(400) = {scaled:.4} vs limit {limit:.4} ({:.2}%)",
        100.0 * rel
    );
    if (ZADOR_SLOPE.0..=ZADOR_SLOPE.1).contains(&slope) && rel <= ZADOR_CONST_REL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn transition_matrices() -> Outcome {
    let buckets = BucketGrid::default();
    let times = buckets.times();
    let tree = QuantizationTree::build(times, vec![grid(100); times.len()], None)
        .map_err(|e| e.to_string())?;
    let defect = tree
        .transitions()
        .iter()
        .map(|t| t.max_row_defect())
        .fold(0.0, f64::max);
    let chapman = tree.max_chapman_discrepancy().map_err(|e| e.to_string())?;
    if defect > ROW_SUM_TOL || chapman > CHAPMAN_TOL {
        return Err(format!(
            "row defect {defect:.2e}, Chapman–Kolmogorov {chapman:.2e}"
        ));
    }

    // Co-occupancy oracle on the widest step (3m → 6m) with 10-point grids.
    let k = 5;
    let (t0, t1) = (times[k], times[k + 1]);
    let g = grid(10);
    let small = QuantizationTree::build(times, vec![g.clone(); times.len()], None)
        .map_err(|e| e.to_string())?;
    let pi = &small.transitions()[k];
    let cells = g.cells();
    let mut counts = [[0usize; 10]; 10];
    let mut stream = NormalStream::pseudo(DEFAULT_SEED, 2).map_err(|e| e.to_string())?;
    let draws = stream
        .draw_normals(CO_OCCUPANCY_PAIRS)
        .map_err(|e| e.to_string())?;
    for row in draws.iter_rows() {
        let z0 = row[0];
        let z1 = (t0.sqrt() * z0 + (t1 - t0).sqrt() * row[1]) / t1.sqrt();
        counts[cells.locate(z0)][cells.locate(z1)] += 1;
    }
    let mut worst = 0.0_f64;
    for (i, row) in counts.iter().enumerate() {
        let n_i: usize = row.iter().sum();
        for (j, &c) in row.iter().enumerate() {
            let p = pi.get(i, j);
            let se = (p * (1.0 - p) / n_i as f64).sqrt();
            let dev = (c as f64 / n_i as f64 - p).abs();
            let z = if se > 0.0 {
                dev / se
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if z > CO_OCCUPANCY_SE {
                return Err(format!(
                    "π[{i}][{j}] = {p:.6} vs co-occupancy {:.6} ({z:.2} SE)",
                    c as f64 / n_i as f64
                ));
            }
            worst = worst.max(z);
        }
    }
    Ok(format!(
        "N=100 row defect {defect:.1e}, Chapman–Kolmogorov {chapman:.1e}; N=10 worst entry {worst:.2} SE"
    ))
}

fn convex_lower_bound() -> Outcome {
    let g = grid(1000);
    let mut margin = f64::INFINITY;
    for (spot, vol) in cases() {
        let task = call_task(spot, vol);
        let a = ee_analytic(&task).map_err(|e| e.to_string())?;
        let q = ee_quantized_djs(&task, std::slice::from_ref(&g)).map_err(|e| e.to_string())?;
        for (k, (x, y)) in q.ee.iter().zip(&a.ee).enumerate() {
            if *x > y + CONVEX_SLACK {
                return Err(format!("S={spot} σ={vol} bucket {k}: {x} > {y}"));
            }
            margin = margin.min(y - x);
        }
    }
    Ok(format!(
        "EE^Q ≤ EE^A in all 81 buckets; smallest gap {margin:.2e}"
    ))
}

fn put_rate() -> Outcome {
    let put = OptionSpec::new(OptionKind::Put, Side::Buy, 100.0, 1.0).unwrap();
    let market = MarketParams::new(100.0, RATE, 0.25).unwrap();
    let task = ExposureTask::new(Target::Option(put), market, BucketGrid::default()).unwrap();
    let exact = check(ee_analytic(&task).map(|p| p.epe))?;
    let ns = [25.0, 50.0, 100.0, 200.0, 400.0];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            check(ee_quantized_djs(&task, &[grid(n as usize)]).map(|p| (p.epe - exact).abs()))
        })
        .collect::<Result<_, _>>()?;
    let slope = log_slope(&ns, &errs);
    let msg = format!("slope {slope:.3}; errors {:.2e} → {:.2e}", errs[0], errs[4]);
    if slope <= PUT_SLOPE_MAX {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .unwrap()
        .install(f)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let configs = repo_root().join("configs");
    let mut single =
        RunConfig::load(&configs.join("single_call.json")).map_err(|e| e.to_string())?;
    single.grid_cache = None;
    let mut book = RunConfig::load(&configs.join("netting10.json")).map_err(|e| e.to_string())?;
    book.grid_cache = None;
    book.methods.benchmark = Some(SobolConfig { n: 50_000 });

    let mut runs = Vec::new();
    for jobs in [1, 4, 4, 1] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let ov = Overrides {
            out: Some(dir.path().to_path_buf()),
            ..Overrides::default()
        };
        let (a, b) = run_in_pool(jobs, || {
            (cmd_exposure(&single, &ov), cmd_portfolio(&book, &ov))
        });
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        if !a.ok() || !b.ok() {
            return Err(format!(
                "method failures: {:?} {:?}",
                a.failures, b.failures
            ));
        }
        runs.push((jobs, snapshot(dir.path())));
    }
    let (_, first) = &runs[0];
    for (jobs, files) in &runs[1..] {
        if files != first {
            return Err(format!(
                "output with --jobs {jobs} differs from the first run"
            ));
        }
    }
    Ok(format!(
        "{} CSV files identical over 4 runs with 1 and 4 workers",
        first.len()
    ))
}
