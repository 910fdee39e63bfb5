//! Experiment runner behind the `ccr-quant` binary.
//!
//! Each command reads a [`RunConfig`], evaluates every `(spot, vol)` case
//! on a worker pool, and writes CSV tables in a fixed order, so output
//! bytes depend only on the config and seeds.

mod config;
mod table;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

pub use config::{
    McConfig, MethodsConfig, NumericalConfig, QuantizationConfig, RunConfig, SobolConfig,
    TargetConfig, Variant, DEFAULT_BENCHMARK_POINTS,
};
pub use table::Table;

use crate::error::{Error, Result};
use crate::exposure::{
    ee_analytic, ee_mc, ee_numerical, ee_quantized_djs, ee_quantized_pds, ee_quantized_tree,
    ee_sobol, error_metrics, ExposureProfile, ExposureTask, Target,
};
use crate::market::{BucketGrid, MarketParams};
use crate::quantizer::{
    build_grid, build_vector_quantizer, LloydConfig, QuantizationTree, QuantizerGrid,
    VectorQuantizer, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};

#[derive(Debug, Parser)]
#[command(
    name = "ccr-quant",
    version,
    about = "Counterparty exposure profiles by optimal quantization"
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an optimal N(0,1) grid and write it to a file.
    Grid {
        /// Number of points.
        #[arg(short = 'n', long)]
        n: usize,
        /// Stationarity tolerance.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-option exposure tables, one CSV per (spot, vol).
    Exposure(RunArgs),
    /// Netting-set exposure tables against a Sobol reference.
    Portfolio(RunArgs),
    /// Long-format rows over the whole (spot, vol) sweep.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed (overrides `methods.mc.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Discount each EE_k by e^{-r t_k}.
    #[arg(long)]
    pub discount: bool,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub discount: bool,
}

impl From<&RunArgs> for Overrides {
    fn from(a: &RunArgs) -> Self {
        Self {
            out: a.out.clone(),
            seed: a.seed,
            discount: a.discount,
        }
    }
}

/// Files written and methods that failed.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    let outcome = pool.install(|| dispatch(&cli.command));
    match outcome {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            for msg in &report.failures {
                eprintln!("failed: {msg}");
            }
            if report.ok() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: &Command) -> Result<Report> {
    match command {
        Command::Grid {
            n,
            tol,
            max_iter,
            out,
        } => {
            let g = cmd_grid(*n, *tol, *max_iter, out)?;
            println!(
                "N={} distortion={:e} residual={:e}",
                g.size(),
                g.distortion(),
                g.stationarity_residual()
            );
            Ok(Report {
                files: vec![out.clone()],
                failures: Vec::new(),
            })
        }
        Command::Exposure(a) => cmd_exposure(&RunConfig::load(&a.config)?, &a.into()),
        Command::Portfolio(a) => cmd_portfolio(&RunConfig::load(&a.config)?, &a.into()),
        Command::Sweep(a) => cmd_sweep(&RunConfig::load(&a.config)?, &a.into()),
    }
}

/// Builds an `n`-point grid and writes it to `out`. An existing file with
/// identical content is left untouched.
pub fn cmd_grid(n: usize, tol: f64, max_iter: usize, out: &Path) -> Result<QuantizerGrid> {
    let grid = build_grid(n, tol, max_iter)?;
    write_if_changed(out, &grid.to_text())?;
    Ok(grid)
}

fn write_if_changed(path: &Path, content: &str) -> Result<()> {
    if std::fs::read_to_string(path).is_ok_and(|old| old == content) {
        return Ok(());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Returns the grid of size `n`, from `cache` when a valid file is there,
/// otherwise built and stored.
pub fn cached_grid(cache: Option<&Path>, n: usize) -> Result<QuantizerGrid> {
    let Some(dir) = cache else {
        return build_grid(n, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER);
    };
    let path = dir.join(format!("grid_N{n}.txt"));
    if let Ok(g) = QuantizerGrid::load(&path) {
        if g.size() == n {
            return Ok(g);
        }
    }
    let g = build_grid(n, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
    write_if_changed(&path, &g.to_text())?;
    Ok(g)
}

/// Market-independent quantization inputs, built once per run.
enum Quantization {
    Djs(QuantizerGrid),
    Tree(QuantizationTree),
    Pds(VectorQuantizer),
}

impl Quantization {
    fn prepare(cfg: &RunConfig, q: &QuantizationConfig, buckets: &BucketGrid) -> Result<Self> {
        let cache = cfg.grid_cache.as_deref();
        Ok(match q.variant {
            Variant::Djs => Quantization::Djs(cached_grid(cache, q.n)?),
            Variant::Tree => {
                let g = cached_grid(cache, q.n)?;
                Quantization::Tree(QuantizationTree::build(
                    buckets.times(),
                    vec![g; buckets.len()],
                    q.prune_z,
                )?)
            }
            Variant::Pds => Quantization::Pds(build_vector_quantizer(
                q.n,
                buckets.len(),
                LloydConfig {
                    samples: q.samples,
                    iterations: q.iterations,
                    ..LloydConfig::default()
                },
            )?),
        })
    }

    fn estimate(&self, task: &ExposureTask) -> Result<ExposureProfile> {
        match self {
            Quantization::Djs(g) => ee_quantized_djs(task, std::slice::from_ref(g)),
            Quantization::Tree(t) => ee_quantized_tree(task, t),
            Quantization::Pds(v) => ee_quantized_pds(task, v),
        }
    }
}

/// Estimator columns in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Analytic,
    Numerical,
    Quantization,
    Mc,
    Sobol,
}

impl Column {
    fn name(self) -> &'static str {
        match self {
            Column::Analytic => "analytic",
            Column::Numerical => "numerical",
            Column::Quantization => "quantization",
            Column::Mc => "mc",
            Column::Sobol => "sobol",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reference {
    Analytic,
    Sobol(usize),
}

struct Plan<'a> {
    cfg: &'a RunConfig,
    target: Target,
    buckets: BucketGrid,
    quantization: Option<Quantization>,
    seed: Option<u64>,
    discount: bool,
    reference: Reference,
    columns: Vec<Column>,
}

struct CaseResult {
    spot: f64,
    vol: f64,
    reference: Result<ExposureProfile>,
    estimates: Vec<(Column, Result<ExposureProfile>)>,
}

impl<'a> Plan<'a> {
    fn new(
        cfg: &'a RunConfig,
        ov: &Overrides,
        reference: Reference,
        with_analytic: bool,
    ) -> Result<Self> {
        let buckets = cfg.bucket_grid()?;
        let quantization = cfg
            .methods
            .quantization
            .as_ref()
            .map(|q| Quantization::prepare(cfg, q, &buckets))
            .transpose()?;
        let m = &cfg.methods;
        let mut columns = Vec::new();
        if with_analytic && m.analytic {
            columns.push(Column::Analytic);
        }
        for (on, c) in [
            (m.numerical.is_some(), Column::Numerical),
            (m.quantization.is_some(), Column::Quantization),
            (m.mc.is_some(), Column::Mc),
            (m.sobol.is_some(), Column::Sobol),
        ] {
            if on {
                columns.push(c);
            }
        }
        Ok(Self {
            cfg,
            target: cfg.load_target()?,
            buckets,
            quantization,
            seed: ov.seed,
            discount: ov.discount || cfg.discount,
            reference,
            columns,
        })
    }

    fn task(&self, spot: f64, vol: f64) -> Result<ExposureTask> {
        let market = MarketParams::new(spot, self.cfg.rate, vol)?;
        Ok(
            ExposureTask::new(self.target.clone(), market, self.buckets.clone())?
                .with_collateral(self.cfg.collateral)?
                .with_discount(self.discount),
        )
    }

    fn estimate(&self, task: &ExposureTask, column: Column) -> Result<ExposureProfile> {
        let m = &self.cfg.methods;
        match column {
            Column::Analytic => ee_analytic(task),
            Column::Numerical => ee_numerical(task, m.numerical.expect("enabled").rule()),
            Column::Quantization => self.quantization.as_ref().expect("prepared").estimate(task),
            Column::Mc => {
                let mc = m.mc.expect("enabled");
                ee_mc(task, mc.n, mc.mode, self.seed.unwrap_or(mc.seed))
            }
            Column::Sobol => ee_sobol(task, m.sobol.expect("enabled").n),
        }
    }

    fn cases(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &s in &self.cfg.spots {
            for &v in &self.cfg.vols {
                out.push((s, v));
            }
        }
        out
    }

    fn evaluate(&self) -> Vec<CaseResult> {
        self.cases()
            .into_par_iter()
            .map(|(spot, vol)| match self.task(spot, vol) {
                Ok(task) => {
                    let reference = match self.reference {
                        Reference::Analytic => ee_analytic(&task),
                        Reference::Sobol(n) => ee_sobol(&task, n),
                    };
                    let estimates = self
                        .columns
                        .par_iter()
                        .map(|&c| (c, self.estimate(&task, c)))
                        .collect();
                    CaseResult {
                        spot,
                        vol,
                        reference,
                        estimates,
                    }
                }
                Err(e) => CaseResult {
                    spot,
                    vol,
                    reference: Err(Error::Config(e.to_string())),
                    estimates: self
                        .columns
                        .iter()
                        .map(|&c| (c, Err(Error::Config(e.to_string()))))
                        .collect(),
                },
            })
            .collect()
    }

    fn out_dir(&self, ov: &Overrides, default: &str) -> PathBuf {
        ov.out
            .clone()
            .or_else(|| self.cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from(default))
    }
}

fn case_stem(prefix: &str, spot: f64, vol: f64) -> String {
    format!("{prefix}_S{spot}_V{vol}")
}

fn record_failures(case: &CaseResult, reference_name: &str, report: &mut Report) {
    let tag = format!("S={} vol={}", case.spot, case.vol);
    if let Err(e) = &case.reference {
        report.failures.push(format!("{tag} {reference_name}: {e}"));
    }
    for (c, r) in &case.estimates {
        if let Err(e) = r {
            report.failures.push(format!("{tag} {}: {e}", c.name()));
        }
    }
}

/// One table per case: reference column, then for each estimator its EE
/// and either ε against the reference or, for Monte Carlo, the RSD.
fn case_table(case: &CaseResult, reference_name: &str, buckets: &BucketGrid) -> Table {
    let mut header = vec!["bucket".to_string(), format!("{reference_name}_ee")];
    for (c, _) in &case.estimates {
        header.push(format!("{}_ee", c.name()));
        if *c != Column::Analytic {
            header.push(format!(
                "{}_{}",
                c.name(),
                if *c == Column::Mc { "rsd" } else { "eps" }
            ));
        }
    }
    let mut table = Table::new(header);
    let k_count = buckets.len();
    let reference = case.reference.as_ref().ok();
    for row in 0..=k_count {
        let label = if row < k_count {
            buckets.labels()[row].clone()
        } else {
            "EPE".to_string()
        };
        let pick = |p: &ExposureProfile| if row < k_count { p.ee[row] } else { p.epe };
        let mut cells = vec![
            table::Cell::Text(label),
            table::Cell::opt(reference.map(pick)),
        ];
        for (c, est) in &case.estimates {
            let est = est.as_ref().ok();
            cells.push(table::Cell::opt(est.map(pick)));
            if *c == Column::Analytic {
                continue;
            }
            let metric = est.and_then(|e| {
                if *c == Column::Mc {
                    let m = error_metrics(e, e).ok()?;
                    if row < k_count {
                        m.rsd.map(|r| r[row])
                    } else {
                        m.epe_rsd
                    }
                } else {
                    let m = error_metrics(e, reference?).ok()?;
                    Some(if row < k_count { m.eps[row] } else { m.epe_eps })
                }
            });
            cells.push(table::Cell::opt(metric));
        }
        table.push(cells);
    }
    table
}

fn write_tables(plan: &Plan, ov: &Overrides, prefix: &str, reference_name: &str) -> Result<Report> {
    let dir = plan.out_dir(ov, "out");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut report = Report::default();
    for case in plan.evaluate() {
        record_failures(&case, reference_name, &mut report);
        let table = case_table(&case, reference_name, &plan.buckets);
        let stem = case_stem(prefix, case.spot, case.vol);
        for (path, text) in [
            (dir.join(format!("{stem}.csv")), table.render(false)),
            (dir.join(format!("{stem}-raw.csv")), table.render(true)),
        ] {
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            report.files.push(path);
        }
    }
    Ok(report)
}

/// Single-option tables: analytic reference, then numerical, quantization,
/// Monte Carlo and Sobol columns as configured.
pub fn cmd_exposure(cfg: &RunConfig, ov: &Overrides) -> Result<Report> {
    let plan = Plan::new(cfg, ov, Reference::Analytic, false)?;
    write_tables(&plan, ov, "exposure", "analytic")
}

/// Netting-set tables against a high-count Sobol reference
/// (`methods.benchmark.N`, one million points by default).
pub fn cmd_portfolio(cfg: &RunConfig, ov: &Overrides) -> Result<Report> {
    let plan = Plan::new(cfg, ov, Reference::Sobol(cfg.benchmark_points()), true)?;
    write_tables(&plan, ov, "portfolio", "benchmark")
}

/// Long-format `spot,vol,method,bucket,ee,eps,rsd` rows for every case and
/// configured method. The reference is analytic for a single option and
/// the Sobol benchmark for a netting set.
pub fn cmd_sweep(cfg: &RunConfig, ov: &Overrides) -> Result<Report> {
    let reference = match cfg.target {
        TargetConfig::Option(_) => Reference::Analytic,
        TargetConfig::Portfolio(_) => Reference::Sobol(cfg.benchmark_points()),
    };
    let plan = Plan::new(cfg, ov, reference, true)?;
    let reference_name = match reference {
        Reference::Analytic => "analytic",
        Reference::Sobol(_) => "benchmark",
    };
    let mut table = Table::new(
        ["spot", "vol", "method", "bucket", "ee", "eps", "rsd"]
            .map(String::from)
            .to_vec(),
    );
    let mut report = Report::default();
    for case in plan.evaluate() {
        record_failures(&case, reference_name, &mut report);
        for (c, est) in &case.estimates {
            let est = est.as_ref().ok();
            let metrics = est.and_then(|e| error_metrics(e, case.reference.as_ref().ok()?).ok());
            let rsd = est
                .and_then(|e| error_metrics(e, e).ok())
                .and_then(|m| m.rsd);
            for k in 0..plan.buckets.len() {
                table.push(vec![
                    table::Cell::Key(case.spot),
                    table::Cell::Key(case.vol),
                    table::Cell::Text(c.name().to_string()),
                    table::Cell::Text(plan.buckets.labels()[k].clone()),
                    table::Cell::opt(est.map(|e| e.ee[k])),
                    table::Cell::opt(metrics.as_ref().map(|m| m.eps[k])),
                    rsd.as_ref()
                        .map_or(table::Cell::Empty, |r| table::Cell::Number(r[k])),
                ]);
            }
        }
    }
    let dir = plan.out_dir(ov, "out");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (name, raw) in [("sweep.csv", false), ("sweep-raw.csv", true)] {
        let path = dir.join(name);
        std::fs::write(&path, table.render(raw)).map_err(|e| Error::io(&path, e))?;
        report.files.push(path);
    }
    Ok(report)
}
