use rayon::prelude::*;

use super::{BucketExposure, ExposureProfile, ExposureTask, Method, Target};
use crate::error::{Error, Result};
use crate::gaussnum::normal_pdf;
use crate::market::bs_price;
use crate::quantizer::{QuantizationTree, QuantizerGrid, VectorQuantizer};
use crate::sampling::NormalStream;

/// Paths per simulation block. Block `b` always draws from the same
/// substream (or Sobol index range), so results do not depend on how many
/// workers process the blocks.
pub const MC_BLOCK: usize = 4096;

/// How Monte Carlo states at successive buckets are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMode {
    /// Whole paths built from independent Brownian increments.
    Pds,
    /// Each bucket's state drawn directly from its marginal law.
    Djs,
}

/// Closed-form benchmark `EE_k = MtM_0·e^{r·t_k}` for a bought option.
///
/// A sold option never carries exposure, so its profile is identically
/// zero. Netting sets and collateralized targets have no closed form.
pub fn ee_analytic(task: &ExposureTask) -> Result<ExposureProfile> {
    if let Target::Portfolio(_) = task.target {
        return Err(Error::NotApplicable(
            "no closed-form expected exposure for a netting set".into(),
        ));
    }
    if task.collateral != 0.0 {
        return Err(Error::NotApplicable(
            "no closed-form expected exposure under collateral".into(),
        ));
    }
    let m = &task.market;
    let ee = match task.is_single_buy() {
        Some(o) => {
            let mtm0 = o.quantity * bs_price(o.kind, m.spot, o.strike, m.rate, m.vol, o.maturity)?;
            task.buckets
                .times()
                .iter()
                .map(|&t| {
                    if task.discount {
                        mtm0
                    } else {
                        mtm0 * (m.rate * t).exp()
                    }
                })
                .collect()
        }
        None => vec![0.0; task.buckets.len()],
    };
    ExposureProfile::from_ee(task.buckets.clone(), ee, Method::Analytic)
}

fn per_bucket<F>(task: &ExposureTask, method: Method, f: F) -> Result<ExposureProfile>
where
    F: Fn(usize, &BucketExposure) -> Result<f64> + Sync,
{
    let exposures = task.all_bucket_exposures()?;
    let ee = exposures
        .par_iter()
        .enumerate()
        .map(|(k, e)| f(k, e))
        .collect::<Result<Vec<_>>>()?;
    ExposureProfile::from_ee(task.buckets.clone(), ee, method)
}

/// Quantized expectation per bucket on the marginal grids: `grids[k]`
/// quantizes `W_{t_k}/√t_k`. A single grid is reused for every bucket.
pub fn ee_quantized_djs(task: &ExposureTask, grids: &[QuantizerGrid]) -> Result<ExposureProfile> {
    check_grid_count(grids.len(), task.buckets.len())?;
    per_bucket(task, Method::Quantization, |k, e| {
        let g = &grids[if grids.len() == 1 { 0 } else { k }];
        Ok(g.expectation(|x| e.at_z(x)))
    })
}

fn check_grid_count(n: usize, k: usize) -> Result<()> {
    if n == 1 || n == k {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{n} grids for {k} buckets (need 1 or {k})"
        )))
    }
}

/// Quantization-tree estimator: node weights are propagated through the
/// transition matrices rather than taken from each grid's own marginals.
pub fn ee_quantized_tree(task: &ExposureTask, tree: &QuantizationTree) -> Result<ExposureProfile> {
    let times = task.buckets.times();
    if tree.times().len() != times.len()
        || tree
            .times()
            .iter()
            .zip(times)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::Config(
            "quantization tree times differ from the bucket grid".into(),
        ));
    }
    let weights = tree.marginals()?;
    let grids = tree.grids();
    per_bucket(task, Method::QuantizationTree, |k, e| {
        Ok(grids[k]
            .points()
            .iter()
            .zip(&weights[k])
            .map(|(&x, &q)| e.at_z(x) * q)
            .sum())
    })
}

/// Path-wise quantized estimator: each point of a `K`-dimensional quantizer
/// of `N(0, I_K)` is read as the normalized Brownian increments over the
/// `K` bucket intervals.
pub fn ee_quantized_pds(task: &ExposureTask, vq: &VectorQuantizer) -> Result<ExposureProfile> {
    let k_count = task.buckets.len();
    if vq.dim() != k_count {
        return Err(Error::Config(format!(
            "path quantizer has dimension {} but there are {k_count} buckets",
            vq.dim()
        )));
    }
    let coords: Vec<Vec<f64>> = (0..vq.size())
        .map(|i| {
            let mut z = vec![0.0; k_count];
            path_coordinates(
                vq.point(i),
                task.buckets.deltas(),
                task.buckets.times(),
                &mut z,
            );
            z
        })
        .collect();
    per_bucket(task, Method::QuantizationPds, |k, e| {
        Ok(coords
            .iter()
            .zip(vq.probs())
            .map(|(z, &w)| e.at_z(z[k]) * w)
            .sum())
    })
}

/// Maps increments `ξ` to `z_k = Σ_{j≤k} ξ_j·√Δ_j / √t_k`.
#[inline]
fn path_coordinates(xi: &[f64], deltas: &[f64], times: &[f64], z: &mut [f64]) {
    let mut w = 0.0;
    for k in 0..xi.len() {
        w += xi[k] * deltas[k].sqrt();
        z[k] = w / times[k].sqrt();
    }
}

/// Midpoint rule for `∫ g(z)·φ(z) dz` on `[−half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleRule {
    pub nodes: usize,
    pub half_width: f64,
}

impl RectangleRule {
    pub const DEFAULT_HALF_WIDTH: f64 = 4.0;

    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            half_width: Self::DEFAULT_HALF_WIDTH,
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let h = 2.0 * self.half_width / self.nodes as f64;
        (0..self.nodes)
            .map(|j| {
                let z = -self.half_width + (j as f64 + 0.5) * h;
                g(z) * normal_pdf(z)
            })
            .sum::<f64>()
            * h
    }
}

/// Deterministic integration of each bucket's exposure over the normal
/// coordinate with a rectangle rule.
pub fn ee_numerical(task: &ExposureTask, rule: RectangleRule) -> Result<ExposureProfile> {
    if rule.nodes == 0 || !(rule.half_width > 0.0) {
        return Err(Error::Domain(
            "rectangle rule needs ≥ 1 node and a positive width".into(),
        ));
    }
    per_bucket(task, Method::Numerical, |_, e| {
        Ok(rule.integrate(|z| e.at_z(z)))
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn stderr(&self) -> f64 {
        (self.m2 / (self.n - 1.0)).sqrt() / self.n.sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Draws {
    Pseudo { seed: u64, mode: SimulationMode },
    Sobol,
}

impl Draws {
    fn stream(self, block: usize, dim: usize) -> Result<NormalStream> {
        match self {
            Draws::Pseudo { seed, .. } => NormalStream::pseudo_substream(seed, block as u64, dim),
            Draws::Sobol => NormalStream::sobol_from(dim, 1 + (block * MC_BLOCK) as u64),
        }
    }

    fn mode(self) -> SimulationMode {
        match self {
            Draws::Pseudo { mode, .. } => mode,
            Draws::Sobol => SimulationMode::Djs,
        }
    }
}

/// Runs `n` scenarios in fixed blocks, handing each block's bucket
/// coordinates (row-major, `K` per scenario) to `visit`. Block results are
/// returned in block order.
pub(crate) fn simulate_blocks<R, F>(
    task: &ExposureTask,
    n: usize,
    draws: Draws,
    visit: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&[f64]) -> R + Sync,
{
    let k_count = task.buckets.len();
    let blocks = n.div_ceil(MC_BLOCK);
    let deltas = task.buckets.deltas();
    let times = task.buckets.times();
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let rows = MC_BLOCK.min(n - b * MC_BLOCK);
            let mut stream = draws.stream(b, k_count)?;
            let mut z = stream.draw_normals(rows)?.into_data();
            if draws.mode() == SimulationMode::Pds {
                let mut out = vec![0.0; k_count];
                for row in z.chunks_exact_mut(k_count) {
                    path_coordinates(row, deltas, times, &mut out);
                    row.copy_from_slice(&out);
                }
            }
            Ok(visit(&z))
        })
        .collect()
}

struct BlockStats {
    buckets: Vec<Moments>,
    epe: Moments,
}

fn sampled_profile(
    task: &ExposureTask,
    n: usize,
    draws: Draws,
    method: Method,
) -> Result<ExposureProfile> {
    let exposures = task.all_bucket_exposures()?;
    let k_count = exposures.len();
    let weights: Vec<f64> = task
        .buckets
        .deltas()
        .iter()
        .map(|d| d / task.buckets.horizon())
        .collect();
    let blocks = simulate_blocks(task, n, draws, |z| {
        let mut stats = BlockStats {
            buckets: vec![Moments::default(); k_count],
            epe: Moments::default(),
        };
        for row in z.chunks_exact(k_count) {
            let mut path_epe = 0.0;
            for k in 0..k_count {
                let x = exposures[k].at_z(row[k]);
                stats.buckets[k].push(x);
                path_epe += x * weights[k];
            }
            stats.epe.push(path_epe);
        }
        stats
    })?;
    let mut total = BlockStats {
        buckets: vec![Moments::default(); k_count],
        epe: Moments::default(),
    };
    for b in &blocks {
        for (t, m) in total.buckets.iter_mut().zip(&b.buckets) {
            t.merge(m);
        }
        total.epe.merge(&b.epe);
    }
    let ee = total.buckets.iter().map(|m| m.mean).collect();
    let profile = ExposureProfile::from_ee(task.buckets.clone(), ee, method)?;
    if method == Method::Mc {
        let se = total.buckets.iter().map(Moments::stderr).collect();
        profile.with_stderr(se, total.epe.stderr())
    } else {
        Ok(profile)
    }
}

/// Monte Carlo estimate over `paths` scenarios. Standard errors are the
/// sample standard deviations over `√paths`; the EPE standard error uses
/// the per-path time averages.
pub fn ee_mc(
    task: &ExposureTask,
    paths: usize,
    mode: SimulationMode,
    seed: u64,
) -> Result<ExposureProfile> {
    if paths < 2 {
        return Err(Error::Domain("Monte Carlo needs at least 2 paths".into()));
    }
    sampled_profile(task, paths, Draws::Pseudo { seed, mode }, Method::Mc)
}

/// Quasi-Monte Carlo estimate with one Sobol coordinate per bucket.
pub fn ee_sobol(task: &ExposureTask, points: usize) -> Result<ExposureProfile> {
    if points == 0 {
        return Err(Error::Domain(
            "Sobol estimate needs at least 1 point".into(),
        ));
    }
    sampled_profile(task, points, Draws::Sobol, Method::Sobol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Portfolio, Side};
    use crate::quantizer::build_grid;
    use approx::assert_abs_diff_eq;

    fn task(kind: OptionKind, side: Side, spot: f64, vol: f64) -> ExposureTask {
        let o = OptionSpec::new(kind, side, 100.0, 1.0).unwrap();
        let m = MarketParams::new(spot, 0.03, vol).unwrap();
        ExposureTask::new(Target::Option(o), m, BucketGrid::default()).unwrap()
    }

    fn atm25() -> ExposureTask {
        task(OptionKind::Call, Side::Buy, 100.0, 0.25)
    }

    #[test]
    fn analytic_examples() {
        let p = ee_analytic(&task(OptionKind::Call, Side::Buy, 110.0, 0.15)).unwrap();
        assert_abs_diff_eq!(p.ee[8], 15.149, epsilon = 1e-3);
        assert_abs_diff_eq!(p.epe, 14.970, epsilon = 1e-3);
        assert_abs_diff_eq!(ee_analytic(&atm25()).unwrap().epe, 11.5558, epsilon = 1e-4);

        let mut flat = atm25();
        flat.market.rate = 0.0;
        let p = ee_analytic(&flat).unwrap();
        assert!(p.ee.iter().all(|&e| e == p.ee[0]));

        let sold = ee_analytic(&task(OptionKind::Put, Side::Sell, 100.0, 0.25)).unwrap();
        assert!(sold.ee.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn analytic_rejects_netting_sets_and_collateral() {
        let mut t = atm25();
        t.target = Target::Portfolio(Portfolio::default());
        assert!(matches!(ee_analytic(&t), Err(Error::NotApplicable(_))));
        let t = atm25().with_collateral(1.0).unwrap();
        assert!(matches!(ee_analytic(&t), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn discounting_removes_growth() {
        let t = atm25().with_discount(true);
        let a = ee_analytic(&t).unwrap();
        let q = ee_quantized_djs(&t, &[build_grid(200, 1e-10, 100_000).unwrap()]).unwrap();
        for k in 0..9 {
            assert_abs_diff_eq!(a.ee[k], a.ee[0], epsilon = 1e-12);
            assert!((q.ee[k] / a.ee[k] - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn single_point_grid_prices_the_median_path() {
        let t = atm25();
        let p = ee_quantized_djs(&t, &[build_grid(1, 1e-10, 10).unwrap()]).unwrap();
        for (k, &tk) in t.buckets.times().iter().enumerate() {
            let s = crate::market::underlying_at(&t.market, tk, 0.0);
            let v = bs_price(OptionKind::Call, s, 100.0, 0.03, 0.25, 1.0 - tk).unwrap();
            assert_abs_diff_eq!(p.ee[k], v, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantization_matches_analytic() {
        let t = atm25();
        let g = build_grid(1000, 1e-10, 100_000).unwrap();
        let q = ee_quantized_djs(&t, &[g]).unwrap();
        let a = ee_analytic(&t).unwrap();
        for k in 0..9 {
            assert!(q.ee[k] <= a.ee[k] + 1e-9);
            assert!((q.ee[k] / a.ee[k] - 1.0).abs() < 5e-6);
        }
    }

    #[test]
    fn sold_options_carry_no_exposure() {
        let g = [build_grid(50, 1e-10, 100_000).unwrap()];
        for kind in [OptionKind::Call, OptionKind::Put] {
            let t = task(kind, Side::Sell, 100.0, 0.25);
            assert!(ee_quantized_djs(&t, &g)
                .unwrap()
                .ee
                .iter()
                .all(|&e| e == 0.0));
            assert!(ee_mc(&t, 100, SimulationMode::Pds, 1)
                .unwrap()
                .ee
                .iter()
                .all(|&e| e == 0.0));
        }
    }

    #[test]
    fn tree_with_one_point_matches_djs() {
        let t = atm25();
        let g = build_grid(1, 1e-10, 10).unwrap();
        let tree = QuantizationTree::build(t.buckets.times(), vec![g.clone(); 9], None).unwrap();
        let a = ee_quantized_tree(&t, &tree).unwrap();
        let b = ee_quantized_djs(&t, &[g]).unwrap();
        assert_eq!(a.ee, b.ee);
    }

    #[test]
    fn tree_matches_djs_within_chapman_bound() {
        let t = atm25();
        let g = build_grid(30, 1e-10, 100_000).unwrap();
        let tree = QuantizationTree::build(t.buckets.times(), vec![g.clone(); 9], None).unwrap();
        let a = ee_quantized_tree(&t, &tree).unwrap();
        let b = ee_quantized_djs(&t, &[g]).unwrap();
        assert!((a.epe - b.epe).abs() <= 1e-4, "{} vs {}", a.epe, b.epe);
        let mut bad = t.clone();
        bad.buckets = BucketGrid::new(vec![0.5, 1.0]).unwrap();
        assert!(ee_quantized_tree(&bad, &tree).is_err());
    }

    #[test]
    fn path_quantizer_agrees_with_marginals() {
        let t = atm25();
        let g = build_grid(4, 1e-10, 10_000).unwrap();
        let vq = VectorQuantizer::product(&vec![g; 9]).unwrap();
        let p = ee_quantized_pds(&t, &vq).unwrap();
        let a = ee_analytic(&t).unwrap();
        // Sums of stationary increments stay stationary: a convex lower bound.
        for k in 0..9 {
            assert!(p.ee[k] <= a.ee[k] + 1e-9);
        }
        assert!((p.epe / a.epe - 1.0).abs() < 0.05, "{} vs {}", p.epe, a.epe);

        let mut two = atm25();
        two.buckets = BucketGrid::new(vec![0.5, 1.0]).unwrap();
        let fine = build_grid(300, 1e-10, 100_000).unwrap();
        let vq = VectorQuantizer::product(&[fine.clone(), fine]).unwrap();
        let p = ee_quantized_pds(&two, &vq).unwrap();
        let a = ee_analytic(&two).unwrap();
        for k in 0..2 {
            assert!(
                (p.ee[k] / a.ee[k] - 1.0).abs() < 1e-4,
                "{} vs {}",
                p.ee[k],
                a.ee[k]
            );
        }
        let small = VectorQuantizer::product(&[build_grid(3, 1e-10, 1000).unwrap()]).unwrap();
        assert!(ee_quantized_pds(&t, &small).is_err());
    }

    #[test]
    fn rectangle_rule_converges() {
        let t = task(OptionKind::Call, Side::Buy, 110.0, 0.15);
        let a = ee_analytic(&t).unwrap();
        let coarse = ee_numerical(&t, RectangleRule::new(1000)).unwrap();
        let eps = 100.0 * (coarse.epe / a.epe - 1.0);
        assert_eq!((eps * 1000.0).round(), -17.0, "ε = {eps}%");
        assert_abs_diff_eq!(coarse.epe, 14.967, epsilon = 1.5e-3);
        let fine = ee_numerical(
            &t,
            RectangleRule {
                nodes: 100_000,
                half_width: 8.0,
            },
        )
        .unwrap();
        assert!((fine.epe / a.epe - 1.0).abs() < 1e-6);
        for k in 0..9 {
            assert!((fine.ee[k] / a.ee[k] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rectangle_rule_on_constant_integrand() {
        let r = RectangleRule {
            nodes: 2000,
            half_width: 6.0,
        };
        let mass = r.integrate(|_| 1.0);
        assert!((mass - 1.0).abs() < 2e-9 + 1e-6);
    }

    #[test]
    fn mc_is_block_deterministic() {
        let t = atm25();
        let a = ee_mc(&t, 10_000, SimulationMode::Pds, 9).unwrap();
        let b = ee_mc(&t, 10_000, SimulationMode::Pds, 9).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let c = pool
            .install(|| ee_mc(&t, 10_000, SimulationMode::Pds, 9))
            .unwrap();
        assert_eq!(a, c);
        assert!(ee_mc(&t, 1, SimulationMode::Pds, 9).is_err());
    }

    #[test]
    fn mc_degenerate_diffusion() {
        let t = task(OptionKind::Call, Side::Buy, 100.0, 1e-12);
        let p = ee_mc(&t, 1000, SimulationMode::Pds, 1).unwrap();
        for (k, &tk) in t.buckets.times().iter().enumerate() {
            let fwd = 100.0 * (0.03 * tk).exp();
            let v = bs_price(OptionKind::Call, fwd, 100.0, 0.03, 1e-12, 1.0 - tk).unwrap();
            assert_abs_diff_eq!(p.ee[k], v, epsilon = 1e-8);
            assert!(p.stderr.as_ref().unwrap()[k] < 1e-8);
        }
    }

    #[test]
    fn mc_modes_agree() {
        let t = atm25();
        let a = ee_mc(&t, 20_000, SimulationMode::Pds, 3).unwrap();
        let b = ee_mc(&t, 20_000, SimulationMode::Djs, 4).unwrap();
        let (sa, sb) = (a.stderr.unwrap(), b.stderr.unwrap());
        for k in 0..9 {
            let tol = 3.0 * (sa[k].powi(2) + sb[k].powi(2)).sqrt();
            assert!((a.ee[k] - b.ee[k]).abs() < tol, "bucket {k}");
        }
    }

    #[test]
    fn pinned_seed_mc_is_near_the_benchmark() {
        let p = ee_mc(
            &atm25(),
            1000,
            SimulationMode::Pds,
            crate::sampling::DEFAULT_SEED,
        )
        .unwrap();
        assert!((p.epe - 11.5558).abs() < 3.0 * p.epe_stderr.unwrap());
    }

    #[test]
    fn sobol_single_point_is_the_median_path() {
        let t = atm25();
        let s = ee_sobol(&t, 1).unwrap();
        let q = ee_quantized_djs(&t, &[build_grid(1, 1e-10, 10).unwrap()]).unwrap();
        assert_eq!(s.ee, q.ee);
        assert!(s.stderr.is_none());
    }

    #[test]
    fn sobol_converges() {
        let t = atm25();
        let s = ee_sobol(&t, 1 << 16).unwrap();
        assert!((s.epe / 11.5558 - 1.0).abs() < 5e-4);
    }
}
