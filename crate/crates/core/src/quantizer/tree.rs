//! Quantization tree: per-bucket grids linked by conditional transition
//! probabilities of the Brownian driver.

use rayon::prelude::*;

use super::grid::QuantizerGrid;
use crate::error::{Error, Result};
use crate::gaussnum::{normal_mass, normal_pdf};
use crate::quadrature;

/// Boundary cells of the outer integral are truncated at this many standard deviations.
pub const TRUNCATION: f64 = 10.0;
/// Absolute tolerance on each transition probability.
pub const ENTRY_TOLERANCE: f64 = 1e-10;
const MAX_SEGMENTS: usize = 200;

/// `π_ij = P(X̂_{k+1} = x_j | X̂_k = x_i)` for one step of the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    step: usize,
    rows: usize,
    cols: usize,
    pi: Vec<f64>,
    pruned: Vec<bool>,
}

impl TransitionMatrix {
    /// Builds a matrix from explicit row-major entries (no pruning).
    pub fn from_rows(step: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Config(
                "transition rows must be non-empty and rectangular".into(),
            ));
        }
        let pi: Vec<f64> = rows.into_iter().flatten().collect();
        if pi.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Domain(
                "transition probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            step,
            rows: n_rows,
            cols,
            pruned: vec![false; pi.len()],
            pi,
        })
    }

    /// Bucket index `k` of the step `t_k → t_{k+1}`.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pi[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_pruned(&self, i: usize, j: usize) -> bool {
        self.pruned[i * self.cols + j]
    }

    pub fn pruned_count(&self) -> usize {
        self.pruned.iter().filter(|&&p| p).count()
    }

    /// `q · π`: pushes a distribution over the rows onto the columns.
    pub fn propagate(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.rows {
            return Err(Error::Config(format!(
                "distribution of length {} does not match {} transition rows",
                q.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &qi) in q.iter().enumerate() {
            if qi == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o += qi * p;
            }
        }
        Ok(out)
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.rows)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Transition probabilities between the quantized Brownian states at `t_k`
/// and `t_{k+1}`.
///
/// Both grids quantize `N(0, 1)`; they are dilated by `√t_k` and `√t_{k+1}`.
/// Each entry is the normalized double integral
///
/// ```text
/// π_ij = (1/p_i) ∫_{C_i} φ(u) [Φ((√t_{k+1}·b_j − √t_k·u)/√Δ) − Φ((√t_{k+1}·b_{j−1} − √t_k·u)/√Δ)] du
/// ```
///
/// with `Δ = t_{k+1} − t_k`: the inner Gaussian integral is closed form and
/// the outer one is adaptive Gauss–Kronrod.
///
/// With `prune_z = Some(z)`, entries whose standardized jump
/// `|x_j·√t_{k+1} − x_i·√t_k| / √Δ` exceeds `z` are skipped and set to zero,
/// and the surviving row entries are renormalized.
pub fn transition_matrix(
    step: usize,
    grid_k: &QuantizerGrid,
    grid_k1: &QuantizerGrid,
    t_k: f64,
    t_k1: f64,
    prune_z: Option<f64>,
) -> Result<TransitionMatrix> {
    if !(t_k > 0.0) {
        return Err(Error::FirstStep(t_k));
    }
    if !(t_k1 > t_k) {
        return Err(Error::Domain(format!(
            "transition times must increase, got {t_k} → {t_k1}"
        )));
    }
    if let Some(z) = prune_z {
        if !(z > 0.0) {
            return Err(Error::Domain(format!(
                "prune threshold must be positive, got {z}"
            )));
        }
    }

    let rows = grid_k.size();
    let cols = grid_k1.size();
    let sqrt_k = t_k.sqrt();
    let sqrt_k1 = t_k1.sqrt();
    let sqrt_dt = (t_k1 - t_k).sqrt();
    let from_cells = grid_k.cells();
    let to_bounds: Vec<f64> = grid_k1
        .cells()
        .boundaries()
        .iter()
        .map(|b| b * sqrt_k1)
        .collect();

    let row_results: Vec<Result<(Vec<f64>, Vec<bool>)>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let cell = from_cells.cell(i);
            let lo = cell.lower.max(-TRUNCATION);
            let hi = cell.upper.min(TRUNCATION);
            let p_i = grid_k.probs()[i];
            let x_i = grid_k.points()[i] * sqrt_k;

            let entry = |j: usize| -> Result<f64> {
                if lo >= hi {
                    return Ok(0.0);
                }
                let (lower, upper) = (to_bounds[j], to_bounds[j + 1]);
                let integrand = |u: f64| {
                    let y = sqrt_k * u;
                    normal_pdf(u) * normal_mass((lower - y) / sqrt_dt, (upper - y) / sqrt_dt)
                };
                let est =
                    quadrature::integrate(integrand, lo, hi, ENTRY_TOLERANCE * p_i, MAX_SEGMENTS)?;
                Ok((est.value / p_i).clamp(0.0, 1.0))
            };

            let mut row = vec![0.0; cols];
            let mut pruned = vec![false; cols];
            if cols == 1 {
                row[0] = 1.0;
                return Ok((row, pruned));
            }
            for j in 0..cols {
                if let Some(z) = prune_z {
                    let jump = (grid_k1.points()[j] * sqrt_k1 - x_i) / sqrt_dt;
                    if jump.abs() > z {
                        pruned[j] = true;
                        continue;
                    }
                }
                row[j] = entry(j)?;
            }
            if prune_z.is_some() {
                let mut total: f64 = row.iter().sum();
                if total == 0.0 {
                    // Everything was pruned: keep the exact row.
                    for j in 0..cols {
                        row[j] = entry(j)?;
                        pruned[j] = false;
                    }
                    total = row.iter().sum();
                }
                if total > 0.0 {
                    row.iter_mut().for_each(|v| *v /= total);
                }
            }
            Ok((row, pruned))
        })
        .collect();

    let mut pi = Vec::with_capacity(rows * cols);
    let mut mask = Vec::with_capacity(rows * cols);
    for r in row_results {
        let (row, pruned) = r?;
        pi.extend(row);
        mask.extend(pruned);
    }
    Ok(TransitionMatrix {
        step,
        rows,
        cols,
        pi,
        pruned: mask,
    })
}

/// `max_j |Σ_i p_i^k·π_ij − p_j^{k+1}|`.
pub fn chapman_check(p_k: &[f64], pi: &TransitionMatrix, p_k1: &[f64]) -> Result<f64> {
    if p_k1.len() != pi.cols() {
        return Err(Error::Config(format!(
            "target distribution of length {} does not match {} transition columns",
            p_k1.len(),
            pi.cols()
        )));
    }
    let pushed = pi.propagate(p_k)?;
    Ok(pushed
        .iter()
        .zip(p_k1)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Grids for every bucket and the transitions between consecutive buckets.
#[derive(Debug, Clone)]
pub struct QuantizationTree {
    times: Vec<f64>,
    grids: Vec<QuantizerGrid>,
    transitions: Vec<TransitionMatrix>,
}

impl QuantizationTree {
    /// Builds transitions for `grids[k]` at `times[k]` (all times `> 0`).
    /// The first bucket is reached from the deterministic start through its
    /// marginal probabilities, so no matrix is built for it.
    pub fn build(times: &[f64], grids: Vec<QuantizerGrid>, prune_z: Option<f64>) -> Result<Self> {
        if times.len() != grids.len() || times.is_empty() {
            return Err(Error::Config(format!(
                "{} bucket times but {} grids",
                times.len(),
                grids.len()
            )));
        }
        let transitions = (0..times.len() - 1)
            .map(|k| {
                transition_matrix(k, &grids[k], &grids[k + 1], times[k], times[k + 1], prune_z)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: times.to_vec(),
            grids,
            transitions,
        })
    }

    /// Assembles a tree from precomputed parts, checking chain compatibility.
    pub fn from_parts(
        times: Vec<f64>,
        grids: Vec<QuantizerGrid>,
        transitions: Vec<TransitionMatrix>,
    ) -> Result<Self> {
        if times.len() != grids.len() || transitions.len() + 1 != grids.len() {
            return Err(Error::Config(format!(
                "tree needs K grids and K − 1 transitions, got {} grids and {} transitions",
                grids.len(),
                transitions.len()
            )));
        }
        for (k, tm) in transitions.iter().enumerate() {
            if tm.rows() != grids[k].size() || tm.cols() != grids[k + 1].size() {
                return Err(Error::Config(format!(
                    "transition {k} is {}×{} but grids have sizes {} and {}",
                    tm.rows(),
                    tm.cols(),
                    grids[k].size(),
                    grids[k + 1].size()
                )));
            }
        }
        Ok(Self {
            times,
            grids,
            transitions,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn grids(&self) -> &[QuantizerGrid] {
        &self.grids
    }

    pub fn transitions(&self) -> &[TransitionMatrix] {
        &self.transitions
    }

    /// Node weights `q_1 = p^1`, `q_{k+1} = q_k·π^k` for every bucket.
    pub fn marginals(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.grids.len());
        out.push(self.grids[0].probs().to_vec());
        for tm in &self.transitions {
            let next = tm.propagate(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Largest Chapman–Kolmogorov discrepancy over all steps.
    pub fn max_chapman_discrepancy(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (k, tm) in self.transitions.iter().enumerate() {
            worst = worst.max(chapman_check(
                self.grids[k].probs(),
                tm,
                self.grids[k + 1].probs(),
            )?);
        }
        Ok(worst)
    }
}
