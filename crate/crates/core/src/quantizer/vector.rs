//! Quantizers of the d-dimensional standard normal law, used to map each
//! coordinate onto one Brownian increment.

use super::grid::QuantizerGrid;
use crate::error::{Error, Result};
use crate::sampling::NormalStream;

/// Largest product quantizer [`VectorQuantizer::product`] will materialize.
pub const MAX_PRODUCT_SIZE: usize = 4_000_000;

/// A weighted point set in `ℝ^d` approximating `N(0, I_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorQuantizer {
    dim: usize,
    points: Vec<f64>,
    probs: Vec<f64>,
}

impl VectorQuantizer {
    /// `points` is row-major with `dim` coordinates per point.
    pub fn new(dim: usize, points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * probs.len() || probs.is_empty() {
            return Err(Error::Config(format!(
                "{} coordinates do not form {} points of dimension {dim}",
                points.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Domain(
                "vector quantizer weights must be positive".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { dim, points, probs })
    }

    /// Cartesian product of one-dimensional grids; weights multiply.
    pub fn product(grids: &[QuantizerGrid]) -> Result<Self> {
        if grids.is_empty() {
            return Err(Error::Config(
                "product quantizer needs at least one factor".into(),
            ));
        }
        let size = grids
            .iter()
            .try_fold(1usize, |acc, g| acc.checked_mul(g.size()))
            .filter(|&s| s <= MAX_PRODUCT_SIZE)
            .ok_or_else(|| {
                Error::Config(format!(
                    "product quantizer exceeds {MAX_PRODUCT_SIZE} points"
                ))
            })?;
        let dim = grids.len();
        let mut points = Vec::with_capacity(size * dim);
        let mut probs = Vec::with_capacity(size);
        let mut index = vec![0usize; dim];
        for _ in 0..size {
            let mut w = 1.0;
            for (g, &i) in grids.iter().zip(&index) {
                points.push(g.points()[i]);
                w *= g.probs()[i];
            }
            probs.push(w);
            // Odometer increment, last coordinate fastest.
            for d in (0..dim).rev() {
                index[d] += 1;
                if index[d] < grids[d].size() {
                    break;
                }
                index[d] = 0;
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { dim, points, probs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.probs.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn nearest(&self, z: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.points.chunks_exact(self.dim).enumerate() {
            let d2: f64 = c.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best
    }

    /// Empirical quadratic distortion over the given sample (row-major).
    pub fn empirical_distortion(&self, sample: &[f64]) -> f64 {
        let n = sample.len() / self.dim;
        sample
            .chunks_exact(self.dim)
            .map(|z| self.nearest(z).1)
            .sum::<f64>()
            / n as f64
    }
}

/// Settings for the randomized Lloyd construction.
#[derive(Debug, Clone, Copy)]
pub struct LloydConfig {
    pub samples: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LloydConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            iterations: 50,
            seed: crate::sampling::DEFAULT_SEED,
        }
    }
}

/// Randomized Lloyd iteration on a fixed pseudo-random sample of
/// `N(0, I_dim)`: assign every draw to its nearest center, move centers to
/// the sample centroid of their cell. Weights are the cell frequencies;
/// centers whose cell ends up empty are dropped.
pub fn build_vector_quantizer(n: usize, dim: usize, cfg: LloydConfig) -> Result<VectorQuantizer> {
    if n == 0 || dim == 0 {
        return Err(Error::Domain(
            "vector quantizer needs n ≥ 1 and dim ≥ 1".into(),
        ));
    }
    if cfg.samples < n {
        return Err(Error::Config(format!(
            "Lloyd sample of {} draws is smaller than the {n} centers",
            cfg.samples
        )));
    }
    let mut stream = NormalStream::pseudo(cfg.seed, dim)?;
    let sample = stream.draw_normals(cfg.samples)?.into_data();

    let mut vq = VectorQuantizer {
        dim,
        points: sample[..n * dim].to_vec(),
        probs: vec![1.0 / n as f64; n],
    };
    let mut counts = vec![0usize; n];
    for _ in 0..cfg.iterations.max(1) {
        let mut sums = vec![0.0; n * dim];
        counts.iter_mut().for_each(|c| *c = 0);
        for z in sample.chunks_exact(dim) {
            let (i, _) = vq.nearest(z);
            counts[i] += 1;
            for (s, &v) in sums[i * dim..(i + 1) * dim].iter_mut().zip(z) {
                *s += v;
            }
        }
        for i in 0..n {
            if counts[i] > 0 {
                for d in 0..dim {
                    vq.points[i * dim + d] = sums[i * dim + d] / counts[i] as f64;
                }
            }
        }
    }
    // Final weights come from one more assignment against the settled centers.
    counts.iter_mut().for_each(|c| *c = 0);
    for z in sample.chunks_exact(dim) {
        counts[vq.nearest(z).0] += 1;
    }
    let mut points = Vec::with_capacity(n * dim);
    let mut probs = Vec::with_capacity(n);
    for i in 0..n {
        if counts[i] > 0 {
            points.extend_from_slice(vq.point(i));
            probs.push(counts[i] as f64 / cfg.samples as f64);
        }
    }
    VectorQuantizer::new(dim, points, probs)
}
