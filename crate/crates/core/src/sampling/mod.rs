//! Pseudo-random and Sobol standard-normal streams.
//!
//! Both kinds map uniforms through [`normal_quantile`], so Monte Carlo and
//! quasi-Monte Carlo runs differ only in the uniform source.

mod sobol;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub use sobol::{to_unit, SobolSequence, MAX_DIMENSION as SOBOL_MAX_DIMENSION};

use crate::error::{Error, Result};
use crate::gaussnum::normal_quantile;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED_CCE0;

/// An `n × d` block of draws, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalDraws {
    dim: usize,
    data: Vec<f64>,
}

impl NormalDraws {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, d: usize) -> impl Iterator<Item = f64> + '_ {
        self.iter_rows().map(move |r| r[d])
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug, Clone)]
enum Source {
    Pseudo(Box<ChaCha20Rng>),
    Sobol { seq: SobolSequence, raw: Vec<u32> },
}

/// A deterministic stream of `d`-dimensional standard normal vectors.
///
/// Pseudo-random streams run ChaCha20 keyed by a 64-bit seed; independent
/// substreams for parallel workers select ChaCha's stream word. Sobol
/// streams start after the origin, and disjoint index blocks serve workers.
#[derive(Debug, Clone)]
pub struct NormalStream {
    dim: usize,
    source: Source,
}

impl NormalStream {
    pub fn pseudo(seed: u64, dim: usize) -> Result<Self> {
        Self::pseudo_substream(seed, 0, dim)
    }

    /// Substream `stream` of the generator keyed by `seed`. Distinct
    /// substreams of one seed are non-overlapping.
    pub fn pseudo_substream(seed: u64, stream: u64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self {
            dim,
            source: Source::Pseudo(Box::new(rng)),
        })
    }

    /// Sobol stream starting at point 1, skipping the origin.
    pub fn sobol(dim: usize) -> Result<Self> {
        Self::sobol_from(dim, 1)
    }

    /// Sobol stream starting at `start` (≥ 1, the origin has no normal image).
    pub fn sobol_from(dim: usize, start: u64) -> Result<Self> {
        check_dim(dim)?;
        if start == 0 {
            return Err(Error::Domain(
                "Sobol normal streams must skip the origin".into(),
            ));
        }
        let mut seq = SobolSequence::new(dim)?;
        seq.seek(start)?;
        Ok(Self {
            dim,
            source: Source::Sobol {
                seq,
                raw: vec![0; dim],
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sobol(&self) -> bool {
        matches!(self.source, Source::Sobol { .. })
    }

    pub fn draw_normals(&mut self, n: usize) -> Result<NormalDraws> {
        if n == 0 {
            return Err(Error::Domain("draw count must be at least 1".into()));
        }
        let mut data = vec![0.0; n * self.dim];
        self.fill(&mut data)?;
        Ok(NormalDraws {
            dim: self.dim,
            data,
        })
    }

    /// Fills `out` (a whole number of rows) with the next draws.
    pub fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        if out.len() % self.dim != 0 {
            return Err(Error::Config(format!(
                "buffer of {} values is not a multiple of dimension {}",
                out.len(),
                self.dim
            )));
        }
        match &mut self.source {
            Source::Pseudo(rng) => {
                for v in out.iter_mut() {
                    // 53 random bits, centered in their bucket: u ∈ (0, 1).
                    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
                    *v = normal_quantile(u)?;
                }
            }
            Source::Sobol { seq, raw } => {
                for row in out.chunks_exact_mut(self.dim) {
                    seq.next_point(raw)?;
                    for (v, &x) in row.iter_mut().zip(raw.iter()) {
                        *v = normal_quantile(to_unit(x))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Domain("stream dimension must be at least 1".into()));
    }
    Ok(())
}
