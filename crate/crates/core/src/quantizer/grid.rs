//! Optimal quadratic quantizers of the standard normal law.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gaussnum::{normal_pdf, normal_quantile, Interval};

/// Default stationarity tolerance for [`build_grid`].
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Default iteration cap for [`build_grid`].
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Lloyd sweeps run before switching to Newton steps.
const LLOYD_WARMUP: usize = 20;

/// Voronoi partition of the real line induced by an ordered point set:
/// `b_0 = −∞ < b_1 < … < b_N = +∞` with `b_i` the midpoint of `x_i, x_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiCells {
    boundaries: Vec<f64>,
}

impl VoronoiCells {
    pub fn new(points: &[f64]) -> Self {
        let mut boundaries = Vec::with_capacity(points.len() + 1);
        boundaries.push(f64::NEG_INFINITY);
        boundaries.extend(points.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        boundaries.push(f64::INFINITY);
        Self { boundaries }
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, i: usize) -> Interval {
        Interval {
            lower: self.boundaries[i],
            upper: self.boundaries[i + 1],
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Interval> + '_ {
        self.boundaries.windows(2).map(|w| Interval {
            lower: w[0],
            upper: w[1],
        })
    }

    /// Index of the cell containing `z` (ties go to the lower cell).
    pub fn locate(&self, z: f64) -> usize {
        let inner = &self.boundaries[1..self.boundaries.len() - 1];
        inner.partition_point(|&b| b < z)
    }
}

/// An ordered N-point quantizer of `N(0, 1)` with its cell weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerGrid {
    points: Vec<f64>,
    probs: Vec<f64>,
    distortion: f64,
}

impl QuantizerGrid {
    /// Wraps an ordered point set, deriving cell probabilities and distortion.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        check_increasing(&points)?;
        let probs = cell_probabilities(&points)?;
        let distortion = distortion(&points);
        Ok(Self {
            points,
            probs,
            distortion,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn cells(&self) -> VoronoiCells {
        VoronoiCells::new(&self.points)
    }

    /// `max_i |x_i − E[X | X ∈ C_i]|`.
    pub fn stationarity_residual(&self) -> f64 {
        self.cells()
            .cells()
            .zip(&self.points)
            .map(|(cell, &x)| (x - cell.first_moment() / cell.mass()).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_i g(x_i)·p_i`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .map(|(&x, &p)| g(x) * p)
            .sum()
    }

    /// Writes the grid as `N=<n>` followed by one `x<TAB>p` line per point.
    ///
    /// Values use the shortest decimal that parses back to the same `f64`,
    /// so a save/load round trip is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(48 * (self.size() + 1));
        let _ = writeln!(out, "N={}", self.size());
        for (x, p) in self.points.iter().zip(&self.probs) {
            let _ = writeln!(out, "{x}\t{p}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses the text format written by [`QuantizerGrid::to_text`].
    /// `origin` only labels error messages.
    pub fn parse(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref();
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing `N=<n>` header"))?;
        let n: usize = header
            .strip_prefix("N=")
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::parse(
                    origin,
                    header_line,
                    format!("bad header `{header}`, expected `N=<n>`"),
                )
            })?;

        let mut points = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        let mut last_line = header_line;
        for (line_no, line) in lines {
            last_line = line_no;
            let mut fields = line.split_whitespace();
            let (Some(x), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(origin, line_no, "expected `x<TAB>p`"));
            };
            let x: f64 = x
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("bad point `{x}`")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("bad probability `{p}`")))?;
            if !x.is_finite() {
                return Err(Error::parse(origin, line_no, "point must be finite"));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::parse(
                    origin,
                    line_no,
                    "probability must lie in (0, 1]",
                ));
            }
            if let Some(&prev) = points.last() {
                if x <= prev {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        "points must be strictly increasing",
                    ));
                }
            }
            points.push(x);
            probs.push(p);
        }
        if points.len() != n {
            return Err(Error::parse(
                origin,
                last_line,
                format!("header announces {n} points, found {}", points.len()),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::parse(
                origin,
                last_line,
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        let distortion = distortion(&points);
        Ok(Self {
            points,
            probs,
            distortion,
        })
    }
}

fn check_increasing(points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Domain("a quantizer needs at least one point".into()));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("quantizer points must be finite".into()));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "quantizer points must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `p_i = Φ(b_i) − Φ(b_{i−1})` over the Voronoi cells of `points`.
pub fn cell_probabilities(points: &[f64]) -> Result<Vec<f64>> {
    check_increasing(points)?;
    let probs: Vec<f64> = VoronoiCells::new(points)
        .cells()
        .map(|c| c.mass())
        .collect();
    if let Some(i) = probs.iter().position(|&p| p <= 0.0) {
        let cell = VoronoiCells::new(points).cell(i);
        return Err(Error::DegenerateCell {
            lower: cell.lower,
            upper: cell.upper,
        });
    }
    Ok(probs)
}

/// Quadratic distortion `E[min_i |X − x_i|²]`, summed cell by cell in closed form.
pub fn distortion(points: &[f64]) -> f64 {
    VoronoiCells::new(points)
        .cells()
        .zip(points)
        .map(|(cell, &x)| {
            let local = cell.second_moment() - 2.0 * x * cell.first_moment() + x * x * cell.mass();
            local.max(0.0)
        })
        .sum()
}

/// Builds a stationary `n`-point quantizer of `N(0, 1)`.
///
/// Starts from the mid-quantiles `Φ⁻¹((2i − 1) / 2n)`, runs a short Lloyd
/// warm-up, then solves the stationarity system `x_i·p_i = E[X·1{X ∈ C_i}]`
/// with damped Newton steps (its Jacobian is tridiagonal). When no damping
/// of the Newton direction lowers the residual, a Lloyd step is taken.
/// Converges when `max_i |x_i − centroid_i| < tol`; the result is
/// symmetrized about the origin.
pub fn build_grid(n: usize, tol: f64, max_iter: usize) -> Result<QuantizerGrid> {
    if n == 0 {
        return Err(Error::Domain("grid size must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut points = (1..=n)
        .map(|i| normal_quantile((2 * i - 1) as f64 / (2 * n) as f64))
        .collect::<Result<Vec<_>>>()?;

    let mut state = Stationarity::evaluate(&points);
    let mut iterations = 0;
    while state.residual >= tol {
        if iterations >= max_iter {
            return Err(Error::IterationLimit {
                iterations,
                residual: state.residual,
            });
        }
        iterations += 1;

        let newton = (iterations > LLOYD_WARMUP)
            .then(|| state.newton_direction(&points))
            .flatten()
            .and_then(|step| damped(&points, &step, state.residual));

        match newton {
            Some((candidate, next)) => {
                points = candidate;
                state = next;
            }
            None => {
                points = state.centroids.clone();
                state = Stationarity::evaluate(&points);
            }
        }
    }

    symmetrize(&mut points);
    QuantizerGrid::from_points(points)
}

fn symmetrize(points: &mut [f64]) {
    let n = points.len();
    for i in 0..n / 2 {
        let half = 0.5 * (points[n - 1 - i] - points[i]);
        points[i] = -half;
        points[n - 1 - i] = half;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
}

/// Residual of the stationarity system at a given point set.
struct Stationarity {
    boundaries: Vec<f64>,
    masses: Vec<f64>,
    centroids: Vec<f64>,
    residual: f64,
}

impl Stationarity {
    fn evaluate(points: &[f64]) -> Self {
        let cells = VoronoiCells::new(points);
        let mut masses = Vec::with_capacity(points.len());
        let mut centroids = Vec::with_capacity(points.len());
        let mut residual: f64 = 0.0;
        for (cell, &x) in cells.cells().zip(points) {
            let mass = cell.mass();
            let centroid = if mass > 0.0 {
                cell.first_moment() / mass
            } else {
                x
            };
            residual = residual.max((x - centroid).abs());
            masses.push(mass);
            centroids.push(centroid);
        }
        Self {
            boundaries: cells.boundaries,
            masses,
            centroids,
            residual,
        }
    }

    /// Newton direction for `G_i(x) = p_i·(x_i − centroid_i)`; `None` if the
    /// tridiagonal system is singular.
    fn newton_direction(&self, points: &[f64]) -> Option<Vec<f64>> {
        let n = points.len();
        if n == 1 {
            return Some(vec![points[0]]);
        }
        let rhs: Vec<f64> = (0..n)
            .map(|i| self.masses[i] * (points[i] - self.centroids[i]))
            .collect();
        // Off-diagonal coupling across boundary b_i (between x_i and x_{i+1}).
        let coupling: Vec<f64> = (0..n - 1)
            .map(|i| 0.25 * normal_pdf(self.boundaries[i + 1]) * (points[i + 1] - points[i]))
            .collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { coupling[i - 1] } else { 0.0 };
                let right = if i + 1 < n { coupling[i] } else { 0.0 };
                self.masses[i] - left - right
            })
            .collect();
        let off: Vec<f64> = coupling.iter().map(|c| -c).collect();
        solve_symmetric_tridiagonal(&diag, &off, &rhs)
    }
}

/// Backtracking along a Newton direction: the first of `x − s`, `x − s/2`, …
/// that keeps the points ordered and lowers the residual.
fn damped(points: &[f64], step: &[f64], residual: f64) -> Option<(Vec<f64>, Stationarity)> {
    let mut scale = 1.0;
    for _ in 0..30 {
        let next: Vec<f64> = points
            .iter()
            .zip(step)
            .map(|(x, s)| x - scale * s)
            .collect();
        if next.iter().all(|x| x.is_finite()) && next.windows(2).all(|w| w[0] < w[1]) {
            let state = Stationarity::evaluate(&next);
            if state.residual < residual {
                return Some((next, state));
            }
        }
        scale *= 0.5;
    }
    None
}

/// Thomas algorithm for a symmetric tridiagonal system.
fn solve_symmetric_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < f64::MIN_POSITIVE {
        return None;
    }
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if denom.abs() < f64::MIN_POSITIVE {
            return None;
        }
        c[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}
