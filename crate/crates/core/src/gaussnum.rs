//! Standard normal special functions and truncated moments.
//!
//! Every cell of a one-dimensional quantizer is an [`Interval`] of the real
//! line, and the two outermost cells are half-infinite. Endpoints are kept as
//! extended reals: `φ(±∞) = 0` and `x·φ(x) = 0` at `±∞`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// `1 / √(2π)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// An open interval `(lower, upper)` of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::Domain(format!(
                "interval bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn real_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    /// `P(X ∈ self)` for `X ~ N(0, 1)`.
    pub fn mass(&self) -> f64 {
        normal_mass(self.lower, self.upper)
    }

    /// `E[X · 1{X ∈ self}] = φ(lower) − φ(upper)`.
    pub fn first_moment(&self) -> f64 {
        normal_pdf(self.lower) - normal_pdf(self.upper)
    }

    /// `E[X² · 1{X ∈ self}]`.
    pub fn second_moment(&self) -> f64 {
        self.mass() + x_pdf(self.lower) - x_pdf(self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }

    fn nonzero_mass(&self) -> Result<f64> {
        let mass = self.mass();
        if mass > 0.0 {
            Ok(mass)
        } else {
            Err(Error::DegenerateCell {
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

/// Standard normal density. Returns `0` at `±∞`.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
fn x_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * normal_pdf(x)
    }
}

/// Standard normal distribution function `Φ(x)`, accepting `±∞`.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(x)`, computed without cancellation for large `x`.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Φ(upper) − Φ(lower)`, evaluated in whichever tail avoids cancellation.
pub fn normal_mass(lower: f64, upper: f64) -> f64 {
    if lower >= 0.0 {
        normal_sf(lower) - normal_sf(upper)
    } else if upper <= 0.0 {
        normal_cdf(upper) - normal_cdf(lower)
    } else {
        1.0 - normal_cdf(lower) - normal_sf(upper)
    }
}

/// Inverse of [`normal_cdf`] on `(0, 1)`.
///
/// A rational initial guess (relative error about 1e−9) is polished with two
/// Newton steps against the erfc-based distribution function. The upper half
/// is obtained by reflection, so both tails keep full relative precision.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    if p > 0.5 {
        // 1 − p is exact for p in (0.5, 1).
        Ok(-lower_quantile(1.0 - p))
    } else {
        Ok(lower_quantile(p))
    }
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = rational_guess(p);
    for _ in 0..2 {
        let density = normal_pdf(x);
        if density == 0.0 {
            break;
        }
        x -= (normal_cdf(x) - p) / density;
    }
    x
}

// Acklam's rational approximation, valid on (0, 0.5].
fn rational_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `E[X | X ∈ cell]` for `X ~ N(0, 1)`: the centroid of a Voronoi cell.
pub fn truncated_mean(cell: Interval) -> Result<f64> {
    let mass = cell.nonzero_mass()?;
    Ok(cell.first_moment() / mass)
}

/// `E[X² · 1{X ∈ cell}]` for `X ~ N(0, 1)`.
pub fn truncated_second_moment(cell: Interval) -> Result<f64> {
    cell.nonzero_mass()?;
    Ok(cell.second_moment())
}
