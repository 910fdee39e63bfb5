//! Black–Scholes market: GBM dynamics, closed-form European prices, option
//! positions, netting sets and the exposure bucket grid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussnum::normal_cdf;

/// Spot, continuously compounded rate and volatility of a GBM underlying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub spot: f64,
    pub rate: f64,
    pub vol: f64,
}

impl MarketParams {
    pub fn new(spot: f64, rate: f64, vol: f64) -> Result<Self> {
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(Error::Domain(format!("spot must be positive, got {spot}")));
        }
        if !(vol > 0.0 && vol.is_finite()) {
            return Err(Error::Domain(format!(
                "volatility must be positive, got {vol}"
            )));
        }
        if !rate.is_finite() {
            return Err(Error::Domain(format!("rate must be finite, got {rate}")));
        }
        Ok(Self { spot, rate, vol })
    }
}

/// `S_0 · exp((r − σ²/2)·t + σ·√t·z)`.
pub fn underlying_at(params: &MarketParams, t: f64, z: f64) -> f64 {
    let MarketParams { spot, rate, vol } = *params;
    spot * ((rate - 0.5 * vol * vol) * t + vol * t.sqrt() * z).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }
}

impl FromStr for OptionKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "call" => Ok(OptionKind::Call),
            "put" => Ok(OptionKind::Put),
            _ => Err(format!("unknown option kind {s:?} (expected call or put)")),
        }
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "buy" => Ok(Side::Buy),
            "sell" => Ok(Side::Sell),
            _ => Err(format!("unknown side {s:?} (expected buy or sell)")),
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        })
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        })
    }
}

fn default_quantity() -> f64 {
    1.0
}

/// A European option position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity: f64,
    pub side: Side,
    #[serde(default = "default_quantity")]
    pub quantity: f64,
}

impl OptionSpec {
    pub fn new(kind: OptionKind, side: Side, strike: f64, maturity: f64) -> Result<Self> {
        let spec = Self {
            kind,
            strike,
            maturity,
            side,
            quantity: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_quantity(mut self, quantity: f64) -> Result<Self> {
        self.quantity = quantity;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::Domain(format!(
                "strike must be positive, got {}",
                self.strike
            )));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::Domain(format!(
                "maturity must be positive, got {}",
                self.maturity
            )));
        }
        if !(self.quantity > 0.0 && self.quantity.is_finite()) {
            return Err(Error::Domain(format!(
                "quantity must be positive, got {}",
                self.quantity
            )));
        }
        Ok(())
    }

    /// Signed value of the position at time `t`.
    pub fn mtm(&self, params: &MarketParams, spot: f64, t: f64) -> Result<f64> {
        let price = bs_price(
            self.kind,
            spot,
            self.strike,
            params.rate,
            params.vol,
            self.maturity - t,
        )?;
        Ok(self.side.sign() * self.quantity * price)
    }
}

/// Black–Scholes price of a European option with time to maturity `tau`.
/// At `tau = 0` the intrinsic value is returned.
pub fn bs_price(
    kind: OptionKind,
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    tau: f64,
) -> Result<f64> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::Domain(format!(
            "time to maturity must be ≥ 0, got {tau}"
        )));
    }
    if !(spot >= 0.0) || !(strike >= 0.0) || !(vol >= 0.0) {
        return Err(Error::Domain(format!(
            "invalid pricing inputs spot={spot} strike={strike} vol={vol}"
        )));
    }
    Ok(price_unchecked(
        kind,
        spot,
        strike,
        rate,
        vol * tau.sqrt(),
        tau,
    ))
}

#[inline]
fn price_unchecked(kind: OptionKind, spot: f64, strike: f64, rate: f64, sd: f64, tau: f64) -> f64 {
    let df_strike = strike * (-rate * tau).exp();
    let call = if sd == 0.0 || strike == 0.0 || spot == 0.0 {
        (spot - df_strike).max(0.0)
    } else {
        let d1 = ((spot / strike).ln() + rate * tau) / sd + 0.5 * sd;
        let d2 = d1 - sd;
        spot * normal_cdf(d1) - df_strike * normal_cdf(d2)
    };
    match kind {
        OptionKind::Call => call,
        // Parity, clamped against rounding deep in the money for the call.
        OptionKind::Put => (call - spot + df_strike).max(0.0),
    }
}

/// A netting set of option positions on one underlying.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Portfolio {
    positions: Vec<OptionSpec>,
}

impl Portfolio {
    pub fn new(positions: Vec<OptionSpec>) -> Result<Self> {
        for p in &positions {
            p.validate()?;
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[OptionSpec] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Earliest maturity, or `None` for an empty set.
    pub fn min_maturity(&self) -> Option<f64> {
        self.positions.iter().map(|p| p.maturity).reduce(f64::min)
    }

    /// Parses one position per line: `kind side strike maturity [quantity]`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut positions = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(4..=5).contains(&fields.len()) {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!(
                        "expected `kind side strike maturity [quantity]`, found {} fields",
                        fields.len()
                    ),
                ));
            }
            let bad = |m: String| Error::parse(origin, line_no, m);
            let kind: OptionKind = fields[0].parse().map_err(bad)?;
            let side: Side = fields[1].parse().map_err(bad)?;
            let number = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(origin, line_no, format!("invalid {what} {s:?}")))
            };
            let strike = number(fields[2], "strike")?;
            let maturity = number(fields[3], "maturity")?;
            let quantity = match fields.get(4) {
                Some(q) => number(q, "quantity")?,
                None => 1.0,
            };
            let spec = OptionSpec {
                kind,
                strike,
                maturity,
                side,
                quantity,
            };
            spec.validate()
                .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
            positions.push(spec);
        }
        Ok(Self { positions })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# kind side strike maturity quantity\n");
        for p in &self.positions {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                p.kind, p.side, p.strike, p.maturity, p.quantity
            ));
        }
        out
    }
}

impl FromIterator<OptionSpec> for Portfolio {
    fn from_iter<I: IntoIterator<Item = OptionSpec>>(iter: I) -> Self {
        Self {
            positions: iter.into_iter().collect(),
        }
    }
}

/// Sum of signed position values at time `t` and underlying level `spot`.
pub fn portfolio_mtm(portfolio: &Portfolio, spot: f64, rate: f64, vol: f64, t: f64) -> Result<f64> {
    portfolio.positions.iter().try_fold(0.0, |acc, p| {
        let v = bs_price(p.kind, spot, p.strike, rate, vol, p.maturity - t)?;
        Ok(acc + p.side.sign() * p.quantity * v)
    })
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    kind: OptionKind,
    weight: f64,
    strike: f64,
    ln_strike: f64,
    df_strike: f64,
    rate_tau: f64,
    sd: f64,
}

/// Netting-set value at one fixed time as a function of the underlying,
/// with every per-position constant hoisted out of the hot loop.
#[derive(Debug, Clone)]
pub struct Valuation {
    spot0: f64,
    drift: f64,
    diffusion: f64,
    legs: Vec<Leg>,
}

impl Valuation {
    pub fn new(positions: &[OptionSpec], params: &MarketParams, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!(
                "valuation time must be ≥ 0, got {t}"
            )));
        }
        let mut legs = Vec::with_capacity(positions.len());
        for p in positions {
            p.validate()?;
            let tau = p.maturity - t;
            if tau < 0.0 {
                return Err(Error::Domain(format!(
                    "valuation time {t} is past maturity {}",
                    p.maturity
                )));
            }
            legs.push(Leg {
                kind: p.kind,
                weight: p.side.sign() * p.quantity,
                strike: p.strike,
                ln_strike: p.strike.ln(),
                df_strike: p.strike * (-params.rate * tau).exp(),
                rate_tau: params.rate * tau,
                sd: params.vol * tau.sqrt(),
            });
        }
        Ok(Self {
            spot0: params.spot,
            drift: (params.rate - 0.5 * params.vol * params.vol) * t,
            diffusion: params.vol * t.sqrt(),
            legs,
        })
    }

    /// Underlying level reached from the standard-normal coordinate `z`.
    #[inline]
    pub fn spot_at(&self, z: f64) -> f64 {
        self.spot0 * (self.drift + self.diffusion * z).exp()
    }

    /// Signed netting-set value at underlying level `spot`.
    pub fn at_spot(&self, spot: f64) -> f64 {
        let ln_spot = spot.ln();
        let mut total = 0.0;
        for leg in &self.legs {
            let call = if leg.sd == 0.0 {
                (spot - leg.df_strike).max(0.0)
            } else {
                let d1 = (ln_spot - leg.ln_strike + leg.rate_tau) / leg.sd + 0.5 * leg.sd;
                spot * normal_cdf(d1) - leg.df_strike * normal_cdf(d1 - leg.sd)
            };
            let v = match leg.kind {
                OptionKind::Call => call,
                OptionKind::Put => (call - spot + leg.df_strike).max(0.0),
            };
            total += leg.weight * v;
        }
        total
    }

    /// Signed netting-set value at the standard-normal coordinate `z`.
    #[inline]
    pub fn at_z(&self, z: f64) -> f64 {
        self.at_spot(self.spot_at(z))
    }

    pub fn strikes(&self) -> impl Iterator<Item = f64> + '_ {
        self.legs.iter().map(|l| l.strike)
    }
}

/// Default exposure times in years: weekly for a month, then 2, 3, 6, 9, 12 months.
pub const DEFAULT_BUCKETS: [f64; 9] = [
    1.0 / 52.0,
    2.0 / 52.0,
    3.0 / 52.0,
    4.0 / 52.0,
    2.0 / 12.0,
    3.0 / 12.0,
    6.0 / 12.0,
    9.0 / 12.0,
    1.0,
];
const DEFAULT_LABELS: [&str; 9] = ["1w", "2w", "3w", "1m", "2m", "3m", "6m", "9m", "1y"];

/// Exposure dates `t_1 < … < t_K` after an implicit `t_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketGrid {
    times: Vec<f64>,
    deltas: Vec<f64>,
    labels: Vec<String>,
}

impl BucketGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        let labels = times.iter().map(|t| label_for(*t)).collect();
        Self::with_labels(times, labels)
    }

    pub fn with_labels(times: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Config("bucket grid is empty".into()));
        }
        if labels.len() != times.len() {
            return Err(Error::Config(format!(
                "{} labels for {} buckets",
                labels.len(),
                times.len()
            )));
        }
        let mut prev = 0.0;
        let mut deltas = Vec::with_capacity(times.len());
        for &t in &times {
            if !(t > prev && t.is_finite()) {
                return Err(Error::Config(format!(
                    "bucket times must be positive and strictly increasing, got {t} after {prev}"
                )));
            }
            deltas.push(t - prev);
            prev = t;
        }
        Ok(Self {
            times,
            deltas,
            labels,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("bucket grid is never empty")
    }
}

impl Default for BucketGrid {
    fn default() -> Self {
        Self {
            times: DEFAULT_BUCKETS.to_vec(),
            deltas: DEFAULT_BUCKETS
                .iter()
                .scan(0.0, |prev, &t| {
                    let d = t - *prev;
                    *prev = t;
                    Some(d)
                })
                .collect(),
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn label_for(t: f64) -> String {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    for (d, l) in DEFAULT_BUCKETS.iter().zip(DEFAULT_LABELS) {
        if close(t, *d) {
            return l.to_string();
        }
    }
    format!("{t}")
}
