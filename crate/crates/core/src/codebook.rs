//! Quantizer codebooks: the admissible level set, its decision thresholds and
//! the jump structure of the quantization map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cst, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantScheme {
    /// Equal-width subintervals `2ω/n_p`.
    Uniform,
    /// Log-domain partition: widths double moving away from zero.
    NonUniform,
}

impl QuantScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            QuantScheme::Uniform => "uniform",
            QuantScheme::NonUniform => "nonuniform",
        }
    }
}

impl std::fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QuantScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(QuantScheme::Uniform),
            "nonuniform" | "non-uniform" => Ok(QuantScheme::NonUniform),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Number of bits `b = log2(n_p + 2)` carried by a codebook with `n_p`
/// subintervals.
pub fn bits_of(n_p: usize) -> f64 {
    ((n_p + 2) as f64).log2()
}

/// Inverse of [`bits_of`]: `round(2^b) - 2`.
pub fn np_of_bits(bits: f64) -> Result<usize> {
    if !bits.is_finite() || bits < 3f64.log2() - 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "bits {bits} below log2(3), no codebook has fewer than one subinterval"
        )));
    }
    let n = bits.exp2().round() as i64 - 2;
    if n < 1 {
        return Err(Error::InvalidParameter(format!("bits {bits} maps to n_p = {n}")));
    }
    Ok(n as usize)
}

/// One discontinuity of the quantization map: location and (positive) size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump<T> {
    pub at: T,
    pub size: T,
}

/// Distributional derivative of the quantizer, a comb of `n_p` jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpComb<T> {
    pub jumps: Vec<Jump<T>>,
}

impl<T: Real> JumpComb<T> {
    pub fn total(&self) -> T {
        self.jumps.iter().map(|j| j.size).sum()
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }
}

/// A symmetric quantizer on `[-ω, ω]` with `n_p + 1` levels located at the
/// subinterval edges.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct Codebook<T> {
    scheme: QuantScheme,
    n_p: usize,
    omega: T,
    levels: Vec<T>,
    thresholds: Vec<T>,
}

impl<T: Real> Codebook<T> {
    pub fn new(scheme: QuantScheme, n_p: usize, omega: T) -> Result<Self> {
        match scheme {
            QuantScheme::Uniform => Self::uniform(n_p, omega),
            QuantScheme::NonUniform => Self::nonuniform(n_p, omega),
        }
    }

    pub fn uniform(n_p: usize, omega: T) -> Result<Self> {
        check_args(n_p, omega)?;
        let np_t = cst::<T>(n_p as f64);
        // d_k = ω (2k - n_p) / n_p keeps the level set exactly symmetric.
        let mut levels: Vec<T> = (0..=n_p)
            .map(|k| {
                let centered = cst::<T>(2.0 * k as f64 - n_p as f64);
                omega * centered / np_t
            })
            .collect();
        levels[0] = -omega;
        levels[n_p] = omega;
        Ok(Self::from_levels(QuantScheme::Uniform, n_p, omega, levels))
    }

    /// Non-uniform codebook with innermost width set by
    /// `Δ0 = ω / (2^((n_p + k)/2) - k)`, `k = 2` for even and `k = 3` for odd
    /// `n_p`.
    ///
    /// Odd `n_p`: central subinterval `[-Δ0, Δ0]`, then per-half widths
    /// `4Δ0, 8Δ0, ...`. Even `n_p`: an edge at zero and per-half widths
    /// `2Δ0, 4Δ0, ...`. Either way the outermost edge lands on `±ω`.
    pub fn nonuniform(n_p: usize, omega: T) -> Result<Self> {
        check_args(n_p, omega)?;
        let delta0 = nonuniform_delta0(n_p, omega);
        let half = n_p / 2;
        let mut positive = Vec::with_capacity(half + 1);
        let (mut edge, mut width) = if n_p % 2 == 1 {
            positive.push(delta0);
            (delta0, delta0 * cst(4.0))
        } else {
            (T::zero(), delta0 * cst(2.0))
        };
        let steps = if n_p % 2 == 1 { (n_p - 1) / 2 } else { half };
        for _ in 0..steps {
            edge = edge + width;
            positive.push(edge);
            width = width * cst(2.0);
        }
        if let Some(last) = positive.last_mut() {
            *last = omega;
        }
        let mut levels: Vec<T> = positive.iter().rev().map(|&d| -d).collect();
        if n_p.is_multiple_of(2) {
            levels.push(T::zero());
        }
        levels.extend(positive.iter().copied());
        Ok(Self::from_levels(QuantScheme::NonUniform, n_p, omega, levels))
    }

    fn from_levels(scheme: QuantScheme, n_p: usize, omega: T, levels: Vec<T>) -> Self {
        debug_assert_eq!(levels.len(), n_p + 1);
        let thresholds = levels
            .windows(2)
            .map(|w| (w[0] + w[1]) * cst(0.5))
            .collect();
        Self {
            scheme,
            n_p,
            omega,
            levels,
            thresholds,
        }
    }

    pub fn scheme(&self) -> QuantScheme {
        self.scheme
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn bits(&self) -> f64 {
        bits_of(self.n_p)
    }

    pub fn contains_zero(&self) -> bool {
        self.levels.iter().any(|d| d.is_zero())
    }

    /// Index of the level [`quantize`](Self::quantize) returns.
    pub fn nearest_index(&self, w: T) -> usize {
        let idx = self.thresholds.partition_point(|&c| c < w);
        if idx < self.thresholds.len() && self.thresholds[idx] == w {
            // Exact tie: smaller |level| wins, the positive one on a symmetric tie.
            let (lo, hi) = (self.levels[idx], self.levels[idx + 1]);
            if hi.abs() < lo.abs() || (hi.abs() == lo.abs() && hi > lo) {
                return idx + 1;
            }
        }
        idx
    }

    /// Nearest level to `w`, with clipping to `±ω`.
    pub fn quantize(&self, w: T) -> Result<T> {
        if !w.is_finite() {
            return Err(Error::NonFinite(format!("quantize input {w}")));
        }
        Ok(self.levels[self.nearest_index(w)])
    }

    pub fn quantize_vec(&self, w: &[T]) -> Result<Vec<T>> {
        w.iter().map(|&x| self.quantize(x)).collect()
    }

    pub fn jumps(&self) -> JumpComb<T> {
        let jumps = self
            .thresholds
            .iter()
            .zip(self.levels.windows(2))
            .map(|(&at, w)| Jump {
                at,
                size: w[1] - w[0],
            })
            .collect();
        JumpComb { jumps }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cb: Self = serde_json::from_str(s)?;
        let rebuilt = Self::new(cb.scheme, cb.n_p, cb.omega)?;
        if rebuilt.levels.len() != cb.levels.len() {
            return Err(Error::Parse("level count does not match n_p".into()));
        }
        Ok(cb)
    }
}

fn check_args<T: Real>(n_p: usize, omega: T) -> Result<()> {
    if n_p == 0 {
        return Err(Error::InvalidParameter("n_p must be at least 1".into()));
    }
    if !(omega > T::zero()) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "omega must be positive and finite, got {omega}"
        )));
    }
    Ok(())
}

/// Innermost width parameter of the non-uniform partition.
pub fn nonuniform_delta0<T: Real>(n_p: usize, omega: T) -> T {
    let k = if n_p.is_multiple_of(2) { 2.0 } else { 3.0 };
    omega / cst::<T>(((n_p as f64 + k) / 2.0).exp2() - k)
}
