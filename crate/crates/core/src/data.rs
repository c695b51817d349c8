//! Seeded synthetic instances of the teacher model `y = X w⁰ + ε`.
//!
//! Each purpose draws from its own ChaCha20 stream of the same seed:
//! stream 0 for `w⁰`, 1 for `X`, 2 for `ε`, 3 for AMP initialization.
//! Normal variates come from consecutive 64-bit words `k₁, k₂` through
//!
//! ```text
//! u = ((k >> 11) + 0.5) · 2⁻⁵³,
//! z₁ = √(−2 ln u₁) cos(2π u₂),   z₂ = √(−2 ln u₁) sin(2π u₂),
//! ```
//!
//! so the variates can be rebuilt from a recorded word stream.

use std::io::{BufRead, Write};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cst, Real};

pub const STREAM_TEACHER: u64 = 0;
pub const STREAM_DESIGN: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_AMP_INIT: u64 = 3;

/// Deterministic standard normal source on one stream of a seed.
pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Open-interval uniform on `(0, 1)` from one 64-bit word.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill<T: Real>(&mut self, n: usize, scale: f64) -> Vec<T> {
        (0..n).map(|_| cst(self.normal() * scale)).collect()
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, mu: usize) -> &[T] {
        &self.data[mu * self.cols..(mu + 1) * self.cols]
    }

    pub fn get(&self, mu: usize, i: usize) -> T {
        self.data[mu * self.cols + i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `X w`.
    pub fn matvec(&self, w: &[T]) -> Vec<T> {
        assert_eq!(w.len(), self.cols);
        (0..self.rows).map(|mu| dot(self.row(mu), w)).collect()
    }

    /// `Xᵀ r`.
    pub fn tmatvec(&self, r: &[T]) -> Vec<T> {
        assert_eq!(r.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (mu, &rm) in r.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(mu)) {
                *o = *o + x * rm;
            }
        }
        out
    }

    /// `(X a, X∘X b)` in one sweep over the rows.
    pub fn matvec_pair(&self, a: &[T], b: &[T]) -> (Vec<T>, Vec<T>) {
        assert_eq!(a.len(), self.cols);
        assert_eq!(b.len(), self.cols);
        (0..self.rows)
            .map(|mu| {
                self.row(mu)
                    .iter()
                    .zip(a.iter().zip(b))
                    .fold((T::zero(), T::zero()), |(s, q), (&x, (&ai, &bi))| (s + x * ai, q + x * x * bi))
            })
            .unzip()
    }

    /// `(Xᵀ r, (X∘X)ᵀ s)` in one sweep over the rows.
    pub fn tmatvec_pair(&self, r: &[T], s: &[T]) -> (Vec<T>, Vec<T>) {
        assert_eq!(r.len(), self.rows);
        assert_eq!(s.len(), self.rows);
        let mut lin = vec![T::zero(); self.cols];
        let mut sq = vec![T::zero(); self.cols];
        for mu in 0..self.rows {
            let (rm, sm) = (r[mu], s[mu]);
            for ((l, q), &x) in lin.iter_mut().zip(sq.iter_mut()).zip(self.row(mu)) {
                *l = *l + x * rm;
                *q = *q + x * x * sm;
            }
        }
        (lin, sq)
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// One regression instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct Dataset<T> {
    /// `M × N` design, entries `N(0, 1/N)`.
    pub x: Matrix<T>,
    pub y: Vec<T>,
    pub w0: Vec<T>,
    pub rho: T,
    pub sigma2: T,
    pub seed: u64,
}

impl<T: Real> Dataset<T> {
    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn m(&self) -> usize {
        self.x.rows()
    }

    pub fn alpha(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    /// Builds an instance from explicit parts, checking shapes.
    pub fn from_parts(x: Matrix<T>, y: Vec<T>, w0: Vec<T>, rho: T, sigma2: T, seed: u64) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::InvalidParameter("N and M must be at least 1".into()));
        }
        if y.len() != x.rows() || w0.len() != x.cols() {
            return Err(Error::DimensionMismatch(format!(
                "X is {}x{}, y has {}, w0 has {}",
                x.rows(),
                x.cols(),
                y.len(),
                w0.len()
            )));
        }
        Ok(Self {
            x,
            y,
            w0,
            rho,
            sigma2,
            seed,
        })
    }

    /// Writes the fixture layout: header `N,M,rho,sigma2,seed`, its values,
    /// then one row for `w⁰`, one for `y` and `M` rows of `X`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["N", "M", "rho", "sigma2", "seed"])?;
        w.write_record([
            self.n().to_string(),
            self.m().to_string(),
            self.rho.to_string(),
            self.sigma2.to_string(),
            self.seed.to_string(),
        ])?;
        let fmt = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        w.write_record(fmt(&self.w0))?;
        w.write_record(fmt(&self.y))?;
        for mu in 0..self.m() {
            w.write_record(fmt(self.x.row(mu)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(input);
        let mut records = rdr.records();
        let mut next = |what: &str| -> Result<csv::StringRecord> {
            records
                .next()
                .ok_or_else(|| Error::Parse(format!("fixture ends before {what}")))?
                .map_err(Error::from)
        };
        let head = next("header values")?;
        let field = |i: usize| head.get(i).ok_or_else(|| Error::Parse("short header row".into()));
        let parse_usize = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let n = parse_usize(field(0)?)?;
        let m = parse_usize(field(1)?)?;
        let rho = parse_real::<T>(field(2)?)?;
        let sigma2 = parse_real::<T>(field(3)?)?;
        let seed = field(4)?
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::Parse(format!("seed: {e}")))?;
        let row = |r: csv::StringRecord, len: usize, what: &str| -> Result<Vec<T>> {
            if r.len() != len {
                return Err(Error::DimensionMismatch(format!("{what} has {} entries, expected {len}", r.len())));
            }
            r.iter().map(parse_real::<T>).collect()
        };
        let w0 = row(next("w0")?, n, "w0")?;
        let y = row(next("y")?, m, "y")?;
        let mut data = Vec::with_capacity(n * m);
        for mu in 0..m {
            data.extend(row(next("X")?, n, &format!("X row {mu}"))?);
        }
        Self::from_parts(Matrix::from_vec(m, n, data)?, y, w0, rho, sigma2, seed)
    }
}

fn parse_real<T: Real>(s: &str) -> Result<T> {
    s.trim().parse::<T>().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// Draws `w⁰ ~ N(0, ρ)`, `X_{μi} ~ N(0, 1/N)` and `ε ~ N(0, σ²)` from the
/// seed's dedicated streams.
pub fn generate<T: Real>(n: usize, m: usize, rho: f64, sigma2: f64, seed: u64) -> Result<Dataset<T>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("need N, M >= 1, got N={n}, M={m}")));
    }
    if !(rho > 0.0 && rho.is_finite()) || !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho={rho}, sigma2={sigma2}")));
    }
    let w0: Vec<T> = NormalStream::new(seed, STREAM_TEACHER).fill(n, rho.sqrt());
    let x = Matrix::from_vec(m, n, NormalStream::new(seed, STREAM_DESIGN).fill(n * m, 1.0 / (n as f64).sqrt()))?;
    let noise: Vec<T> = NormalStream::new(seed, STREAM_NOISE).fill(m, sigma2.sqrt());
    let y = x.matvec(&w0).into_iter().zip(noise).map(|(a, e)| a + e).collect();
    Dataset::from_parts(x, y, w0, cst(rho), cst(sigma2), seed)
}
