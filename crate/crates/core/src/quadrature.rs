//! Numerical Gaussian integrals `∫Dz f(z)`, `Dz = φ(z) dz`.
//!
//! These are the independent cross-checks for the closed forms in
//! [`single_body`](crate::single_body). Two rules are provided: Gauss–Hermite
//! for smooth integrands, and a panel Gauss–Legendre rule that splits the line
//! at caller-supplied breakpoints, which is what piecewise integrands (the
//! quantizer is piecewise constant) need to reach ten or more digits.

use std::f64::consts::PI;

use crate::scalar::{cst, normal_pdf, Real};

/// Half-width of the truncated integration range; `φ(14) ≈ 1e-43`.
pub const TAIL_CUTOFF: f64 = 14.0;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `∫_a^b g(x) dx`.
    pub fn integrate<T: Real, F: Fn(T) -> T>(&self, a: T, b: T, g: F) -> T {
        let half = (b - a) * cst(0.5);
        let mid = (a + b) * cst(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| cst::<T>(w) * g(mid + half * cst(x)))
            .sum::<T>()
            * half
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the weight `e^{-x²}`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let mut z = 0.0;
        for i in 0..m {
            // Initial guesses for the largest roots first.
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[n - 1],
                3 => 1.91 * z - 0.91 * nodes[n - 2],
                _ => 2.0 * z - nodes[n - i + 1],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[n - 1 - i] = z;
            nodes[i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// `∫Dz f(z)` for smooth `f`.
    pub fn expect<T: Real, F: Fn(T) -> T>(&self, f: F) -> T {
        let scale = 1.0 / PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| cst::<T>(w * scale) * f(cst::<T>(std::f64::consts::SQRT_2 * x)))
            .sum()
    }
}

/// `∫Dz f(z)` by Gauss–Hermite with `nodes` points. Suited to smooth `f`.
pub fn gaussian_expectation<T: Real, F: Fn(T) -> T>(f: F, nodes: usize) -> T {
    assert!(nodes >= 16, "quadrature oracle needs at least 16 nodes");
    GaussHermite::new(nodes).expect(f)
}

/// `∫Dz f(z)` for piecewise-smooth `f`, splitting `[-14, 14]` at every
/// breakpoint and into panels no wider than `max_panel`, with a
/// `nodes`-point Gauss–Legendre rule per panel.
pub fn gaussian_expectation_piecewise<T: Real, F: Fn(T) -> T>(
    f: F,
    breakpoints: &[T],
    nodes: usize,
    max_panel: T,
) -> T {
    assert!(nodes >= 16, "quadrature oracle needs at least 16 nodes");
    let rule = GaussLegendre::new(nodes);
    let lo = -cst::<T>(TAIL_CUTOFF);
    let hi = cst::<T>(TAIL_CUTOFF);
    let mut cuts: Vec<T> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup();
    let mut total = T::zero();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b - a) / max_panel).ceil().to_usize().unwrap_or(1).max(1);
        let step = (b - a) / cst(pieces as f64);
        for k in 0..pieces {
            let pa = a + step * cst(k as f64);
            let pb = if k + 1 == pieces { b } else { pa + step };
            // Evaluate strictly inside the panel so a jump exactly at a cut
            // never gets sampled.
            total = total + rule.integrate(pa, pb, |z| f(z) * normal_pdf(z));
        }
    }
    total
}
