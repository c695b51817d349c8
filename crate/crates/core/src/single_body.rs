//! The effective scalar problem `argmin_{d∈Ω} ½Θ̂d² − u d` and its Gaussian
//! averages.
//!
//! With `u = h z`, `z ~ N(0,1)`, the minimizer is `φ(u/Θ̂)`: a staircase whose
//! jumps sit at `u = Θ̂ c_k`. Every average below reduces to normal cdf/pdf
//! evaluations at the scaled thresholds `t_k = Θ̂ c_k / h`.

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::quadrature::gaussian_expectation_piecewise;
use crate::scalar::{cst, normal_mass, normal_pdf, Real};

/// Effective field scale `h` and curvature `Θ̂` of the single-body problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldContext<T> {
    pub h: T,
    pub theta_hat: T,
}

impl<T: Real> FieldContext<T> {
    pub fn new(h: T, theta_hat: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("field scale h = {h}")));
        }
        if !(theta_hat > T::zero()) || !theta_hat.is_finite() {
            return Err(Error::InvalidParameter(format!("curvature Θ̂ = {theta_hat}")));
        }
        Ok(Self { h, theta_hat })
    }

    #[inline]
    fn scaled(&self, c: T) -> T {
        self.theta_hat * c / self.h
    }
}

/// Minimizer of the single-body energy at field `u`.
pub fn phi_star<T: Real>(u: T, ctx: &FieldContext<T>, cb: &Codebook<T>) -> Result<T> {
    if !u.is_finite() {
        return Err(Error::NonFinite(format!("single-body field {u}")));
    }
    cb.quantize(u / ctx.theta_hat)
}

/// Brute-force minimizer of `½Θ̂d² − u d` over the levels. Ties resolve the
/// same way as [`Codebook::quantize`].
pub fn phi_star_argmin<T: Real>(u: T, theta_hat: T, cb: &Codebook<T>) -> T {
    let energy = |d: T| cst::<T>(0.5) * theta_hat * d * d - u * d;
    let mut best = cb.levels()[0];
    let mut best_e = energy(best);
    for &d in &cb.levels()[1..] {
        let e = energy(d);
        if e < best_e || (e == best_e && (d.abs() < best.abs() || (d.abs() == best.abs() && d > best))) {
            best = d;
            best_e = e;
        }
    }
    best
}

/// Mean of the single-body Gibbs measure `∝ exp(−β(½Θd² − ud))` over the
/// levels, and its derivative with respect to `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments<T> {
    pub mean: T,
    pub dmean_du: T,
}

pub fn phi_beta<T: Real>(u: T, theta: T, cb: &Codebook<T>, beta: T) -> PosteriorMoments<T> {
    let half = cst::<T>(0.5);
    let exponent = |d: T| beta * (u * d - half * theta * d * d);
    let top = cb
        .levels()
        .iter()
        .map(|&d| exponent(d))
        .fold(T::neg_infinity(), T::max);
    let (mut z, mut s1, mut s2) = (T::zero(), T::zero(), T::zero());
    for &d in cb.levels() {
        let w = (exponent(d) - top).exp();
        z = z + w;
        s1 = s1 + w * d;
        s2 = s2 + w * d * d;
    }
    let mean = s1 / z;
    let var = (s2 / z - mean * mean).max(T::zero());
    PosteriorMoments {
        mean,
        dmean_du: beta * var,
    }
}

/// `Q = ∫Dz φ*(hz)²`.
pub fn gauss_second_moment<T: Real>(ctx: &FieldContext<T>, cb: &Codebook<T>) -> T {
    let levels = cb.levels();
    let thresholds = cb.thresholds();
    let mut total = T::zero();
    for (k, &d) in levels.iter().enumerate() {
        if d.is_zero() {
            continue;
        }
        let lo = if k == 0 {
            T::neg_infinity()
        } else {
            ctx.scaled(thresholds[k - 1])
        };
        let hi = if k == thresholds.len() {
            T::infinity()
        } else {
            ctx.scaled(thresholds[k])
        };
        total = total + d * d * normal_mass(lo, hi);
    }
    total
}

/// `χ = ∫Dz ∂φ*(hz)/∂(hz) = (1/h) Σ_k Δd_k φ_N(t_k)`.
pub fn gauss_chi<T: Real>(ctx: &FieldContext<T>, cb: &Codebook<T>) -> T {
    comb_sum(ctx, cb, |size| size)
}

/// `∫Dz (∂φ*)²` under the jump-squared prescription
/// `(1/h) Σ_k Δd_k² φ_N(t_k)`.
pub fn gauss_at_integral<T: Real>(ctx: &FieldContext<T>, cb: &Codebook<T>) -> T {
    comb_sum(ctx, cb, |size| size * size)
}

fn comb_sum<T: Real>(ctx: &FieldContext<T>, cb: &Codebook<T>, weight: impl Fn(T) -> T) -> T {
    let s: T = cb
        .jumps()
        .jumps
        .iter()
        .map(|j| weight(j.size) * normal_pdf(ctx.scaled(j.at)))
        .sum();
    s / ctx.h
}

/// Breakpoints of `z ↦ φ*(hz)`: the scaled thresholds.
pub fn scaled_thresholds<T: Real>(ctx: &FieldContext<T>, cb: &Codebook<T>) -> Vec<T> {
    cb.thresholds().iter().map(|&c| ctx.scaled(c)).collect()
}

/// Quadrature evaluation of `∫Dz f(φ*(hz), z)`, split at the scaled
/// thresholds. Independent of the closed forms above.
pub fn quadrature_average<T: Real>(
    ctx: &FieldContext<T>,
    cb: &Codebook<T>,
    nodes: usize,
    f: impl Fn(T, T) -> T,
) -> T {
    let cuts = scaled_thresholds(ctx, cb);
    gaussian_expectation_piecewise(
        |z| {
            let d = cb
                .quantize(ctx.h * z / ctx.theta_hat)
                .expect("finite quadrature node");
            f(d, z)
        },
        &cuts,
        nodes,
        T::one(),
    )
}

/// Averages of the finite-β single-body posterior by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedAverages<T> {
    /// `∫Dz mean²`
    pub second_moment: T,
    /// `∫Dz ∂mean/∂u`
    pub chi: T,
    /// `∫Dz (∂mean/∂u)²`
    pub at_integral: T,
}

/// Gaussian averages of [`phi_beta`] at field `u = hz`.
///
/// Panels are refined around each threshold on the scale of the posterior's
/// transition width `1/(β Δd h)`, so the result stays accurate for large β.
/// As `β → ∞` the first two entries approach [`gauss_second_moment`] and
/// [`gauss_chi`]; the third grows linearly in β.
pub fn smoothed_averages<T: Real>(
    ctx: &FieldContext<T>,
    cb: &Codebook<T>,
    beta: T,
    nodes: usize,
) -> SmoothedAverages<T> {
    let mut cuts = Vec::new();
    for j in cb.jumps().jumps {
        let centre = ctx.scaled(j.at);
        let width = T::one() / (beta * j.size * ctx.h);
        for k in -24i32..=24 {
            // Geometric spacing: fine near the jump, wider further out.
            let sign = cst::<T>(f64::from(k.signum()));
            let mag = cst::<T>(((k.abs() as f64) / 2.0).exp2() - 1.0);
            cuts.push(centre + sign * mag * width);
        }
    }
    let eval = |z: T| phi_beta(ctx.h * z, ctx.theta_hat, cb, beta);
    let second_moment = gaussian_expectation_piecewise(|z| eval(z).mean.powi(2), &cuts, nodes, cst(0.5));
    let chi = gaussian_expectation_piecewise(|z| eval(z).dmean_du, &cuts, nodes, cst(0.5));
    let at_integral =
        gaussian_expectation_piecewise(|z| eval(z).dmean_du.powi(2), &cuts, nodes, cst(0.5));
    SmoothedAverages {
        second_moment,
        chi,
        at_integral,
    }
}

/// Gaussian averages of a scalar denoiser `u ↦ φ*(u, Θ̂)` at `u = hz`.
///
/// The saddle-point solver and state evolution are written against this
/// trait, so the quantized, ridge and finite-β cases share one iteration.
pub trait Denoiser<T: Real>: Sync {
    /// `∫Dz φ*(hz)²`
    fn second_moment(&self, ctx: &FieldContext<T>) -> T;
    /// `∫Dz ∂φ*/∂(hz)`
    fn chi(&self, ctx: &FieldContext<T>) -> T;
    /// `∫Dz (∂φ*/∂(hz))²`
    fn at_integral(&self, ctx: &FieldContext<T>) -> T;
}

impl<T: Real> Denoiser<T> for Codebook<T> {
    fn second_moment(&self, ctx: &FieldContext<T>) -> T {
        gauss_second_moment(ctx, self)
    }

    fn chi(&self, ctx: &FieldContext<T>) -> T {
        gauss_chi(ctx, self)
    }

    fn at_integral(&self, ctx: &FieldContext<T>) -> T {
        gauss_at_integral(ctx, self)
    }
}

/// Unquantized ridge denoiser `φ*(u, Θ̂) = u/Θ̂`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Identity;

impl<T: Real> Denoiser<T> for Identity {
    fn second_moment(&self, ctx: &FieldContext<T>) -> T {
        (ctx.h / ctx.theta_hat).powi(2)
    }

    fn chi(&self, ctx: &FieldContext<T>) -> T {
        ctx.theta_hat.recip()
    }

    fn at_integral(&self, ctx: &FieldContext<T>) -> T {
        ctx.theta_hat.recip().powi(2)
    }
}

/// Finite-β posterior-mean denoiser, averaged by quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed<T> {
    pub codebook: Codebook<T>,
    pub beta: T,
    pub nodes: usize,
}

impl<T: Real> Smoothed<T> {
    pub fn new(codebook: Codebook<T>, beta: T) -> Self {
        Self {
            codebook,
            beta,
            nodes: 16,
        }
    }
}

impl<T: Real> Denoiser<T> for Smoothed<T> {
    fn second_moment(&self, ctx: &FieldContext<T>) -> T {
        smoothed_averages(ctx, &self.codebook, self.beta, self.nodes).second_moment
    }

    fn chi(&self, ctx: &FieldContext<T>) -> T {
        smoothed_averages(ctx, &self.codebook, self.beta, self.nodes).chi
    }

    fn at_integral(&self, ctx: &FieldContext<T>) -> T {
        smoothed_averages(ctx, &self.codebook, self.beta, self.nodes).at_integral
    }
}
