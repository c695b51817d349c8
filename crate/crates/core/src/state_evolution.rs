//! State evolution: the two-variable recursion `(V, E)` tracking the
//! macroscopic trajectory of AMP.
//!
//! ```text
//! ξ = √(α²ρ + α(σ² + E)) / (1+V),   Λ = λ + α/(1+V),
//! V' = ∫Dz ∂φ*(ξz, Λ),
//! E' = ρ − 2ρα V'/(1+V) + ∫Dz φ*(ξz, Λ)².
//! ```
//!
//! The fixed point coincides with the replica saddle point under
//! `V ↔ χ`, `E ↔ Q − 2m + ρ`, `ξ ↔ h`, `Λ ↔ Θ̂`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replica::{ModelParams, DIVERGENCE_BOUND};
use crate::scalar::{cst, Real};
use crate::single_body::{Denoiser, FieldContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SEState<T> {
    pub v: T,
    pub e: T,
    pub t: usize,
    pub xi: T,
    pub lambda: T,
}

impl<T: Real> SEState<T> {
    /// State at iteration `t` with the effective field derived from `(V, E)`.
    pub fn new(v: T, e: T, t: usize, p: &ModelParams<T>) -> Self {
        let one = T::one();
        let xi = (p.alpha * p.alpha * p.rho + p.alpha * (p.sigma2 + e.max(T::zero()))).sqrt() / (one + v);
        let lambda = p.effective_lambda() + p.alpha / (one + v);
        Self { v, e, t, xi, lambda }
    }

    /// `V⁰ = 0, E⁰ = ρ`.
    pub fn initial(p: &ModelParams<T>) -> Self {
        Self::new(T::zero(), p.rho, 0, p)
    }

    pub fn context(&self) -> Result<FieldContext<T>> {
        FieldContext::new(self.xi, self.lambda)
    }
}

/// One undamped SE update.
pub fn se_step<T: Real, D: Denoiser<T> + ?Sized>(
    s: &SEState<T>,
    p: &ModelParams<T>,
    denoiser: &D,
) -> Result<SEState<T>> {
    let ctx = s.context()?;
    let v = denoiser.chi(&ctx);
    let q = denoiser.second_moment(&ctx);
    let e = p.rho - cst::<T>(2.0) * p.rho * p.alpha * v / (T::one() + s.v) + q;
    let bound = cst::<T>(DIVERGENCE_BOUND);
    if !(v.is_finite() && e.is_finite()) || v.abs() > bound || e.abs() > bound {
        return Err(Error::Diverged {
            iteration: s.t + 1,
            detail: format!("V={v}, E={e}"),
        });
    }
    Ok(SEState::new(v, e, s.t + 1, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SEOptions<T> {
    /// Weight of the fresh `(V, E)` in each update; `1` is plain SE.
    pub damping: T,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for SEOptions<T> {
    fn default() -> Self {
        Self {
            damping: T::one(),
            tol: cst(1e-12),
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SETrajectory<T> {
    /// Every visited state, starting with the initial one.
    pub states: Vec<SEState<T>>,
    pub converged: bool,
}

impl<T: Real> SETrajectory<T> {
    pub fn last(&self) -> &SEState<T> {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Writes the `t,V,E,xi,Lambda` table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "V", "E", "xi", "Lambda"])?;
        for s in &self.states {
            w.write_record([
                s.t.to_string(),
                s.v.to_string(),
                s.e.to_string(),
                s.xi.to_string(),
                s.lambda.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Iterates SE from [`SEState::initial`] until the largest scaled change of
/// `(V, E)` falls below `tol`.
///
/// Divergence ends the run early with `converged = false`.
pub fn se_run<T: Real, D: Denoiser<T> + ?Sized>(
    p: &ModelParams<T>,
    denoiser: &D,
    opts: &SEOptions<T>,
) -> Result<SETrajectory<T>> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    if !(opts.damping > T::zero() && opts.damping <= T::one()) {
        return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    p.validate()?;
    let mut states = vec![SEState::initial(p)];
    let mut converged = false;
    let keep = T::one() - opts.damping;
    for _ in 0..opts.max_iter {
        let cur = *states.last().expect("nonempty");
        let raw = match se_step(&cur, p, denoiser) {
            Ok(s) => s,
            Err(_) => break,
        };
        let v = opts.damping * raw.v + keep * cur.v;
        let e = opts.damping * raw.e + keep * cur.e;
        let next = SEState::new(v, e, cur.t + 1, p);
        let change = ((next.v - cur.v).abs() / T::one().max(cur.v.abs()))
            .max((next.e - cur.e).abs() / T::one().max(cur.e.abs()));
        states.push(next);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(SETrajectory { states, converged })
}

/// `α/(1+V)² ∫Dz (∂φ*(ξz, Λ))²`; below one means the AMP fixed point is
/// linearly stable.
pub fn amp_fixed_point_stability<T: Real, D: Denoiser<T> + ?Sized>(
    s: &SEState<T>,
    p: &ModelParams<T>,
    denoiser: &D,
) -> Result<T> {
    let ctx = s.context()?;
    Ok(p.alpha / (T::one() + s.v).powi(2) * denoiser.at_integral(&ctx))
}
