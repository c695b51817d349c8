//! Replica-symmetric saddle point of quantized ridge regression.
//!
//! Order parameters `(Q, m, χ)` and their conjugates satisfy
//!
//! ```text
//! Q̂ = m̂ = α/(1+χ),   χ̂ = α(Q − 2m + ρ + σ²)/(1+χ)²,
//! h = √(m̂²ρ + χ̂),    Θ̂ = Q̂ + λ,
//! Q = ∫Dz φ*(hz)²,    χ = ∫Dz ∂φ*(hz),   m = m̂ρχ.
//! ```
//!
//! The fixed point is found by damped iteration; local stability of the RS
//! solution is `S = α/(1+χ)² ∫Dz (∂φ*)² < 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cst, Real};
use crate::single_body::{Denoiser, FieldContext, Identity};

/// λ below this value is replaced by it so Θ̂ stays positive for α < 1.
pub const LAMBDA_FLOOR: f64 = 1e-8;

/// Magnitude beyond which an iterate counts as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Ensemble parameters `(α, ρ, σ², λ)` of a regression instance class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct ModelParams<T> {
    /// Sample ratio `α = M/N`.
    pub alpha: T,
    /// Teacher variance.
    pub rho: T,
    /// Noise variance.
    pub sigma2: T,
    /// Ridge coefficient.
    pub lambda: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(alpha: T, rho: T, sigma2: T, lambda: T) -> Result<Self> {
        let p = Self {
            alpha,
            rho,
            sigma2,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.rho, self.sigma2, self.lambda]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(format!("non-finite model parameters {self:?}")));
        }
        if !(self.alpha > T::zero()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.rho > T::zero()) {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {}", self.rho)));
        }
        if self.sigma2 < T::zero() {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        if self.lambda < T::zero() {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// λ with the [`LAMBDA_FLOOR`] applied.
    pub fn effective_lambda(&self) -> T {
        self.lambda.max(cst(LAMBDA_FLOOR))
    }
}

/// Order parameters and the conjugates derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SaddleState<T> {
    pub q: T,
    pub m: T,
    pub chi: T,
    pub q_hat: T,
    pub m_hat: T,
    pub chi_hat: T,
    pub h: T,
    pub theta_hat: T,
}

impl<T: Real> SaddleState<T> {
    /// State at `(Q, m, χ)` with conjugates filled in.
    pub fn from_order(q: T, m: T, chi: T, p: &ModelParams<T>) -> Self {
        let one = T::one();
        let m_hat = p.alpha / (one + chi);
        let excess = (q - cst::<T>(2.0) * m + p.rho + p.sigma2).max(T::zero());
        let chi_hat = p.alpha * excess / (one + chi).powi(2);
        let h = (m_hat * m_hat * p.rho + chi_hat).sqrt();
        Self {
            q,
            m,
            chi,
            q_hat: m_hat,
            m_hat,
            chi_hat,
            h,
            theta_hat: m_hat + p.effective_lambda(),
        }
    }

    /// Default starting point `χ = 0.5, Q = ρ, m = ρ/2`.
    pub fn initial(p: &ModelParams<T>) -> Self {
        Self::from_order(p.rho, p.rho * cst(0.5), cst(0.5), p)
    }

    pub fn context(&self) -> Result<FieldContext<T>> {
        FieldContext::new(self.h, self.theta_hat)
    }

    fn order(&self) -> [T; 3] {
        [self.q, self.m, self.chi]
    }
}

/// `Ē_g = ½(Q − 2m + ρ + σ²)`.
pub fn gen_error<T: Real>(s: &SaddleState<T>, p: &ModelParams<T>) -> T {
    cst::<T>(0.5) * (s.q - cst::<T>(2.0) * s.m + p.rho + p.sigma2)
}

/// One damped update of the saddle-point map.
pub fn saddle_step<T: Real, D: Denoiser<T> + ?Sized>(
    s: &SaddleState<T>,
    p: &ModelParams<T>,
    denoiser: &D,
    damping: T,
) -> Result<SaddleState<T>> {
    let fresh = SaddleState::from_order(s.q, s.m, s.chi, p);
    let ctx = fresh.context()?;
    let q = denoiser.second_moment(&ctx);
    let chi = denoiser.chi(&ctx);
    let m = fresh.m_hat * p.rho * chi;
    let keep = T::one() - damping;
    let next = [q, m, chi]
        .iter()
        .zip(fresh.order())
        .map(|(&new, old)| damping * new + keep * old)
        .collect::<Vec<_>>();
    let bound = cst::<T>(DIVERGENCE_BOUND);
    if next.iter().any(|x| !x.is_finite() || x.abs() > bound) {
        return Err(Error::Diverged {
            iteration: 0,
            detail: format!("order parameters {next:?}"),
        });
    }
    Ok(SaddleState::from_order(next[0], next[1], next[2], p))
}

/// Stability value `α/(1+χ)² ∫Dz (∂φ*)²` at a state.
pub fn stability<T: Real, D: Denoiser<T> + ?Sized>(
    s: &SaddleState<T>,
    p: &ModelParams<T>,
    denoiser: &D,
) -> Result<T> {
    let ctx = s.context()?;
    Ok(p.alpha / (T::one() + s.chi).powi(2) * denoiser.at_integral(&ctx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Converged and locally stable.
    RS,
    /// Converged, stability value at or above one.
    RSB,
    NonConverged,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::RS => "RS",
            Phase::RSB => "RSB",
            Phase::NonConverged => "NonConverged",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SolveOptions<T> {
    /// Initial mixing weight of the new iterate, in `(0, 1]`.
    pub damping: T,
    /// Largest scaled component change accepted as converged.
    pub tol: T,
    pub max_iter: usize,
    /// Starting `(Q, m, χ)`; `None` uses [`SaddleState::initial`].
    pub init: Option<(T, T, T)>,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            damping: cst(0.5),
            tol: cst(1e-10),
            max_iter: 100_000,
            init: None,
        }
    }
}

/// Smallest damping reached by automatic halving.
pub const MIN_DAMPING: f64 = 1.0 / 256.0;
/// Consecutive residual increases that trigger a damping halving.
pub const OSCILLATION_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct ReplicaSolution<T> {
    pub state: SaddleState<T>,
    pub gen_error: T,
    pub stability: T,
    pub phase: Phase,
    pub iterations: usize,
    pub residual: T,
}

impl<T: Real> ReplicaSolution<T> {
    pub fn converged(&self) -> bool {
        self.phase != Phase::NonConverged
    }

    /// `(Q, m, χ)`, usable as a warm start.
    pub fn order(&self) -> (T, T, T) {
        (self.state.q, self.state.m, self.state.chi)
    }
}

fn scaled_change<T: Real>(a: &SaddleState<T>, b: &SaddleState<T>) -> T {
    a.order()
        .iter()
        .zip(b.order())
        .map(|(&x, y)| (x - y).abs() / T::one().max(y.abs()))
        .fold(T::zero(), T::max)
}

/// Iterates [`saddle_step`] to a fixed point and classifies the phase.
///
/// Never fails: divergence and iteration exhaustion are reported as
/// [`Phase::NonConverged`].
pub fn solve<T: Real, D: Denoiser<T> + ?Sized>(
    p: &ModelParams<T>,
    denoiser: &D,
    opts: &SolveOptions<T>,
) -> ReplicaSolution<T> {
    let mut state = match opts.init {
        Some((q, m, chi)) => SaddleState::from_order(q, m, chi, p),
        None => SaddleState::initial(p),
    };
    let mut damping = opts.damping;
    let min_damping = cst::<T>(MIN_DAMPING);
    let mut residual = T::infinity();
    let mut rising = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = match saddle_step(&state, p, denoiser, damping) {
            Ok(n) => n,
            Err(_) => {
                return finish(state, p, denoiser, Phase::NonConverged, iterations, T::infinity());
            }
        };
        let change = scaled_change(&next, &state);
        state = next;
        if change < opts.tol {
            residual = change;
            converged = true;
            break;
        }
        if change > residual {
            rising += 1;
            if rising >= OSCILLATION_WINDOW && damping > min_damping {
                damping = (damping * cst(0.5)).max(min_damping);
                rising = 0;
            }
        } else {
            rising = 0;
        }
        residual = change;
    }
    let phase = if converged { Phase::RS } else { Phase::NonConverged };
    finish(state, p, denoiser, phase, iterations, residual)
}

fn finish<T: Real, D: Denoiser<T> + ?Sized>(
    state: SaddleState<T>,
    p: &ModelParams<T>,
    denoiser: &D,
    phase: Phase,
    iterations: usize,
    residual: T,
) -> ReplicaSolution<T> {
    let stab = stability(&state, p, denoiser).unwrap_or(T::nan());
    let phase = match phase {
        Phase::NonConverged => Phase::NonConverged,
        _ if !stab.is_finite() => Phase::NonConverged,
        _ if stab < T::one() => Phase::RS,
        _ => Phase::RSB,
    };
    ReplicaSolution {
        state,
        gen_error: gen_error(&state, p),
        stability: stab,
        phase,
        iterations,
        residual,
    }
}

/// Unquantized ridge baseline: the same saddle-point system with the
/// identity denoiser.
pub fn ridge_saddle<T: Real>(p: &ModelParams<T>) -> ReplicaSolution<T> {
    solve(p, &Identity, &SolveOptions::default())
}

/// Closed-form ridgeless limit `Ē_g = (σ²/2) α/(α−1)` for `α > 1`.
pub fn ridgeless_gen_error<T: Real>(alpha: T, sigma2: T) -> Option<T> {
    (alpha > T::one()).then(|| cst::<T>(0.5) * sigma2 * alpha / (alpha - T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::Codebook;

    fn params(alpha: f64, rho: f64, sigma2: f64, lambda: f64) -> ModelParams<f64> {
        ModelParams::new(alpha, rho, sigma2, lambda).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(ModelParams::new(0.0, 1.0, 0.1, 0.1).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.1, 0.1).is_err());
        assert!(ModelParams::new(1.0, 1.0, -0.1, 0.1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.1, -0.1).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, 0.1, 0.1).is_err());
        assert_eq!(params(1.0, 1.0, 0.0, 0.0).effective_lambda(), LAMBDA_FLOOR);
    }

    #[test]
    fn gen_error_examples() {
        let p = params(2.0, 1.0, 1.0, 0.0);
        let perfect = SaddleState::from_order(1.0, 1.0, 0.3, &p);
        assert_eq!(gen_error(&perfect, &p), 0.5);
        let null = SaddleState::from_order(0.0, 0.0, 0.3, &p);
        assert_eq!(gen_error(&null, &p), 1.0);
        let ridge = SaddleState::from_order(2.0, 1.0, 1.0, &p);
        assert_eq!(gen_error(&ridge, &p), 1.0);
    }

    #[test]
    fn ridge_fixed_point_closed_form() {
        // α = 2, ρ = σ² = 1, λ → 0: χ = 1/(α−1) = 1, m = ρ, Q = 2, Ē_g = 1.
        let p = params(2.0, 1.0, 1.0, 1e-6);
        let sol = ridge_saddle(&p);
        assert_eq!(sol.phase, Phase::RS);
        assert!((sol.state.chi - 1.0).abs() < 1e-5);
        assert!((sol.state.m - 1.0).abs() < 1e-5);
        assert!((sol.state.q - 2.0).abs() < 1e-5);
        assert!((sol.gen_error - 1.0).abs() < 1e-3);

        let sol = ridge_saddle(&params(4.0, 1.0, 1.0, 1e-6));
        assert!((sol.gen_error - 2.0 / 3.0).abs() < 1e-3);

        let sol = ridge_saddle(&params(3.0, 1.0, 0.0, 1e-9));
        assert!(sol.gen_error.abs() < 1e-6);
        assert_eq!(ridgeless_gen_error(2.0, 1.0), Some(1.0));
        assert_eq!(ridgeless_gen_error(0.5, 1.0), None);
    }

    #[test]
    fn ridge_interpolation_peak_does_not_converge_cleanly() {
        // At α = 1 and λ at the floor the fixed point sits near χ ~ 1/√λ with
        // a contraction factor close to one.
        let sol = solve(
            &params(1.0, 1.0, 1.0, 0.0),
            &Identity,
            &SolveOptions {
                max_iter: 2_000,
                ..SolveOptions::default()
            },
        );
        assert_eq!(sol.phase, Phase::NonConverged);
    }

    #[test]
    fn sign_codebook_q_is_omega_squared() {
        let p = params(1.5, 1.0, 0.01, 0.1);
        let cb = Codebook::uniform(1, 2.0).unwrap();
        let s = saddle_step(&SaddleState::initial(&p), &p, &cb, 1.0).unwrap();
        assert!((s.q - 4.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_relations() {
        let p = params(1.4, 1.0, 1e-4, 0.01);
        let cb = Codebook::uniform(6, 1.8).unwrap();
        let opts = SolveOptions::default();
        let sol = solve(&p, &cb, &opts);
        assert!(sol.converged());
        let s = sol.state;
        assert!((s.q_hat - 1.4 / (1.0 + s.chi)).abs() < 1e-15);
        assert_eq!(s.q_hat, s.m_hat);
        let again = saddle_step(&s, &p, &cb, 1.0).unwrap();
        assert!(scaled_change(&again, &s) < 10.0 * opts.tol);
        assert!(sol.gen_error >= 0.5 * p.sigma2);
        assert!(s.chi >= 0.0 && s.q >= 0.0 && s.chi_hat >= 0.0);
    }

    #[test]
    fn zero_data_limit() {
        let p = params(1e-6, 1.0, 0.3, 0.01);
        let cb = Codebook::uniform(4, 2.0).unwrap();
        let sol = solve(&p, &cb, &SolveOptions::default());
        assert!(sol.converged());
        assert!(sol.state.m.abs() < 1e-5);
        assert!((sol.gen_error - 0.5 * (sol.state.q + 1.0 + 0.3)).abs() < 1e-5);
    }

    #[test]
    fn null_codebook_limit() {
        let p = params(1.5, 1.0, 0.2, 0.01);
        let sol = solve(&p, &Codebook::uniform(3, 1e-7).unwrap(), &SolveOptions::default());
        // Q decays geometrically from its starting value, so it sits at the tolerance.
        assert!(sol.state.q < 1e-9 && sol.state.m.abs() < 1e-6, "{sol:?}");
        assert!((sol.gen_error - 0.6).abs() < 1e-6);
    }

    #[test]
    fn f32_solve() {
        let p = ModelParams::<f32>::new(2.0, 1.0, 1.0, 1e-4).unwrap();
        let sol = solve(
            &p,
            &Identity,
            &SolveOptions {
                tol: 1e-6,
                ..SolveOptions::default()
            },
        );
        assert!((sol.gen_error - 1.0).abs() < 1e-2);
    }
}
