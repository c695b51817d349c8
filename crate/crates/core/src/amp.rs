//! Approximate message passing for quantized ridge regression.
//!
//! One iteration, with `X∘X` the entrywise square of the design:
//!
//! ```text
//! V_μ   = Σ_i X²_μi v_i
//! 1/Σ_i = Σ_μ X²_μi / (V_μ + 1)
//! θ_μ   = (X m̄)_μ − V_μ (y_μ − θ_μ^old) / (V_μ^old + 1)
//! R_i   = m̄_i + Σ_i Σ_μ X_μi (y_μ − θ_μ) / (V_μ^old + 1)
//! m̄_i, v_i ← mean and u-derivative of the single-body posterior at
//!             field u = R_i/Σ_i and curvature Θ = λ + 1/Σ_i
//! ```
//!
//! The hard quantizer has zero derivative almost everywhere, so the inner
//! loop uses the inverse-temperature `β` posterior and only the reported
//! estimate is hard-quantized.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::data::{Dataset, NormalStream, STREAM_AMP_INIT};
use crate::error::{Error, Result};
use crate::scalar::{cst, Real};
use crate::single_body::phi_beta;

/// Largest inverse temperature reached by annealing.
pub const MAX_BETA: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct AmpConfig<T> {
    pub beta: T,
    pub t_max: usize,
    /// Weight of the fresh `(m̄, v)` in each update.
    pub damping: T,
    /// Threshold on `(1/N)‖m̄ᵗ − m̄ᵗ⁻¹‖²`.
    pub tol: T,
    /// Per-iteration factor `r` in `βₜ = β rᵗ`.
    pub anneal: Option<T>,
    pub seed: u64,
    pub lambda: T,
}

impl<T: Real> Default for AmpConfig<T> {
    fn default() -> Self {
        Self {
            beta: cst(100.0),
            t_max: 1000,
            damping: cst(0.7),
            tol: cst(1e-8),
            anneal: None,
            seed: 0,
            lambda: cst(0.01),
        }
    }
}

impl<T: Real> AmpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(r) = self.anneal {
            if !(r > T::zero() && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("anneal factor must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Inverse temperature used at iteration `t ≥ 1`.
    pub fn beta_at(&self, t: usize) -> T {
        match self.anneal {
            None => self.beta,
            Some(r) => (self.beta * r.powi(t.min(i32::MAX as usize) as i32)).min(cst(MAX_BETA)),
        }
    }
}

/// Messages after iteration `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct AmpState<T> {
    pub m_bar: Vec<T>,
    pub v: Vec<T>,
    pub v_mu: Vec<T>,
    pub theta_mu: Vec<T>,
    pub sigma: Vec<T>,
    pub r: Vec<T>,
    pub t: usize,
}

impl<T: Real> AmpState<T> {
    /// State before the first iteration, with `V = θ = 0`.
    pub fn new(m_bar: Vec<T>, v: Vec<T>, m: usize) -> Result<Self> {
        if m_bar.len() != v.len() {
            return Err(Error::DimensionMismatch(format!("m_bar {} vs v {}", m_bar.len(), v.len())));
        }
        let n = m_bar.len();
        Ok(Self {
            m_bar,
            v,
            v_mu: vec![T::zero(); m],
            theta_mu: vec![T::zero(); m],
            sigma: vec![T::infinity(); n],
            r: vec![T::zero(); n],
            t: 0,
        })
    }

    /// `m̄⁰ ~ N(0, 1)` from the seed's AMP stream and `v⁰ = 1`.
    pub fn initial(n: usize, m: usize, seed: u64) -> Self {
        let m_bar = NormalStream::new(seed, STREAM_AMP_INIT).fill(n, 1.0);
        Self::new(m_bar, vec![T::one(); n], m).expect("lengths agree")
    }

    pub fn mean_v(&self) -> T {
        mean(&self.v)
    }
}

fn mean<T: Real>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / cst(x.len().max(1) as f64)
}

fn check_finite<T: Real>(xs: &[T], iteration: usize, field: &'static str) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::AmpNonFinite {
            iteration,
            index,
            field,
        }),
        None => Ok(()),
    }
}

/// Performs one AMP iteration at inverse temperature `cfg.beta_at(t + 1)`.
pub fn amp_step<T: Real>(s: &AmpState<T>, d: &Dataset<T>, cb: &Codebook<T>, cfg: &AmpConfig<T>) -> Result<AmpState<T>> {
    let (n, m) = (d.n(), d.m());
    if s.m_bar.len() != n || s.v.len() != n || s.v_mu.len() != m || s.theta_mu.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "state sized for N={}, M={} but data is N={n}, M={m}",
            s.m_bar.len(),
            s.v_mu.len()
        )));
    }
    let t = s.t + 1;
    let one = T::one();
    let (xm, v_mu) = d.x.matvec_pair(&s.m_bar, &s.v);
    check_finite(&v_mu, t, "V")?;
    let theta_mu: Vec<T> = (0..m)
        .map(|mu| xm[mu] - v_mu[mu] * (d.y[mu] - s.theta_mu[mu]) / (s.v_mu[mu] + one))
        .collect();
    check_finite(&theta_mu, t, "theta")?;
    let resid: Vec<T> = (0..m).map(|mu| (d.y[mu] - theta_mu[mu]) / (s.v_mu[mu] + one)).collect();
    let inv_v: Vec<T> = v_mu.iter().map(|&x| one / (x + one)).collect();
    let (xr, inv_sigma) = d.x.tmatvec_pair(&resid, &inv_v);
    let sigma: Vec<T> = inv_sigma.iter().map(|&x| one / x).collect();
    check_finite(&sigma, t, "Sigma")?;
    let r: Vec<T> = (0..n).map(|i| s.m_bar[i] + sigma[i] * xr[i]).collect();
    check_finite(&r, t, "R")?;

    let beta = cfg.beta_at(t);
    let keep = one - cfg.damping;
    let mut m_bar = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let post = phi_beta(r[i] * inv_sigma[i], cfg.lambda + inv_sigma[i], cb, beta);
        m_bar.push(cfg.damping * post.mean + keep * s.m_bar[i]);
        v.push(cfg.damping * post.dmean_du + keep * s.v[i]);
    }
    check_finite(&m_bar, t, "m_bar")?;
    check_finite(&v, t, "v")?;
    Ok(AmpState {
        m_bar,
        v,
        v_mu,
        theta_mu,
        sigma,
        r,
        t,
    })
}

/// Hard-quantized estimate `φ*(R_i/Σ_i, λ + 1/Σ_i)`.
pub fn hard_estimate<T: Real>(s: &AmpState<T>, cb: &Codebook<T>, lambda: T) -> Result<Vec<T>> {
    s.r.iter()
        .zip(&s.sigma)
        .map(|(&r, &sig)| cb.quantize(r / (lambda * sig + T::one())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct AmpTrace<T> {
    pub t: usize,
    /// Mean of `v_i`, the counterpart of the SE variable `V`.
    pub v_mean: T,
    /// `(1/N)‖m̄ − w⁰‖²`, the counterpart of the SE variable `E`.
    pub e_emp: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct AmpResult<T> {
    pub w_hat: Vec<T>,
    pub gen_error: T,
    pub converged: bool,
    pub iterations: usize,
    pub trajectory: Vec<AmpTrace<T>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpSummary {
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub gen_error: f64,
}

impl<T: Real> AmpResult<T> {
    pub fn summary(&self) -> AmpSummary {
        AmpSummary {
            seed: self.seed,
            converged: self.converged,
            iterations: self.iterations,
            gen_error: self.gen_error.to_f64().unwrap_or(f64::NAN),
        }
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.summary())?)
    }

    /// Writes the `t,V_mean,E_emp` table.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "V_mean", "E_emp"])?;
        for tr in &self.trajectory {
            w.write_record([tr.t.to_string(), tr.v_mean.to_string(), tr.e_emp.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Runs AMP from [`AmpState::initial`] until the mean-square change of `m̄`
/// drops below `cfg.tol` or `cfg.t_max` iterations elapse.
pub fn amp_run<T: Real>(d: &Dataset<T>, cb: &Codebook<T>, cfg: &AmpConfig<T>) -> Result<AmpResult<T>> {
    cfg.validate()?;
    if cfg.t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    let n = d.n();
    let scale = cst::<T>(n as f64);
    let mut state = AmpState::initial(n, d.m(), cfg.seed);
    let mut trajectory = Vec::new();
    let mut converged = false;
    while state.t < cfg.t_max {
        let next = amp_step(&state, d, cb, cfg)?;
        let change = sq_dist(&next.m_bar, &state.m_bar) / scale;
        state = next;
        trajectory.push(AmpTrace {
            t: state.t,
            v_mean: state.mean_v(),
            e_emp: sq_dist(&state.m_bar, &d.w0) / scale,
        });
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    let w_hat = hard_estimate(&state, cb, cfg.lambda)?;
    let gen_error = empirical_gen_error(&w_hat, &d.w0, d.sigma2)?;
    Ok(AmpResult {
        w_hat,
        gen_error,
        converged,
        iterations: state.t,
        trajectory,
        seed: cfg.seed,
    })
}

/// `½(σ² + ‖ŵ − w⁰‖²/N)`, the generalization error of `ŵ` on a fresh
/// sample with `x ~ N(0, I/N)`.
pub fn empirical_gen_error<T: Real>(w_hat: &[T], w0: &[T], sigma2: T) -> Result<T> {
    if w_hat.len() != w0.len() || w0.is_empty() {
        return Err(Error::DimensionMismatch(format!("w_hat {} vs w0 {}", w_hat.len(), w0.len())));
    }
    Ok(cst::<T>(0.5) * (sigma2 + sq_dist(w_hat, w0) / cst(w0.len() as f64)))
}

/// Empirical risk `½‖y − Xφ(w)‖² + (λ/2)‖φ(w)‖²`.
pub fn energy<T: Real>(w: &[T], d: &Dataset<T>, cb: &Codebook<T>, lambda: T) -> Result<T> {
    if w.len() != d.n() {
        return Err(Error::DimensionMismatch(format!("w has {}, N={}", w.len(), d.n())));
    }
    let q = cb.quantize_vec(w)?;
    Ok(energy_quantized(&q, d, lambda))
}

/// Risk of a vector that already lies on the codebook.
pub fn energy_quantized<T: Real>(q: &[T], d: &Dataset<T>, lambda: T) -> T {
    let half = cst::<T>(0.5);
    let fit = sq_dist(&d.x.matvec(q), &d.y);
    let norm: T = q.iter().map(|&x| x * x).sum();
    half * fit + half * lambda * norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Matrix};

    fn fixture() -> (Dataset<f64>, Codebook<f64>) {
        let x = Matrix::from_rows(&[vec![0.5, -0.3], vec![0.2, 0.8], vec![-0.6, 0.1]]).unwrap();
        let d = Dataset::from_parts(x, vec![0.4, -0.7, 0.25], vec![0.0, 0.0], 1.0, 0.0, 0).unwrap();
        (d, Codebook::uniform(2, 1.0).unwrap())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn one_step_matches_reference() {
        // Reference values from a 50-digit transcription of the update.
        let (d, cb) = fixture();
        let cfg = AmpConfig {
            beta: 5.0,
            lambda: 0.1,
            ..AmpConfig::default()
        };
        let s0 = AmpState::new(vec![0.3, -0.2], vec![1.0, 1.0], 3).unwrap();
        let s1 = amp_step(&s0, &d, &cb, &cfg).unwrap();
        close(&s1.v_mu, &[0.34, 0.68, 0.37], 1e-15);
        close(&s1.sigma, &[2.113_492_829_261_874_5, 2.195_795_433_186_574], 1e-14);
        close(&s1.theta_mu, &[0.074, 0.376, -0.2925], 1e-15);
        close(&s1.r, &[-0.498_266_241_612_210_0, -2.185_767_600_002_278_3], 1e-14);
        close(&s1.m_bar, &[-0.175_837_101_164_575_93, -0.741_111_000_548_053_4], 1e-14);
        close(&s1.v, &[1.402_330_604_229_493_3, 0.392_220_155_007_689_2], 1e-14);
        assert_eq!(s1.t, 1);
    }

    #[test]
    fn zero_variance_gives_zero_onsager_width() {
        let (d, cb) = fixture();
        let s0 = AmpState::new(vec![0.3, -0.2], vec![0.0, 0.0], 3).unwrap();
        let s1 = amp_step(&s0, &d, &cb, &AmpConfig::default()).unwrap();
        assert!(s1.v_mu.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn energy_fixture() {
        let (d, cb) = fixture();
        let e = energy(&[1.0, 0.0], &d, &cb, 0.1).unwrap();
        assert!((e - 0.82125).abs() < 1e-15);
        let zero = Dataset::from_parts(d.x.clone(), vec![0.0; 3], vec![0.0; 2], 1.0, 0.0, 0).unwrap();
        assert_eq!(energy(&[0.0, 0.0], &zero, &cb, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn gen_error_examples() {
        let w0 = vec![1.0, -1.0, 2.0];
        assert_eq!(empirical_gen_error(&w0, &w0, 0.2).unwrap(), 0.1);
        let g = empirical_gen_error(&[0.0; 3], &w0, 0.2).unwrap();
        assert!((g - 1.1_f64).abs() < 1e-15);
        assert!(empirical_gen_error(&[0.0; 2], &w0, 0.2).is_err());
    }

    #[test]
    fn single_weight_even_codebook() {
        // N = M = 1, x = 1, y = 0, λ = 0: zero is a level and the global minimum.
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let d = Dataset::from_parts(x, vec![0.0], vec![0.0], 1.0, 0.0, 0).unwrap();
        let cb = Codebook::uniform(4, 2.0).unwrap();
        let res = amp_run(
            &d,
            &cb,
            &AmpConfig {
                lambda: 0.0,
                ..AmpConfig::default()
            },
        )
        .unwrap();
        assert_eq!(res.w_hat, vec![0.0]);
        assert_eq!(energy(&res.w_hat, &d, &cb, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn estimates_are_levels_and_runs_are_deterministic() {
        let d = generate::<f64>(200, 300, 1.0, 0.01, 4).unwrap();
        let cb = Codebook::uniform(6, 2.0).unwrap();
        let cfg = AmpConfig {
            seed: 4,
            t_max: 100,
            ..AmpConfig::default()
        };
        let a = amp_run(&d, &cb, &cfg).unwrap();
        let b = amp_run(&d, &cb, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.w_hat.iter().all(|w| cb.levels().contains(w)));
        let json = a.summary_json().unwrap();
        assert!(json.starts_with("{\"seed\":4,\"converged\":"));
    }

    #[test]
    fn annealing_schedule() {
        let cfg = AmpConfig {
            beta: 10.0,
            anneal: Some(2.0),
            ..AmpConfig::default()
        };
        assert_eq!(cfg.beta_at(1), 20.0);
        assert_eq!(cfg.beta_at(3), 80.0);
        assert_eq!(cfg.beta_at(100), MAX_BETA);
        assert_eq!(AmpConfig::<f64>::default().beta_at(50), 100.0);
    }

    #[test]
    fn rejects_bad_config() {
        let (d, cb) = fixture();
        for cfg in [
            AmpConfig {
                beta: 0.0,
                ..AmpConfig::default()
            },
            AmpConfig {
                damping: 1.5,
                ..AmpConfig::default()
            },
            AmpConfig {
                t_max: 0,
                ..AmpConfig::default()
            },
        ] {
            assert!(amp_run(&d, &cb, &cfg).is_err());
        }
    }
}
