use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use quantreg::codebook::QuantScheme;
use quantreg::experiments::{default_omega_grid, linear_grid, log_grid, OMEGA_POINTS, OMEGA_RANGE};
use quantreg::{AmpConfig, Codebook, ModelParams};
use serde::Deserialize;

/// Options shared by every subcommand. A `--config` JSON file may supply
/// any of them under the same (snake_case) names; flags given on the command
/// line take precedence.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Quantization scheme.
    #[arg(long, global = true)]
    pub scheme: Option<QuantScheme>,
    /// Number of partitions; the codebook has n_p + 1 levels.
    #[arg(long = "np", global = true)]
    pub np: Option<usize>,
    /// Clipping range.
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    /// Sample ratio M/N.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Teacher weight variance.
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Noise variance.
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,
    /// Ridge coefficient.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Comma-separated n_p values for phase diagrams and sweeps.
    #[arg(long = "np-list", global = true, value_delimiter = ',')]
    pub np_list: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub omega_min: Option<f64>,
    #[arg(long, global = true)]
    pub omega_max: Option<f64>,
    #[arg(long, global = true)]
    pub omega_points: Option<usize>,
    #[arg(long, global = true)]
    pub alpha_min: Option<f64>,
    #[arg(long, global = true)]
    pub alpha_max: Option<f64>,
    #[arg(long, global = true)]
    pub alpha_points: Option<usize>,
    /// Disable warm starts along the sweep axis.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub cold: Option<bool>,

    /// Saddle-point damping.
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    /// Number of weights for AMP and oracle instances.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// AMP inverse temperature.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<usize>,
    /// AMP damping on the estimates and variances.
    #[arg(long, global = true)]
    pub amp_damping: Option<f64>,
    #[arg(long, global = true)]
    pub amp_tol: Option<f64>,
    /// Per-iteration multiplier of beta.
    #[arg(long, global = true)]
    pub anneal: Option<f64>,
    /// Number of independent AMP runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl Settings {
    pub fn load(path: &PathBuf) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(mut self, flags: &Settings) -> Self {
        overlay!(self, flags; scheme, np, omega, alpha, rho, sigma2, lambda, seed, np_list,
            omega_min, omega_max, omega_points, alpha_min, alpha_max, alpha_points, cold,
            damping, tol, max_iter, n, beta, t_max, amp_damping, amp_tol, anneal, runs);
        self
    }

    pub fn scheme(&self) -> QuantScheme {
        self.scheme.unwrap_or(QuantScheme::Uniform)
    }

    pub fn params(&self, alpha: f64, sigma2: f64, lambda: f64) -> anyhow::Result<ModelParams<f64>> {
        Ok(ModelParams::new(
            self.alpha.unwrap_or(alpha),
            self.rho.unwrap_or(1.0),
            self.sigma2.unwrap_or(sigma2),
            self.lambda.unwrap_or(lambda),
        )?)
    }

    pub fn codebook(&self, n_p: usize, omega: f64) -> anyhow::Result<Codebook<f64>> {
        Ok(Codebook::new(self.scheme(), self.np.unwrap_or(n_p), self.omega.unwrap_or(omega))?)
    }

    pub fn solve_options(&self) -> anyhow::Result<quantreg::SolveOptions<f64>> {
        let d = quantreg::SolveOptions::default();
        let o = quantreg::SolveOptions {
            damping: self.damping.unwrap_or(d.damping),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            init: None,
        };
        if !(o.damping > 0.0 && o.damping <= 1.0) {
            bail!(quantreg::Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", o.damping)));
        }
        if !(o.tol > 0.0) || o.max_iter == 0 {
            bail!(quantreg::Error::InvalidParameter("tol must be positive and max_iter at least 1".into()));
        }
        Ok(o)
    }

    pub fn omega_grid(&self) -> anyhow::Result<Vec<f64>> {
        if self.omega_min.is_none() && self.omega_max.is_none() && self.omega_points.is_none() {
            return Ok(default_omega_grid());
        }
        Ok(log_grid(
            self.omega_min.unwrap_or(OMEGA_RANGE.0),
            self.omega_max.unwrap_or(OMEGA_RANGE.1),
            self.omega_points.unwrap_or(OMEGA_POINTS),
        )?)
    }

    pub fn alpha_grid(&self) -> anyhow::Result<Vec<f64>> {
        Ok(linear_grid(
            self.alpha_min.unwrap_or(0.3),
            self.alpha_max.unwrap_or(2.0),
            self.alpha_points.unwrap_or(171),
        )?)
    }

    pub fn np_list(&self, default: &[usize]) -> Vec<usize> {
        match (&self.np_list, self.np) {
            (Some(l), _) => l.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => default.to_vec(),
        }
    }

    pub fn amp_config(&self) -> anyhow::Result<AmpConfig<f64>> {
        let d = AmpConfig::default();
        let cfg = AmpConfig {
            beta: self.beta.unwrap_or(d.beta),
            t_max: self.t_max.unwrap_or(d.t_max),
            damping: self.amp_damping.unwrap_or(d.damping),
            tol: self.amp_tol.unwrap_or(d.tol),
            anneal: self.anneal,
            seed: self.seed.unwrap_or(0),
            lambda: self.lambda.unwrap_or(d.lambda),
        };
        cfg.validate()?;
        if cfg.t_max == 0 {
            bail!(quantreg::Error::InvalidParameter("t_max must be at least 1".into()));
        }
        Ok(cfg)
    }
}
