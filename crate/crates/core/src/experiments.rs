//! Parameter sweeps over the replica solution and AMP ensembles, producing
//! the tables behind the phase diagrams and error curves.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{amp_run, AmpConfig, AmpSummary};
use crate::codebook::{bits_of, Codebook, QuantScheme};
use crate::data::generate;
use crate::error::{Error, Result};
use crate::replica::{ridge_saddle, solve, ModelParams, Phase, ReplicaSolution, SolveOptions};
use crate::single_body::Identity;

/// Default number of points on the ω axis.
pub const OMEGA_POINTS: usize = 60;
pub const OMEGA_RANGE: (f64, f64) = (0.1, 10.0);

/// One replica solution as a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    /// `uniform`, `nonuniform` or `ridge`.
    pub scheme: String,
    pub n_p: Option<usize>,
    pub b: Option<f64>,
    pub omega: Option<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub sigma2: f64,
    pub lambda: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub m: f64,
    pub chi: f64,
    #[serde(rename = "E_g")]
    pub e_g: f64,
    pub stability: f64,
    pub phase: Phase,
    pub iters: usize,
    pub residual: f64,
}

impl SolutionRow {
    pub fn new(cb: Option<&Codebook<f64>>, p: &ModelParams<f64>, sol: &ReplicaSolution<f64>) -> Self {
        Self {
            scheme: cb.map_or_else(|| "ridge".to_string(), |c| c.scheme().to_string()),
            n_p: cb.map(Codebook::n_p),
            b: cb.map(Codebook::bits),
            omega: cb.map(Codebook::omega),
            alpha: p.alpha,
            rho: p.rho,
            sigma2: p.sigma2,
            lambda: p.lambda,
            q: sol.state.q,
            m: sol.state.m,
            chi: sol.state.chi,
            e_g: sol.gen_error,
            stability: sol.stability,
            phase: sol.phase,
            iters: sol.iterations,
            residual: sol.residual,
        }
    }

    pub fn converged(&self) -> bool {
        self.phase != Phase::NonConverged
    }
}

pub fn write_csv<W: Write, R: Serialize>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `n` points spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(Error::InvalidParameter(format!("log grid needs 0 < lo < hi and n >= 2, got {lo}, {hi}, {n}")));
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64),
        })
        .collect())
}

/// `n` evenly spaced points between `lo` and `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(hi > lo && n >= 2) {
        return Err(Error::InvalidParameter(format!("linear grid needs lo < hi and n >= 2, got {lo}, {hi}, {n}")));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

pub fn default_omega_grid() -> Vec<f64> {
    log_grid(OMEGA_RANGE.0, OMEGA_RANGE.1, OMEGA_POINTS).expect("valid default grid")
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

/// Solves along an ω grid at fixed `(scheme, n_p)`. With `warm` each cell
/// starts from the previous converged cell.
pub fn scan_omega(
    scheme: QuantScheme,
    n_p: usize,
    omegas: &[f64],
    p: &ModelParams<f64>,
    opts: &SolveOptions<f64>,
    warm: bool,
) -> Result<Vec<SolutionRow>> {
    check_grid(omegas, "omega")?;
    p.validate()?;
    let mut rows = Vec::with_capacity(omegas.len());
    let mut init = None;
    for &omega in omegas {
        let cb = Codebook::new(scheme, n_p, omega)?;
        let o = SolveOptions {
            init: if warm { init.or(opts.init) } else { opts.init },
            ..*opts
        };
        let sol = solve(p, &cb, &o);
        if sol.converged() {
            init = Some(sol.order());
        }
        rows.push(SolutionRow::new(Some(&cb), p, &sol));
    }
    Ok(rows)
}

/// Replica phases on the `(n_p, ω)` plane, ordered by `n_p` then ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub rows: Vec<SolutionRow>,
}

impl PhaseDiagram {
    pub fn count(&self, phase: Phase) -> usize {
        self.rows.iter().filter(|r| r.phase == phase).count()
    }

    pub fn cell(&self, n_p: usize, omega: f64) -> Option<&SolutionRow> {
        self.rows
            .iter()
            .filter(|r| r.n_p == Some(n_p))
            .min_by(|a, b| {
                let da = (a.omega.unwrap_or(f64::NAN) - omega).abs();
                let db = (b.omega.unwrap_or(f64::NAN) - omega).abs();
                da.total_cmp(&db)
            })
    }
}

pub fn phase_diagram(
    np_list: &[usize],
    omegas: &[f64],
    p: &ModelParams<f64>,
    scheme: QuantScheme,
    opts: &SolveOptions<f64>,
) -> Result<PhaseDiagram> {
    if np_list.is_empty() {
        return Err(Error::InvalidParameter("n_p list is empty".into()));
    }
    let per_np = np_list
        .par_iter()
        .map(|&n_p| scan_omega(scheme, n_p, omegas, p, opts, true))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram {
        rows: per_np.into_iter().flatten().collect(),
    })
}

/// ω sweeps for every `(scheme, n_p)` combination, in that order.
pub fn omega_sweep(
    schemes: &[QuantScheme],
    np_list: &[usize],
    omegas: &[f64],
    p: &ModelParams<f64>,
    opts: &SolveOptions<f64>,
    warm: bool,
) -> Result<Vec<SolutionRow>> {
    let jobs: Vec<(QuantScheme, usize)> = schemes
        .iter()
        .flat_map(|&s| np_list.iter().map(move |&n| (s, n)))
        .collect();
    if jobs.is_empty() {
        return Err(Error::InvalidParameter("no (scheme, n_p) combination requested".into()));
    }
    let parts = jobs
        .par_iter()
        .map(|&(s, n)| scan_omega(s, n, omegas, p, opts, warm))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Indices `i` with `v[i−1] > v[i] < v[i+1]`; plateaus count once at their
/// first point.
pub fn interior_minima(v: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = v.len();
    let mut i = 1;
    while i + 1 < n {
        if v[i] < v[i - 1] {
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] > v[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Vertex and second derivative of the parabola through three points.
pub fn parabola(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let (d1, d2) = (x[1] - x[0], x[2] - x[1]);
    if !(d1 > 0.0 && d2 > 0.0) {
        return None;
    }
    let s1 = (y[1] - y[0]) / d1;
    let s2 = (y[2] - y[1]) / d2;
    let a = (s2 - s1) / (x[2] - x[0]);
    if a == 0.0 {
        return None;
    }
    // Slope at the midpoint of the outer interval equals the secant slope.
    let b = s1 - a * (x[0] + x[1]);
    Some((-b / (2.0 * a), 2.0 * a))
}

/// Second derivative at the interior minimum divided by the minimum value,
/// from the parabola through the minimum and its neighbours.
pub fn min_curvature_ratio(x: &[f64], y: &[f64]) -> Option<f64> {
    let mins = interior_minima(y);
    let &i = mins.first()?;
    let (_, curv) = parabola([x[i - 1], x[i], x[i + 1]], [y[i - 1], y[i], y[i + 1]])?;
    Some(curv / y[i])
}

/// Grid argmax refined by the parabola through its neighbours. Falls back
/// to the grid point at the boundary.
pub fn refine_peak(x: &[f64], y: &[f64]) -> Option<f64> {
    let (i, _) = y
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if i == 0 || i + 1 == x.len() {
        return Some(x[i]);
    }
    match parabola([x[i - 1], x[i], x[i + 1]], [y[i - 1], y[i], y[i + 1]]) {
        Some((v, c)) if c < 0.0 && v >= x[i - 1] && v <= x[i + 1] => Some(v),
        _ => Some(x[i]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweep {
    pub rows: Vec<SolutionRow>,
    /// Refined argmax of `E_g` over converged cells.
    pub peak: Option<f64>,
}

/// α sweep with warm starts; `cb = None` sweeps the unquantized ridge.
pub fn alpha_sweep(
    cb: Option<&Codebook<f64>>,
    alphas: &[f64],
    p: &ModelParams<f64>,
    opts: &SolveOptions<f64>,
) -> Result<AlphaSweep> {
    check_grid(alphas, "alpha")?;
    let mut rows = Vec::with_capacity(alphas.len());
    let mut init = None;
    for &alpha in alphas {
        let q = ModelParams::new(alpha, p.rho, p.sigma2, p.lambda)?;
        let o = SolveOptions {
            init: init.or(opts.init),
            ..*opts
        };
        let sol = match cb {
            Some(c) => solve(&q, c, &o),
            None => solve(&q, &Identity, &o),
        };
        if sol.converged() {
            init = Some(sol.order());
        }
        rows.push(SolutionRow::new(cb, &q, &sol));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.converged()).map(|r| (r.alpha, r.e_g)).unzip();
    Ok(AlphaSweep {
        peak: refine_peak(&xs, &ys),
        rows,
    })
}

/// Both schemes at every `n_p`, followed by the ridge reference row.
pub fn bits_sweep(
    np_list: &[usize],
    omega: f64,
    p: &ModelParams<f64>,
    opts: &SolveOptions<f64>,
) -> Result<Vec<SolutionRow>> {
    if np_list.is_empty() {
        return Err(Error::InvalidParameter("n_p list is empty".into()));
    }
    p.validate()?;
    let jobs: Vec<(QuantScheme, usize)> = [QuantScheme::Uniform, QuantScheme::NonUniform]
        .iter()
        .flat_map(|&s| np_list.iter().map(move |&n| (s, n)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(s, n)| {
            let cb = Codebook::new(s, n, omega)?;
            Ok(SolutionRow::new(Some(&cb), p, &solve(p, &cb, opts)))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.push(SolutionRow::new(None, p, &ridge_saddle(p)));
    Ok(rows)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of task `index` under a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n: usize,
    pub m: usize,
    pub n_runs: usize,
    pub mean_gen_error: f64,
    /// Standard error of the mean; `None` for a single run.
    pub std_error: Option<f64>,
    pub replica_gen_error: f64,
    pub replica_phase: Phase,
    /// Whether the mean lies within `max(3·SE, 5%·replica)` of the replica
    /// value; `None` when the standard error is undefined.
    pub agreement: Option<bool>,
    pub converged_runs: usize,
    pub runs: Vec<AmpSummary>,
}

/// Runs AMP on `n_runs` independent instances of size `N × round(αN)`.
/// Run `k` uses seed `derive_seed(master_seed, k)` for both the data and
/// the AMP initialization.
pub fn amp_ensemble(
    p: &ModelParams<f64>,
    cb: &Codebook<f64>,
    n_runs: usize,
    n: usize,
    cfg: &AmpConfig<f64>,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter("n_runs must be at least 1".into()));
    }
    p.validate()?;
    let m = (p.alpha * n as f64).round() as usize;
    if m == 0 {
        return Err(Error::InvalidParameter(format!("alpha={} gives M=0 at N={n}", p.alpha)));
    }
    let cfg = AmpConfig {
        lambda: p.lambda,
        ..*cfg
    };
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(master_seed, k);
            let d = generate::<f64>(n, m, p.rho, p.sigma2, seed)?;
            let res = amp_run(&d, cb, &AmpConfig { seed, ..cfg })?;
            Ok(res.summary())
        })
        .collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    let mean = runs.iter().map(|r| r.gen_error).sum::<f64>() / k;
    let std_error = (runs.len() > 1).then(|| {
        let var = runs.iter().map(|r| (r.gen_error - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    });
    let rep = solve(p, cb, &SolveOptions::default());
    let agreement = std_error.map(|se| (mean - rep.gen_error).abs() <= (3.0 * se).max(0.05 * rep.gen_error));
    Ok(EnsembleSummary {
        n,
        m,
        n_runs,
        mean_gen_error: mean,
        std_error,
        replica_gen_error: rep.gen_error,
        replica_phase: rep.phase,
        agreement,
        converged_runs: runs.iter().filter(|r| r.converged).count(),
        runs,
    })
}

/// `b = log₂(n_p + 2)` for each entry.
pub fn bits_axis(np_list: &[usize]) -> Vec<f64> {
    np_list.iter().map(|&n| bits_of(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, sigma2: f64, lambda: f64) -> ModelParams<f64> {
        ModelParams::new(alpha, 1.0, sigma2, lambda).unwrap()
    }

    #[test]
    fn grids() {
        let g = default_omega_grid();
        assert_eq!(g.len(), 60);
        assert_eq!((g[0], g[59]), (0.1, 10.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g[1] / g[0] - g[59] / g[58]).abs() < 1e-12);
        assert_eq!(linear_grid(0.0, 1.0, 5).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(log_grid(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn minima_detection() {
        assert_eq!(interior_minima(&[3.0, 2.0, 1.0, 2.0, 3.0]), vec![2]);
        assert_eq!(interior_minima(&[3.0, 1.0, 1.0, 2.0]), vec![1]);
        assert!(interior_minima(&[1.0, 2.0, 3.0]).is_empty());
        assert_eq!(interior_minima(&[2.0, 1.0, 2.0, 1.0, 2.0]), vec![1, 3]);
    }

    #[test]
    fn parabola_recovers_quadratic() {
        let f = |x: f64| 2.0 * (x - 1.3).powi(2) + 0.5;
        let x = [0.7, 1.1, 2.0];
        let (v, c) = parabola(x, x.map(f)).unwrap();
        assert!((v - 1.3).abs() < 1e-12);
        assert!((c - 4.0).abs() < 1e-12);
        let xs = [0.0, 0.5, 1.0, 1.5, 2.0];
        let ys = xs.map(|x: f64| -(x - 0.8f64).powi(2));
        assert!((refine_peak(&xs, &ys).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn null_estimator_limit_at_small_omega() {
        let p = params(1.4, 1e-4, 0.01);
        let rows = scan_omega(QuantScheme::Uniform, 4, &[1e-4, 1e-3], &p, &SolveOptions::default(), true).unwrap();
        for r in rows {
            assert!((r.e_g - 0.5 * (1.0 + 1e-4)).abs() < 2e-3, "{}", r.e_g);
        }
    }

    #[test]
    fn warm_and_cold_agree() {
        let p = params(1.4, 1e-4, 0.01);
        let g = log_grid(0.3, 3.0, 12).unwrap();
        let opts = SolveOptions::default();
        let warm = scan_omega(QuantScheme::Uniform, 6, &g, &p, &opts, true).unwrap();
        let cold = scan_omega(QuantScheme::Uniform, 6, &g, &p, &opts, false).unwrap();
        for (a, b) in warm.iter().zip(&cold) {
            if a.phase == Phase::RS && b.phase == Phase::RS {
                assert!((a.e_g - b.e_g).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sign_codebook_row() {
        let p = params(1.5, 0.01, 0.1);
        let rows = bits_sweep(&[1, 2], 1.5, &p, &SolveOptions::default()).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[4].scheme, "ridge");
        let sign = &rows[0];
        assert_eq!((sign.n_p, sign.b), (Some(1), Some(3f64.log2())));
        assert!((sign.q - 2.25).abs() < 1e-9);
    }

    #[test]
    fn csv_header() {
        let p = params(1.5, 0.01, 0.1);
        let rows = bits_sweep(&[2], 1.0, &p, &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "scheme,n_p,b,omega,alpha,rho,sigma2,lambda,Q,m,chi,E_g,stability,phase,iters,residual"
        );
        assert!(text.lines().last().unwrap().starts_with("ridge,,,,1.5,"));
    }

    #[test]
    fn seeds_differ() {
        let s: Vec<u64> = (0..100).map(|k| derive_seed(7, k)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(derive_seed(7, 3), s[3]);
    }

    #[test]
    fn single_run_ensemble_has_no_error_bar() {
        let p = params(1.4, 1e-4, 0.01);
        let cb = Codebook::uniform(6, 1.8).unwrap();
        let cfg = AmpConfig {
            t_max: 20,
            ..AmpConfig::default()
        };
        let s = amp_ensemble(&p, &cb, 1, 50, &cfg, 1).unwrap();
        assert_eq!((s.std_error, s.agreement), (None, None));
        assert_eq!(s.m, 70);
    }
}
