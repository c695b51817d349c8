//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line;
//! the process exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use quantreg::amp::energy;
use quantreg::codebook::QuantScheme;
use quantreg::data::NormalStream;
use quantreg::experiments::{
    alpha_sweep, amp_ensemble, default_omega_grid, derive_seed, interior_minima, linear_grid, log_grid,
    min_curvature_ratio, parabola, phase_diagram, scan_omega,
};
use quantreg::single_body::{gauss_chi, quadrature_average};
use quantreg::{
    amp_run, empirical_gen_error, enumerate_min, generate, se_run, solve, AmpConfig, Codebook, FieldContext, Identity,
    ModelParams, Phase, SEOptions, SolveOptions,
};

type Outcome = Result<String, String>;

fn params(alpha: f64, sigma2: f64, lambda: f64) -> ModelParams<f64> {
    ModelParams::new(alpha, 1.0, sigma2, lambda).expect("valid parameters")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_ridge_closed_form() -> Outcome {
    let opts = SolveOptions::default();
    let at = |alpha| solve(&params(alpha, 1.0, 1e-6), &Identity, &opts).gen_error;
    let (two, four) = (at(2.0), at(4.0));
    check(
        (two - 1.0).abs() <= 1e-3 && (four - 2.0 / 3.0).abs() <= 1e-3,
        format!("E_g(alpha=2) = {two:.6}, E_g(alpha=4) = {four:.6}"),
    )
}

fn c2_stein_quadrature() -> Outcome {
    let mut rng = NormalStream::new(2024, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let scheme = if rng.uniform() < 0.5 { QuantScheme::Uniform } else { QuantScheme::NonUniform };
        let n_p = 1 + (rng.uniform() * 30.0) as usize;
        let omega = 10f64.powf(-1.0 + 2.0 * rng.uniform());
        let h = 10f64.powf(-1.5 + 2.5 * rng.uniform());
        let theta = 10f64.powf(-1.5 + 2.5 * rng.uniform());
        let cb = Codebook::new(scheme, n_p, omega).map_err(|e| e.to_string())?;
        let ctx = FieldContext::new(h, theta).map_err(|e| e.to_string())?;
        let stein = quadrature_average(&ctx, &cb, 20, |d, z| z * d) / h;
        worst = worst.max((stein - gauss_chi(&ctx, &cb)).abs());
    }
    check(worst <= 1e-8, format!("max |closed form - quadrature| = {worst:.2e} over 1000 draws"))
}

fn c3_se_replica() -> Outcome {
    let cb = Codebook::uniform(6, 3.0).map_err(|e| e.to_string())?;
    let tight = SolveOptions { tol: 1e-13, ..SolveOptions::default() };
    let (mut dv, mut de) = (0.0f64, 0.0f64);
    for alpha in linear_grid(0.5, 3.0, 5).map_err(|e| e.to_string())? {
        for sigma2 in log_grid(1e-4, 1.0, 5).map_err(|e| e.to_string())? {
            let p = params(alpha, sigma2, 0.01);
            let traj = se_run(&p, &cb, &SEOptions::default()).map_err(|e| e.to_string())?;
            let rep = solve(&p, &cb, &tight);
            if !traj.converged || !rep.converged() {
                return Err(format!("no fixed point at alpha={alpha}, sigma2={sigma2}"));
            }
            let (s, st) = (traj.last(), rep.state);
            dv = dv.max((s.v - st.chi).abs());
            de = de.max((s.e - (st.q - 2.0 * st.m + p.rho)).abs());
        }
    }
    check(dv <= 1e-8 && de <= 1e-8, format!("max |V-chi| = {dv:.2e}, max |E-(Q-2m+rho)| = {de:.2e}"))
}

fn c4_phase_diagram() -> Outcome {
    let opts = SolveOptions::default();
    let omegas = default_omega_grid();
    let nps: Vec<usize> = (1..=30).collect();
    let diagram = |scheme, lambda| phase_diagram(&nps, &omegas, &params(1.5, 1e-4, lambda), scheme, &opts);
    let base = diagram(QuantScheme::Uniform, 0.0).map_err(|e| e.to_string())?;
    let reg = diagram(QuantScheme::Uniform, 1.0).map_err(|e| e.to_string())?;
    let nonu = diagram(QuantScheme::NonUniform, 0.0).map_err(|e| e.to_string())?;

    let p = params(1.5, 1e-4, 0.0);
    let mut stripes = String::new();
    let mut alternates = true;
    for n_p in 1..=8 {
        let cb = Codebook::uniform(n_p, 9.0).map_err(|e| e.to_string())?;
        let phase = solve(&p, &cb, &opts).phase;
        let expected = if n_p % 2 == 1 { Phase::RSB } else { Phase::RS };
        alternates &= phase == expected;
        stripes.push(match phase {
            Phase::RS => 'S',
            Phase::RSB => 'B',
            Phase::NonConverged => '?',
        });
    }
    let (rs0, rs1) = (base.count(Phase::RS), reg.count(Phase::RS));
    let (rsb_u, rsb_n) = (base.count(Phase::RSB), nonu.count(Phase::RSB));
    check(
        alternates && rs1 > rs0 && rsb_n <= rsb_u,
        format!(
            "omega=9 phases n_p=1..8: {stripes} (want BSBSBSBS) [{}]; RS cells lambda=1 vs 0+: {rs1} vs {rs0} [{}]; \
             RSB cells nonuniform vs uniform: {rsb_n} vs {rsb_u} [{}]",
            pass_word(alternates),
            pass_word(rs1 > rs0),
            pass_word(rsb_n <= rsb_u)
        ),
    )
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violated"
    }
}

const FIG4_NP: [usize; 8] = [1, 2, 3, 4, 6, 8, 14, 30];

/// `(n_p, number of interior minima, curvature ratio, refined argmin)`.
fn omega_scans() -> Result<Vec<(usize, usize, f64, f64)>, String> {
    let omegas = default_omega_grid();
    let p = params(1.4, 1e-4, 0.01);
    FIG4_NP
        .iter()
        .map(|&n_p| {
            let rows = scan_omega(QuantScheme::Uniform, n_p, &omegas, &p, &SolveOptions::default(), true)
                .map_err(|e| e.to_string())?;
            let eg: Vec<f64> = rows.iter().map(|r| r.e_g).collect();
            let mins = interior_minima(&eg);
            let ratio = min_curvature_ratio(&omegas, &eg).unwrap_or(f64::NAN);
            let best = mins
                .first()
                .and_then(|&i| parabola([omegas[i - 1], omegas[i], omegas[i + 1]], [eg[i - 1], eg[i], eg[i + 1]]))
                .map_or(f64::NAN, |(v, _)| v);
            Ok((n_p, mins.len(), ratio, best))
        })
        .collect()
}

fn c5_optimal_omega(scans: &[(usize, usize, f64, f64)]) -> Outcome {
    let single = scans.iter().all(|s| s.1 == 1);
    let sharpening = scans.windows(2).all(|w| w[0].2 > w[1].2);
    let table: Vec<String> = scans.iter().map(|s| format!("{}:{}/{:.2}", s.0, s.1, s.2)).collect();
    check(
        single && sharpening,
        format!("n_p:minima/curvature-ratio {}", table.join(" ")),
    )
}

fn c6_double_descent() -> Outcome {
    let opts = SolveOptions::default();
    let alphas = linear_grid(0.3, 2.0, 171).map_err(|e| e.to_string())?;
    let p = params(1.0, 1.0, 1e-6);
    let ridge = alpha_sweep(None, &alphas, &p, &opts).map_err(|e| e.to_string())?.peak.unwrap_or(f64::NAN);
    let mut shifts = Vec::new();
    for omega in [2.0, 4.0, 8.0] {
        let cb = Codebook::uniform(14, omega).map_err(|e| e.to_string())?;
        let peak = alpha_sweep(Some(&cb), &alphas, &p, &opts).map_err(|e| e.to_string())?.peak.unwrap_or(f64::NAN);
        shifts.push((omega, peak));
    }
    let toward_more_parameters = shifts.iter().all(|&(_, a)| a < ridge);
    let shrinking = shifts.windows(2).all(|w| (1.0 - w[1].1).abs() < (1.0 - w[0].1).abs());
    let list: Vec<String> = shifts.iter().map(|(w, a)| format!("omega={w}: {a:.3}")).collect();
    check(
        (ridge - 1.0).abs() <= 0.02 && toward_more_parameters && shrinking,
        format!("ridge peak alpha={ridge:.4}; uniform n_p=14 peaks {}", list.join(", ")),
    )
}

fn c7_amp_vs_theory(omega: f64) -> Outcome {
    let p = params(1.4, 1e-4, 0.01);
    let cb = Codebook::uniform(6, omega).map_err(|e| e.to_string())?;
    let cfg = AmpConfig { t_max: 200, ..AmpConfig::default() };
    let s = amp_ensemble(&p, &cb, 100, 2500, &cfg, 7).map_err(|e| e.to_string())?;
    let se = s.std_error.unwrap_or(f64::NAN);
    check(
        s.agreement == Some(true),
        format!(
            "omega={omega:.3}: AMP mean E_g {:.5} +- {se:.5} over {} runs ({} converged) vs replica {:.5} ({:?})",
            s.mean_gen_error, s.n_runs, s.converged_runs, s.replica_gen_error, s.replica_phase
        ),
    )
}

fn c8_oracle_dominance() -> Outcome {
    let omegas = default_omega_grid();
    let p = params(1.5, 0.01, 0.01);
    let opts = SolveOptions::default();
    let rows = scan_omega(QuantScheme::Uniform, 2, &omegas, &p, &opts, true).map_err(|e| e.to_string())?;
    let best = rows
        .iter()
        .filter(|r| r.converged())
        .min_by(|a, b| a.e_g.total_cmp(&b.e_g))
        .ok_or("no converged replica solution")?;
    let omega = best.omega.unwrap_or(f64::NAN);
    let cb = Codebook::uniform(2, omega).map_err(|e| e.to_string())?;
    let (mut dominated, mut sum) = (0, 0.0);
    let runs = 200;
    for k in 0..runs {
        let seed = derive_seed(8, k);
        let d = generate::<f64>(6, 9, p.rho, p.sigma2, seed).map_err(|e| e.to_string())?;
        let opt = enumerate_min(&d, &cb, p.lambda).map_err(|e| e.to_string())?;
        let res = amp_run(&d, &cb, &AmpConfig { seed, lambda: p.lambda, ..AmpConfig::default() })
            .map_err(|e| e.to_string())?;
        let amp_energy = energy(&res.w_hat, &d, &cb, p.lambda).map_err(|e| e.to_string())?;
        if opt.energy <= amp_energy + 1e-12 * amp_energy.abs().max(1.0) {
            dominated += 1;
        }
        sum += empirical_gen_error(&opt.w_hat, &d.w0, p.sigma2).map_err(|e| e.to_string())?;
    }
    let mean = sum / runs as f64;
    let rel = (mean / best.e_g - 1.0).abs();
    check(
        dominated == runs && rel <= 0.15,
        format!(
            "omega={omega:.3}: enumeration <= AMP energy on {dominated}/{runs}; mean E_g {mean:.4} vs replica {:.4} ({:.1}%)",
            best.e_g,
            100.0 * rel
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path, out: &str) -> Result<Vec<u8>, String> {
    let path = dir.join(out);
    let status = Command::new(env!("CARGO_BIN_EXE_quantreg"))
        .args(args)
        .arg("--out")
        .arg(&path)
        .stderr(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("`quantreg {}` exited with {status}", args.join(" ")));
    }
    std::fs::read(&path).map_err(|e| e.to_string())
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"alpha": 1.4, "sigma2": 0.0001, "lambda": 0.01, "seed": 42, "n": 300, "t_max": 60}"#)
        .map_err(|e| e.to_string())?;
    let cfg = config.to_str().ok_or("non-UTF-8 temp path")?;
    let traj_a = dir.path().join("traj_a.csv");
    let traj_b = dir.path().join("traj_b.csv");
    let cases: Vec<(String, Vec<String>)> = vec![
        ("solve".into(), vec!["solve".into()]),
        ("phase".into(), vec!["phase".into(), "--np-list".into(), "1,2,3,4".into()]),
        ("sweep-omega".into(), vec!["sweep-omega".into(), "--np-list".into(), "2,6".into()]),
        ("sweep-alpha".into(), vec!["sweep-alpha".into(), "--alpha-points".into(), "41".into()]),
        ("sweep-bits".into(), vec!["sweep-bits".into(), "--np-list".into(), "1,2,6,14".into()]),
        ("se".into(), vec!["se".into()]),
    ];
    let mut checked = Vec::new();
    for (name, args) in &cases {
        let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
        full.extend(["--config", cfg]);
        let a = run_cli(&full, dir.path(), &format!("{name}_a.csv"))?;
        let b = run_cli(&full, dir.path(), &format!("{name}_b.csv"))?;
        if a != b || a.is_empty() {
            return Err(format!("{name}: outputs differ or are empty"));
        }
        checked.push(name.clone());
    }
    for traj in [&traj_a, &traj_b] {
        let t = traj.to_str().ok_or("non-UTF-8 temp path")?;
        run_cli(&["amp", "--config", cfg, "--trajectory", t], dir.path(), "amp.json")?;
    }
    let (a, b) = (
        std::fs::read(&traj_a).map_err(|e| e.to_string())?,
        std::fs::read(&traj_b).map_err(|e| e.to_string())?,
    );
    if a != b || a.is_empty() {
        return Err("amp trajectory: outputs differ or are empty".into());
    }
    checked.push("amp --trajectory".into());
    check(true, format!("byte-identical repeats: {}", checked.join(", ")))
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |label: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {label} ({secs:.1}s): {detail}"),
            Err(detail) => {
                println!("FAIL {label} ({secs:.1}s): {detail}");
                failed.push(label.to_string());
            }
        }
    };
    report("C1 ridge closed form", &mut c1_ridge_closed_form);
    report("C2 Stein/quadrature equivalence", &mut c2_stein_quadrature);
    report("C3 SE/replica correspondence", &mut c3_se_replica);
    report("C4 phase-diagram stripes", &mut c4_phase_diagram);
    let scans = omega_scans();
    report("C5 optimal omega", &mut || c5_optimal_omega(scans.as_ref().map_err(Clone::clone)?));
    report("C6 double descent", &mut c6_double_descent);
    let omega = scans.as_ref().ok().and_then(|s| s.iter().find(|r| r.0 == 6)).map_or(f64::NAN, |r| r.3);
    report("C7 AMP vs theory", &mut || c7_amp_vs_theory(omega));
    report("C8 oracle dominance", &mut c8_oracle_dominance);
    report("C9 CLI determinism", &mut c9_determinism);
    if !failed.is_empty() {
        println!("{} of 9 criteria failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
