mod settings;
mod svg;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use quantreg::codebook::QuantScheme;
use quantreg::experiments::{
    alpha_sweep, amp_ensemble, bits_sweep, omega_sweep, phase_diagram, write_csv, SolutionRow,
};
use quantreg::{
    amp_run, empirical_gen_error, enumerate_min, generate, ridge_exact, se_run, solve, Dataset, Identity, Phase,
    SEOptions,
};
use serde::Serialize;

use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "quantreg", version, about = "Replica theory, state evolution and AMP for quantized regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
    /// JSON file with default values for any option.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 3 if any solve or run fails to converge.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the replica saddle point at one parameter point.
    Solve {
        /// Use the unquantized ridge denoiser.
        #[arg(long)]
        ridge: bool,
    },
    /// Phase diagram on the (n_p, omega) grid.
    Phase,
    /// Generalization error along omega for each n_p (and scheme).
    SweepOmega,
    /// Generalization error along alpha with the ridge reference.
    SweepAlpha,
    /// Generalization error against the number of bits, both schemes.
    SweepBits,
    /// State-evolution trajectory.
    Se,
    /// One AMP run on a generated (or loaded) instance.
    Amp {
        /// Per-iteration CSV `t,V_mean,E_emp`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Read the instance from a fixture CSV instead of generating it.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Save the generated instance as a fixture CSV.
        #[arg(long)]
        save_fixture: Option<PathBuf>,
    },
    /// Mean and standard error of AMP over independent instances.
    AmpEnsemble,
    /// Exhaustive minimization and exact ridge on a small instance.
    Oracle,
    /// Line chart (SVG) of two columns of a CSV file.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Column whose values split the rows into separate lines.
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        log_x: bool,
    },
}

/// Failure classes mapped to exit statuses.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let config = matches!(
            e.downcast_ref::<quantreg::Error>(),
            Some(
                quantreg::Error::InvalidParameter(_)
                    | quantreg::Error::Parse(_)
                    | quantreg::Error::DimensionMismatch(_)
                    | quantreg::Error::SearchSpaceTooLarge { .. }
            )
        );
        if config {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<quantreg::Error> for Failure {
    fn from(e: quantreg::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

/// Count of unconverged solves or runs in the output.
type Outcome = usize;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let settings = match &cli.config {
        Some(path) => match Settings::load(path) {
            Ok(s) => s.overridden_by(&cli.settings),
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => cli.settings.clone(),
    };
    match run(&cli, &settings) {
        Ok(unconverged) if cli.strict && unconverged > 0 => {
            eprintln!("error: {unconverged} result(s) did not converge");
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_rows(cli: &Cli, rows: &[SolutionRow]) -> anyhow::Result<Outcome> {
    write_csv(rows, sink(&cli.out)?)?;
    Ok(rows.iter().filter(|r| !r.converged()).count())
}

fn emit_json<T: Serialize>(cli: &Cli, value: &T) -> anyhow::Result<()> {
    let mut w = sink(&cli.out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn schemes(s: &Settings) -> Vec<QuantScheme> {
    match s.scheme {
        Some(one) => vec![one],
        None => vec![QuantScheme::Uniform, QuantScheme::NonUniform],
    }
}

#[derive(Serialize)]
struct Peaks {
    ridge: Option<f64>,
    quantized: Option<f64>,
}

#[derive(Serialize)]
struct OracleReport {
    seed: u64,
    n: usize,
    m: usize,
    energy: f64,
    w_hat: Vec<f64>,
    gen_error: f64,
    ridge_gen_error: Option<f64>,
    replica_gen_error: f64,
}

fn run(cli: &Cli, s: &Settings) -> Result<Outcome, Failure> {
    let opts = s.solve_options()?;
    let outcome = match &cli.command {
        Command::Solve { ridge } => {
            let p = s.params(1.4, 1e-4, 0.01)?;
            let row = if *ridge {
                SolutionRow::new(None, &p, &solve(&p, &Identity, &opts))
            } else {
                let cb = s.codebook(6, 1.8)?;
                SolutionRow::new(Some(&cb), &p, &solve(&p, &cb, &opts))
            };
            emit_rows(cli, &[row])?
        }
        Command::Phase => {
            let p = s.params(1.5, 1e-4, 0.0)?;
            let nps = s.np_list(&(1..=30).collect::<Vec<_>>());
            let d = phase_diagram(&nps, &s.omega_grid()?, &p, s.scheme(), &opts)?;
            eprintln!(
                "RS {} RSB {} NonConverged {}",
                d.count(Phase::RS),
                d.count(Phase::RSB),
                d.count(Phase::NonConverged)
            );
            emit_rows(cli, &d.rows)?
        }
        Command::SweepOmega => {
            let p = s.params(1.4, 1e-4, 0.01)?;
            let nps = s.np_list(&[1, 2, 3, 4, 6, 8, 14, 30]);
            let rows = omega_sweep(&schemes(s), &nps, &s.omega_grid()?, &p, &opts, !s.cold.unwrap_or(false))?;
            emit_rows(cli, &rows)?
        }
        Command::SweepAlpha => {
            let p = s.params(1.0, 1.0, 1e-6)?;
            let alphas = s.alpha_grid()?;
            let cb = s.codebook(14, 4.0)?;
            let quant = alpha_sweep(Some(&cb), &alphas, &p, &opts)?;
            let ridge = alpha_sweep(None, &alphas, &p, &opts)?;
            let peaks = Peaks {
                ridge: ridge.peak,
                quantized: quant.peak,
            };
            eprintln!("{}", serde_json::to_string(&peaks).map_err(anyhow::Error::from)?);
            let rows: Vec<SolutionRow> = quant.rows.into_iter().chain(ridge.rows).collect();
            emit_rows(cli, &rows)?
        }
        Command::SweepBits => {
            let p = s.params(1.4, 1e-4, 0.01)?;
            let nps = s.np_list(&(1..=30).collect::<Vec<_>>());
            let rows = bits_sweep(&nps, s.omega.unwrap_or(2.0), &p, &opts)?;
            emit_rows(cli, &rows)?
        }
        Command::Se => {
            let p = s.params(1.4, 1e-4, 0.01)?;
            let cb = s.codebook(6, 1.8)?;
            let d = SEOptions::default();
            let se = SEOptions {
                damping: s.damping.unwrap_or(d.damping),
                tol: s.tol.unwrap_or(d.tol),
                max_iter: s.max_iter.unwrap_or(d.max_iter),
            };
            let traj = se_run(&p, &cb, &se)?;
            traj.write_csv(sink(&cli.out)?)?;
            usize::from(!traj.converged)
        }
        Command::Amp {
            trajectory,
            fixture,
            save_fixture,
        } => {
            let p = s.params(1.4, 1e-4, 0.01)?;
            let cb = s.codebook(6, 1.8)?;
            let cfg = quantreg::AmpConfig {
                lambda: p.lambda,
                ..s.amp_config()?
            };
            let d: Dataset<f64> = match fixture {
                Some(path) => {
                    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    Dataset::read_csv(BufReader::new(f))?
                }
                None => {
                    let n = s.n.unwrap_or(2500);
                    let m = (p.alpha * n as f64).round() as usize;
                    generate(n, m, p.rho, p.sigma2, cfg.seed)?
                }
            };
            if let Some(path) = save_fixture {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                d.write_csv(io::BufWriter::new(f))?;
            }
            let res = amp_run(&d, &cb, &cfg)?;
            if let Some(path) = trajectory {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                res.write_trajectory_csv(io::BufWriter::new(f))?;
            }
            emit_json(cli, &res.summary())?;
            usize::from(!res.converged)
        }
        Command::AmpEnsemble => {
            let p = s.params(1.4, 1e-4, 0.01)?;
            let cb = s.codebook(6, 1.8)?;
            let cfg = s.amp_config()?;
            let summary = amp_ensemble(&p, &cb, s.runs.unwrap_or(100), s.n.unwrap_or(2500), &cfg, s.seed.unwrap_or(0))?;
            emit_json(cli, &summary)?;
            summary.n_runs - summary.converged_runs
        }
        Command::Oracle => {
            let p = s.params(1.5, 0.01, 0.01)?;
            let cb = s.codebook(2, 1.0)?;
            let n = s.n.unwrap_or(6);
            let m = (p.alpha * n as f64).round() as usize;
            let seed = s.seed.unwrap_or(0);
            let d = generate::<f64>(n, m, p.rho, p.sigma2, seed)?;
            let best = enumerate_min(&d, &cb, p.lambda)?;
            let ridge = ridge_exact(&d, p.lambda).ok();
            let report = OracleReport {
                seed,
                n,
                m,
                energy: best.energy,
                gen_error: empirical_gen_error(&best.w_hat, &d.w0, p.sigma2)?,
                w_hat: best.w_hat,
                ridge_gen_error: ridge
                    .map(|w| empirical_gen_error(&w, &d.w0, p.sigma2))
                    .transpose()?,
                replica_gen_error: solve(&p, &cb, &opts).gen_error,
            };
            emit_json(cli, &report)?;
            0
        }
        Command::Plot {
            csv,
            x,
            y,
            group,
            log_x,
        } => {
            let svg = svg::plot_csv(csv, x, y, group.as_deref(), *log_x).map_err(Failure::Runtime)?;
            let mut w = sink(&cli.out)?;
            w.write_all(svg.as_bytes()).map_err(|e| anyhow!(e))?;
            w.flush().map_err(|e| anyhow!(e))?;
            0
        }
    };
    Ok(outcome)
}
