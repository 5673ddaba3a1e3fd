use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use riesz_cli::{run_sweep, verify, Level, OutputPaths, SweepConfig};
use riesz_sphere::kernels::gap_from_energy;
use riesz_sphere::sphere::{cap_area, cap_fraction_exact, sphere_area};
use riesz_sphere::{
    discrepancy_report, minimize_energy, minimize_energy_cached, read_config, write_config, ConfigurationF64,
    Exponent, Init, MinimizeOptions, RieszParams, SpectralTableF64,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "riesz", version, about = "Riesz energy minimizers on spheres and their discrepancies")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Problem {
    /// Sphere dimension d of 𝕊ᵈ.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Riesz exponent, or `log`.
    #[arg(long, default_value = "1")]
    s: Exponent,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy of N points and write the configuration.
    Minimize {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        grad_tol: Option<f64>,
        /// Start from the spiral points (𝕊² only).
        #[arg(long, conflicts_with = "input")]
        spiral: bool,
        /// Start from a configuration file.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to write the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Sobolev and cap discrepancy of a configuration file.
    Discrepancy {
        #[arg(long)]
        input: PathBuf,
        /// Exponent of the Sobolev norm; defaults to the one recorded in the file.
        #[arg(long)]
        s: Option<Exponent>,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Table of eigenvalues A_ℓ (and cap multipliers with --radius) as CSV.
    Spectrum {
        #[command(flatten)]
        problem: Problem,
        /// Largest degree.
        #[arg(long, default_value_t = 50)]
        l: usize,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize and measure over a list of N; configured by JSON or flags.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        spiral: bool,
        /// Output stem: writes `<out>.csv` and `<out>.json`.
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long, default_value = "cache")]
        cache_dir: PathBuf,
    },
    /// Run the self-check suite; exits nonzero if any check fails.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Area of a cap of chordal radius r (or threshold t) on 𝕊ᵈ.
    CapArea {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, conflicts_with = "t")]
        radius: Option<f64>,
        /// Cap `{y : ⟨x, y⟩ ≥ t}`.
        #[arg(long)]
        t: Option<f64>,
    },
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

#[derive(Serialize)]
struct MinimizeSummary {
    d: usize,
    s: Exponent,
    n: usize,
    energy: f64,
    gap: f64,
    grad_inf_norm: f64,
    iters: usize,
    converged: bool,
    restart_index: usize,
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Minimize { problem, n, seed, restarts, max_iters, grad_tol, spiral, input, out, cache_dir } => {
            let init = match (spiral, input) {
                (_, Some(path)) => Init::FromFile(path),
                (true, None) => Init::Spiral,
                (false, None) => Init::Random,
            };
            let mut opts = MinimizeOptions { seed, restarts, init, ..MinimizeOptions::default() };
            if let Some(m) = max_iters {
                opts.max_iters = m;
            }
            if let Some(g) = grad_tol {
                opts.grad_tol = g;
            }
            let s = problem.s.value();
            let result = match &cache_dir {
                Some(dir) => minimize_energy_cached(problem.d, s, n, &opts, dir)?,
                None => minimize_energy(problem.d, s, n, &opts)?,
            };
            if let Some(path) = &out {
                write_config(&result.config, path)?;
            }
            let params = RieszParams::from_exponent(problem.d, problem.s)?;
            let summary = MinimizeSummary {
                d: problem.d,
                s: problem.s,
                n,
                energy: result.energy,
                gap: gap_from_energy(result.energy, n, &params).gap,
                grad_inf_norm: result.grad_inf_norm,
                iters: result.iters,
                converged: result.converged,
                restart_index: result.restart_index,
                out,
            };
            println!("{}", json(&summary)?);
        }
        Command::Discrepancy { input, s, epsilon, tol, budget, seed, out } => {
            let config: ConfigurationF64 = read_config(&input)?;
            let Some(s) = s.or(config.meta.s) else {
                bail!("{} records no exponent; pass --s", input.display());
            };
            let report = discrepancy_report(&config, s.value(), epsilon, tol, budget, seed)?;
            emit(&json(&report)?, out.as_deref())?;
        }
        Command::Spectrum { problem, l, radius, out } => {
            let s = problem.s.value();
            let table = match radius {
                Some(r) => SpectralTableF64::with_radius(problem.d, s, l, r)?,
                None => SpectralTableF64::new(problem.d, s, l)?,
            };
            emit(table.to_csv().trim_end(), out.as_deref())?;
        }
        Command::Sweep { config, problem, n, epsilon, restarts, seed, budget, max_iters, spiral, out, cache_dir } => {
            let cfg: SweepConfig = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => SweepConfig {
                    d: problem.d,
                    s: problem.s,
                    n_list: n,
                    epsilon,
                    restarts,
                    seed,
                    centers_budget: budget,
                    outputs: OutputPaths {
                        csv_path: out.with_extension("csv"),
                        json_path: out.with_extension("json"),
                        cache_dir,
                    },
                    max_iters,
                    grad_tol: None,
                    init: if spiral { Init::Spiral } else { Init::Random },
                    sobolev_tol: 1e-5,
                },
            };
            let result = run_sweep(&cfg)?;
            println!("{}", json(&result)?);
        }
        Command::Verify { level, out } => {
            let report = verify(level);
            emit(&json(&report)?, out.as_deref())?;
            for check in report.failed() {
                eprintln!("FAILED {}: worst {:e} > {:e} ({})", check.name, check.worst, check.threshold, check.detail);
            }
            if !report.all_passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::CapArea { d, radius, t } => {
            let (r, t) = match (radius, t) {
                (Some(r), None) => (r, 1.0 - r * r / 2.0),
                (None, Some(t)) => (((2.0 - 2.0 * t).max(0.0)).sqrt(), t),
                _ => bail!("pass exactly one of --radius and --t"),
            };
            let area = cap_area(d, r)?;
            let total: f64 = sphere_area(d);
            #[derive(Serialize)]
            struct CapAreaOut {
                d: usize,
                radius: f64,
                threshold: f64,
                area: f64,
                fraction: f64,
                sphere_area: f64,
            }
            let fraction = cap_fraction_exact(d, t);
            println!("{}", json(&CapAreaOut { d, radius: r, threshold: t, area, fraction, sphere_area: total })?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
