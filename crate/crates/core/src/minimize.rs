//! Minimization of the Riesz energy over `(𝕊ᵈ)^N` by projected gradient
//! descent with Armijo backtracking, retraction by renormalization, and
//! parallel restarts. Results can be cached on disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, StagnatedIterate};
use crate::kernels::{discrete_energy, energy_and_gradient, grad_inf_norm, RieszParams};
use crate::scalar::Scalar;
use crate::sphere::{
    random_point, read_config, stream_rng, write_config, ConfigMeta, Configuration, Exponent,
};

/// Sufficient-decrease constant of the Armijo test.
pub const ARMIJO_C1: f64 = 1e-4;
/// Step growth after an accepted step.
pub const STEP_GROWTH: f64 = 1.3;
/// Consecutive step halvings after which the line search gives up.
pub const MAX_HALVINGS: usize = 60;

/// Starting configuration of restart 0; later restarts always start from
/// uniform random points.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Random,
    /// Generalized spiral points; only on 𝕊².
    Spiral,
    FromFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop once every tangent gradient norm is at most `grad_tol · N^{s/d}`.
    pub grad_tol: f64,
    /// Stop once the energy decreased by less than this (relative) over `stall_window` steps.
    pub stall_tol: f64,
    pub stall_window: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init: Init,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            grad_tol: 1e-8,
            stall_tol: 1e-12,
            stall_window: 100,
            restarts: 1,
            seed: 0,
            init: Init::Random,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol must be positive"));
        }
        if self.restarts < 1 {
            return Err(invalid("restarts must be at least 1"));
        }
        if self.stall_window < 1 {
            return Err(invalid("stall_window must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult<T> {
    pub config: Configuration<T>,
    pub energy: f64,
    pub grad_inf_norm: f64,
    pub iters: usize,
    pub restart_index: usize,
    /// Whether the gradient tolerance was met (as opposed to stalling or running out of iterations).
    pub converged: bool,
    /// Final energy of every restart, by restart index.
    pub restart_energies: Vec<f64>,
}

/// Generalized spiral points on 𝕊² (heights equally spaced, azimuth advanced by
/// `3.6/√(N(1−h²))`).
pub fn spiral_points<T: Scalar>(n: usize) -> Result<Configuration<T>> {
    if n < 2 {
        return Err(invalid("spiral needs at least two points"));
    }
    let nf = n as f64;
    let mut coords = Vec::with_capacity(3 * n);
    let mut phi = 0.0_f64;
    for k in 0..n {
        let h = -1.0 + 2.0 * k as f64 / (nf - 1.0);
        if k == 0 || k == n - 1 {
            phi = 0.0;
        } else {
            phi = (phi + 3.6 / (nf * (1.0 - h * h)).sqrt()) % std::f64::consts::TAU;
        }
        let rho = (1.0 - h * h).max(0.0).sqrt();
        coords.extend([rho * phi.cos(), rho * phi.sin(), h].map(T::lit));
    }
    let mut config = Configuration::from_parts_unvalidated(2, coords, ConfigMeta::new(None, 0))?;
    config.renormalize();
    Ok(config)
}

fn initial_config<T: Scalar>(d: usize, n: usize, opts: &MinimizeOptions, restart: usize) -> Result<Configuration<T>> {
    let meta = ConfigMeta::new(None, opts.seed);
    if restart == 0 {
        match &opts.init {
            Init::Random => {}
            Init::Spiral => {
                if d != 2 {
                    return Err(invalid("spiral initialization is only available for d = 2"));
                }
                let mut c = spiral_points(n)?;
                c.meta = meta;
                return Ok(c);
            }
            Init::FromFile(path) => {
                let c: Configuration<T> = read_config(path)?;
                if c.dim() != d || c.len() != n {
                    return Err(invalid(format!(
                        "{} holds {} points on S^{}, expected {n} points on S^{d}",
                        path.display(),
                        c.len(),
                        c.dim()
                    )));
                }
                return Configuration::from_parts_unvalidated(d, c.coords().to_vec(), meta);
            }
        }
    }
    let mut rng = stream_rng(opts.seed, restart as u64);
    let coords = (0..n).flat_map(|_| random_point::<T, _>(d, &mut rng).into_coords()).collect();
    Configuration::from_parts_unvalidated(d, coords, meta)
}

struct RestartOutcome<T> {
    config: Configuration<T>,
    energy: T,
    grad_norm: T,
    iters: usize,
    converged: bool,
    stagnated: bool,
}

/// `x ↦ normalize(x − step · g)` for every point.
fn retract<T: Scalar>(x: &Configuration<T>, grad: &[T], step: T) -> Result<Configuration<T>> {
    let coords = x.coords().iter().zip(grad).map(|(&c, &g)| c - step * g).collect();
    let mut out = Configuration::from_parts_unvalidated(x.dim(), coords, x.meta.clone())?;
    out.renormalize();
    Ok(out)
}

fn run_restart<T: Scalar>(
    params: &RieszParams<T>,
    mut x: Configuration<T>,
    opts: &MinimizeOptions,
) -> Result<RestartOutcome<T>> {
    let n = x.len();
    let d = params.d;
    let target = T::lit(opts.grad_tol * (n as f64).powf(params.s.as_f64() / d as f64));
    let c1 = T::lit(ARMIJO_C1);
    let eps = T::epsilon();
    let (mut energy, mut grad) = energy_and_gradient(&x, params)?;
    let mut gnorm = grad_inf_norm(&grad, d);
    let mut step = T::one() / T::from_usize_lossy(n);
    let mut history = vec![energy];
    let mut iters = 0;
    while iters < opts.max_iters {
        if gnorm <= target {
            return Ok(RestartOutcome { config: x, energy, grad_norm: gnorm, iters, converged: true, stagnated: false });
        }
        let g2 = grad.iter().fold(T::zero(), |acc, &g| acc + g * g);
        let mut halvings = 0;
        loop {
            let trial = retract(&x, &grad, step)?;
            let (e_trial, g_trial) = energy_and_gradient(&trial, params)?;
            let decrease = c1 * step * g2;
            // Below the resolution of the energy the Armijo margin is noise; accept
            // any non-increase there instead of shrinking the step to nothing.
            let resolvable = decrease > T::lit(8.0) * eps * energy.abs();
            if e_trial <= energy - decrease || (!resolvable && e_trial <= energy) {
                x = trial;
                energy = e_trial;
                grad = g_trial;
                gnorm = grad_inf_norm(&grad, d);
                step *= T::lit(STEP_GROWTH);
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Ok(RestartOutcome { config: x, energy, grad_norm: gnorm, iters, converged: false, stagnated: true });
            }
            step *= T::lit(0.5);
        }
        iters += 1;
        history.push(energy);
        if iters >= opts.stall_window {
            let past = history[iters - opts.stall_window];
            let rel = (past - energy) / (energy.abs() + T::one());
            if rel < T::lit(opts.stall_tol) {
                break;
            }
        }
    }
    let converged = gnorm <= target;
    Ok(RestartOutcome { config: x, energy, grad_norm: gnorm, iters, converged, stagnated: false })
}

/// Approximate minimizer of the `s`-energy of `n` points on 𝕊ᵈ, best of `opts.restarts` starts.
///
/// Restart `k` draws its random start from stream `k` of `opts.seed`; restarts run
/// in parallel and the lowest energy wins, ties (relative `1e−12`) going to the
/// lowest index. If every restart's line search stagnates, the best iterate is
/// returned inside [`Error::Stagnation`].
pub fn minimize_energy<T: Scalar>(d: usize, s: T, n: usize, opts: &MinimizeOptions) -> Result<MinimizeResult<T>> {
    let params = RieszParams::new(d, s)?;
    if n < 2 {
        return Err(invalid("minimization needs at least two points"));
    }
    opts.validate()?;
    let outcomes: Vec<Result<RestartOutcome<T>>> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| run_restart(&params, initial_config(d, n, opts, k)?, opts))
        .collect();
    let outcomes: Vec<RestartOutcome<T>> = outcomes.into_iter().collect::<Result<_>>()?;
    let restart_energies: Vec<f64> = outcomes.iter().map(|o| o.energy.as_f64()).collect();
    let pool: Vec<usize> = if outcomes.iter().all(|o| o.stagnated) {
        (0..outcomes.len()).collect()
    } else {
        (0..outcomes.len()).filter(|&k| !outcomes[k].stagnated).collect()
    };
    let mut best = pool[0];
    for &k in &pool[1..] {
        let (a, b) = (outcomes[k].energy.as_f64(), outcomes[best].energy.as_f64());
        if a < b - 1e-12 * b.abs() {
            best = k;
        }
    }
    let mut out = outcomes.into_iter().nth(best).expect("best index is in range");
    let energy = discrete_energy(&out.config, &params)?.as_f64();
    if out.stagnated {
        return Err(Error::Stagnation(Box::new(StagnatedIterate {
            d,
            coords: out.config.coords().iter().map(|c| c.as_f64()).collect(),
            energy,
            iters: out.iters,
            restart_index: best,
        })));
    }
    out.config.meta = ConfigMeta {
        s: Some(params.exponent()),
        seed: opts.seed,
        energy: Some(energy),
        grad_norm: Some(out.grad_norm.as_f64()),
    };
    Ok(MinimizeResult {
        config: out.config,
        energy,
        grad_inf_norm: out.grad_norm.as_f64(),
        iters: out.iters,
        restart_index: best,
        converged: out.converged,
        restart_energies,
    })
}

/// Optimizer record stored next to a cached point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub d: usize,
    pub s: Exponent,
    pub n: usize,
    pub seed: u64,
    pub grad_tol: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub init: Init,
    pub iters: usize,
    pub restart_index: usize,
    pub converged: bool,
    pub restart_energies: Vec<f64>,
}

fn init_tag(init: &Init) -> &'static str {
    match init {
        Init::Random => "random",
        Init::Spiral => "spiral",
        Init::FromFile(_) => "file",
    }
}

/// Cache file stem encoding `(d, s, N, seed, grad_tol)` plus restarts, iteration budget and init.
pub fn cache_stem(d: usize, s: Exponent, n: usize, opts: &MinimizeOptions) -> String {
    format!(
        "sphpts_d{d}_s{s}_n{n}_seed{}_gtol{:e}_r{}_it{}_{}",
        opts.seed,
        opts.grad_tol,
        opts.restarts,
        opts.max_iters,
        init_tag(&opts.init)
    )
}

fn load_cached<T: Scalar>(
    params: &RieszParams<T>,
    n: usize,
    points: &Path,
    sidecar: &Path,
) -> Option<MinimizeResult<T>> {
    let record: CacheRecord = serde_json::from_str(&std::fs::read_to_string(sidecar).ok()?).ok()?;
    let mut config: Configuration<T> = read_config(points).ok()?;
    if config.dim() != params.d || config.len() != n {
        return None;
    }
    let (_, grad) = energy_and_gradient(&config, params).ok()?;
    let energy = discrete_energy(&config, params).ok()?.as_f64();
    let grad_norm = grad_inf_norm(&grad, params.d).as_f64();
    config.meta.energy = Some(energy);
    config.meta.grad_norm = Some(grad_norm);
    Some(MinimizeResult {
        config,
        energy,
        grad_inf_norm: grad_norm,
        iters: record.iters,
        restart_index: record.restart_index,
        converged: record.converged,
        restart_energies: record.restart_energies,
    })
}

/// [`minimize_energy`] with results persisted under `cache_dir`.
///
/// A cached point set is reused when present; its energy and gradient are
/// recomputed on load. Runs started from a file are never cached.
pub fn minimize_energy_cached<T: Scalar>(
    d: usize,
    s: T,
    n: usize,
    opts: &MinimizeOptions,
    cache_dir: &Path,
) -> Result<MinimizeResult<T>> {
    let params = RieszParams::new(d, s)?;
    if matches!(opts.init, Init::FromFile(_)) {
        return minimize_energy(d, s, n, opts);
    }
    let stem = cache_stem(d, params.exponent(), n, opts);
    let points = cache_dir.join(format!("{stem}.txt"));
    let sidecar = cache_dir.join(format!("{stem}.json"));
    if let Some(hit) = load_cached(&params, n, &points, &sidecar) {
        return Ok(hit);
    }
    let result = minimize_energy(d, s, n, opts)?;
    let io_err = |e: std::io::Error| Error::Io { path: cache_dir.display().to_string(), message: e.to_string() };
    std::fs::create_dir_all(cache_dir).map_err(io_err)?;
    write_config(&result.config, &points)?;
    let record = CacheRecord {
        d,
        s: params.exponent(),
        n,
        seed: opts.seed,
        grad_tol: opts.grad_tol,
        restarts: opts.restarts,
        max_iters: opts.max_iters,
        init: opts.init.clone(),
        iters: result.iters,
        restart_index: result.restart_index,
        converged: result.converged,
        restart_energies: result.restart_energies.clone(),
    };
    let json = serde_json::to_string_pretty(&record).expect("cache record serializes");
    std::fs::write(&sidecar, json).map_err(io_err)?;
    Ok(result)
}
