//! Sweeps over `N` at fixed `(d, s)`: minimize, measure, fit.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use riesz_sphere::kernels::gap_from_energy;
use riesz_sphere::sphere::separation;
use riesz_sphere::{
    cap_discrepancy, continuous_energy, minimize_energy_cached, sobolev_discrepancy, Exponent, Init, MinimizeOptions,
    RieszParams,
};
use serde::{Deserialize, Serialize};

use crate::fit::{fit_exponent, gap_regression};
use crate::{io_error, CliError, Result};

pub const CSV_HEADER: &str = "N,energy,gap,sobolev_D,cap_D,scaled_separation,grad_inf_norm";

/// Where a sweep writes its results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub cache_dir: PathBuf,
}

/// JSON sweep description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d: usize,
    pub s: Exponent,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub epsilon: f64,
    pub restarts: usize,
    pub seed: u64,
    pub centers_budget: usize,
    pub outputs: OutputPaths,
    /// Optimizer iteration budget; the optimizer default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub init: Init,
    /// Relative truncation tolerance of the Sobolev series.
    #[serde(default = "default_sobolev_tol")]
    pub sobolev_tol: f64,
}

fn default_sobolev_tol() -> f64 {
    1e-5
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if self.n_list.is_empty() {
            return bad("N_list is empty".into());
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return bad(format!("every N must be at least 2, got {:?}", self.n_list));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("N_list must be strictly increasing, got {:?}", self.n_list));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.sobolev_tol > 0.0) {
            return bad(format!("sobolev_tol must be positive, got {}", self.sobolev_tol));
        }
        RieszParams::<f64>::from_exponent(self.d, self.s)?;
        self.minimize_options().validate()?;
        Ok(())
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        let mut opts = MinimizeOptions {
            restarts: self.restarts,
            seed: self.seed,
            init: self.init.clone(),
            ..MinimizeOptions::default()
        };
        if let Some(m) = self.max_iters {
            opts.max_iters = m;
        }
        if let Some(g) = self.grad_tol {
            opts.grad_tol = g;
        }
        opts
    }
}

/// One CSV row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub energy: f64,
    pub gap: f64,
    #[serde(rename = "sobolev_D")]
    pub sobolev_d: f64,
    #[serde(rename = "cap_D")]
    pub cap_d: f64,
    pub scaled_separation: f64,
    pub grad_inf_norm: f64,
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.n, self.energy, self.gap, self.sobolev_d, self.cap_d, self.scaled_separation, self.grad_inf_norm
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub sobolev_slope: f64,
    pub sobolev_slope_stderr: f64,
    pub cap_slope: f64,
    pub cap_slope_stderr: f64,
    /// Coefficient of `N log N` in `E − E(σ̃)N²`; log kernel only.
    pub gap_coeff: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Present when the sweep has at least four sizes.
    pub fits: Option<Fits>,
}

fn measure_row(cfg: &SweepConfig, n: usize) -> Result<SweepRow> {
    let stage = |stage: &'static str| move |source| CliError::Stage { n, stage, source };
    let s = cfg.s.value();
    let params = RieszParams::from_exponent(cfg.d, cfg.s).map_err(stage("parameters"))?;
    let opts = cfg.minimize_options();
    let min = minimize_energy_cached(cfg.d, s, n, &opts, &cfg.outputs.cache_dir).map_err(stage("minimize"))?;
    let stats = gap_from_energy(min.energy, n, &params);
    let sob = sobolev_discrepancy(&min.config, s, cfg.epsilon, cfg.sobolev_tol).map_err(stage("sobolev"))?;
    let cap = cap_discrepancy(&min.config, cfg.centers_budget, cfg.seed).map_err(stage("cap discrepancy"))?;
    let sep = separation(&min.config).map_err(stage("separation"))?;
    Ok(SweepRow {
        n,
        energy: stats.energy,
        gap: stats.gap,
        sobolev_d: sob.value,
        cap_d: cap.value,
        scaled_separation: sep.scaled,
        grad_inf_norm: min.grad_inf_norm,
    })
}

fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_error(path))?);
    writeln!(file, "{CSV_HEADER}").map_err(io_error(path))?;
    for row in rows {
        writeln!(file, "{}", row.to_csv_line()).map_err(io_error(path))?;
    }
    file.flush().map_err(io_error(path))
}

/// Fits over the rows; `None` below four rows.
pub fn compute_fits(cfg: &SweepConfig, rows: &[SweepRow]) -> Result<Option<Fits>> {
    if rows.len() < 4 {
        return Ok(None);
    }
    let sob = fit_exponent(&rows.iter().map(|r| (r.n as f64, r.sobolev_d)).collect::<Vec<_>>())?;
    let cap = fit_exponent(&rows.iter().map(|r| (r.n as f64, r.cap_d)).collect::<Vec<_>>())?;
    let gap_coeff = if cfg.s == Exponent::Log {
        let params = RieszParams::<f64>::from_exponent(cfg.d, cfg.s)?;
        let cont = continuous_energy(&params);
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.energy - cont * (r.n * r.n) as f64)).collect();
        Some(gap_regression(&pts)?.0)
    } else {
        None
    };
    Ok(Some(Fits {
        sobolev_slope: sob.slope,
        sobolev_slope_stderr: sob.stderr,
        cap_slope: cap.slope,
        cap_slope_stderr: cap.stderr,
        gap_coeff,
    }))
}

/// Runs every `N` of the sweep, writes the CSV and the JSON result.
///
/// Rows are computed in parallel. On failure the rows before the first failing
/// `N` are still written to the CSV.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    sweep_with(cfg, |n| measure_row(cfg, n))
}

fn sweep_with<F: Fn(usize) -> Result<SweepRow> + Sync>(cfg: &SweepConfig, measure: F) -> Result<SweepResult> {
    let outcomes: Vec<Result<SweepRow>> = cfg.n_list.par_iter().map(|&n| measure(n)).collect();
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for outcome in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    write_csv(&cfg.outputs.csv_path, &rows)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let result = SweepResult { fits: compute_fits(cfg, &rows)?, rows };
    let json = serde_json::to_string_pretty(&result)?;
    let path = &cfg.outputs.json_path;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    std::fs::write(path, json).map_err(io_error(path))?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, n_list: Vec<usize>, s: Exponent) -> SweepConfig {
        SweepConfig {
            d: 2,
            s,
            n_list,
            epsilon: 0.2,
            restarts: 1,
            seed: 5,
            centers_budget: 50,
            outputs: OutputPaths {
                csv_path: dir.join("out.csv"),
                json_path: dir.join("out.json"),
                cache_dir: dir.join("cache"),
            },
            max_iters: Some(100),
            grad_tol: None,
            init: Init::Spiral,
            sobolev_tol: 1e-4,
        }
    }

    #[test]
    fn config_json_uses_field_names_and_log_literal() {
        let cfg = config(Path::new("x"), vec![8, 16], Exponent::Log);
        let json = serde_json::to_value(&cfg).unwrap();
        assert_eq!(json["s"], "log");
        assert_eq!(json["N_list"][1], 16);
        assert_eq!(serde_json::from_value::<SweepConfig>(json).unwrap(), cfg);
        let minimal = r#"{"d":2,"s":1.0,"N_list":[4,8],"epsilon":0.2,"restarts":2,"seed":1,"centers_budget":10,
            "outputs":{"csv_path":"a.csv","json_path":"a.json","cache_dir":"c"}}"#;
        let cfg: SweepConfig = serde_json::from_str(minimal).unwrap();
        assert_eq!(cfg.s, Exponent::Riesz(1.0));
        assert_eq!(cfg.sobolev_tol, 1e-5);
        assert_eq!(cfg.minimize_options().max_iters, MinimizeOptions::default().max_iters);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = Path::new("x");
        assert!(config(dir, vec![8, 8], Exponent::Log).validate().is_err());
        assert!(config(dir, vec![1, 8], Exponent::Log).validate().is_err());
        assert!(config(dir, vec![16, 8], Exponent::Log).validate().is_err());
        let mut c = config(dir, vec![8], Exponent::Log);
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        assert!(config(dir, vec![8], Exponent::Riesz(2.0)).validate().is_err());
    }

    #[test]
    fn csv_floats_round_trip() {
        let row = SweepRow {
            n: 3,
            energy: 0.1 + 0.2,
            gap: -1.0 / 3.0,
            sobolev_d: 1e-300,
            cap_d: 0.5,
            scaled_separation: std::f64::consts::PI,
            grad_inf_norm: 0.0,
        };
        let line = row.to_csv_line();
        let vals: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, vec![row.energy, row.gap, row.sobolev_d, row.cap_d, row.scaled_separation, row.grad_inf_norm]);
    }

    #[test]
    fn small_sweep_writes_rows_and_reuses_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), vec![6, 10, 14, 20], Exponent::Riesz(1.0));
        let first = run_sweep(&cfg).unwrap();
        let csv = std::fs::read_to_string(&cfg.outputs.csv_path).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + cfg.n_list.len());
        assert!(first.fits.is_some());
        assert!(first.fits.unwrap().gap_coeff.is_none());

        let second = run_sweep(&cfg).unwrap();
        assert_eq!(first, second);
        assert_eq!(std::fs::read_to_string(&cfg.outputs.csv_path).unwrap(), csv);
        let json: SweepResult = serde_json::from_str(&std::fs::read_to_string(&cfg.outputs.json_path).unwrap()).unwrap();
        assert_eq!(json, first);
    }

    #[test]
    fn failing_row_keeps_earlier_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), vec![6, 10, 14], Exponent::Riesz(1.0));
        let err = sweep_with(&cfg, |n| {
            if n == 10 {
                Err(CliError::Stage { n, stage: "sobolev", source: riesz_sphere::Error::Precondition("test".into()) })
            } else {
                measure_row(&cfg, n)
            }
        })
        .unwrap_err();
        assert!(err.to_string().starts_with("N = 10, sobolev"), "{err}");
        let csv = std::fs::read_to_string(&cfg.outputs.csv_path).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("6,"));
        assert!(!cfg.outputs.json_path.exists());
    }
}
