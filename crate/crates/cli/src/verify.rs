//! Self-check suite: named invariants with a pass/fail verdict each.

use rand::Rng;
use riesz_sphere::discrepancy::cap_discrepancy_with_centers;
use riesz_sphere::kernels::laplace_riesz_residual;
use riesz_sphere::spectral::riesz_eigenvalue_quadrature;
use riesz_sphere::sphere::{
    cap_fraction, cap_fraction_exact, format_config, parse_config, random_point, random_rotation, sample_uniform,
    sphere_area, stream_rng,
};
use riesz_sphere::special::ln_gamma;
use riesz_sphere::{
    discrete_energy, energy_gradient, mean_value_check, minimize_energy, riesz_eigenvalue, sobolev_discrepancy,
    stolarsky_decomposition_check, ConfigurationF64, MinimizeOptions, RieszParams,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// `ℓ ≤ 50`, `N ≤ 64`.
    Fast,
    /// `ℓ ≤ 200`, `N ≤ 1024`.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Eigenvalue function under test: `(d, s, ℓ) ↦ A_{ℓ,s}`.
pub type EigenFn<'a> = &'a (dyn Fn(usize, f64, usize) -> riesz_sphere::Result<f64> + Sync);

const EIGEN_CASES: [(usize, f64); 6] = [(2, 0.0), (2, 1.0), (3, 1.0), (3, 2.0), (4, 1.5), (4, 2.0)];

struct Limits {
    ell: usize,
    n: usize,
}

fn limits(level: Level) -> Limits {
    match level {
        Level::Fast => Limits { ell: 50, n: 64 },
        Level::Full => Limits { ell: 200, n: 1024 },
    }
}

/// Degrees checked up to `max`: all up to 50, then every tenth.
fn degrees(max: usize) -> Vec<usize> {
    (0..=max.min(50)).chain((60..=max).step_by(10)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Collects the worst value of a check; errors count as failures.
struct Check {
    name: &'static str,
    threshold: f64,
    worst: f64,
    detail: String,
    error: Option<String>,
}

impl Check {
    fn new(name: &'static str, threshold: f64) -> Self {
        Check { name, threshold, worst: 0.0, detail: String::new(), error: None }
    }

    fn observe(&mut self, value: f64, context: impl FnOnce() -> String) {
        if !self.worst.is_nan() && (value.is_nan() || value > self.worst) {
            self.worst = value;
            self.detail = context();
        }
    }

    fn run(mut self, body: impl FnOnce(&mut Self) -> riesz_sphere::Result<()>) -> CheckResult {
        if let Err(e) = body(&mut self) {
            self.error = Some(e.to_string());
        }
        let passed = self.error.is_none() && self.worst <= self.threshold;
        CheckResult {
            name: self.name.to_string(),
            passed,
            worst: self.worst,
            threshold: self.threshold,
            detail: self.error.unwrap_or(self.detail),
        }
    }
}

fn eigen_quadrature(eigen: EigenFn, lim: &Limits) -> CheckResult {
    Check::new("eigenvalue_closed_form_vs_quadrature", 1e-8).run(|c| {
        for &(d, s) in &EIGEN_CASES {
            let omega: f64 = sphere_area(d);
            for ell in degrees(lim.ell) {
                let tol = 1e-10 * omega / (1.0 + (ell as f64).powf(d as f64 - s));
                let q = riesz_eigenvalue_quadrature(d, s, ell, tol)?;
                let a = eigen(d, s, ell)?;
                c.observe(rel(a, q), || format!("d={d} s={s} ell={ell}"));
            }
        }
        Ok(())
    })
}

fn newtonian_case(eigen: EigenFn, lim: &Limits) -> CheckResult {
    Check::new("eigenvalue_newtonian_special_case", 1e-12).run(|c| {
        for d in 2..=4usize {
            let omega: f64 = sphere_area(d);
            let df = d as f64;
            for ell in 0..=lim.ell.min(100) {
                let expect = omega * (df - 1.0) / (2.0 * ell as f64 + df - 1.0);
                c.observe(rel(eigen(d, df - 1.0, ell)?, expect), || format!("d={d} ell={ell}"));
            }
        }
        Ok(())
    })
}

fn d_minus_two_case(eigen: EigenFn, lim: &Limits) -> CheckResult {
    Check::new("eigenvalue_d_minus_2_special_case", 1e-12).run(|c| {
        for d in 3..=5usize {
            let df = d as f64;
            let scale = 2.0 * (0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df)).exp();
            for ell in 0..=lim.ell.min(100) {
                let l = ell as f64;
                let expect = scale / (l * (l + df - 1.0) / (df - 2.0) + df / 4.0);
                c.observe(rel(eigen(d, df - 2.0, ell)?, expect), || format!("d={d} ell={ell}"));
            }
        }
        Ok(())
    })
}

fn eigen_asymptotics(eigen: EigenFn, lim: &Limits) -> CheckResult {
    Check::new("eigenvalue_decay_rate", 10.0).run(|c| {
        for &(d, s) in &EIGEN_CASES {
            let scaled: Vec<f64> = (1..=lim.ell)
                .map(|ell| Ok(eigen(d, s, ell)? * (1.0 + (ell as f64).powf(d as f64 - s))))
                .collect::<riesz_sphere::Result<_>>()?;
            let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
            let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
            let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
            c.observe(ratio, || format!("d={d} s={s} max/min over 1..={}", lim.ell));
        }
        Ok(())
    })
}

fn cap_fraction_forms() -> CheckResult {
    Check::new("cap_fraction_closed_form_vs_quadrature", 1e-12).run(|c| {
        for d in 2..=6usize {
            for k in 0..=20 {
                let t = -1.0 + 0.1 * k as f64;
                let q: f64 = cap_fraction(d, t)?;
                let e: f64 = cap_fraction_exact(d, t);
                c.observe((q - e).abs(), || format!("d={d} t={t}"));
            }
        }
        Ok(())
    })
}

fn decomposition_identity(lim: &Limits) -> CheckResult {
    let sizes: Vec<usize> = [2, 3, 5, 8, 13, 20].into_iter().filter(|&n| n <= lim.n).collect();
    Check::new("stolarsky_decomposition_identity", 1e-6).run(|c| {
        for d in 2..=3usize {
            for s in [0.0, 1.0, d as f64 - 1.0] {
                for &n in &sizes {
                    let config = sample_uniform::<f64>(d, n, n as u64)?;
                    let rep = stolarsky_decomposition_check(&config, s, 0.2)?;
                    c.observe(rep.residual, || format!("d={d} s={s} N={n}"));
                }
            }
        }
        Ok(())
    })
}

fn laplace_riesz() -> CheckResult {
    // Worst distance of the h → h/2 residual ratio from 4, the second-order rate.
    Check::new("laplace_riesz_identity_rate", 0.6).run(|c| {
        for &(d, s) in &[(3usize, 0.5), (4, 1.0), (2, 0.0), (3, 0.0)] {
            let params = RieszParams::new(d, s)?;
            let mut rng = stream_rng(1, 17);
            let mut pairs = 0;
            while pairs < 20 {
                let x = random_point::<f64, _>(d, &mut rng);
                let x0 = random_point::<f64, _>(d, &mut rng);
                if x.distance(&x0) < 0.5 {
                    continue;
                }
                pairs += 1;
                let r1 = laplace_riesz_residual(&params, x.coords(), x0.coords(), 0.01)?;
                let r2 = laplace_riesz_residual(&params, x.coords(), x0.coords(), 0.005)?;
                c.observe((r1 / r2 - 4.0).abs(), || format!("d={d} s={s} ratio {}", r1 / r2));
            }
        }
        Ok(())
    })
}

fn gradient_vs_differences() -> CheckResult {
    Check::new("energy_gradient_vs_finite_differences", 1e-6).run(|c| {
        for &(d, s) in &[(2usize, 1.0), (2, 0.0), (3, 2.5)] {
            let config = sample_uniform::<f64>(d, 12, 4)?;
            let params = RieszParams::new(d, s)?;
            let grad = energy_gradient(&config, &params)?;
            let w = d + 1;
            let mut rng = stream_rng(2, 0);
            for i in 0..config.len() {
                // Tangent direction at point i.
                let p = config.point(i).to_vec();
                let mut v: Vec<f64> = (0..w).map(|_| rng.random_range(-1.0..1.0)).collect();
                let proj: f64 = v.iter().zip(&p).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(&p).for_each(|(a, b)| *a -= proj * b);
                let h = 1e-5;
                let moved = |sign: f64| -> riesz_sphere::Result<f64> {
                    let mut coords = config.coords().to_vec();
                    let q: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + sign * h * b).collect();
                    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                    coords[i * w..(i + 1) * w].iter_mut().zip(&q).for_each(|(c, x)| *c = x / n);
                    let moved = ConfigurationF64::new(d, coords, config.meta.clone())?;
                    discrete_energy(&moved, &params)
                };
                let fd = (moved(1.0)? - moved(-1.0)?) / (2.0 * h);
                let an: f64 = grad[i * w..(i + 1) * w].iter().zip(&v).map(|(a, b)| a * b).sum();
                c.observe((fd - an).abs() / (1.0 + an.abs()), || format!("d={d} s={s} point {i}"));
            }
        }
        Ok(())
    })
}

fn small_minimizers() -> CheckResult {
    Check::new("small_n_minimizers", 1e-8).run(|c| {
        let opts = MinimizeOptions { restarts: 20, seed: 1, ..MinimizeOptions::default() };
        let antipodal = minimize_energy(2, 1.0, 2, &opts)?;
        c.observe((antipodal.energy - 1.0).abs(), || "N=2 s=1".into());
        let triangle = minimize_energy(2, 0.0, 3, &opts)?;
        c.observe((triangle.energy + 3.0 * 3f64.ln()).abs(), || "N=3 log".into());
        let tetra = minimize_energy(2, 1.0, 4, &opts)?;
        c.observe((tetra.energy - 12.0 / (8.0f64 / 3.0).sqrt()).abs(), || "N=4 s=1".into());
        Ok(())
    })
}

fn rotation_invariance(lim: &Limits) -> CheckResult {
    Check::new("rotation_invariance", 1e-9).run(|c| {
        let n = lim.n;
        let config = sample_uniform::<f64>(2, n, 9)?;
        let q = random_rotation::<f64, _>(3, &mut stream_rng(9, 1));
        let turned = config.transformed(&q)?;
        for s in [0.0, 1.0] {
            let params = RieszParams::new(2, s)?;
            let (a, b) = (discrete_energy(&config, &params)?, discrete_energy(&turned, &params)?);
            c.observe(rel(b, a), || format!("energy s={s} N={n}"));
            let (a, b) = (
                sobolev_discrepancy(&config, s, 0.2, 1e-6)?.value,
                sobolev_discrepancy(&turned, s, 0.2, 1e-6)?.value,
            );
            c.observe(rel(b, a), || format!("sobolev s={s} N={n}"));
        }
        let (a, b) = (cap_discrepancy_with_centers(&config, &[])?, cap_discrepancy_with_centers(&turned, &[])?);
        c.observe((a.value - b.value).abs(), || format!("cap discrepancy N={n}"));
        Ok(())
    })
}

fn text_round_trip(lim: &Limits) -> CheckResult {
    Check::new("configuration_text_round_trip", 0.0).run(|c| {
        let config = sample_uniform::<f64>(3, lim.n, 2)?;
        let back: ConfigurationF64 = parse_config(&format_config(&config))?;
        let diff = config.coords().iter().zip(back.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c.observe(diff, || format!("N={}", lim.n));
        Ok(())
    })
}

fn mean_value() -> CheckResult {
    // Ratio of the largest to the smallest per-radius upper bound.
    Check::new("mean_value_bound_uniform_in_radius", 2.0).run(|c| {
        for &(d, s) in &[(4usize, 1.0), (3, 0.0)] {
            let mut rng = stream_rng(7, 11);
            let centers: Vec<_> = (0..10).map(|_| (random_point::<f64, _>(d, &mut rng), random_point(d, &mut rng))).collect();
            let mut bounds = Vec::new();
            for r in [0.01, 0.005, 0.0025] {
                let mut best = f64::MIN;
                for (a, b) in &centers {
                    best = best.max(mean_value_check(d, s, a, b, r)?);
                }
                bounds.push(best);
            }
            let max = bounds.iter().cloned().fold(f64::MIN, f64::max);
            let min = bounds.iter().cloned().fold(f64::MAX, f64::min);
            // Bounds that are never positive are trivially uniform.
            let ratio = if min > 0.0 {
                max / min
            } else if max <= 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            c.observe(ratio, || format!("d={d} s={s} bounds {bounds:?}"));
        }
        Ok(())
    })
}

/// Runs the suite with the production eigenvalues.
pub fn verify(level: Level) -> VerifyReport {
    verify_with(level, &|d, s, ell| riesz_eigenvalue(d, s, ell))
}

/// Runs the suite with `eigen` standing in for the eigenvalue formula.
pub fn verify_with(level: Level, eigen: EigenFn) -> VerifyReport {
    let lim = limits(level);
    let checks = vec![
        eigen_quadrature(eigen, &lim),
        newtonian_case(eigen, &lim),
        d_minus_two_case(eigen, &lim),
        eigen_asymptotics(eigen, &lim),
        cap_fraction_forms(),
        decomposition_identity(&lim),
        laplace_riesz(),
        gradient_vs_differences(),
        small_minimizers(),
        rotation_invariance(&lim),
        text_round_trip(&lim),
        mean_value(),
    ];
    let all_passed = checks.iter().all(|c| c.passed);
    VerifyReport { level, checks, all_passed }
}
