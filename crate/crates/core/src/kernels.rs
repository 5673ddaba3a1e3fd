//! Riesz and logarithmic kernels, discrete energies and their gradients,
//! continuous energies of the uniform measure, and normalized energy gaps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{KahanSum, Scalar};
use crate::special::{digamma, ln_gamma};
use crate::sphere::{distance_sq, dot, Configuration, Exponent, SpherePoint};

/// Pairs closer than this are treated as coincident.
pub const SINGULAR_DISTANCE: f64 = 1e-15;

/// The pair `(d, s)` with `0 ≤ s < d`; `s = 0` selects the logarithmic kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszParams<T> {
    pub d: usize,
    pub s: T,
}

impl<T: Scalar> RieszParams<T> {
    pub fn new(d: usize, s: T) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("sphere dimension must be at least 2, got {d}")));
        }
        if !(s >= T::zero() && s < T::from_usize_lossy(d)) {
            return Err(invalid(format!("exponent must satisfy 0 <= s < d = {d}, got {s}")));
        }
        Ok(Self { d, s })
    }

    pub fn from_exponent(d: usize, s: Exponent) -> Result<Self> {
        Self::new(d, T::lit(s.value()))
    }

    pub fn is_log(&self) -> bool {
        self.s == T::zero()
    }

    pub fn exponent(&self) -> Exponent {
        Exponent::from_value(self.s.as_f64())
    }
}

/// `R_s` as a function of the squared chord distance.
#[inline]
pub(crate) fn kernel_from_sq<T: Scalar>(s: T, dist_sq: T) -> T {
    if s == T::zero() {
        -T::lit(0.5) * dist_sq.ln()
    } else if s == T::one() {
        dist_sq.sqrt().recip()
    } else {
        dist_sq.powf(-s * T::lit(0.5))
    }
}

/// `R_s(x, y) = |x − y|^{−s}`, or `−log|x − y|` when `s = 0`.
pub fn riesz_kernel<T: Scalar>(params: &RieszParams<T>, x: &SpherePoint<T>, y: &SpherePoint<T>) -> Result<T> {
    let dsq = distance_sq(x.coords(), y.coords());
    if dsq.sqrt() < T::lit(SINGULAR_DISTANCE) {
        return Err(Error::Singularity { i: 0, j: 1, distance: dsq.sqrt().as_f64() });
    }
    Ok(kernel_from_sq(params.s, dsq))
}

fn check_dim<T: Scalar>(config: &Configuration<T>, params: &RieszParams<T>) -> Result<()> {
    if config.dim() != params.d {
        return Err(invalid(format!(
            "configuration lives on S^{} but parameters are for S^{}",
            config.dim(),
            params.d
        )));
    }
    Ok(())
}

fn singular<T: Scalar>(dsq: T) -> bool {
    dsq.sqrt() < T::lit(SINGULAR_DISTANCE)
}

/// `Σ_{i≠j} R_s(x_i, x_j)` over ordered pairs.
///
/// Rows `i` sum `j > i` with compensated accumulation; row totals are combined in
/// row order, so the result does not depend on the number of worker threads.
pub fn discrete_energy<T: Scalar>(config: &Configuration<T>, params: &RieszParams<T>) -> Result<T> {
    check_dim(config, params)?;
    let n = config.len();
    let rows: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = config.point(i);
            let mut acc = KahanSum::new();
            for j in (i + 1)..n {
                let dsq = distance_sq(xi, config.point(j));
                if singular(dsq) {
                    return Err(Error::Singularity { i, j, distance: dsq.sqrt().as_f64() });
                }
                acc.add(kernel_from_sq(params.s, dsq));
            }
            Ok(acc.value())
        })
        .collect();
    let mut total = KahanSum::new();
    for r in rows {
        total.add(r?);
    }
    Ok(T::lit(2.0) * total.value())
}

/// Per-point contribution `Σ_{j≠i} R_s(x_i, x_j)` and the tangent gradient at `x_i`.
fn row_energy_gradient<T: Scalar>(
    config: &Configuration<T>,
    params: &RieszParams<T>,
    i: usize,
    grad: &mut [T],
) -> Result<T> {
    let xi = config.point(i);
    let n = config.len();
    let s = params.s;
    let unit = s == T::one();
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut energy = KahanSum::new();
    for j in 0..n {
        if j == i {
            continue;
        }
        let xj = config.point(j);
        let dsq = distance_sq(xi, xj);
        if singular(dsq) {
            let (a, b) = (i.min(j), i.max(j));
            return Err(Error::Singularity { i: a, j: b, distance: dsq.sqrt().as_f64() });
        }
        // coeff = −(1/|d|) ∂R/∂|d|, so the ambient gradient is −2 Σ coeff (x_i − x_j)
        let inv_sq = dsq.recip();
        let coeff = if params.is_log() {
            energy.add(-T::lit(0.5) * dsq.ln());
            inv_sq
        } else {
            let k = if unit { inv_sq.sqrt() } else { dsq.powf(-s * T::lit(0.5)) };
            energy.add(k);
            s * k * inv_sq
        };
        let c2 = T::lit(2.0) * coeff;
        for ((g, &a), &b) in grad.iter_mut().zip(xi).zip(xj) {
            *g -= c2 * (a - b);
        }
    }
    let radial = dot(grad, xi);
    for (g, &a) in grad.iter_mut().zip(xi) {
        *g -= radial * a;
    }
    Ok(energy.value())
}

/// Tangent gradients of the energy, flattened like the configuration's coordinates.
///
/// Ambient gradient of point `i` is `−2s Σ_j (x_i − x_j)|x_i − x_j|^{−s−2}`
/// (`−2 Σ_j (x_i − x_j)|x_i − x_j|^{−2}` for the log kernel), projected by
/// `g ↦ g − ⟨g, x_i⟩x_i`.
pub fn energy_gradient<T: Scalar>(config: &Configuration<T>, params: &RieszParams<T>) -> Result<Vec<T>> {
    energy_and_gradient(config, params).map(|(_, g)| g)
}

/// Energy and tangent gradient in a single pass over all ordered pairs.
///
/// The energy here is summed row by row over `j ≠ i`, which differs from
/// [`discrete_energy`] only by rounding.
pub fn energy_and_gradient<T: Scalar>(config: &Configuration<T>, params: &RieszParams<T>) -> Result<(T, Vec<T>)> {
    check_dim(config, params)?;
    let w = config.dim() + 1;
    let mut grad = vec![T::zero(); config.coords().len()];
    let rows: Vec<Result<T>> = grad
        .par_chunks_mut(w)
        .enumerate()
        .map(|(i, g)| row_energy_gradient(config, params, i, g))
        .collect();
    let mut total = KahanSum::new();
    for r in rows {
        total.add(r?);
    }
    Ok((total.value(), grad))
}

/// Largest Euclidean norm among the per-point tangent gradients.
pub fn grad_inf_norm<T: Scalar>(grad: &[T], d: usize) -> T {
    grad.chunks_exact(d + 1).map(|g| dot(g, g).sqrt()).fold(T::zero(), T::max)
}

/// Energy `E_s(σ̃) = ∬ R_s dσ̃ dσ̃` of the normalized surface measure.
///
/// `2^{d−s−1} Γ((d+1)/2) Γ((d−s)/2) / (√π Γ(d − s/2))` for `s > 0` and
/// `(ψ(d) − ψ(d/2))/2 − log 2` for the log kernel.
pub fn continuous_energy<T: Scalar>(params: &RieszParams<T>) -> T {
    let d = T::from_usize_lossy(params.d);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    if params.is_log() {
        return (digamma(d) - digamma(d * half)) * half - two.ln();
    }
    let s = params.s;
    let log = (d - s - T::one()) * two.ln() + ln_gamma((d + T::one()) * half) + ln_gamma((d - s) * half)
        - half * T::PI().ln()
        - ln_gamma(d - s * half);
    log.exp()
}

/// Energy of a configuration together with its normalized second-order gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyStats {
    pub energy: f64,
    /// `(E − E_s(σ̃)N²)/N^{1+s/d}`, or `(E − E_0(σ̃)N² + N log N / d)/N` for the log kernel.
    pub gap: f64,
    /// The `N log N / d` correction added in the log case.
    pub log_coeff_context: Option<f64>,
}

/// Gap statistic for a known energy value at `n` points.
pub fn gap_from_energy<T: Scalar>(energy: T, n: usize, params: &RieszParams<T>) -> EnergyStats {
    let e = energy.as_f64();
    let nn = n as f64;
    let d = params.d as f64;
    let cont = continuous_energy(params).as_f64();
    if params.is_log() {
        let correction = nn * nn.ln() / d;
        EnergyStats { energy: e, gap: (e - cont * nn * nn + correction) / nn, log_coeff_context: Some(correction) }
    } else {
        let s = params.s.as_f64();
        EnergyStats { energy: e, gap: (e - cont * nn * nn) / nn.powf(1.0 + s / d), log_coeff_context: None }
    }
}

pub fn energy_gap<T: Scalar>(config: &Configuration<T>, params: &RieszParams<T>) -> Result<EnergyStats> {
    let e = discrete_energy(config, params)?;
    Ok(gap_from_energy(e, config.len(), params))
}

/// Spherical Laplacian of `f` at the unit vector `x`, by a second-order central
/// stencil applied to the degree-0 homogeneous extension `z ↦ f(z/|z|)`.
pub fn spherical_laplacian_fd<T: Scalar, F: Fn(&[T]) -> T>(f: F, x: &[T], h: T) -> T {
    let ext = |z: &[T]| {
        let n = dot(z, z).sqrt();
        let u: Vec<T> = z.iter().map(|&c| c / n).collect();
        f(&u)
    };
    let centre = ext(x);
    let mut z = x.to_vec();
    let mut acc = T::zero();
    for k in 0..x.len() {
        z[k] = x[k] + h;
        let plus = ext(&z);
        z[k] = x[k] - h;
        let minus = ext(&z);
        z[k] = x[k];
        acc += plus - T::lit(2.0) * centre + minus;
    }
    acc / (h * h)
}

/// Signed residual of the Laplace–Riesz identity at `x` for the pole `x0`,
/// with the Laplacian replaced by [`spherical_laplacian_fd`] at step `h`.
///
/// For `s > 0`: `(−Δ + s(2d−2−s)/4) R_s − s(d−2−s) R_{s+2}`.
/// For the log kernel: `−Δ R_0 − (d−2) R_2 + (d−1)/2`.
pub fn laplace_riesz_residual<T: Scalar>(params: &RieszParams<T>, x: &[T], x0: &[T], h: T) -> Result<T> {
    let dsq = distance_sq(x, x0);
    if singular(dsq) {
        return Err(Error::Singularity { i: 0, j: 1, distance: dsq.sqrt().as_f64() });
    }
    let s = params.s;
    let d = T::from_usize_lossy(params.d);
    let two = T::lit(2.0);
    let lap = spherical_laplacian_fd(|u: &[T]| kernel_from_sq(s, distance_sq(u, x0)), x, h);
    let r_s2 = kernel_from_sq(s + two, dsq);
    if params.is_log() {
        Ok(-lap - (d - two) * r_s2 + (d - T::one()) * T::lit(0.5))
    } else {
        let shift = s * (two * d - two - s) * T::lit(0.25);
        Ok(-lap + shift * kernel_from_sq(s, dsq) - s * (d - two - s) * r_s2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{random_rotation, sample_uniform, stream_rng, ConfigMeta};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn meta() -> ConfigMeta {
        ConfigMeta::new(None, 0)
    }

    fn antipodal() -> Configuration<f64> {
        Configuration::from_points(2, vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]], meta()).unwrap()
    }

    fn tetrahedron() -> Configuration<f64> {
        let a = 1.0 / 3f64.sqrt();
        Configuration::from_points(
            2,
            vec![vec![a, a, a], vec![a, -a, -a], vec![-a, a, -a], vec![-a, -a, a]],
            meta(),
        )
        .unwrap()
    }

    fn brute_energy(c: &Configuration<f64>, s: f64) -> f64 {
        let mut e = 0.0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                if i != j {
                    let r: f64 = c.point(i).iter().zip(c.point(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    e += if s == 0.0 { -r.ln() } else { r.powf(-s) };
                }
            }
        }
        e
    }

    #[test]
    fn params_validation() {
        assert!(RieszParams::new(2, 2.0_f64).is_err());
        assert!(RieszParams::new(2, -0.1_f64).is_err());
        assert!(RieszParams::new(1, 0.5_f64).is_err());
        assert!(RieszParams::new(3, 0.0_f64).unwrap().is_log());
    }

    #[test]
    fn kernel_examples() {
        let n = SpherePoint::<f64>::north(2);
        let p1 = RieszParams::new(2, 1.0).unwrap();
        let p0 = RieszParams::new(2, 0.0).unwrap();
        assert_relative_eq!(riesz_kernel(&p1, &n, &n.antipode()).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(riesz_kernel(&p0, &n, &n.antipode()).unwrap(), -2f64.ln(), max_relative = 1e-15);
        let p = RieszParams::new(3, 2.5).unwrap();
        let x = SpherePoint::<f64>::basis(3, 0);
        let y = SpherePoint::<f64>::basis(3, 2);
        assert_relative_eq!(riesz_kernel(&p, &x, &y).unwrap(), 2f64.powf(-1.25), max_relative = 1e-14);
        assert!(matches!(riesz_kernel(&p1, &n, &n), Err(Error::Singularity { .. })));
    }

    #[test]
    fn energy_examples() {
        let p1 = RieszParams::new(2, 1.0).unwrap();
        assert_relative_eq!(discrete_energy(&antipodal(), &p1).unwrap(), 1.0, max_relative = 1e-15);
        let tri = Configuration::from_points(
            2,
            vec![vec![1.0, 0.0, 0.0], vec![-0.5, 0.75f64.sqrt(), 0.0], vec![-0.5, -(0.75f64.sqrt()), 0.0]],
            meta(),
        )
        .unwrap();
        assert_relative_eq!(discrete_energy(&tri, &p1).unwrap(), 6.0 / 3f64.sqrt(), max_relative = 1e-14);
        let p0 = RieszParams::new(2, 0.0).unwrap();
        let tet = tetrahedron();
        let e = discrete_energy(&tet, &p0).unwrap();
        assert_relative_eq!(e, brute_energy(&tet, 0.0), max_relative = 1e-14);
        assert_relative_eq!(e, -6.0 * (8.0f64 / 3.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn coincident_pair_is_reported() {
        let p = vec![0.0, 0.6, 0.8];
        let c = Configuration::from_parts_unvalidated(2, [vec![1.0, 0.0, 0.0], p.clone(), p].concat(), meta()).unwrap();
        let p1 = RieszParams::new(2, 1.0).unwrap();
        assert_eq!(discrete_energy(&c, &p1).unwrap_err(), Error::Singularity { i: 1, j: 2, distance: 0.0 });
        assert!(matches!(energy_gradient(&c, &p1), Err(Error::Singularity { i: 1, j: 2, .. })));
    }

    #[test]
    fn symmetric_configurations_are_critical() {
        for s in [0.0, 0.5, 1.0, 1.9] {
            let p = RieszParams::new(2, s).unwrap();
            let g = energy_gradient(&antipodal(), &p).unwrap();
            assert!(g.iter().all(|v| v.abs() < 1e-14));
        }
        let g = energy_gradient(&tetrahedron(), &RieszParams::new(2, 1.0).unwrap()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10));
    }

    /// Central difference of the energy along a tangent direction at point `i`.
    fn fd_directional(c: &Configuration<f64>, p: &RieszParams<f64>, i: usize, dir: &[f64], h: f64) -> f64 {
        let shifted = |sign: f64| {
            let mut coords = c.coords().to_vec();
            let w = c.dim() + 1;
            let pt = &mut coords[i * w..(i + 1) * w];
            pt.iter_mut().zip(dir).for_each(|(x, v)| *x += sign * h * v);
            let n = pt.iter().map(|x| x * x).sum::<f64>().sqrt();
            pt.iter_mut().for_each(|x| *x /= n);
            Configuration::from_parts_unvalidated(c.dim(), coords, meta()).unwrap()
        };
        (discrete_energy(&shifted(1.0), p).unwrap() - discrete_energy(&shifted(-1.0), p).unwrap()) / (2.0 * h)
    }

    fn check_gradient(d: usize, s: f64, seed: u64) {
        let c = sample_uniform::<f64>(d, 5, seed).unwrap();
        let p = RieszParams::new(d, s).unwrap();
        let g = energy_gradient(&c, &p).unwrap();
        let w = d + 1;
        let mut rng = stream_rng(seed, 99);
        for i in 0..c.len() {
            let gi = &g[i * w..(i + 1) * w];
            assert!(dot(gi, c.point(i)).abs() < 1e-12, "gradient not tangent");
            // Probe along the gradient itself and along a random tangent direction.
            let rnd: Vec<f64> = crate::sphere::random_point::<f64, _>(d, &mut rng).into_coords();
            let proj = dot(&rnd, c.point(i));
            let tangent: Vec<f64> = rnd.iter().zip(c.point(i)).map(|(a, b)| a - proj * b).collect();
            for dir in [gi.to_vec(), tangent] {
                let nrm = dot(&dir, &dir).sqrt();
                let unit: Vec<f64> = dir.iter().map(|x| x / nrm).collect();
                let analytic = dot(gi, &unit);
                let numeric = fd_directional(&c, &p, i, &unit, 1e-5);
                let scale = dot(gi, gi).sqrt().max(1e-3);
                assert!(
                    (analytic - numeric).abs() <= 1e-5 * scale,
                    "d={d} s={s} i={i}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for d in 2..=4usize {
            let df = d as f64;
            let mut exps = vec![0.0, 0.5, df - 2.0, df - 1.0, df - 0.5];
            exps.dedup();
            for (k, s) in exps.into_iter().enumerate() {
                check_gradient(d, s, 10 * d as u64 + k as u64);
            }
        }
    }

    #[test]
    fn continuous_energy_examples() {
        let e = |d, s| continuous_energy(&RieszParams::new(d, s).unwrap());
        assert_relative_eq!(e(2, 1.0_f64), 1.0, max_relative = 1e-14);
        assert!((e(2, 0.0_f64) - (0.5 - 2f64.ln())).abs() < 1e-14);
        assert_relative_eq!(e(3, 2.0_f64), 1.0, max_relative = 1e-14);
    }

    /// Monte Carlo estimate of ∬ R_s dσ̃ dσ̃ from independent uniform pairs.
    fn monte_carlo_energy(d: usize, s: f64, pairs: usize, seed: u64) -> (f64, f64) {
        let mut rng = stream_rng(seed, 7);
        let p = RieszParams::new(d, s).unwrap();
        let (mut m, mut m2) = (0.0, 0.0);
        for _ in 0..pairs {
            let x = crate::sphere::random_point::<f64, _>(d, &mut rng);
            let y = crate::sphere::random_point::<f64, _>(d, &mut rng);
            let v = riesz_kernel(&p, &x, &y).unwrap();
            m += v;
            m2 += v * v;
        }
        let mean = m / pairs as f64;
        let var = m2 / pairs as f64 - mean * mean;
        (mean, (var / pairs as f64).sqrt())
    }

    #[test]
    fn continuous_energy_matches_monte_carlo() {
        for &(d, s) in &[(2usize, 1.0), (2, 0.0), (3, 1.0)] {
            let (mean, se) = monte_carlo_energy(d, s, 1_000_000, 3);
            let exact = continuous_energy(&RieszParams::new(d, s).unwrap());
            assert!((mean - exact).abs() < 3.0 * se, "d={d} s={s}: {mean} ± {se} vs {exact}");
        }
    }

    #[test]
    fn continuous_energy_matches_quadrature() {
        // With t = ⟨x, y⟩ distributed as ω_{d−1}/ω_d (1−t²)^{(d−2)/2} dt, θ = arccos t.
        for &(d, s) in &[(3usize, 2.0), (3, 1.0), (4, 1.5), (3, 0.0)] {
            let p = RieszParams::new(d, s).unwrap();
            let ratio = crate::sphere::sphere_area::<f64>(d - 1) / crate::sphere::sphere_area::<f64>(d);
            let f = |theta: f64| {
                let dsq = 2.0 - 2.0 * theta.cos();
                kernel_from_sq(s, dsq) * theta.sin().powi(d as i32 - 1)
            };
            let q = crate::quadrature::integrate(f, 0.0, std::f64::consts::PI, 1e-13).unwrap() * ratio;
            assert_relative_eq!(q, continuous_energy(&p), max_relative = 1e-10);
        }
    }

    #[test]
    fn gap_examples() {
        let p1 = RieszParams::new(2, 1.0).unwrap();
        let g = energy_gap(&antipodal(), &p1).unwrap();
        assert_relative_eq!(g.gap, (1.0 - 4.0) / 2f64.powf(1.5), max_relative = 1e-14);
        let p0 = RieszParams::new(2, 0.0).unwrap();
        let g = energy_gap(&antipodal(), &p0).unwrap();
        let e0 = 0.5 - 2f64.ln();
        let expect = (-2.0 * 2f64.ln() - 4.0 * e0 + 2.0 * 2f64.ln() / 2.0) / 2.0;
        assert_relative_eq!(g.gap, expect, max_relative = 1e-14);
        assert!(g.log_coeff_context.is_some());
    }

    #[test]
    fn energy_is_rotation_and_permutation_invariant() {
        let c = sample_uniform::<f64>(3, 40, 5).unwrap();
        let p = RieszParams::new(3, 1.5).unwrap();
        let e = discrete_energy(&c, &p).unwrap();
        let q = random_rotation::<f64, _>(4, &mut stream_rng(1, 2));
        let rotated = c.transformed(&q).unwrap();
        assert_relative_eq!(discrete_energy(&rotated, &p).unwrap(), e, max_relative = 1e-10);
        let mut pts: Vec<Vec<f64>> = c.points().map(<[f64]>::to_vec).collect();
        pts.reverse();
        pts.swap(3, 17);
        let perm = Configuration::from_points(3, pts, meta()).unwrap();
        assert_relative_eq!(discrete_energy(&perm, &p).unwrap(), e, max_relative = 1e-12);
        assert_relative_eq!(energy_and_gradient(&c, &p).unwrap().0, e, max_relative = 1e-12);
    }

    #[test]
    fn energy_is_independent_of_thread_count() {
        let c = sample_uniform::<f64>(2, 300, 8).unwrap();
        let p = RieszParams::new(2, 1.0).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| (discrete_energy(&c, &p).unwrap(), energy_gradient(&c, &p).unwrap()))
        };
        let (e1, g1) = run(1);
        let (e4, g4) = run(4);
        assert_eq!(e1.to_bits(), e4.to_bits());
        assert_eq!(g1, g4);
    }

    fn residual_ratio(d: usize, s: f64, seed: u64) -> f64 {
        let p = RieszParams::new(d, s).unwrap();
        let mut rng = stream_rng(seed, 3);
        loop {
            let x = crate::sphere::random_point::<f64, _>(d, &mut rng);
            let x0 = crate::sphere::random_point::<f64, _>(d, &mut rng);
            if x.distance(&x0) < 0.5 {
                continue;
            }
            let h = 0.02;
            let r1 = laplace_riesz_residual(&p, x.coords(), x0.coords(), h).unwrap();
            let r2 = laplace_riesz_residual(&p, x.coords(), x0.coords(), h / 2.0).unwrap();
            return r1 / r2;
        }
    }

    #[test]
    fn laplace_riesz_identity_converges_quadratically() {
        for &(d, s) in &[(3usize, 0.5), (4, 1.0), (2, 0.0), (3, 0.0), (2, 1.0)] {
            for seed in 0..5 {
                let ratio = residual_ratio(d, s, seed);
                assert!((3.4..=4.6).contains(&ratio), "d={d} s={s} seed={seed}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn wrong_identity_does_not_converge() {
        // Dropping the zeroth-order term leaves an O(1) residual.
        let x = SpherePoint::<f64>::basis(3, 0);
        let x0 = SpherePoint::<f64>::basis(3, 1);
        let lap = |h| spherical_laplacian_fd(|u: &[f64]| kernel_from_sq(0.5, distance_sq(u, x0.coords())), x.coords(), h);
        let wrong = |h: f64| -lap(h) - 0.5 * 0.5 * kernel_from_sq(2.5, 2.0);
        let ratio = wrong(0.02) / wrong(0.01);
        assert!((ratio - 1.0).abs() < 0.1);
    }

    #[test]
    fn single_precision_energy() {
        let c = sample_uniform::<f32>(2, 30, 2).unwrap();
        let c64 = sample_uniform::<f64>(2, 30, 2).unwrap();
        let e32 = discrete_energy(&c, &RieszParams::new(2, 1.0_f32).unwrap()).unwrap();
        let e64 = discrete_energy(&c64, &RieszParams::new(2, 1.0).unwrap()).unwrap();
        assert!((f64::from(e32) / e64 - 1.0).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn rotation_invariance(seed in 0u64..1000, d in 2usize..5, frac in 0.0f64..0.99) {
            let s = frac * d as f64;
            let c = sample_uniform::<f64>(d, 12, seed).unwrap();
            let p = RieszParams::new(d, s).unwrap();
            let e = discrete_energy(&c, &p).unwrap();
            let q = random_rotation::<f64, _>(d + 1, &mut stream_rng(seed, 1));
            let e2 = discrete_energy(&c.transformed(&q).unwrap(), &p).unwrap();
            prop_assert!((e2 - e).abs() <= 1e-10 * e.abs().max(1.0));
        }

        #[test]
        fn gap_is_finite(seed in 0u64..1000, n in 2usize..30) {
            let c = sample_uniform::<f64>(2, n, seed).unwrap();
            for s in [0.0, 1.0] {
                let g = energy_gap(&c, &RieszParams::new(2, s).unwrap()).unwrap();
                prop_assert!(g.gap.is_finite());
            }
        }
    }
}
