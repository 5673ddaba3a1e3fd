//! Spherical cap discrepancy, the decomposition of the cap-smoothed pair
//! energy, the smoothing defect, and the cap mean-value excess.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{continuous_energy, kernel_from_sq, riesz_kernel, RieszParams};
use crate::scalar::{KahanSum, Scalar};
use crate::spectral::{
    eigenvalue_unchecked, measure_series_fixed, smoothing_radius, sobolev_discrepancy, PairCapKernel,
    SobolevDiscrepancyResult, PAIR_CAP_TOL,
};
use crate::sphere::{
    cap_area, cap_fraction_exact, distance_sq, dot, random_point, separation, stream_rng, Cap, Configuration,
    Exponent, Separation, SpherePoint,
};

/// RNG stream of the random candidate centers.
pub const CENTER_STREAM: u64 = 1 << 40;

/// Best cap found by [`cap_discrepancy`]; a lower bound on the supremum over all caps.
#[derive(Clone, Debug, PartialEq)]
pub struct CapDiscrepancyEstimate<T> {
    pub value: T,
    pub argmax_cap: Cap<T>,
    /// Inner-product threshold of the witness, `⟨center, y⟩ > threshold` (or `≥` when `closed`).
    pub threshold: T,
    /// Whether the witness counts the boundary. A closed cap is the limit of
    /// slightly larger open caps with the same point count.
    pub closed: bool,
    pub centers_tested: usize,
    pub is_lower_bound: bool,
}

impl<T: Scalar> CapDiscrepancyEstimate<T> {
    /// `|count/N − F_d(threshold)|` for the witness, recounted from scratch.
    pub fn recompute(&self, config: &Configuration<T>) -> T {
        let c = self.argmax_cap.center.coords();
        let count = config
            .points()
            .filter(|p| {
                let v = dot(c, p);
                if self.closed {
                    v >= self.threshold
                } else {
                    v > self.threshold
                }
            })
            .count();
        let frac = T::from_usize_lossy(count) / T::from_usize_lossy(config.len());
        (frac - cap_fraction_exact(config.dim(), self.threshold)).abs()
    }
}

struct CenterBest<T> {
    value: T,
    threshold: T,
    closed: bool,
}

/// Sweeps every threshold `⟨c, x_j⟩` for one center.
fn sweep_center<T: Scalar>(config: &Configuration<T>, c: &[T]) -> CenterBest<T> {
    let d = config.dim();
    let nf = T::from_usize_lossy(config.len());
    let mut ts: Vec<T> = config.points().map(|p| dot(c, p)).collect();
    ts.sort_by(|a, b| b.partial_cmp(a).expect("finite inner products"));
    let mut best = CenterBest { value: T::zero(), threshold: -T::one(), closed: false };
    let mut i = 0;
    while i < ts.len() {
        let t = ts[i];
        let mut j = i + 1;
        while j < ts.len() && ts[j] == t {
            j += 1;
        }
        let f = cap_fraction_exact(d, t);
        // Points strictly above t: i; at or above t: j.
        let open = (T::from_usize_lossy(i) / nf - f).abs();
        if open > best.value {
            best = CenterBest { value: open, threshold: t, closed: false };
        }
        if t < T::one() {
            let closed = (T::from_usize_lossy(j) / nf - f).abs();
            if closed > best.value {
                best = CenterBest { value: closed, threshold: t, closed: true };
            }
        }
        i = j;
    }
    best
}

/// Cap discrepancy over the caps centered at the given points, the configuration
/// points and their antipodes, at every threshold met by a configuration point.
pub fn cap_discrepancy_with_centers<T: Scalar>(
    config: &Configuration<T>,
    centers: &[SpherePoint<T>],
) -> Result<CapDiscrepancyEstimate<T>> {
    let d = config.dim();
    if let Some(c) = centers.iter().find(|c| c.dim() != d) {
        return Err(invalid(format!("center on S^{} for a configuration on S^{d}", c.dim())));
    }
    let own: Vec<SpherePoint<T>> = (0..config.len()).map(|i| config.sphere_point(i)).collect();
    let antipodes: Vec<SpherePoint<T>> = own.iter().map(SpherePoint::antipode).collect();
    let all: Vec<&SpherePoint<T>> = own.iter().chain(&antipodes).chain(centers).collect();
    let results: Vec<CenterBest<T>> = all.par_iter().map(|c| sweep_center(config, c.coords())).collect();
    let mut arg = 0;
    for (k, r) in results.iter().enumerate() {
        if r.value > results[arg].value {
            arg = k;
        }
    }
    let best = &results[arg];
    Ok(CapDiscrepancyEstimate {
        value: best.value,
        argmax_cap: Cap::from_threshold(all[arg].clone(), best.threshold)?,
        threshold: best.threshold,
        closed: best.closed,
        centers_tested: all.len(),
        is_lower_bound: true,
    })
}

/// Lower estimate of `sup_caps |#(X ∩ D)/N − σ(D)/ω_d|`.
///
/// Candidate centers are the points, their antipodes and `centers_budget`
/// uniform random centers drawn from stream [`CENTER_STREAM`] of `seed`, so a
/// larger budget tests a superset of centers.
pub fn cap_discrepancy<T: Scalar>(
    config: &Configuration<T>,
    centers_budget: usize,
    seed: u64,
) -> Result<CapDiscrepancyEstimate<T>> {
    if centers_budget < 1 {
        return Err(invalid("centers_budget must be at least 1"));
    }
    let mut rng = stream_rng(seed, CENTER_STREAM);
    let centers: Vec<SpherePoint<T>> = (0..centers_budget).map(|_| random_point(config.dim(), &mut rng)).collect();
    cap_discrepancy_with_centers(config, &centers)
}

/// Both sides of the decomposition of the off-diagonal cap-smoothed energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Truncation tolerance of the spectral series.
    pub quadrature_tol: f64,
    /// Highest degree included on both sides.
    pub l_used: usize,
}

/// Truncation tolerance of [`stolarsky_decomposition_check`]: both sides stop at
/// the degree where the pair-kernel coefficients stay below this multiple of `c_0`.
pub const IDENTITY_SERIES_TOL: f64 = 1e-7;

fn pair_sum<T: Scalar, F: Fn(T) -> T + Sync>(config: &Configuration<T>, f: F) -> T {
    let n = config.len();
    let rows: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = config.point(i);
            let mut acc = KahanSum::new();
            for j in (i + 1)..n {
                acc.add(f(dot(xi, config.point(j))));
            }
            acc.value()
        })
        .collect();
    let mut total = KahanSum::new();
    for r in rows {
        total.add(r);
    }
    total.value()
}

/// Checks
/// `(1/N²) Σ_{i≠j} ∬R_s dμ_i dμ_j = I_s(σ̃) + ∬R_s dμ dμ − (1/N) ⨍_D⨍_D R_s`,
/// where `μ_i` is normalized surface measure on the cap of radius `ε N^{−1/d}`
/// around `x_i` and `μ = (1/N)Σμ_i − σ̃`.
///
/// The left side sums the cap-averaged pair kernel over pairs; the right side
/// combines the closed-form continuous energy, the zonal-sum series for
/// `∬R_s dμ dμ` and the cap self-average. Both spectral sides are cut at the
/// same degree.
pub fn stolarsky_decomposition_check<T: Scalar>(config: &Configuration<T>, s: T, epsilon: T) -> Result<IdentityReport> {
    let d = config.dim();
    let params = RieszParams::new(d, s)?;
    let n = config.len();
    let r_f = smoothing_radius(epsilon.as_f64(), n, d);
    if !(epsilon > T::zero()) || r_f > 2.0 {
        return Err(invalid(format!("need ε > 0 and cap radius ≤ 2, got ε = {epsilon}, radius {r_f}")));
    }
    let r = T::lit(r_f);
    let nf = T::from_usize_lossy(n);
    let scale = nf * cap_area(d, r)?;
    let kernel = PairCapKernel::new(d, s, r, T::lit(IDENTITY_SERIES_TOL))?;
    if !kernel.is_complete() {
        return Err(Error::Convergence { partial: kernel.eval_all(T::one()).as_f64(), degree_cap: kernel.degree() });
    }
    let degree = kernel.degree();
    let mu = measure_series_fixed(config, r, degree, |ell, lam| {
        let m = lam / scale;
        eigenvalue_unchecked(&params, ell) * m * m
    })?;
    let lhs = T::lit(2.0) * pair_sum(config, |t| kernel.eval_all(t)) / (nf * nf);
    let rhs = continuous_energy(&params) + mu - kernel.eval_all(T::one()) / nf;
    Ok(IdentityReport {
        lhs: lhs.as_f64(),
        rhs: rhs.as_f64(),
        residual: (lhs - rhs).abs().as_f64(),
        quadrature_tol: IDENTITY_SERIES_TOL,
        l_used: degree,
    })
}

/// Average gap between point interactions and their cap-averaged counterparts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingDefect {
    /// `(1/N²) Σ_{i≠j} |R_s(x_i, x_j) − ⨍_{D_j}⨍_{D_i} R_s|`.
    pub defect: f64,
    /// `ε² (N^{−2/d} + N^{−1+s/d})`.
    pub bound_scale: f64,
    pub ratio: f64,
    pub radius: f64,
}

/// Spacing in `ln θ` of the tabulated cap-averaged kernel.
const TABLE_STEP: f64 = 0.005;

/// Cap-averaged kernel on a grid uniform in `ln θ`, read by 4-point Lagrange interpolation.
struct AngleTable<T> {
    u0: f64,
    step: f64,
    values: Vec<T>,
}

impl<T: Scalar> AngleTable<T> {
    fn new(kernel: &PairCapKernel<T>, theta_min: f64) -> Result<Self> {
        let u0 = theta_min.ln() - TABLE_STEP;
        let u1 = std::f64::consts::PI.ln();
        let m = (((u1 - u0) / TABLE_STEP).ceil() as usize).max(3);
        let step = (u1 - u0) / m as f64;
        let values = (0..=m)
            .into_par_iter()
            .map(|k| kernel.eval(T::lit((u0 + k as f64 * step).exp().min(std::f64::consts::PI).cos())))
            .collect::<Result<Vec<T>>>()?;
        Ok(Self { u0, step, values })
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn at(&self, theta: f64) -> T {
        let x = (theta.ln() - self.u0) / self.step;
        let i = (x.floor() as isize - 1).clamp(0, self.values.len() as isize - 4) as usize;
        let mut acc = T::zero();
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - (i + b) as f64) / (a as f64 - b as f64);
                }
            }
            acc += T::lit(w) * self.values[i + a];
        }
        acc
    }
}

/// Smoothing defect of `config` for caps of radius `ε N^{−1/d}`.
///
/// Requires the scaled separation `N^{1/d} min|x_i − x_j|` to be at least `8ε`,
/// which also keeps the caps pairwise disjoint. For larger configurations the
/// cap-averaged kernel is tabulated over the occurring angles.
pub fn smoothing_defect<T: Scalar>(config: &Configuration<T>, s: T, epsilon: T) -> Result<SmoothingDefect> {
    let d = config.dim();
    let params = RieszParams::new(d, s)?;
    let n = config.len();
    if n < 2 {
        return Err(invalid("smoothing defect needs at least two points"));
    }
    let eps = epsilon.as_f64();
    if !(eps > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {eps}")));
    }
    let sep = separation(config)?;
    if sep.scaled < 8.0 * eps {
        return Err(Error::Precondition(format!(
            "scaled separation {} is below 8ε = {}",
            sep.scaled,
            8.0 * eps
        )));
    }
    let r_f = smoothing_radius(eps, n, d);
    let r = T::lit(r_f);
    let kernel = PairCapKernel::new(d, s, r, T::lit(PAIR_CAP_TOL))?;
    let theta_min = 2.0 * (sep.min_dist / 2.0).min(1.0).asin();
    let pairs = n * (n - 1) / 2;
    let table = AngleTable::new(&kernel, theta_min);
    let rows: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = config.point(i);
            let mut acc = KahanSum::new();
            for j in (i + 1)..n {
                let xj = config.point(j);
                let dsq = distance_sq(xi, xj);
                let avg = match &table {
                    Ok(tab) if pairs > 4 * tab.len() => tab.at(2.0 * (dsq.as_f64().sqrt() / 2.0).min(1.0).asin()),
                    _ => kernel.eval(dot(xi, xj))?,
                };
                acc.add((kernel_from_sq(params.s, dsq) - avg).abs());
            }
            Ok(acc.value())
        })
        .collect();
    let mut total = KahanSum::new();
    for r in rows {
        total.add(r?);
    }
    let nf = n as f64;
    let defect = 2.0 * total.value().as_f64() / (nf * nf);
    let df = d as f64;
    let bound_scale = eps * eps * (nf.powf(-2.0 / df) + nf.powf(-1.0 + s.as_f64() / df));
    Ok(SmoothingDefect { defect, bound_scale, ratio: defect / bound_scale, radius: r_f })
}

/// Largest cap radius accepted by [`mean_value_check`].
pub const MEAN_VALUE_MAX_RADIUS: f64 = 0.01;

/// `(⨍_{D_r(a)}⨍_{D_r(b)} R_s − R_s(a, b)) / r²`.
///
/// Defined for `d > 2, 0 < s < d − 2` and for the logarithmic kernel on any
/// `𝕊ᵈ`, with `0 < r ≤ 0.01`.
pub fn mean_value_check<T: Scalar>(d: usize, s: T, a: &SpherePoint<T>, b: &SpherePoint<T>, r: T) -> Result<T> {
    let params = RieszParams::new(d, s)?;
    let df = T::from_usize_lossy(d);
    let riesz_regime = d > 2 && s > T::zero() && s < df - T::lit(2.0);
    if !(riesz_regime || params.is_log()) {
        return Err(invalid(format!("mean-value excess needs d > 2 and 0 < s < d − 2, or s = 0; got d = {d}, s = {s}")));
    }
    if !(r > T::zero() && r <= T::lit(MEAN_VALUE_MAX_RADIUS)) {
        return Err(invalid(format!("cap radius must lie in (0, {MEAN_VALUE_MAX_RADIUS}], got {r}")));
    }
    if a.dim() != d || b.dim() != d {
        return Err(invalid(format!("centers must lie on S^{d}")));
    }
    let point = riesz_kernel(&params, a, b)?;
    let avg = PairCapKernel::new(d, s, r, T::lit(PAIR_CAP_TOL))?.eval(a.dot(b))?;
    Ok((avg - point) / (r * r))
}

/// Discrepancy measurements of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub d: usize,
    pub n: usize,
    pub s: Exponent,
    pub sobolev: SobolevDiscrepancyResult,
    pub cap_value: f64,
    pub cap_center: Vec<f64>,
    pub cap_radius: f64,
    pub cap_threshold: f64,
    pub cap_closed: bool,
    pub centers_tested: usize,
    pub separation: Option<Separation>,
}

/// Sobolev and cap discrepancy together with the separation of `config`.
pub fn discrepancy_report<T: Scalar>(
    config: &Configuration<T>,
    s: T,
    epsilon: T,
    tol: T,
    centers_budget: usize,
    seed: u64,
) -> Result<DiscrepancyReport> {
    let params = RieszParams::new(config.dim(), s)?;
    let sobolev = sobolev_discrepancy(config, s, epsilon, tol)?;
    let cap = cap_discrepancy(config, centers_budget, seed)?;
    Ok(DiscrepancyReport {
        d: config.dim(),
        n: config.len(),
        s: params.exponent(),
        sobolev,
        cap_value: cap.value.as_f64(),
        cap_center: cap.argmax_cap.center.coords().iter().map(|c| c.as_f64()).collect(),
        cap_radius: cap.argmax_cap.radius.as_f64(),
        cap_threshold: cap.threshold.as_f64(),
        cap_closed: cap.closed,
        centers_tested: cap.centers_tested,
        separation: if config.len() >= 2 { Some(separation(config)?) } else { None },
    })
}
