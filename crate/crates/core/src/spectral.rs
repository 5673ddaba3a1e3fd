//! Gegenbauer polynomials, zonal kernels, eigenvalues of the Riesz kernel on
//! 𝕊ᵈ, Funk–Hecke multipliers of cap indicators, and spectral sums over point
//! configurations (Sobolev discrepancy, cap-averaged pair energies).

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{continuous_energy, RieszParams};
use crate::quadrature;
use crate::scalar::{KahanSum, Scalar};
use crate::special::{gamma_ratio, ln_gamma};
use crate::sphere::{cap_area, dot, sphere_area, Configuration};

/// Degrees processed per pass over the point pairs.
const DEGREE_BLOCK: usize = 64;
/// Pairs per parallel work item; fixed so reductions do not depend on thread count.
const PAIR_CHUNK: usize = 2048;
/// Minimum number of consecutive negligible terms before a spectral sum stops.
pub const MIN_RUN: usize = 10;

/// `C_ℓ^α(t)` by the three-term recurrence
/// `ℓ C_ℓ = 2t(ℓ+α−1) C_{ℓ−1} − (ℓ+2α−2) C_{ℓ−2}`, `C_0 = 1`, `C_1 = 2αt`.
pub fn gegenbauer<T: Scalar>(alpha: T, ell: usize, t: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(invalid(format!("Gegenbauer parameter must be positive, got {alpha}")));
    }
    let two = T::lit(2.0);
    let (mut prev, mut cur) = (T::one(), two * alpha * t);
    if ell == 0 {
        return Ok(prev);
    }
    for l in 2..=ell {
        let lf = T::from_usize_lossy(l);
        let next = (two * t * (lf + alpha - T::one()) * cur - (lf + two * alpha - two) * prev) / lf;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `C_ℓ^α(1) = binom(2α+ℓ−1, ℓ)`.
pub fn gegenbauer_at_one<T: Scalar>(alpha: T, ell: usize) -> T {
    let two_alpha = T::lit(2.0) * alpha;
    let l = T::from_usize_lossy(ell);
    (ln_gamma(two_alpha + l) - ln_gamma(two_alpha) - ln_gamma(l + T::one())).exp()
}

/// Coefficients `(a_ℓ, b_ℓ)` of `R_ℓ = a_ℓ t R_{ℓ−1} − b_ℓ R_{ℓ−2}` for the
/// normalized polynomials `R_ℓ = C_ℓ^α / C_ℓ^α(1)`, valid for `ℓ ≥ 2`.
#[inline]
fn normalized_coeffs<T: Scalar>(alpha: T, ell: usize) -> (T, T) {
    let l = T::from_usize_lossy(ell);
    let denom = l + T::lit(2.0) * alpha - T::one();
    (T::lit(2.0) * (l + alpha - T::one()) / denom, (l - T::one()) / denom)
}

/// `C_ℓ^α(t) / C_ℓ^α(1)`, bounded by 1 on `[−1, 1]` and free of overflow for large ℓ.
pub fn normalized_gegenbauer<T: Scalar>(alpha: T, ell: usize, t: T) -> T {
    let (mut prev, mut cur) = (T::one(), t);
    if ell == 0 {
        return prev;
    }
    for l in 2..=ell {
        let (a, b) = normalized_coeffs(alpha, l);
        let next = a * t * cur - b * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `R_0(t), …, R_L(t)` for the normalized Gegenbauer family with parameter α.
pub fn normalized_gegenbauer_all<T: Scalar>(alpha: T, l_max: usize, t: T) -> Vec<T> {
    let mut out = Vec::with_capacity(l_max + 1);
    out.push(T::one());
    if l_max >= 1 {
        out.push(t);
    }
    for l in 2..=l_max {
        let (a, b) = normalized_coeffs(alpha, l);
        let v = a * t * out[l - 1] - b * out[l - 2];
        out.push(v);
    }
    out
}

/// Gegenbauer parameter `(d−1)/2` attached to 𝕊ᵈ.
pub fn sphere_alpha<T: Scalar>(d: usize) -> T {
    T::from_usize_lossy(d - 1) * T::lit(0.5)
}

/// Dimension `h_ℓ = (2ℓ+d−1)/(d−1) · binom(ℓ+d−2, ℓ)` of degree-ℓ harmonics on 𝕊ᵈ.
pub fn harmonic_dimension(d: usize, ell: usize) -> u128 {
    assert!(d >= 2, "sphere dimension must be at least 2");
    let (l, d) = (ell as u128, d as u128);
    // binom(ℓ+k, k) built up exactly for k = 1..d−2
    let mut binom: u128 = 1;
    for k in 1..=(d - 2) {
        binom = binom * (l + k) / k;
    }
    (2 * l + d - 1) * binom / (d - 1)
}

/// Degree-ℓ reproducing kernel `Z_ℓ(t) = h_ℓ/ω_d · C_ℓ(t)/C_ℓ(1)` for 𝕊ᵈ.
pub fn zonal_kernel<T: Scalar>(d: usize, ell: usize, t: T) -> T {
    T::lit(harmonic_dimension(d, ell) as f64) / sphere_area::<T>(d)
        * normalized_gegenbauer(sphere_alpha::<T>(d), ell, t)
}

fn check_params<T: Scalar>(d: usize, s: T) -> Result<RieszParams<T>> {
    RieszParams::new(d, s)
}

/// Eigenvalue `A_{ℓ,s}` of `f ↦ ∫ R_s(·, y) f(y) dσ(y)` on degree-ℓ harmonics.
///
/// For `s > 0`:
/// `2^{d−s} π^{d/2} Γ((d−s)/2) Γ(s/2+ℓ) / (Γ(s/2) Γ(d−s/2+ℓ))`.
/// For the log kernel: `2^{d−1} π^{d/2} Γ(d/2) Γ(ℓ)/Γ(d+ℓ)` when `ℓ ≥ 1` and
/// `ω_d E_0(σ̃)` when `ℓ = 0`.
pub fn riesz_eigenvalue<T: Scalar>(d: usize, s: T, ell: usize) -> Result<T> {
    let params = check_params(d, s)?;
    Ok(eigenvalue_unchecked(&params, ell))
}

pub(crate) fn eigenvalue_unchecked<T: Scalar>(params: &RieszParams<T>, ell: usize) -> T {
    let d = T::from_usize_lossy(params.d);
    let half = T::lit(0.5);
    let ln2 = T::LN_2();
    let lnpi = T::PI().ln();
    let l = T::from_usize_lossy(ell);
    if params.is_log() {
        if ell == 0 {
            return sphere_area::<T>(params.d) * continuous_energy(params);
        }
        let log = (d - T::one()) * ln2 + d * half * lnpi + ln_gamma(d * half);
        return log.exp() * gamma_ratio(l, T::zero(), d);
    }
    let s = params.s;
    let log = (d - s) * ln2 + d * half * lnpi + ln_gamma((d - s) * half) - ln_gamma(s * half);
    log.exp() * gamma_ratio(l, s * half, d - s * half)
}

/// `A_{ℓ,s}` through the terminating series
/// `2^{d−s} π^{d/2} Γ((d−s)/2)/Γ(d−s/2) · ₃F₂(−ℓ, ℓ+d−1, (d−s)/2; d/2, d−s/2; 1)`.
/// Only defined for `s > 0`; used as a cross-check of [`riesz_eigenvalue`].
pub fn riesz_eigenvalue_hypergeometric<T: Scalar>(d: usize, s: T, ell: usize) -> Result<T> {
    let params = check_params(d, s)?;
    if params.is_log() {
        return Err(invalid("the hypergeometric form needs s > 0"));
    }
    let df = T::from_usize_lossy(d);
    let half = T::lit(0.5);
    let l = T::from_usize_lossy(ell);
    let series = crate::special::hyp3f2_terminating(
        ell,
        l + df - T::one(),
        (df - s) * half,
        df * half,
        df - s * half,
    )?;
    let log = (df - s) * T::LN_2() + df * half * T::PI().ln() + ln_gamma((df - s) * half)
        - ln_gamma(df - s * half);
    Ok(log.exp() * series)
}

/// `A_{ℓ,s}` by adaptive quadrature of its Funk–Hecke integral
/// `ω_{d−1} ∫₀^π R_s(2 sin(θ/2)) R_ℓ(cos θ) sin^{d−1}θ dθ`,
/// after the substitution `θ = πu²` which removes the endpoint singularity.
pub fn riesz_eigenvalue_quadrature<T: Scalar>(d: usize, s: T, ell: usize, abs_tol: T) -> Result<T> {
    let params = check_params(d, s)?;
    let alpha = sphere_alpha::<T>(d);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let pi = T::PI();
    let p = T::from_usize_lossy(d - 1);
    let integrand = |u: T| {
        let theta = pi * u * u;
        let jac = two * pi * u;
        let (sh, ch) = ((theta * half).sin(), (theta * half).cos());
        let chord = two * sh;
        let profile = if params.is_log() {
            -chord.ln() * (chord * ch).powf(p)
        } else {
            // (2 sin(θ/2))^{−s} sin^{d−1}θ with the powers merged
            chord.powf(p - s) * ch.powf(p)
        };
        profile * normalized_gegenbauer(alpha, ell, theta.cos()) * jac
    };
    let omega_lower = sphere_area::<T>(d - 1);
    Ok(omega_lower * quadrature::integrate(integrand, T::zero(), T::one(), abs_tol / omega_lower)?)
}

/// Funk–Hecke coefficient of the indicator of a cap of chord radius `r`:
/// `λ_ℓ(r) = ω_{d−1} ∫_{1−r²/2}^1 R_ℓ(t)(1−t²)^{(d−2)/2} dt`, by adaptive quadrature
/// with absolute tolerance `1e−13 ω_{d−1}`.
pub fn cap_multiplier<T: Scalar>(d: usize, ell: usize, r: T) -> Result<T> {
    if d < 2 {
        return Err(invalid(format!("sphere dimension must be at least 2, got {d}")));
    }
    if !(r > T::zero() && r <= T::lit(2.0)) {
        return Err(invalid(format!("cap radius must lie in (0, 2], got {r}")));
    }
    let alpha = sphere_alpha::<T>(d);
    let p = (d - 1) as i32;
    let theta_r = T::lit(2.0) * (r * T::lit(0.5)).min(T::one()).asin();
    let f = |theta: T| normalized_gegenbauer(alpha, ell, theta.cos()) * theta.sin().powi(p);
    let omega_lower = sphere_area::<T>(d - 1);
    Ok(omega_lower * quadrature::integrate(f, T::zero(), theta_r, T::lit(1e-13))?)
}

/// Cap multipliers `λ_0(r), λ_1(r), …` in closed form.
///
/// For `ℓ ≥ 1`, `λ_ℓ(r) = ω_{d−1}/d · (1−t₀²)^{d/2} · C^{α+1}_{ℓ−1}(t₀)/C^{α+1}_{ℓ−1}(1)`
/// with `α = (d−1)/2` and `t₀ = 1 − r²/2`; `λ_0` is the cap area.
pub struct CapMultipliers<T> {
    alpha_up: T,
    t0: T,
    prefactor: T,
    next: usize,
    prev: T,
    cur: T,
    area: T,
}

impl<T: Scalar> CapMultipliers<T> {
    pub fn new(d: usize, r: T) -> Result<Self> {
        let area = cap_area(d, r)?;
        let t0 = T::one() - r * r * T::lit(0.5);
        let df = T::from_usize_lossy(d);
        let prefactor = sphere_area::<T>(d - 1) / df * (T::one() - t0 * t0).max(T::zero()).powf(df * T::lit(0.5));
        Ok(Self {
            alpha_up: sphere_alpha::<T>(d) + T::one(),
            t0,
            prefactor,
            next: 0,
            prev: T::zero(),
            cur: T::one(),
            area,
        })
    }

    /// `λ_0(r)`, the area of the cap.
    pub fn area(&self) -> T {
        self.area
    }
}

impl<T: Scalar> Iterator for CapMultipliers<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        let ell = self.next;
        self.next += 1;
        match ell {
            0 => Some(self.area),
            1 => Some(self.prefactor),
            _ => {
                // advance Q_{ℓ−1} from Q_{ℓ−2} = cur, Q_{ℓ−3} = prev
                let k = ell - 1;
                let q = if k == 1 {
                    self.t0
                } else {
                    let (a, b) = normalized_coeffs(self.alpha_up, k);
                    a * self.t0 * self.cur - b * self.prev
                };
                self.prev = self.cur;
                self.cur = q;
                Some(self.prefactor * q)
            }
        }
    }
}

/// `λ_0(r), …, λ_L(r)` in closed form.
pub fn cap_multipliers<T: Scalar>(d: usize, r: T, l_max: usize) -> Result<Vec<T>> {
    Ok(CapMultipliers::new(d, r)?.take(l_max + 1).collect())
}

/// Per-degree spectral data for a fixed `(d, s)` up to degree `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTable<T> {
    pub d: usize,
    pub s: T,
    pub l: usize,
    pub a: Vec<T>,
    pub h: Vec<u128>,
    pub lam: Option<Vec<T>>,
    pub radius: Option<T>,
}

impl<T: Scalar> SpectralTable<T> {
    pub fn new(d: usize, s: T, l: usize) -> Result<Self> {
        let params = check_params(d, s)?;
        let a = (0..=l).into_par_iter().map(|ell| eigenvalue_unchecked(&params, ell)).collect();
        let h = (0..=l).map(|ell| harmonic_dimension(d, ell)).collect();
        Ok(Self { d, s, l, a, h, lam: None, radius: None })
    }

    /// Also stores cap multipliers for radius `r`.
    pub fn with_radius(d: usize, s: T, l: usize, r: T) -> Result<Self> {
        let mut table = Self::new(d, s, l)?;
        table.lam = Some(cap_multipliers(d, r, l)?);
        table.radius = Some(r);
        Ok(table)
    }

    /// CSV with columns `ell,A,h,lambda` (`lambda` empty when no radius is stored).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ell,A,h,lambda\n");
        for ell in 0..=self.l {
            let lam = self.lam.as_ref().map_or(String::new(), |v| format!("{:.16e}", v[ell].as_f64()));
            let _ = writeln!(out, "{ell},{:.16e},{},{lam}", self.a[ell].as_f64(), self.h[ell]);
        }
        out
    }
}

/// Stopping rule shared by the spectral series.
///
/// A series stops at the first degree `ℓ ≥ min_degree` that closes a run of
/// `run_len` consecutive terms each below `tol · max(|partial sum|, floor)`.
#[derive(Clone, Debug)]
pub(crate) struct Truncation<T> {
    tol: T,
    floor: T,
    run_len: usize,
    min_degree: usize,
    run: usize,
    run_max: T,
    sum: KahanSum<T>,
}

impl<T: Scalar> Truncation<T> {
    pub(crate) fn new(tol: T, floor: T, run_len: usize, min_degree: usize) -> Self {
        Self { tol, floor, run_len, min_degree, run: 0, run_max: T::zero(), sum: KahanSum::new() }
    }

    /// Adds the degree-ℓ term; returns `true` once the series may stop.
    pub(crate) fn push(&mut self, ell: usize, term: T) -> bool {
        self.sum.add(term);
        let scale = self.sum.value().abs().max(self.floor);
        if term.abs() < self.tol * scale {
            self.run += 1;
            self.run_max = self.run_max.max(term.abs());
        } else {
            self.run = 0;
            self.run_max = T::zero();
        }
        self.run >= self.run_len && ell >= self.min_degree
    }

    pub(crate) fn value(&self) -> T {
        self.sum.value()
    }

    /// Largest term magnitude in the closing run.
    pub(crate) fn tail(&self) -> T {
        self.run_max
    }
}

/// Run length long enough to span a half-oscillation of `λ_ℓ(r)` in ℓ.
pub(crate) fn run_length<T: Scalar>(r: T) -> usize {
    let half_period = (T::PI() / r).ceil().to_usize().unwrap_or(usize::MAX / 4);
    half_period.max(MIN_RUN)
}

/// Hard degree cap `20⌈N^{1/d}/r⌉ + 200` for sums over an `N`-point configuration.
pub fn degree_cap_for<T: Scalar>(n: usize, d: usize, r: T) -> usize {
    let nd = (n as f64).powf(1.0 / d as f64);
    20 * (nd / r.as_f64()).ceil() as usize + 200
}

/// Streams the zonal sums `S_ℓ = Σ_{i,j} Z_ℓ(⟨x_i, x_j⟩)` degree by degree.
///
/// Every unordered pair keeps its own recurrence state; degrees are advanced in
/// blocks so that each pass over the pairs produces many `S_ℓ` at once.
pub struct ZonalSums<T> {
    d: usize,
    n: usize,
    alpha: T,
    omega: T,
    ts: Vec<T>,
    prev: Vec<T>,
    cur: Vec<T>,
    next_ell: usize,
}

impl<T: Scalar> ZonalSums<T> {
    pub fn new(config: &Configuration<T>) -> Self {
        let n = config.len();
        let mut ts = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            let xi = config.point(i);
            for j in (i + 1)..n {
                ts.push(dot(xi, config.point(j)).max(-T::one()).min(T::one()));
            }
        }
        let m = ts.len();
        Self {
            d: config.dim(),
            n,
            alpha: sphere_alpha::<T>(config.dim()),
            omega: sphere_area::<T>(config.dim()),
            ts,
            prev: vec![T::zero(); m],
            cur: vec![T::zero(); m],
            next_ell: 0,
        }
    }

    /// Next degree that [`ZonalSums::next_block`] will produce.
    pub fn next_degree(&self) -> usize {
        self.next_ell
    }

    /// `S_ℓ` for the next `count` degrees.
    pub fn next_block(&mut self, count: usize) -> Vec<T> {
        let start = self.next_ell;
        let coeffs: Vec<(T, T)> = (start..start + count)
            .map(|l| if l >= 2 { normalized_coeffs(self.alpha, l) } else { (T::zero(), T::zero()) })
            .collect();
        let partials: Vec<Vec<T>> = self
            .ts
            .par_chunks(PAIR_CHUNK)
            .zip(self.prev.par_chunks_mut(PAIR_CHUNK))
            .zip(self.cur.par_chunks_mut(PAIR_CHUNK))
            .map(|((ts, prev), cur)| {
                let mut acc = vec![T::zero(); count];
                for ((&t, p), c) in ts.iter().zip(prev.iter_mut()).zip(cur.iter_mut()) {
                    let (mut rp, mut rc) = (*p, *c);
                    for (k, slot) in acc.iter_mut().enumerate() {
                        let l = start + k;
                        let v = match l {
                            0 => T::one(),
                            1 => t,
                            _ => coeffs[k].0 * t * rc - coeffs[k].1 * rp,
                        };
                        *slot += v;
                        rp = rc;
                        rc = v;
                    }
                    *p = rp;
                    *c = rc;
                }
                acc
            })
            .collect();
        self.next_ell += count;
        let nf = T::from_usize_lossy(self.n);
        (0..count)
            .map(|k| {
                let mut off = KahanSum::new();
                for part in &partials {
                    off.add(part[k]);
                }
                let h = T::lit(harmonic_dimension(self.d, start + k) as f64);
                h / self.omega * (nf + T::lit(2.0) * off.value())
            })
            .collect()
    }
}

/// Sum of `coeff(ℓ, λ_ℓ(r)) · S_ℓ` over `ℓ ≥ 1` under the shared stopping rule.
pub(crate) struct SeriesOutcome<T> {
    pub value: T,
    pub degree: usize,
    pub tail: T,
}

pub(crate) fn measure_series<T: Scalar, F>(
    config: &Configuration<T>,
    r: T,
    tol: T,
    coeff: F,
) -> Result<SeriesOutcome<T>>
where
    F: Fn(usize, T) -> T,
{
    let d = config.dim();
    let l_max = degree_cap_for(config.len(), d, r);
    let min_degree = (T::one() / r).ceil().to_usize().unwrap_or(0);
    let mut trunc = Truncation::new(tol, T::lit(1e-300_f64.max(T::min_positive_value().as_f64())), run_length(r), min_degree);
    let mut lam = CapMultipliers::new(d, r)?;
    let _ = lam.next();
    let mut zonal = ZonalSums::new(config);
    let _ = zonal.next_block(1);
    while zonal.next_degree() <= l_max {
        let start = zonal.next_degree();
        let count = DEGREE_BLOCK.min(l_max + 1 - start);
        let sums = zonal.next_block(count);
        for (k, s_l) in sums.into_iter().enumerate() {
            let ell = start + k;
            let lam_l = lam.next().expect("cap multipliers are unbounded");
            if trunc.push(ell, coeff(ell, lam_l) * s_l) {
                return Ok(SeriesOutcome { value: trunc.value(), degree: ell, tail: trunc.tail() });
            }
        }
    }
    Err(Error::Convergence { partial: trunc.value().as_f64(), degree_cap: l_max })
}

/// Same series as [`measure_series`] but summed over exactly `ℓ = 1..=degree`.
pub(crate) fn measure_series_fixed<T: Scalar, F>(config: &Configuration<T>, r: T, degree: usize, coeff: F) -> Result<T>
where
    F: Fn(usize, T) -> T,
{
    let mut lam = CapMultipliers::new(config.dim(), r)?;
    let _ = lam.next();
    let mut zonal = ZonalSums::new(config);
    let _ = zonal.next_block(1);
    let mut acc = KahanSum::new();
    while zonal.next_degree() <= degree {
        let start = zonal.next_degree();
        let count = DEGREE_BLOCK.min(degree + 1 - start);
        for (k, s_l) in zonal.next_block(count).into_iter().enumerate() {
            let lam_l = lam.next().expect("cap multipliers are unbounded");
            acc.add(coeff(start + k, lam_l) * s_l);
        }
    }
    Ok(acc.value())
}

/// Outcome of [`sobolev_discrepancy`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevDiscrepancyResult {
    /// The discrepancy `D` (not its square).
    pub value: f64,
    pub epsilon: f64,
    /// Cap radius `ε N^{−1/d}`.
    pub radius: f64,
    /// Last degree included.
    pub l_used: usize,
    /// Estimated effect of the omitted degrees on `value`.
    pub tail_estimate: f64,
}

/// Cap radius `ε N^{−1/d}` used to smooth an `N`-point configuration.
pub fn smoothing_radius(epsilon: f64, n: usize, d: usize) -> f64 {
    epsilon * (n as f64).powf(-1.0 / d as f64)
}

fn check_radius(epsilon: f64, r: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if r > 2.0 {
        return Err(invalid(format!("cap radius {r} exceeds 2")));
    }
    Ok(())
}

/// Dual Sobolev norm `‖μ‖_{H^{(s−d)/2}}` of `μ = (1/N)Σ_j 1_{D_j}/σ(D) − 1/ω_d`,
/// with caps `D_j` of radius `ε N^{−1/d}` around the points:
/// `D² = Σ_{ℓ≥1} (1+ℓ²)^{(s−d)/2} (λ_ℓ/(Nσ(D)))² S_ℓ`.
pub fn sobolev_discrepancy<T: Scalar>(
    config: &Configuration<T>,
    s: T,
    epsilon: T,
    tol: T,
) -> Result<SobolevDiscrepancyResult> {
    let d = config.dim();
    check_params(d, s)?;
    let n = config.len();
    let r_f = smoothing_radius(epsilon.as_f64(), n, d);
    check_radius(epsilon.as_f64(), r_f)?;
    let r = T::lit(r_f);
    let norm = T::from_usize_lossy(n) * cap_area(d, r)?;
    let expo = (s - T::from_usize_lossy(d)) * T::lit(0.5);
    let out = measure_series(config, r, tol, |ell, lam| {
        let l = T::from_usize_lossy(ell);
        let m = lam / norm;
        (T::one() + l * l).powf(expo) * m * m
    })?;
    let d2 = out.value.max(T::zero()).as_f64();
    let value = d2.sqrt();
    // Terms decay like ℓ^{s−d−2} once ℓr ≫ 1, so the omitted tail is about
    // L/(d+1−s) times the size of the last terms.
    let tail = out.tail.as_f64() * out.degree as f64 / (d as f64 + 1.0 - s.as_f64());
    Ok(SobolevDiscrepancyResult {
        value,
        epsilon: epsilon.as_f64(),
        radius: r_f,
        l_used: out.degree,
        tail_estimate: (d2 + tail).sqrt() - value,
    })
}

/// Spectral coefficients `c_ℓ = A_{ℓ,s} (λ_ℓ(r)/σ(D_r))² h_ℓ/ω_d` of the
/// double cap average `t ↦ ⨍_{D_r(a)} ⨍_{D_r(b)} R_s`, `⟨a, b⟩ = t`.
#[derive(Clone, Debug)]
pub struct PairCapKernel<T> {
    pub d: usize,
    pub s: T,
    pub r: T,
    alpha: T,
    coeffs: Vec<T>,
    tol: T,
    run_len: usize,
    min_degree: usize,
    /// Whether `coeffs` reaches the point where every later term is negligible.
    complete: bool,
}

/// Default relative tolerance of [`pair_cap_energy`].
pub const PAIR_CAP_TOL: f64 = 1e-9;

/// Degree cap for a single pair of caps: `1000⌈1/r⌉ + 10⁴`.
pub fn pair_degree_cap<T: Scalar>(r: T) -> usize {
    1000 * (T::one() / r).ceil().to_usize().unwrap_or(usize::MAX / 2000) + 10_000
}

fn pair_coefficient<T: Scalar>(params: &RieszParams<T>, ell: usize, lam_ratio: T, omega: T) -> T {
    let h = T::lit(harmonic_dimension(params.d, ell) as f64);
    eigenvalue_unchecked(params, ell) * lam_ratio * lam_ratio * h / omega
}

impl<T: Scalar> PairCapKernel<T> {
    /// Coefficients up to the degree where they fall below `tol · |c_0|` for a full run.
    pub fn new(d: usize, s: T, r: T, tol: T) -> Result<Self> {
        let params = check_params(d, s)?;
        let l_max = pair_degree_cap(r);
        let run_len = run_length(r);
        let min_degree = (T::one() / r).ceil().to_usize().unwrap_or(0);
        let omega = sphere_area::<T>(d);
        let mut lam = CapMultipliers::new(d, r)?;
        let area = lam.area();
        let mut coeffs = Vec::new();
        let mut run = 0;
        let mut complete = false;
        for ell in 0..=l_max {
            let c = pair_coefficient(&params, ell, lam.next().expect("unbounded") / area, omega);
            coeffs.push(c);
            if ell > 0 && c.abs() < tol * coeffs[0].abs() {
                run += 1;
            } else {
                run = 0;
            }
            if run >= run_len && ell >= min_degree {
                complete = true;
                break;
            }
        }
        Ok(Self { d, s, r, alpha: sphere_alpha::<T>(d), coeffs, tol, run_len, min_degree, complete })
    }

    /// Exactly the degrees `0..=degree`, for sums that must share one truncation.
    pub fn with_degree(d: usize, s: T, r: T, degree: usize) -> Result<Self> {
        let params = check_params(d, s)?;
        let omega = sphere_area::<T>(d);
        let mut lam = CapMultipliers::new(d, r)?;
        let area = lam.area();
        let coeffs = (0..=degree)
            .map(|ell| pair_coefficient(&params, ell, lam.next().expect("unbounded") / area, omega))
            .collect();
        Ok(Self {
            d,
            s,
            r,
            alpha: sphere_alpha::<T>(d),
            coeffs,
            tol: T::zero(),
            run_len: usize::MAX,
            min_degree: usize::MAX,
            complete: true,
        })
    }

    /// Whether the stored coefficients reach the truncation point (always true for [`PairCapKernel::with_degree`]).
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Highest stored degree.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    /// The series at `t`, stopped by the shared truncation rule with scale floor `|c_0|`.
    pub fn eval(&self, t: T) -> Result<T> {
        let t = t.max(-T::one()).min(T::one());
        let mut trunc = Truncation::new(self.tol, self.coeffs[0].abs(), self.run_len, self.min_degree);
        let (mut prev, mut cur) = (T::zero(), T::one());
        let window = self.run_len.min(self.coeffs.len());
        let mut recent: VecDeque<T> = VecDeque::with_capacity(window + 1);
        for (ell, &c) in self.coeffs.iter().enumerate() {
            let v = match ell {
                0 => T::one(),
                1 => t,
                _ => {
                    let (a, b) = normalized_coeffs(self.alpha, ell);
                    a * t * cur - b * prev
                }
            };
            prev = cur;
            cur = v;
            let term = c * v;
            if recent.len() == window {
                recent.pop_front();
            }
            recent.push_back(term);
            if trunc.push(ell, term) {
                return Ok(trunc.value());
            }
        }
        if self.complete {
            return Ok(trunc.value());
        }
        // An alternating tail (near t = −1) is summed by the midpoint of the last
        // two partial sums; neighbouring half-sums bound its error.
        let alternating = recent.iter().zip(recent.iter().skip(1)).all(|(&a, &b)| a * b < T::zero());
        if alternating && recent.len() >= 2 {
            let last = *recent.back().expect("non-empty");
            let midpoint = trunc.value() - last * T::lit(0.5);
            let err = recent
                .iter()
                .zip(recent.iter().skip(1))
                .fold(T::zero(), |m, (&a, &b)| m.max(((a + b) * T::lit(0.5)).abs()));
            if err < self.tol * midpoint.abs().max(self.coeffs[0].abs()) {
                return Ok(midpoint);
            }
        }
        Err(Error::Convergence { partial: trunc.value().as_f64(), degree_cap: self.degree() })
    }

    /// The series at `t` summed over every stored degree.
    pub fn eval_all(&self, t: T) -> T {
        let t = t.max(-T::one()).min(T::one());
        let mut acc = KahanSum::new();
        let (mut prev, mut cur) = (T::zero(), T::one());
        for (ell, &c) in self.coeffs.iter().enumerate() {
            let v = match ell {
                0 => T::one(),
                1 => t,
                _ => {
                    let (a, b) = normalized_coeffs(self.alpha, ell);
                    a * t * cur - b * prev
                }
            };
            prev = cur;
            cur = v;
            acc.add(c * v);
        }
        acc.value()
    }
}

/// `⨍_{D_r(a)} ⨍_{D_r(b)} R_s(x, y) dσ(x) dσ(y)` for centers with `⟨a, b⟩ = t`,
/// as `Σ_ℓ A_{ℓ,s} (λ_ℓ(r)/σ(D_r))² Z_ℓ(t)` to relative tolerance [`PAIR_CAP_TOL`].
pub fn pair_cap_energy<T: Scalar>(d: usize, s: T, r: T, t: T) -> Result<T> {
    PairCapKernel::new(d, s, r, T::lit(PAIR_CAP_TOL))?.eval(t)
}
