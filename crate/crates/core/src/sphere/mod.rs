//! Geometry of the unit sphere 𝕊ᵈ ⊂ ℝᵈ⁺¹: points, caps, cap areas, sampling,
//! separation, and the point-set file format.

mod io;

pub use io::{format_config, parse_config, read_config, write_config};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature;
use crate::scalar::Scalar;
use crate::special::ln_gamma;

/// Random stream used by [`sample_uniform`].
pub const SAMPLE_STREAM: u64 = 0;

/// Counter-based generator for the stream `stream` of `seed`. Streams of the
/// same seed are independent, so parallel consumers never share state.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The Riesz exponent recorded alongside a point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    #[serde(with = "log_literal")]
    Log,
    Riesz(f64),
}

mod log_literal {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("log")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "log" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("expected \"log\" or a number, got {s:?}")))
        }
    }
}

impl Exponent {
    /// `0` and `"log"` both name the logarithmic energy.
    pub fn from_value(s: f64) -> Self {
        if s == 0.0 {
            Exponent::Log
        } else {
            Exponent::Riesz(s)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Log => 0.0,
            Exponent::Riesz(s) => s,
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Log => f.write_str("log"),
            Exponent::Riesz(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "log" {
            return Ok(Exponent::Log);
        }
        s.parse::<f64>()
            .map(Exponent::from_value)
            .map_err(|_| invalid(format!("exponent must be a real number or \"log\", got {s:?}")))
    }
}

/// A unit vector in ℝᵈ⁺¹.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint<T> {
    coords: Vec<T>,
}

impl<T: Scalar> SpherePoint<T> {
    /// Wraps `coords`, which must already have unit norm.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(invalid("a sphere point needs at least two coordinates"));
        }
        let n = norm(&coords);
        if (n - T::one()).abs() > T::unit_norm_tol() {
            return Err(invalid(format!("point norm {n} is not 1")));
        }
        Ok(Self { coords })
    }

    /// Normalizes `coords` onto the sphere.
    pub fn normalized(mut coords: Vec<T>) -> Result<Self> {
        let n = norm(&coords);
        if !(n > T::zero()) || !n.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Self::new(coords)
    }

    /// `e_{axis}` in ℝᵈ⁺¹.
    pub fn basis(d: usize, axis: usize) -> Self {
        let mut coords = vec![T::zero(); d + 1];
        coords[axis] = T::one();
        Self { coords }
    }

    /// The pole `(0, …, 0, 1)`.
    pub fn north(d: usize) -> Self {
        Self::basis(d, d)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    /// Sphere dimension `d`.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.coords, &other.coords)
    }

    pub fn distance(&self, other: &Self) -> T {
        distance(&self.coords, &other.coords)
    }

    pub fn antipode(&self) -> Self {
        Self { coords: self.coords.iter().map(|&c| -c).collect() }
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn distance_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let diff = x - y;
        acc + diff * diff
    })
}

#[inline]
pub(crate) fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    distance_sq(a, b).sqrt()
}

/// Provenance carried with a point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigMeta {
    /// `None` for point sets not tied to an energy (e.g. random samples).
    pub s: Option<Exponent>,
    pub seed: u64,
    pub energy: Option<f64>,
    pub grad_norm: Option<f64>,
}

impl ConfigMeta {
    pub fn new(s: Option<Exponent>, seed: u64) -> Self {
        Self { s, seed, energy: None, grad_norm: None }
    }
}

/// `N` points on 𝕊ᵈ stored row-major in one flat buffer of `N·(d+1)` reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration<T> {
    d: usize,
    coords: Vec<T>,
    pub meta: ConfigMeta,
}

impl<T: Scalar> Configuration<T> {
    /// Validates dimension, unit norms and pairwise distinctness.
    pub fn new(d: usize, coords: Vec<T>, meta: ConfigMeta) -> Result<Self> {
        let config = Self::from_parts_unvalidated(d, coords, meta)?;
        for (i, p) in config.points().enumerate() {
            let n = norm(p);
            if (n - T::one()).abs() > T::unit_norm_tol() {
                return Err(invalid(format!("point {i} has norm {n}, expected 1")));
            }
        }
        if let Some((i, j)) = config.first_duplicate() {
            return Err(invalid(format!("points {i} and {j} coincide")));
        }
        Ok(config)
    }

    /// Builds from per-point vectors (each of length `d+1`).
    pub fn from_points(d: usize, points: Vec<Vec<T>>, meta: ConfigMeta) -> Result<Self> {
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != d + 1) {
            return Err(invalid(format!("point {i} has {} coordinates, expected {}", p.len(), d + 1)));
        }
        Self::new(d, points.into_iter().flatten().collect(), meta)
    }

    /// Checks only the shape; used by the optimizer on its own iterates.
    pub(crate) fn from_parts_unvalidated(d: usize, coords: Vec<T>, meta: ConfigMeta) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("sphere dimension must be at least 2, got {d}")));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(d + 1) {
            return Err(invalid(format!(
                "{} coordinates do not form a whole number of points in ℝ^{}",
                coords.len(),
                d + 1
            )));
        }
        Ok(Self { d, coords, meta })
    }

    /// First pair (in index order of the later point) of bitwise-equal points.
    pub(crate) fn first_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let cmp = |a: &usize, b: &usize| {
            self.point(*a)
                .iter()
                .zip(self.point(*b))
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(b))
        };
        order.par_sort_unstable_by(cmp);
        order
            .windows(2)
            .filter(|w| distance_sq(self.point(w[0]), self.point(w[1])) == T::zero())
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .min_by_key(|&(i, j)| (j, i))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of points `N`.
    pub fn len(&self) -> usize {
        self.coords.len() / (self.d + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        let w = self.d + 1;
        &self.coords[i * w..(i + 1) * w]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, T> {
        self.coords.chunks_exact(self.d + 1)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn sphere_point(&self, i: usize) -> SpherePoint<T> {
        SpherePoint { coords: self.point(i).to_vec() }
    }

    /// Applies the `(d+1)×(d+1)` row-major matrix `q` to every point.
    pub fn transformed(&self, q: &[Vec<T>]) -> Result<Self> {
        let coords = self.points().flat_map(|p| apply(q, p)).collect();
        let mut out = Self::from_parts_unvalidated(self.d, coords, self.meta.clone())?;
        out.renormalize();
        Ok(out)
    }

    /// Restores exact unit norms (after arithmetic that drifts off the sphere).
    pub(crate) fn renormalize(&mut self) {
        let w = self.d + 1;
        for p in self.coords.chunks_exact_mut(w) {
            let n = norm(p);
            p.iter_mut().for_each(|c| *c /= n);
        }
    }
}

/// Matrix–vector product for a row-major square matrix.
pub fn apply<T: Scalar>(q: &[Vec<T>], v: &[T]) -> Vec<T> {
    q.iter().map(|row| dot(row, v)).collect()
}

/// Haar-random orthogonal matrix of size `dim` (Gram–Schmidt on Gaussian columns).
pub fn random_rotation<T: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis.into_iter().map(|row| row.into_iter().map(T::lit).collect()).collect()
}

/// A point drawn from the normalized surface measure.
pub fn random_point<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> SpherePoint<T> {
    loop {
        let v: Vec<f64> = (0..=d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            let coords = v.into_iter().map(|x| T::lit(x / n)).collect();
            if let Ok(p) = SpherePoint::normalized(coords) {
                return p;
            }
        }
    }
}

/// `n` i.i.d. uniform points on 𝕊ᵈ, reproducible from `seed`.
pub fn sample_uniform<T: Scalar>(d: usize, n: usize, seed: u64) -> Result<Configuration<T>> {
    if d < 2 {
        return Err(invalid(format!("sphere dimension must be at least 2, got {d}")));
    }
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = stream_rng(seed, SAMPLE_STREAM);
    let coords = (0..n).flat_map(|_| random_point::<T, _>(d, &mut rng).into_coords()).collect();
    Configuration::new(d, coords, ConfigMeta::new(None, seed))
}

/// Open spherical cap `{y : |y − center| < radius}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cap<T> {
    pub center: SpherePoint<T>,
    pub radius: T,
}

impl<T: Scalar> Cap<T> {
    pub fn new(center: SpherePoint<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero() && radius <= T::lit(2.0)) {
            return Err(invalid(format!("cap radius must lie in (0, 2], got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// The cap `{y : ⟨center, y⟩ > t}`.
    pub fn from_threshold(center: SpherePoint<T>, t: T) -> Result<Self> {
        let r = (T::lit(2.0) * (T::one() - t)).max(T::zero()).sqrt();
        Self::new(center, r)
    }

    /// Inner-product threshold `1 − r²/2`.
    pub fn threshold(&self) -> T {
        T::one() - self.radius * self.radius * T::lit(0.5)
    }

    /// Strict membership (the cap is open).
    pub fn contains(&self, y: &[T]) -> bool {
        dot(self.center.coords(), y) > self.threshold()
    }

    /// Membership in the closure.
    pub fn contains_closed(&self, y: &[T]) -> bool {
        dot(self.center.coords(), y) >= self.threshold()
    }

    /// `(strict, non-strict)` counts of configuration points in the cap.
    pub fn count(&self, config: &Configuration<T>) -> (usize, usize) {
        let t = self.threshold();
        config.points().fold((0, 0), |(open, closed), p| {
            let v = dot(self.center.coords(), p);
            (open + usize::from(v > t), closed + usize::from(v >= t))
        })
    }

    pub fn area(&self) -> Result<T> {
        cap_area(self.center.dim(), self.radius)
    }
}

/// Surface area ω_d = σ(𝕊ᵈ) = 2π^{(d+1)/2} / Γ((d+1)/2).
pub fn sphere_area<T: Scalar>(d: usize) -> T {
    let half = T::from_usize_lossy(d + 1) * T::lit(0.5);
    T::lit(2.0) * (half * T::PI().ln() - ln_gamma(half)).exp()
}

/// Absolute tolerance used for cap-area quadratures.
pub const CAP_AREA_TOL: f64 = 1e-12;

/// `∫₀^θ sin^{d−1}φ dφ` by adaptive Gauss–Legendre.
fn sine_power_integral<T: Scalar>(d: usize, theta: T, tol: T) -> Result<T> {
    let p = (d - 1) as i32;
    quadrature::integrate(|phi: T| phi.sin().powi(p), T::zero(), theta, tol)
}

/// Area σ(D_r) of a cap of chord radius `r` on 𝕊ᵈ.
///
/// Computed as ω_{d−1} ∫₀^{θ_r} sin^{d−1}θ dθ with θ_r = 2 asin(r/2), which is the
/// `t = cos θ` form of ω_{d−1} ∫_{1−r²/2}^1 (1−t²)^{(d−2)/2} dt.
pub fn cap_area<T: Scalar>(d: usize, r: T) -> Result<T> {
    if d < 2 {
        return Err(invalid(format!("sphere dimension must be at least 2, got {d}")));
    }
    if !(r > T::zero() && r <= T::lit(2.0)) {
        return Err(invalid(format!("cap radius must lie in (0, 2], got {r}")));
    }
    let theta = T::lit(2.0) * (r * T::lit(0.5)).min(T::one()).asin();
    let omega_lower = sphere_area::<T>(d - 1);
    let tol = T::lit(CAP_AREA_TOL) / omega_lower;
    Ok(omega_lower * sine_power_integral(d, theta, tol)?)
}

/// Normalized measure `σ({y : ⟨c, y⟩ > t}) / ω_d` for `t ∈ [−1, 1]`.
pub fn cap_fraction<T: Scalar>(d: usize, t: T) -> Result<T> {
    if t >= T::one() {
        return Ok(T::zero());
    }
    if t <= -T::one() {
        return Ok(T::one());
    }
    let theta = t.acos();
    let omega_lower = sphere_area::<T>(d - 1);
    let omega = sphere_area::<T>(d);
    let tol = T::lit(CAP_AREA_TOL) / omega_lower;
    Ok(omega_lower * sine_power_integral(d, theta, tol)? / omega)
}

/// [`cap_fraction`] from the reduction formula
/// `J_n = −sinⁿ⁻¹θ cos θ / n + (n−1)/n · J_{n−2}` for `J_n(θ) = ∫₀^θ sinⁿφ dφ`.
///
/// Accurate in absolute terms to a few ulps; intended for sweeps that need many
/// thresholds.
pub fn cap_fraction_exact<T: Scalar>(d: usize, t: T) -> T {
    let t = t.max(-T::one()).min(T::one());
    let sin = (T::one() - t * t).max(T::zero()).sqrt();
    let j = |t: T, sin: T| {
        // (J_{n−2}, J_{n−1}) walked up to n = d − 1.
        let (mut jm, mut jc) = (t.acos(), T::one() - t);
        let mut sp = sin;
        for n in 2..d {
            let nf = T::from_usize_lossy(n);
            let next = -sp * t / nf + (nf - T::one()) / nf * jm;
            jm = jc;
            jc = next;
            sp *= sin;
        }
        jc
    };
    j(t, sin) / j(-T::one(), T::zero())
}

/// Minimum pairwise distance and its `N^{1/d}` scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub min_dist: f64,
    pub scaled: f64,
    /// Indices of a closest pair.
    pub pair: (usize, usize),
}

pub fn separation<T: Scalar>(config: &Configuration<T>) -> Result<Separation> {
    let n = config.len();
    if n < 2 {
        return Err(invalid("separation needs at least two points"));
    }
    let (best_sq, i, j) = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = config.point(i);
            ((i + 1)..n)
                .map(|j| (distance_sq(p, config.point(j)), i, j))
                .fold((T::infinity(), i, i), |a, b| if b.0 < a.0 { b } else { a })
        })
        .reduce(
            || (T::infinity(), 0, 0),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a },
        );
    if best_sq == T::zero() {
        return Err(invalid(format!("points {i} and {j} coincide")));
    }
    let min_dist = best_sq.sqrt().as_f64();
    Ok(Separation { min_dist, scaled: min_dist * (n as f64).powf(1.0 / config.dim() as f64), pair: (i, j) })
}
