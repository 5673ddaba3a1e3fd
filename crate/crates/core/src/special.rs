//! Gamma-family special functions and terminating hypergeometric sums.
//!
//! Everything here is evaluated in the caller's scalar type. Gamma values are
//! only ever formed as logarithms or as ratios so that degrees in the tens of
//! thousands stay finite.

use crate::error::{invalid, Result};
use crate::scalar::{KahanSum, Scalar};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln|Γ(x)|` together with the sign of `Γ(x)`.
///
/// Non-positive integers are poles and return `(+∞, 1)`.
pub fn ln_gamma_signed<T: Scalar>(x: T) -> (T, i8) {
    let half = T::lit(0.5);
    if x < half {
        if x == x.floor() {
            return (T::infinity(), 1);
        }
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        let s = (T::PI() * x).sin();
        let (lg, _) = ln_gamma_signed(T::one() - x);
        let sign = if s < T::zero() { -1 } else { 1 };
        return (T::PI().ln() - s.abs().ln() - lg, sign);
    }
    let z = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (k, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += T::lit(c) / (z + T::from_usize_lossy(k));
    }
    let t = z + T::lit(LANCZOS_G) + half;
    let ln_sqrt_2pi = T::lit(0.918_938_533_204_672_8);
    (ln_sqrt_2pi + (z + half) * t.ln() - t + acc.ln(), 1)
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    ln_gamma_signed(x).0
}

/// Stirling correction `ln Γ(z) − [(z−½)ln z − z + ½ln 2π]`, accurate for `z ≥ 10`.
fn stirling_tail<T: Scalar>(z: T) -> T {
    // B_{2k} / (2k(2k−1)) for k = 1..8
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = z.recip();
    let inv2 = inv * inv;
    let mut acc = T::zero();
    for &c in C.iter().rev() {
        acc = acc * inv2 + T::lit(c);
    }
    acc * inv
}

/// `Γ(x + a) / Γ(x + b)` for positive arguments, without forming either gamma value.
pub fn gamma_ratio<T: Scalar>(x: T, a: T, b: T) -> T {
    let mut z1 = x + a;
    let mut z2 = x + b;
    debug_assert!(z1 > T::zero() && z2 > T::zero(), "gamma_ratio needs positive arguments");
    let ten = T::lit(10.0);
    // Shift both arguments up with Γ(z+1) = zΓ(z) until the asymptotic series is accurate.
    let mut prefactor = T::one();
    while z1 < ten || z2 < ten {
        prefactor = prefactor * z2 / z1;
        z1 += T::one();
        z2 += T::one();
    }
    let diff = a - b;
    let half = T::lit(0.5);
    let log_ratio = (z1 - half) * (diff / z2).ln_1p() + diff * z2.ln() - diff + stirling_tail(z1)
        - stirling_tail(z2);
    prefactor * log_ratio.exp()
}

/// Digamma ψ₀(x): upward recurrence to `x ≥ 10`, then the asymptotic expansion.
pub fn digamma<T: Scalar>(x: T) -> T {
    if x <= T::zero() && x == x.floor() {
        return T::nan();
    }
    if x < T::zero() {
        // ψ(1−x) − ψ(x) = π cot(πx)
        return digamma(T::one() - x) - T::PI() / (T::PI() * x).tan();
    }
    let mut x = x;
    let mut shift = T::zero();
    let start = T::lit(10.0);
    while x < start {
        shift -= x.recip();
        x += T::one();
    }
    // B_{2k} / (2k) for k = 1..8
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32_760.0,
        1.0 / 12.0,
        -3617.0 / 8160.0,
    ];
    let inv2 = (x * x).recip();
    let mut acc = T::zero();
    for &c in C.iter().rev() {
        acc = acc * inv2 + T::lit(c);
    }
    shift + x.ln() - T::lit(0.5) / x - acc * inv2
}

/// Rising factorial `(x)_n = x(x+1)…(x+n−1)`.
pub fn pochhammer<T: Scalar>(x: T, n: usize) -> T {
    (0..n).fold(T::one(), |acc, k| acc * (x + T::from_usize_lossy(k)))
}

/// `₃F₂(−ℓ, b, c; e, f; 1)` as the finite sum of its `ℓ + 1` non-vanishing terms.
pub fn hyp3f2_terminating<T: Scalar>(ell: usize, b: T, c: T, e: T, f: T) -> Result<T> {
    for k in 0..ell {
        let kk = T::from_usize_lossy(k);
        if e + kk == T::zero() || f + kk == T::zero() {
            return Err(invalid(format!(
                "lower parameter Pochhammer vanishes at index {k} (e={e}, f={f})"
            )));
        }
    }
    let neg_ell = -T::from_usize_lossy(ell);
    let mut term = T::one();
    let mut sum = KahanSum::new();
    sum.add(term);
    for n in 0..ell {
        let nn = T::from_usize_lossy(n);
        term = term * (neg_ell + nn) * (b + nn) * (c + nn)
            / ((e + nn) * (f + nn) * (nn + T::one()));
        sum.add(term);
    }
    Ok(sum.value())
}
