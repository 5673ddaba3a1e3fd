//! Adaptive Gauss–Legendre quadrature.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::{KahanSum, Scalar};

const RULE_POINTS: usize = 15;
const MAX_DEPTH: usize = 48;
/// Panel splits allowed before giving up on the tolerance.
const MAX_SPLITS: usize = 1 << 18;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(RULE_POINTS))
}

fn fixed_rule<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> T {
    let (nodes, weights) = rule();
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let mut acc = KahanSum::new();
    for (&x, &w) in nodes.iter().zip(weights) {
        acc.add(T::lit(w) * f(mid + half * T::lit(x)));
    }
    acc.value() * half
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol` by bisecting
/// panels until a panel and its two halves agree.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let width = b - a;
    let whole = fixed_rule(&f, a, b);
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut total = KahanSum::new();
    let mut err_total = T::zero();
    let floor = T::epsilon() * T::lit(64.0);
    let mut splits = 0usize;
    while let Some((lo, hi, estimate, depth)) = stack.pop() {
        let mid = (lo + hi) * T::lit(0.5);
        let left = fixed_rule(&f, lo, mid);
        let right = fixed_rule(&f, mid, hi);
        let refined = left + right;
        let err = (refined - estimate).abs();
        let share = abs_tol * ((hi - lo) / width).abs();
        let noise = floor * (left.abs() + right.abs());
        if err <= share.max(noise) || depth >= MAX_DEPTH {
            total.add(refined);
            err_total += err;
        } else {
            splits += 1;
            if splits > MAX_SPLITS {
                return Err(Error::Quadrature {
                    estimate: (total.value() + refined).as_f64(),
                    error: (err_total + err).as_f64(),
                    tol: abs_tol.as_f64(),
                });
            }
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    let value = total.value();
    let allowed = (abs_tol * T::lit(10.0)).max(floor * value.abs() * T::lit(100.0));
    if !(err_total <= allowed) {
        return Err(Error::Quadrature {
            estimate: value.as_f64(),
            error: err_total.as_f64(),
            tol: abs_tol.as_f64(),
        });
    }
    Ok(value)
}
