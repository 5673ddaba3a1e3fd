//! Least-squares fits used to read off rates from sweeps.

use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// Slope of `log value` against `log N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub stderr: f64,
}

/// Ordinary least squares on `(ln N, ln value)`; needs at least four pairs and
/// positive values.
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<Fit> {
    if pairs.len() < 4 {
        return Err(CliError::Invalid(format!("need at least 4 (N, value) pairs, got {}", pairs.len())));
    }
    for (row, &(n, v)) in pairs.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::Invalid(format!("row {row} (N = {n}) has nonpositive value {v}")));
        }
        if !(n > 0.0) {
            return Err(CliError::Invalid(format!("row {row} has nonpositive N = {n}")));
        }
    }
    let m = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CliError::Invalid("all N are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(Fit { slope, stderr: (ssr / (m - 2.0) / sxx).sqrt() })
}

/// Least-squares coefficients `(a, b)` of `y ≈ a N log N + b N`, without intercept.
pub fn gap_regression(rows: &[(f64, f64)]) -> Result<(f64, f64)> {
    if rows.len() < 2 {
        return Err(CliError::Invalid(format!("need at least 2 rows, got {}", rows.len())));
    }
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, y) in rows {
        let u = n * n.ln();
        s11 += u * u;
        s12 += u * n;
        s22 += n * n;
        r1 += u * y;
        r2 += n * y;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 0.0) {
        return Err(CliError::Invalid("degenerate design for the N log N regression".into()));
    }
    Ok(((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det))
}
