//! Plain-text point-set format.
//!
//! ```text
//! # sphpts v1 d=<d> n=<N> s=<s|log|none> seed=<u64>
//! x_0 x_1 … x_d
//! …
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{norm, ConfigMeta, Configuration, Exponent};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Points whose norm is further than this from 1 are rejected on read.
pub const READ_NORM_TOL: f64 = 1e-9;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn header(config: &Configuration<impl Scalar>) -> String {
    let s = config.meta.s.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("# sphpts v1 d={} n={} s={} seed={}", config.dim(), config.len(), s, config.meta.seed)
}

/// Serializes a configuration; coordinates are printed with 17 significant digits.
pub fn format_config<T: Scalar>(config: &Configuration<T>) -> String {
    let mut out = header(config);
    out.push('\n');
    for p in config.points() {
        for (k, c) in p.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", c.as_f64());
        }
        out.push('\n');
    }
    out
}

struct Header {
    d: usize,
    n: usize,
    s: Option<Exponent>,
    seed: u64,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut words = line.split_whitespace();
    if words.next() != Some("#") || words.next() != Some("sphpts") {
        return Err(parse_err(1, "missing \"# sphpts\" header"));
    }
    match words.next() {
        Some("v1") => {}
        Some(v) => return Err(parse_err(1, format!("unsupported format version {v:?}"))),
        None => return Err(parse_err(1, "missing format version")),
    }
    let (mut d, mut n, mut s, mut seed) = (None, None, None, None);
    for w in words {
        let (key, value) = w.split_once('=').ok_or_else(|| parse_err(1, format!("malformed field {w:?}")))?;
        let bad = |what: &str| parse_err(1, format!("invalid {what} {value:?}"));
        match key {
            "d" => d = Some(value.parse::<usize>().map_err(|_| bad("dimension"))?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad("point count"))?),
            "s" => {
                s = Some(if value == "none" {
                    None
                } else {
                    Some(value.parse::<Exponent>().map_err(|_| bad("exponent"))?)
                })
            }
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
            _ => return Err(parse_err(1, format!("unknown field {key:?}"))),
        }
    }
    let missing = |k: &str| parse_err(1, format!("header is missing {k}="));
    Ok(Header {
        d: d.ok_or_else(|| missing("d"))?,
        n: n.ok_or_else(|| missing("n"))?,
        s: s.ok_or_else(|| missing("s"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
    })
}

/// Parses the text form. Points within [`READ_NORM_TOL`] of the sphere are
/// renormalized; anything further off is an error.
pub fn parse_config<T: Scalar>(text: &str) -> Result<Configuration<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let h = parse_header(first)?;
    if h.d < 2 {
        return Err(parse_err(1, format!("sphere dimension must be at least 2, got {}", h.d)));
    }
    let w = h.d + 1;
    let mut coords = Vec::with_capacity(h.n * w);
    let mut line_of = Vec::with_capacity(h.n);
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if line_of.len() == h.n {
            return Err(parse_err(lineno, format!("more than the declared {} points", h.n)));
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| parse_err(lineno, format!("invalid number {tok:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != w {
            return Err(parse_err(lineno, format!("expected {w} coordinates, found {}", row.len())));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(lineno, "non-finite coordinate"));
        }
        let nrm = norm(&row);
        if (nrm - 1.0).abs() > READ_NORM_TOL {
            return Err(parse_err(lineno, format!("point norm {nrm} differs from 1 by more than {READ_NORM_TOL}")));
        }
        // Leave points already unit to working precision bit-for-bit intact.
        let scale = if (nrm - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { nrm };
        coords.extend(row.iter().map(|&x| T::lit(x / scale)));
        line_of.push(lineno);
    }
    if line_of.len() != h.n {
        return Err(parse_err(
            text.lines().count().max(1),
            format!("declared {} points but found {}", h.n, line_of.len()),
        ));
    }
    let config = Configuration::from_parts_unvalidated(h.d, coords, ConfigMeta::new(h.s, h.seed))
        .map_err(|e| parse_err(1, e.to_string()))?;
    if let Some((i, j)) = config.first_duplicate() {
        return Err(parse_err(line_of[j], format!("duplicates the point on line {}", line_of[i])));
    }
    Ok(config)
}

pub fn write_config<T: Scalar>(config: &Configuration<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_config(config))
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn read_config<T: Scalar>(path: impl AsRef<Path>) -> Result<Configuration<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}
