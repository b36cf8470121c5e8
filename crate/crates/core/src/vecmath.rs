//! Numerical primitives shared by the library, readout and analysis modules.
//!
//! All sums are accumulated left to right in `f64` so results are
//! bit-reproducible across runs and thread counts.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Norms at or below this value are treated as degenerate (for example an
/// all-dead rectifier layer).
pub const NORM_FLOOR: f64 = 1e-12;

/// Default temperature of the sharp exponential kernel.
pub const DEFAULT_TEMPERATURE: f64 = 0.01;

pub fn check_finite(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    check_finite(v)?;
    let n = norm(v);
    if n <= NORM_FLOOR {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Cosines this close to 1 are rounding noise on identical directions.
pub const UNIT_SNAP: f64 = 1e-10;

/// Clamps a cosine to `[-1, 1]` and snaps values within [`UNIT_SNAP`] of 1
/// to exactly 1, so a stored pattern always matches itself fully.
pub fn snap_unit(c: f64) -> f64 {
    if c >= 1.0 - UNIT_SNAP {
        1.0
    } else {
        c.max(-1.0)
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    check_finite(a)?;
    check_finite(b)?;
    let (na, nb) = (norm(a), norm(b));
    if na <= NORM_FLOOR || nb <= NORM_FLOOR {
        return Err(Error::ZeroNorm);
    }
    Ok(snap_unit(dot(a, b) / (na * nb)))
}

fn desc_lowest_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// The `min(k, len)` largest entries of `v` as `(index, value)` pairs, sorted
/// by value descending. Equal values are ordered by lowest index first.
pub fn top_k_desc(v: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("top-k requires k >= 1".into()));
    }
    let mut pairs: Vec<(usize, f64)> = v.iter().copied().enumerate().collect();
    let k = k.min(pairs.len());
    if k < pairs.len() {
        pairs.select_nth_unstable_by(k - 1, desc_lowest_index);
        pairs.truncate(k);
    }
    pairs.sort_by(desc_lowest_index);
    Ok(pairs)
}

/// Lowest index holding the maximum value, or `None` for an empty slice.
pub fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

/// Sharp exponential kernel `exp(-(1 - x) / temperature)`.
///
/// Inputs slightly above 1 (cosine overshoot) are clamped to 1.
pub fn kernel_g(x: f64, temperature: f64) -> f64 {
    debug_assert!(temperature > 0.0);
    (-(1.0 - x.min(1.0)) / temperature).exp()
}

/// Softmax with max-subtraction.
pub fn stable_softmax(v: &[f64]) -> Result<Vec<f64>> {
    check_finite(v)?;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let mut total = 0.0;
    for e in &exps {
        total += e;
    }
    Ok(exps.into_iter().map(|e| e / total).collect())
}
