//! Library networks: insertion-ordered stores of unit-normalized activity
//! patterns with threshold novelty detection.
//!
//! A library has one output node per stored pattern. Presenting a pattern
//! yields the cosine similarity to every stored row; when the best match is
//! strictly below `theta` the pattern is novel and is imprinted as a new row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::{check_finite, dot, normalize, snap_unit};

/// One sample's activity pattern at one layer, with the model's answer and the
/// ground-truth label when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRecord {
    pub sample_id: u64,
    pub layer_id: usize,
    pub features: Vec<f64>,
    pub model_answer: Option<usize>,
    pub true_label: Option<usize>,
}

impl ActivationRecord {
    pub fn new(sample_id: u64, features: Vec<f64>) -> Self {
        Self {
            sample_id,
            layer_id: 0,
            features,
            model_answer: None,
            true_label: None,
        }
    }

    pub fn with_answer(mut self, answer: usize) -> Self {
        self.model_answer = Some(answer);
        self
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.true_label = Some(label);
        self
    }

    pub fn with_layer(mut self, layer_id: usize) -> Self {
        self.layer_id = layer_id;
        self
    }
}

/// Response of every library node to one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryResponse {
    pub activations: Vec<f64>,
    /// `-inf` for an empty library.
    pub max_value: f64,
    /// Lowest-index argmax; `None` for an empty library.
    pub max_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryNetwork {
    theta: f64,
    dim: usize,
    /// Row-major, `len() == size() * dim`.
    rows: Vec<f64>,
    frozen: bool,
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTheta(theta))
    }
}

impl LibraryNetwork {
    pub fn new(theta: f64, dim: usize) -> Result<Self> {
        check_theta(theta)?;
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            theta,
            dim,
            rows: Vec::new(),
            frozen: false,
        })
    }

    /// Reassembles a frozen library from stored rows.
    ///
    /// Rows whose norm is off by more than 1e-6 are re-normalized; rows that
    /// already satisfy the unit-norm invariant are kept bit-for-bit.
    pub fn from_rows(theta: f64, dim: usize, rows: Vec<f64>) -> Result<Self> {
        let mut lib = Self::new(theta, dim)?;
        if !rows.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rows.len() % dim,
            });
        }
        for row in rows.chunks_exact(dim) {
            let n = crate::vecmath::norm(row);
            if (n - 1.0).abs() <= 1e-6 {
                check_finite(row)?;
                lib.rows.extend_from_slice(row);
            } else {
                lib.rows.extend(normalize(row)?);
            }
        }
        lib.frozen = true;
        Ok(lib)
    }

    /// Folds [`present`](Self::present) over `records` in order and freezes
    /// the result.
    pub fn build(records: &[ActivationRecord], theta: f64) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyInput)?;
        let mut lib = Self::new(theta, first.features.len())?;
        for rec in records {
            lib.present(&rec.features)
                .map_err(|e| e.for_record(rec.sample_id))?;
        }
        lib.freeze();
        Ok(lib)
    }

    /// Like [`build`](Self::build), but records with a degenerate (zero-norm)
    /// pattern are skipped and their sample ids returned.
    pub fn build_skipping_degenerate(
        records: &[ActivationRecord],
        theta: f64,
    ) -> Result<(Self, Vec<u64>)> {
        let first = records.first().ok_or(Error::EmptyInput)?;
        let mut lib = Self::new(theta, first.features.len())?;
        let mut skipped = Vec::new();
        for rec in records {
            match lib.present(&rec.features) {
                Ok(_) => {}
                Err(Error::ZeroNorm) => {
                    log::warn!("skipping sample {}: zero-norm pattern", rec.sample_id);
                    skipped.push(rec.sample_id);
                }
                Err(e) => return Err(e.for_record(rec.sample_id)),
            }
        }
        if lib.is_empty() {
            return Err(Error::ZeroNorm);
        }
        lib.freeze();
        Ok((lib, skipped))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.rows[index * self.dim..(index + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.dim)
    }

    pub(crate) fn raw_rows(&self) -> &[f64] {
        &self.rows
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: features.len(),
            });
        }
        Ok(())
    }

    fn respond_normalized(&self, unit: &[f64]) -> LibraryResponse {
        let mut max_value = f64::NEG_INFINITY;
        let mut max_index = None;
        let activations: Vec<f64> = self
            .rows()
            .enumerate()
            .map(|(i, row)| {
                let h = snap_unit(dot(row, unit));
                if h > max_value {
                    max_value = h;
                    max_index = Some(i);
                }
                h
            })
            .collect();
        LibraryResponse {
            activations,
            max_value,
            max_index,
        }
    }

    /// Cosine similarity of `features` to every stored row.
    pub fn respond(&self, features: &[f64]) -> Result<LibraryResponse> {
        self.check_dim(features)?;
        let unit = normalize(features)?;
        Ok(self.respond_normalized(&unit))
    }

    /// Responds to `features` and imprints them as a new row when the best
    /// match is strictly below `theta`. Returns whether a row was added.
    pub fn present(&mut self, features: &[f64]) -> Result<(LibraryResponse, bool)> {
        if self.frozen {
            return Err(Error::FrozenLibrary);
        }
        self.check_dim(features)?;
        let unit = normalize(features)?;
        let response = self.respond_normalized(&unit);
        let novel = response.max_value < self.theta;
        if novel {
            self.rows.extend_from_slice(&unit);
        }
        Ok((response, novel))
    }
}
