//! Decision-process diagnostics built on trained heads: confusion indices,
//! cross-layer prediction consistency (CPL) and AUROC.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::library::{ActivationRecord, LibraryNetwork};
use crate::readout::{PredictionHead, TOP_A_CPL};
use crate::vecmath::{cosine, stable_softmax};

/// Mean likelihood ratios `CI(d1, d2)` over trials where the head's top class
/// equals the true label `d1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    sums: Vec<f64>,
    trial_counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn trial_counts(&self) -> &[usize] {
        &self.trial_counts
    }

    /// `None` when no qualifying trial presented `d1`.
    pub fn get(&self, d1: usize, d2: usize) -> Option<f64> {
        let n = self.trial_counts[d1];
        (n > 0).then(|| self.sums[d1 * self.num_classes + d2] / n as f64)
    }

    pub fn is_absent(&self, d1: usize) -> bool {
        self.trial_counts[d1] == 0
    }

    /// All present off-diagonal entries as `(d1, d2, ci)`.
    pub fn off_diagonal(&self) -> Vec<(usize, usize, f64)> {
        let c = self.num_classes;
        (0..c)
            .flat_map(|d1| (0..c).map(move |d2| (d1, d2)))
            .filter(|(d1, d2)| d1 != d2)
            .filter_map(|(d1, d2)| self.get(d1, d2).map(|v| (d1, d2, v)))
            .collect()
    }
}

pub fn confusion_index(
    head: &PredictionHead,
    lib: &LibraryNetwork,
    records: &[ActivationRecord],
) -> Result<ConfusionMatrix> {
    let c = head.num_classes();
    let mut sums = vec![0.0; c * c];
    let mut trial_counts = vec![0; c];
    for rec in records {
        let d1 = rec.true_label.ok_or(Error::MissingLabel {
            sample_id: rec.sample_id,
        })?;
        if d1 >= c {
            return Err(Error::ClassOutOfRange {
                class: d1,
                num_classes: c,
            }
            .for_record(rec.sample_id));
        }
        let p = head
            .likelihood(lib, &rec.features)
            .map_err(|e| e.for_record(rec.sample_id))?;
        if p.argmax_class != d1 {
            continue;
        }
        trial_counts[d1] += 1;
        let row = &mut sums[d1 * c..(d1 + 1) * c];
        for (s, &pd2) in row.iter_mut().zip(&p.values) {
            *s += (pd2 - p.values[d1]).exp();
        }
    }
    Ok(ConfusionMatrix {
        num_classes: c,
        sums,
        trial_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CplScore {
    pub sample_id: u64,
    pub value: f64,
    pub num_layer_pairs: usize,
}

/// Mean pairwise cosine over all unordered pairs of probability vectors.
pub fn mean_pairwise_cosine(probs: &[Vec<f64>]) -> Result<(f64, usize)> {
    if probs.len() < 2 {
        return Err(Error::InvalidConfig(
            "consistency needs at least two layers".into(),
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 1..probs.len() {
        for j in 0..i {
            total += cosine(&probs[i], &probs[j])?;
            pairs += 1;
        }
    }
    Ok(((total / pairs as f64).clamp(0.0, 1.0), pairs))
}

/// Consistency of per-layer predictions for one sample.
///
/// `layers[i]` pairs the head and library for layer `i`, and `features[i]` is
/// the sample's pattern at that layer. Each layer's likelihoods use the
/// `min(top_a, library size)` most active nodes and are softmaxed before the
/// pairwise cosines are averaged.
pub fn cpl_with_top_a(
    sample_id: u64,
    layers: &[(&PredictionHead, &LibraryNetwork)],
    features: &[&[f64]],
    top_a: usize,
) -> Result<CplScore> {
    if layers.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: layers.len(),
            found: features.len(),
        });
    }
    let probs = layers
        .iter()
        .zip(features)
        .enumerate()
        .map(|(layer_id, ((head, lib), f))| {
            head.likelihood_with_top_a(lib, f, top_a)
                .and_then(|p| stable_softmax(&p.values))
                .map_err(|e| e.for_layer(layer_id))
        })
        .collect::<Result<Vec<_>>>()?;
    let (value, num_layer_pairs) = mean_pairwise_cosine(&probs)?;
    Ok(CplScore {
        sample_id,
        value,
        num_layer_pairs,
    })
}

/// [`cpl_with_top_a`] with the 20 most active nodes per layer.
pub fn cpl(
    sample_id: u64,
    layers: &[(&PredictionHead, &LibraryNetwork)],
    features: &[&[f64]],
) -> Result<CplScore> {
    cpl_with_top_a(sample_id, layers, features, TOP_A_CPL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    pub auroc: f64,
    pub normal_scores: Vec<f64>,
    pub adversarial_scores: Vec<f64>,
}

/// Area under the ROC curve with normal samples as the high-scoring class:
/// `P(normal > adversarial) + 0.5 * P(normal == adversarial)`, computed
/// from mid-ranks of the pooled scores.
pub fn auroc(normal_scores: &[f64], adversarial_scores: &[f64]) -> Result<RocResult> {
    if normal_scores.is_empty() || adversarial_scores.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    if let Some(index) = normal_scores
        .iter()
        .chain(adversarial_scores)
        .position(|s| !s.is_finite())
    {
        return Err(Error::NonFinite { index });
    }
    let mut pooled: Vec<(f64, bool)> = normal_scores
        .iter()
        .map(|&s| (s, true))
        .chain(adversarial_scores.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    let mut normal_rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // Ranks are 1-based; ties share the mean rank.
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let normals = pooled[i..=j].iter().filter(|p| p.1).count();
        normal_rank_sum += mid_rank * normals as f64;
        i = j + 1;
    }
    let n1 = normal_scores.len() as f64;
    let n2 = adversarial_scores.len() as f64;
    let u = normal_rank_sum - n1 * (n1 + 1.0) / 2.0;
    Ok(RocResult {
        auroc: u / (n1 * n2),
        normal_scores: normal_scores.to_vec(),
        adversarial_scores: adversarial_scores.to_vec(),
    })
}
