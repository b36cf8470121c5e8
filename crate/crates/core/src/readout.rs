//! Prediction heads over library responses.
//!
//! A head holds one functional connection per (class, library node) pair,
//! learned in a single Hebbian pass: every training record adds
//! `g(h_n) * O_m` to `W[m][n]`, where `h` is the library response, `g` the
//! sharp exponential kernel and `O` the +1/-1 encoding of the model's answer.
//! Class likelihoods sum the connections of the `top_a` most active nodes,
//! weighted by their activation.

use crate::error::{Error, Result};
use crate::library::{ActivationRecord, LibraryNetwork};
use crate::vecmath::{argmax, kernel_g, top_k_desc, DEFAULT_TEMPERATURE};

/// `top_a` used for convolutional-style runs.
pub const TOP_A_CNN: usize = 3;
/// `top_a` used for residual-network block libraries.
pub const TOP_A_RESNET: usize = 8;
/// `top_a` used when computing cross-layer consistency.
pub const TOP_A_CPL: usize = 20;

/// +1 at the answer class, -1 everywhere else.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector(Vec<f64>);

impl TargetVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode_target(answer: usize, num_classes: usize) -> Result<TargetVector> {
    if answer >= num_classes {
        return Err(Error::ClassOutOfRange {
            class: answer,
            num_classes,
        });
    }
    let mut v = vec![-1.0; num_classes];
    v[answer] = 1.0;
    Ok(TargetVector(v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassLikelihoods {
    pub values: Vec<f64>,
    pub argmax_class: usize,
}

/// Which label a prediction is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    ModelAnswer,
    TrueLabel,
}

impl Target {
    fn of(self, rec: &ActivationRecord) -> Result<usize> {
        match self {
            Target::ModelAnswer => rec.model_answer.ok_or(Error::MissingAnswer {
                sample_id: rec.sample_id,
            }),
            Target::TrueLabel => rec.true_label.ok_or(Error::MissingLabel {
                sample_id: rec.sample_id,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
}

impl AccuracyReport {
    /// Set when no records were scored; `accuracy` is then 0.
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionHead {
    /// Row-major `num_classes x library_size`.
    weights: Vec<f64>,
    temperature: f64,
    top_a: usize,
    num_classes: usize,
    library_size: usize,
}

impl PredictionHead {
    pub fn new(
        num_classes: usize,
        library_size: usize,
        temperature: f64,
        top_a: usize,
    ) -> Result<Self> {
        Self::from_weights(
            num_classes,
            library_size,
            temperature,
            top_a,
            vec![0.0; num_classes * library_size],
        )
    }

    pub fn from_weights(
        num_classes: usize,
        library_size: usize,
        temperature: f64,
        top_a: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be >= 1".into()));
        }
        if top_a == 0 {
            return Err(Error::InvalidConfig("top_a must be >= 1".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if weights.len() != num_classes * library_size {
            return Err(Error::DimensionMismatch {
                expected: num_classes * library_size,
                found: weights.len(),
            });
        }
        Ok(Self {
            weights,
            temperature,
            top_a,
            num_classes,
            library_size,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn library_size(&self) -> usize {
        self.library_size
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn top_a(&self) -> usize {
        self.top_a
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, class: usize, node: usize) -> f64 {
        self.weights[class * self.library_size + node]
    }

    fn check_library(&self, lib: &LibraryNetwork) -> Result<()> {
        if lib.size() != self.library_size {
            return Err(Error::DimensionMismatch {
                expected: self.library_size,
                found: lib.size(),
            });
        }
        Ok(())
    }

    /// Continues the single Hebbian pass over `records`, in order.
    pub fn accumulate(&mut self, lib: &LibraryNetwork, records: &[ActivationRecord]) -> Result<()> {
        if !lib.is_frozen() {
            return Err(Error::NotFrozen);
        }
        self.check_library(lib)?;
        let m = self.library_size;
        for rec in records {
            let annotate = |e: Error| e.for_record(rec.sample_id);
            let answer = Target::ModelAnswer.of(rec)?;
            let target = encode_target(answer, self.num_classes).map_err(annotate)?;
            let response = lib.respond(&rec.features).map_err(annotate)?;
            let g: Vec<f64> = response
                .activations
                .iter()
                .map(|&h| kernel_g(h, self.temperature))
                .collect();
            for (row, &o) in self.weights.chunks_exact_mut(m).zip(target.values()) {
                for (w, gn) in row.iter_mut().zip(&g) {
                    *w += gn * o;
                }
            }
        }
        Ok(())
    }

    /// Likelihood of each class using the `top_a` most active library nodes.
    pub fn likelihood(&self, lib: &LibraryNetwork, features: &[f64]) -> Result<ClassLikelihoods> {
        self.likelihood_with_top_a(lib, features, self.top_a)
    }

    pub fn likelihood_with_top_a(
        &self,
        lib: &LibraryNetwork,
        features: &[f64],
        top_a: usize,
    ) -> Result<ClassLikelihoods> {
        self.check_library(lib)?;
        let response = lib.respond(features)?;
        let mut values = vec![0.0; self.num_classes];
        if !response.activations.is_empty() {
            let top = top_k_desc(&response.activations, top_a)?;
            for (class, p) in values.iter_mut().enumerate() {
                for &(node, h) in &top {
                    *p += self.weight(class, node) * h;
                }
            }
        }
        let argmax_class = argmax(&values).unwrap_or(0);
        Ok(ClassLikelihoods {
            values,
            argmax_class,
        })
    }

    /// The `k` most likely classes, most likely first.
    pub fn predict_topk(
        &self,
        lib: &LibraryNetwork,
        features: &[f64],
        k: usize,
    ) -> Result<Vec<usize>> {
        if k == 0 || k > self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "k must lie in 1..={}, got {k}",
                self.num_classes
            )));
        }
        let p = self.likelihood(lib, features)?;
        Ok(top_k_desc(&p.values, k)?
            .into_iter()
            .map(|(c, _)| c)
            .collect())
    }

    /// Fraction of records whose model answer is among the top-`k` predictions.
    pub fn evaluate_accuracy(
        &self,
        lib: &LibraryNetwork,
        records: &[ActivationRecord],
        k: usize,
    ) -> Result<AccuracyReport> {
        self.evaluate_against(lib, records, k, Target::ModelAnswer)
    }

    pub fn evaluate_against(
        &self,
        lib: &LibraryNetwork,
        records: &[ActivationRecord],
        k: usize,
        target: Target,
    ) -> Result<AccuracyReport> {
        let mut correct = 0;
        for rec in records {
            let want = target.of(rec)?;
            let predicted = self
                .predict_topk(lib, &rec.features, k)
                .map_err(|e| e.for_record(rec.sample_id))?;
            if predicted.contains(&want) {
                correct += 1;
            }
        }
        if records.is_empty() {
            log::warn!("accuracy requested over an empty record set");
        }
        let accuracy = if records.is_empty() {
            0.0
        } else {
            correct as f64 / records.len() as f64
        };
        Ok(AccuracyReport {
            accuracy,
            correct,
            total: records.len(),
        })
    }
}

/// Trains a fresh head over a frozen library in one pass over `records`.
pub fn train_head(
    lib: &LibraryNetwork,
    records: &[ActivationRecord],
    num_classes: usize,
    temperature: f64,
    top_a: usize,
) -> Result<PredictionHead> {
    let mut head = PredictionHead::new(num_classes, lib.size(), temperature, top_a)?;
    head.accumulate(lib, records)?;
    Ok(head)
}

/// [`train_head`] with the default kernel temperature.
pub fn train_head_default(
    lib: &LibraryNetwork,
    records: &[ActivationRecord],
    num_classes: usize,
    top_a: usize,
) -> Result<PredictionHead> {
    train_head(lib, records, num_classes, DEFAULT_TEMPERATURE, top_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(id: u64, v: &[f64], answer: usize) -> ActivationRecord {
        ActivationRecord::new(id, v.to_vec()).with_answer(answer)
    }

    #[test]
    fn encode_target_examples() {
        assert_eq!(encode_target(0, 3).unwrap().values(), &[1.0, -1.0, -1.0]);
        assert_eq!(encode_target(2, 3).unwrap().values(), &[-1.0, -1.0, 1.0]);
        let t = encode_target(9, 10).unwrap();
        assert_eq!(t.values()[9], 1.0);
        assert_eq!(t.values().iter().filter(|&&x| x == -1.0).count(), 9);
        assert!(matches!(
            encode_target(3, 3),
            Err(Error::ClassOutOfRange {
                class: 3,
                num_classes: 3
            })
        ));
    }

    #[test]
    fn single_record_head() {
        let r = rec(0, &[0.2, 0.7, 0.1], 1);
        let lib = LibraryNetwork::build(std::slice::from_ref(&r), 0.5).unwrap();
        let head = train_head_default(&lib, std::slice::from_ref(&r), 3, TOP_A_CNN).unwrap();
        assert_eq!(head.weights(), &[-1.0, 1.0, -1.0]);

        let p = head.likelihood(&lib, &r.features).unwrap();
        assert_eq!(p.values, vec![-1.0, 1.0, -1.0]);
        assert_eq!(p.argmax_class, 1);
        assert_eq!(head.predict_topk(&lib, &r.features, 1).unwrap(), vec![1]);
    }

    #[test]
    fn zero_records_give_zero_weights() {
        let lib = LibraryNetwork::build(&[rec(0, &[1.0, 0.0], 0)], 0.5).unwrap();
        let head = train_head_default(&lib, &[], 4, 3).unwrap();
        assert!(head.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn training_requires_answers_and_frozen_library() {
        let lib = LibraryNetwork::build(&[rec(0, &[1.0, 0.0], 0)], 0.5).unwrap();
        let bare = ActivationRecord::new(7, vec![1.0, 1.0]);
        assert!(matches!(
            train_head_default(&lib, &[bare], 2, 3),
            Err(Error::MissingAnswer { sample_id: 7 })
        ));
        let open = LibraryNetwork::new(0.5, 2).unwrap();
        assert!(matches!(
            train_head_default(&open, &[], 2, 3),
            Err(Error::NotFrozen)
        ));
        let wrong_dim = rec(3, &[1.0, 0.0, 0.0], 0);
        assert!(matches!(
            train_head_default(&lib, &[wrong_dim], 2, 3)
                .unwrap_err()
                .root(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn small_library_uses_all_nodes() {
        let recs = [rec(0, &[1.0, 0.0], 0), rec(1, &[0.0, 1.0], 1)];
        let lib = LibraryNetwork::build(&recs, 0.5).unwrap();
        let head = train_head_default(&lib, &recs, 2, 3).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = head.likelihood(&lib, &[1.0, 1.0]).unwrap();
        let g = kernel_g(0.0, DEFAULT_TEMPERATURE);
        // Both nodes contribute with activation 1/sqrt(2).
        let expect0 = (head.weight(0, 0) + head.weight(0, 1)) * s;
        assert_abs_diff_eq!(p.values[0], expect0, epsilon = 1e-12);
        assert_abs_diff_eq!(head.weight(0, 0), 1.0 - g, epsilon = 1e-15);
    }

    #[test]
    fn predict_topk_orders_and_ties() {
        // Three nodes, one per class, hand-set weights give likelihoods
        // proportional to (0.2, 0.9, 0.5) for an input hitting node 0 only.
        let lib =
            LibraryNetwork::from_rows(0.5, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
                .unwrap();
        let w = vec![0.2, 0.0, 0.0, 0.9, 0.0, 0.0, 0.5, 0.0, 0.0];
        let head = PredictionHead::from_weights(3, 3, 0.01, 1, w).unwrap();
        assert_eq!(
            head.predict_topk(&lib, &[1.0, 0.0, 0.0], 2).unwrap(),
            vec![1, 2]
        );
        let all = head.predict_topk(&lib, &[1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(all, vec![1, 2, 0]);
        assert!(head.predict_topk(&lib, &[1.0, 0.0, 0.0], 4).is_err());
        assert!(head.predict_topk(&lib, &[1.0, 0.0, 0.0], 0).is_err());
    }

    #[test]
    fn accuracy_edge_cases() {
        let recs = [
            rec(0, &[1.0, 0.0], 0),
            rec(1, &[0.0, 1.0], 1),
            rec(2, &[0.9, 0.1], 1),
        ];
        let lib = LibraryNetwork::build(&recs, 0.5).unwrap();
        let head = train_head_default(&lib, &recs, 2, 3).unwrap();
        let full = head.evaluate_accuracy(&lib, &recs, 2).unwrap();
        assert_eq!(full.accuracy, 1.0);
        let empty = head.evaluate_accuracy(&lib, &[], 1).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.accuracy, 0.0);
        let top1 = head.evaluate_accuracy(&lib, &recs, 1).unwrap();
        assert!(top1.accuracy <= full.accuracy);
        assert!(matches!(
            head.evaluate_against(&lib, &recs, 1, Target::TrueLabel),
            Err(Error::MissingLabel { sample_id: 0 })
        ));
    }

    #[test]
    fn head_library_size_mismatch() {
        let lib = LibraryNetwork::build(&[rec(0, &[1.0, 0.0], 0)], 0.5).unwrap();
        let head = PredictionHead::new(2, 5, 0.01, 3).unwrap();
        assert!(matches!(
            head.likelihood(&lib, &[1.0, 0.0]),
            Err(Error::DimensionMismatch {
                expected: 5,
                found: 1
            })
        ));
    }

    #[test]
    fn additivity_and_determinism() {
        let recs: Vec<_> = (0..12)
            .map(|i| {
                let t = i as f64 * 0.7;
                rec(i, &[t.cos(), t.sin(), 0.3], (i % 3) as usize)
            })
            .collect();
        let lib = LibraryNetwork::build(&recs, 0.95).unwrap();
        let whole = train_head_default(&lib, &recs, 3, 3).unwrap();
        let again = train_head_default(&lib, &recs, 3, 3).unwrap();
        assert_eq!(whole, again);

        let mut split = PredictionHead::new(3, lib.size(), DEFAULT_TEMPERATURE, 3).unwrap();
        split.accumulate(&lib, &recs[..5]).unwrap();
        split.accumulate(&lib, &recs[5..]).unwrap();
        assert_eq!(split, whole);
        let bound = recs.len() as f64;
        assert!(whole.weights().iter().all(|w| w.abs() <= bound));
    }
}
