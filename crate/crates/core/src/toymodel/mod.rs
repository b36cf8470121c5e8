//! A small fully-connected rectifier classifier with hand-written
//! backpropagation, used as a self-contained source of hidden-layer patterns.

mod dataset;
mod pgd;

pub use dataset::{class_templates, gen_dataset, DatasetKind, Sample, ToyDatasetConfig};
pub use pgd::{pgd_attack, PgdConfig};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::{argmax, check_finite};

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| {
                let mut acc = *b;
                for (w, xi) in row.iter().zip(x) {
                    acc += w * xi;
                }
                acc
            })
            .collect()
    }
}

/// Forward pass output. `haps` holds every hidden layer's rectified output
/// followed by the raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub haps: Vec<Vec<f64>>,
    pub answer: usize,
}

impl Forward {
    pub fn logits(&self) -> &[f64] {
        self.haps.last().expect("at least one layer")
    }
}

/// Parameter and input gradients of the cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.1,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub final_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    layers: Vec<Dense>,
}

impl ToyNet {
    /// He-initialized network with zero biases.
    pub fn new_random(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt())
                    .expect("positive standard deviation");
                Dense {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| normal.sample(&mut rng))
                        .collect(),
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Builds a network from explicit row-major weight matrices and biases.
    pub fn from_parameters(
        layer_sizes: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_sizes(layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: layer_sizes.len() - 1,
                found: weights.len().min(biases.len()),
            });
        }
        let mut layers = Vec::with_capacity(weights.len());
        for ((w, b), io) in weights.into_iter().zip(biases).zip(layer_sizes.windows(2)) {
            let (inputs, outputs) = (io[0], io[1]);
            if w.len() != inputs * outputs {
                return Err(Error::DimensionMismatch {
                    expected: inputs * outputs,
                    found: w.len(),
                });
            }
            if b.len() != outputs {
                return Err(Error::DimensionMismatch {
                    expected: outputs,
                    found: b.len(),
                });
            }
            check_finite(&w)?;
            check_finite(&b)?;
            layers.push(Dense {
                inputs,
                outputs,
                weights: w,
                bias: b,
            });
        }
        Ok(Self { layers })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    /// Number of pattern-producing layers (hidden layers plus logits).
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.layers[layer].weights
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.layers[layer].bias
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer.
    fn pre_activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = match i {
                0 => layer.apply(input),
                _ => layer.apply(&relu(&zs[i - 1])),
            };
            zs.push(z);
        }
        zs
    }

    pub fn forward_with_haps(&self, input: &[f64]) -> Result<Forward> {
        self.check_input(input)?;
        let zs = self.pre_activations(input);
        let last = zs.len() - 1;
        let haps: Vec<Vec<f64>> = zs
            .into_iter()
            .enumerate()
            .map(|(i, z)| if i == last { z } else { relu(&z) })
            .collect();
        let answer = argmax(haps.last().expect("non-empty")).unwrap_or(0);
        Ok(Forward { haps, answer })
    }

    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(self.forward_with_haps(input)?.answer)
    }

    /// Softmax cross-entropy of the logits against `label`.
    pub fn loss(&self, input: &[f64], label: usize) -> Result<f64> {
        self.check_input(input)?;
        self.check_label(label)?;
        let zs = self.pre_activations(input);
        Ok(cross_entropy(zs.last().expect("non-empty"), label))
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.num_classes() {
            return Err(Error::ClassOutOfRange {
                class: label,
                num_classes: self.num_classes(),
            });
        }
        Ok(())
    }

    pub fn loss_and_gradients(&self, input: &[f64], label: usize) -> Result<(f64, Gradients)> {
        self.check_input(input)?;
        self.check_label(label)?;
        let zs = self.pre_activations(input);
        let logits = zs.last().expect("non-empty");
        let loss = cross_entropy(logits, label);

        let mut delta = softmax(logits);
        delta[label] -= 1.0;

        let n = self.layers.len();
        let mut grad_w = vec![Vec::new(); n];
        let mut grad_b = vec![Vec::new(); n];
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let prev = match l {
                0 => input.to_vec(),
                _ => relu(&zs[l - 1]),
            };
            let mut gw = Vec::with_capacity(layer.weights.len());
            for d in &delta {
                gw.extend(prev.iter().map(|a| d * a));
            }
            grad_w[l] = gw;
            grad_b[l] = delta.clone();

            let mut back = vec![0.0; layer.inputs];
            for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                for (b, w) in back.iter_mut().zip(row) {
                    *b += w * d;
                }
            }
            if l > 0 {
                for (b, z) in back.iter_mut().zip(&zs[l - 1]) {
                    if *z <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        Ok((
            loss,
            Gradients {
                weights: grad_w,
                biases: grad_b,
                input: delta,
            },
        ))
    }

    /// Mini-batch gradient descent on softmax cross-entropy.
    pub fn train(&mut self, data: &[Sample], cfg: &TrainConfig) -> Result<TrainReport> {
        if data.is_empty() {
            return Err(Error::EmptyInput);
        }
        if cfg.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut final_loss = 0.0;
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let mut acc_w: Vec<Vec<f64>> = self
                    .layers
                    .iter()
                    .map(|l| vec![0.0; l.weights.len()])
                    .collect();
                let mut acc_b: Vec<Vec<f64>> = self
                    .layers
                    .iter()
                    .map(|l| vec![0.0; l.bias.len()])
                    .collect();
                for &i in batch {
                    let (loss, g) = self.loss_and_gradients(&data[i].input, data[i].label)?;
                    epoch_loss += loss;
                    for (a, gw) in acc_w.iter_mut().zip(&g.weights) {
                        add_assign(a, gw);
                    }
                    for (a, gb) in acc_b.iter_mut().zip(&g.biases) {
                        add_assign(a, gb);
                    }
                }
                let scale = cfg.learning_rate / batch.len() as f64;
                for ((layer, gw), gb) in self.layers.iter_mut().zip(&acc_w).zip(&acc_b) {
                    for (w, g) in layer.weights.iter_mut().zip(gw) {
                        *w -= scale * g;
                    }
                    for (b, g) in layer.bias.iter_mut().zip(gb) {
                        *b -= scale * g;
                    }
                }
            }
            final_loss = epoch_loss / data.len() as f64;
            if !final_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
        }
        let train_accuracy = self.accuracy(data)?;
        Ok(TrainReport {
            final_loss,
            train_accuracy,
        })
    }

    /// Fraction of samples whose predicted class equals their label.
    pub fn accuracy(&self, data: &[Sample]) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0;
        for s in data {
            if self.predict(&s.input)? == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }

    /// Parameter `index` in (layer, weights then bias) order.
    fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                return &mut layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.bias.len() {
                return &mut layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range")
    }
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "layer sizes must have >= 2 positive entries, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&x| x.max(0.0)).collect()
}

fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Largest relative error between analytic and central finite-difference
/// gradients over every parameter and input component.
///
/// Relative error is `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn gradient_check(net: &ToyNet, input: &[f64], label: usize, step: f64) -> Result<f64> {
    let (_, analytic) = net.loss_and_gradients(input, label)?;
    let flat: Vec<f64> = analytic
        .weights
        .iter()
        .zip(&analytic.biases)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
        .collect();
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-8);

    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (i, &a) in flat.iter().enumerate() {
        let original = *probe.parameter_mut(i);
        *probe.parameter_mut(i) = original + step;
        let up = probe.loss(input, label)?;
        *probe.parameter_mut(i) = original - step;
        let down = probe.loss(input, label)?;
        *probe.parameter_mut(i) = original;
        worst = worst.max(rel(a, (up - down) / (2.0 * step)));
    }
    let mut x = input.to_vec();
    for i in 0..x.len() {
        let original = x[i];
        x[i] = original + step;
        let up = net.loss(&x, label)?;
        x[i] = original - step;
        let down = net.loss(&x, label)?;
        x[i] = original;
        worst = worst.max(rel(analytic.input[i], (up - down) / (2.0 * step)));
    }
    Ok(worst)
}
