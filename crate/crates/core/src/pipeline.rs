//! End-to-end demo: train the toy network, dump per-layer patterns, build
//! libraries and heads, and score size, accuracy, confusion and adversarial
//! detection.
//!
//! Every intermediate artifact goes through the on-disk formats (features
//! quantized to `f32`, library rows stored as `f32`) so running the stages
//! one by one from the command line reproduces the same numbers.
//!
//! Output layout under the target directory:
//!
//! ```text
//! haps/{train,test}_layer{L}.hap     per-layer patterns
//! haps/adv_eps{E}_layer{L}.hap       patterns of attacked test samples
//! libs/layer{L}_theta{T}.lib / .hed  libraries and heads
//! sizes_layer{L}.csv                 theta,size
//! accuracy.csv                       layer,theta,k,accuracy
//! confusion_layer{L}_theta{T}.csv    d1,d2,ci,trials
//! cpl_normal.csv, cpl_eps{E}.csv     sample_id,cpl
//! roc.csv                            epsilon,auroc
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{auroc, confusion_index, cpl_with_top_a, ConfusionMatrix, CplScore};
use crate::dataio::{
    decode_haps, decode_library, emit_csv, encode_haps, encode_head, encode_library, fmt_sig9,
    AccuracyRow, CsvTable, HapFile,
};
use crate::error::{Error, Result};
use crate::library::{ActivationRecord, LibraryNetwork};
use crate::presets::{TOY_ACCURACY_GRID, TOY_CONFUSION, TOY_CPL, UNIT_GRID};
use crate::readout::{train_head, PredictionHead, TOP_A_CNN, TOP_A_CPL};
use crate::toymodel::{
    gen_dataset, pgd_attack, PgdConfig, Sample, ToyDatasetConfig, ToyNet, TrainConfig,
};
use crate::vecmath::{norm, DEFAULT_TEMPERATURE, NORM_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Synthetic,
    ToyDigits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Gaussian noise for clusters, pixel flip probability for digits.
    pub noise: f64,
    /// Digits only.
    pub brightness_jitter: f64,
    pub hidden_sizes: Vec<usize>,
    pub train: TrainConfig,
    pub size_grid: Vec<f64>,
    pub accuracy_grid: Vec<f64>,
    pub confusion_thetas: Vec<f64>,
    pub top_a: usize,
    /// One threshold per pattern layer (hidden layers, then logits).
    pub cpl_thetas: Vec<f64>,
    pub cpl_top_a: usize,
    pub epsilons: Vec<f64>,
    pub pgd_step: f64,
    pub pgd_iterations: usize,
    /// Start each attack from a uniform point in the ball, seeded per sample.
    pub pgd_random_start: bool,
}

impl DemoConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let data = match scenario {
            Scenario::Synthetic => ToyDatasetConfig::synthetic_clusters(1, seed),
            Scenario::ToyDigits => ToyDatasetConfig::toy_digits(1, seed),
        };
        Self {
            scenario,
            seed,
            train_per_class: 100,
            test_per_class: 40,
            noise: data.noise,
            brightness_jitter: data.brightness_jitter,
            hidden_sizes: vec![128, 32],
            train: TrainConfig {
                epochs: 60,
                learning_rate: 0.1,
                batch_size: 32,
                seed,
            },
            size_grid: UNIT_GRID.to_vec(),
            accuracy_grid: TOY_ACCURACY_GRID.to_vec(),
            confusion_thetas: TOY_CONFUSION.to_vec(),
            top_a: TOP_A_CNN,
            cpl_thetas: TOY_CPL.to_vec(),
            cpl_top_a: TOP_A_CPL,
            epsilons: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            pgd_step: 0.01,
            pgd_iterations: 40,
            pgd_random_start: false,
        }
    }

    pub fn dataset(&self, split: Split) -> ToyDatasetConfig {
        let (per_class, seed) = match split {
            Split::Train => (self.train_per_class, self.seed.wrapping_mul(2)),
            Split::Test => (
                self.test_per_class,
                self.seed.wrapping_mul(2).wrapping_add(1),
            ),
        };
        let mut cfg = match self.scenario {
            Scenario::Synthetic => ToyDatasetConfig::synthetic_clusters(per_class, seed),
            Scenario::ToyDigits => ToyDatasetConfig::toy_digits(per_class, seed),
        };
        cfg.noise = self.noise;
        cfg.brightness_jitter = self.brightness_jitter;
        if self.scenario == Scenario::Synthetic {
            // Test data must share the training class means.
            cfg.seed = self.seed;
            cfg.samples_per_class = self.train_per_class + self.test_per_class;
        }
        cfg
    }

    pub fn layer_sizes(&self, input_dim: usize, num_classes: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden_sizes.iter().copied())
            .chain(std::iter::once(num_classes))
            .collect()
    }

    pub fn pgd(&self, epsilon: f64, sample_id: u64) -> PgdConfig {
        PgdConfig {
            epsilon,
            step_size: self.pgd_step,
            iterations: self.pgd_iterations,
            input_box: match self.scenario {
                Scenario::ToyDigits => (0.0, 1.0),
                Scenario::Synthetic => (f64::NEG_INFINITY, f64::INFINITY),
            },
            random_start: self
                .pgd_random_start
                .then(|| self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ sample_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Train and test samples for a demo configuration.
pub fn demo_data(cfg: &DemoConfig) -> Result<(Vec<Sample>, Vec<Sample>)> {
    match cfg.scenario {
        Scenario::ToyDigits => Ok((
            gen_dataset(&cfg.dataset(Split::Train))?,
            gen_dataset(&cfg.dataset(Split::Test))?,
        )),
        Scenario::Synthetic => {
            let mut all = gen_dataset(&cfg.dataset(Split::Train))?;
            let test = all.split_off(cfg.train_per_class * 10);
            Ok((all, test))
        }
    }
}

/// Per-layer records for `samples`, ids counting up from `first_id`.
pub fn extract_layers(
    net: &ToyNet,
    samples: &[Sample],
    first_id: u64,
) -> Result<Vec<Vec<ActivationRecord>>> {
    let mut layers = vec![Vec::with_capacity(samples.len()); net.num_layers()];
    for (i, s) in samples.iter().enumerate() {
        let fwd = net.forward_with_haps(&s.input)?;
        for (layer_id, hap) in fwd.haps.into_iter().enumerate() {
            layers[layer_id].push(ActivationRecord {
                sample_id: first_id + i as u64,
                layer_id,
                features: hap,
                model_answer: Some(fwd.answer),
                true_label: Some(s.label),
            });
        }
    }
    Ok(layers)
}

/// Splits records into usable ones and the ids of zero-norm ones.
pub fn split_degenerate(records: &[ActivationRecord]) -> (Vec<ActivationRecord>, Vec<u64>) {
    let mut ok = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for r in records {
        if norm(&r.features) > NORM_FLOOR {
            ok.push(r.clone());
        } else {
            skipped.push(r.sample_id);
        }
    }
    if !skipped.is_empty() {
        log::warn!("skipping {} zero-norm patterns", skipped.len());
    }
    (ok, skipped)
}

/// Builds a library, then round-trips it through the LIB1 encoding.
pub fn build_stored_library(records: &[ActivationRecord], theta: f64) -> Result<LibraryNetwork> {
    let (lib, _) = LibraryNetwork::build_skipping_degenerate(records, theta)?;
    decode_library(&encode_library(&lib)?)
}

/// A library and its head for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerReadout {
    pub library: LibraryNetwork,
    pub head: PredictionHead,
}

impl LayerReadout {
    pub fn fit(
        records: &[ActivationRecord],
        theta: f64,
        num_classes: usize,
        top_a: usize,
    ) -> Result<Self> {
        let library = build_stored_library(records, theta)?;
        let (usable, _) = split_degenerate(records);
        let head = train_head(&library, &usable, num_classes, DEFAULT_TEMPERATURE, top_a)?;
        Ok(Self { library, head })
    }

    /// Writes `{stem}.lib` and `{stem}.hed` into `dir`.
    fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::write(
            dir.join(format!("{stem}.lib")),
            encode_library(&self.library)?,
        )?;
        fs::write(dir.join(format!("{stem}.hed")), encode_head(&self.head)?)?;
        Ok(())
    }
}

/// CPL for every sample present (with non-degenerate patterns) in all layers.
/// `per_layer[l]` holds layer `l`'s records, aligned by position.
pub fn cpl_scores(
    layers: &[LayerReadout],
    per_layer: &[Vec<ActivationRecord>],
    top_a: usize,
) -> Result<Vec<CplScore>> {
    if per_layer.len() != layers.len() {
        return Err(Error::DimensionMismatch {
            expected: layers.len(),
            found: per_layer.len(),
        });
    }
    let count = per_layer.first().map_or(0, Vec::len);
    if let Some(bad) = per_layer.iter().find(|l| l.len() != count) {
        return Err(Error::DimensionMismatch {
            expected: count,
            found: bad.len(),
        });
    }
    let pairs: Vec<(&PredictionHead, &LibraryNetwork)> =
        layers.iter().map(|l| (&l.head, &l.library)).collect();
    let scores: Vec<Option<CplScore>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let sample_id = per_layer[0][i].sample_id;
            let mut features = Vec::with_capacity(layers.len());
            for (layer_id, recs) in per_layer.iter().enumerate() {
                let r = &recs[i];
                if r.sample_id != sample_id {
                    return Err(Error::InvalidConfig(format!(
                        "sample id {} in layer {layer_id} does not match {sample_id}",
                        r.sample_id
                    )));
                }
                if norm(&r.features) <= NORM_FLOOR {
                    log::warn!("sample {sample_id}: zero-norm pattern, no consistency score");
                    return Ok(None);
                }
                features.push(r.features.as_slice());
            }
            cpl_with_top_a(sample_id, &pairs, &features, top_a).map(Some)
        })
        .collect::<Result<_>>()?;
    Ok(scores.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyPoint {
    pub layer: usize,
    pub theta: f64,
    pub library_size: usize,
    pub top1: f64,
    pub top3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionResult {
    pub layer: usize,
    pub theta: f64,
    pub matrix: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub epsilon: f64,
    /// Fraction of attacked samples still classified as their true label.
    pub model_accuracy: f64,
    pub auroc: f64,
    pub scores: Vec<CplScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `sizes[layer]` lists `(theta, library size)` over the size grid.
    pub sizes: Vec<Vec<(f64, usize)>>,
    pub accuracy: Vec<AccuracyPoint>,
    pub confusion: Vec<ConfusionResult>,
    pub normal_scores: Vec<CplScore>,
    pub attacks: Vec<AttackResult>,
}

impl DemoReport {
    pub fn accuracy_at(&self, layer: usize, theta: f64) -> Option<&AccuracyPoint> {
        self.accuracy
            .iter()
            .find(|p| p.layer == layer && p.theta == theta)
    }

    pub fn confusion_at(&self, layer: usize, theta: f64) -> Option<&ConfusionMatrix> {
        self.confusion
            .iter()
            .find(|c| c.layer == layer && c.theta == theta)
            .map(|c| &c.matrix)
    }
}

fn tag(x: f64) -> String {
    fmt_sig9(x)
}

/// Writes and re-reads a pattern file so downstream stages see `f32`
/// features, exactly as the command-line stages would.
fn store_haps(
    path: &Path,
    num_classes: usize,
    records: Vec<ActivationRecord>,
) -> Result<Vec<ActivationRecord>> {
    let layer_id = records.first().map_or(0, |r| r.layer_id);
    let bytes = encode_haps(&HapFile::new(num_classes as u16, records))?;
    fs::write(path, &bytes)?;
    Ok(decode_haps(&bytes)?
        .records
        .into_iter()
        .map(|r| r.with_layer(layer_id))
        .collect())
}

pub fn run_demo(cfg: &DemoConfig, out_dir: &Path) -> Result<DemoReport> {
    let (train_set, test_set) = demo_data(cfg)?;
    let num_classes = 10;
    let input_dim = train_set[0].input.len();
    let mut net = ToyNet::new_random(&cfg.layer_sizes(input_dim, num_classes), cfg.seed)?;
    let trained = net.train(&train_set, &cfg.train)?;
    let test_accuracy = net.accuracy(&test_set)?;
    log::info!(
        "toy net: train accuracy {:.4}, test accuracy {:.4}",
        trained.train_accuracy,
        test_accuracy
    );
    if cfg.cpl_thetas.len() != net.num_layers() {
        return Err(Error::InvalidConfig(format!(
            "{} consistency thresholds for {} layers",
            cfg.cpl_thetas.len(),
            net.num_layers()
        )));
    }

    let hap_dir = out_dir.join("haps");
    let lib_dir = out_dir.join("libs");
    fs::create_dir_all(&hap_dir)?;
    fs::create_dir_all(&lib_dir)?;
    let layer_path = |dir: &PathBuf, name: String| dir.join(name);

    let store_split = |name: &str, samples: &[Sample], first_id: u64| {
        extract_layers(&net, samples, first_id)?
            .into_iter()
            .enumerate()
            .map(|(l, recs)| {
                store_haps(
                    &layer_path(&hap_dir, format!("{name}_layer{l}.hap")),
                    num_classes,
                    recs,
                )
            })
            .collect::<Result<Vec<_>>>()
    };
    let train_layers = store_split("train", &train_set, 0)?;
    let test_layers = store_split("test", &test_set, 0)?;

    let mut sizes = Vec::with_capacity(train_layers.len());
    for (l, recs) in train_layers.iter().enumerate() {
        let row = cfg
            .size_grid
            .par_iter()
            .map(|&theta| {
                Ok((
                    theta,
                    LibraryNetwork::build_skipping_degenerate(recs, theta)?
                        .0
                        .size(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        emit_csv(
            out_dir.join(format!("sizes_layer{l}.csv")),
            CsvTable::Size(&row),
        )?;
        sizes.push(row);
    }

    let mut accuracy = Vec::new();
    let mut rows = Vec::new();
    for (l, recs) in train_layers.iter().enumerate() {
        let (test_usable, _) = split_degenerate(&test_layers[l]);
        for &theta in &cfg.accuracy_grid {
            let readout = LayerReadout::fit(recs, theta, num_classes, cfg.top_a)?;
            readout.save(&lib_dir, &format!("layer{l}_theta{}", tag(theta)))?;
            let top1 = readout
                .head
                .evaluate_accuracy(&readout.library, &test_usable, 1)?;
            let top3 = readout
                .head
                .evaluate_accuracy(&readout.library, &test_usable, 3)?;
            rows.push(AccuracyRow {
                layer: l,
                theta,
                k: 1,
                accuracy: top1.accuracy,
            });
            rows.push(AccuracyRow {
                layer: l,
                theta,
                k: 3,
                accuracy: top3.accuracy,
            });
            accuracy.push(AccuracyPoint {
                layer: l,
                theta,
                library_size: readout.library.size(),
                top1: top1.accuracy,
                top3: top3.accuracy,
            });
        }
    }
    emit_csv(out_dir.join("accuracy.csv"), CsvTable::Accuracy(&rows))?;

    let mut confusion = Vec::new();
    for (l, recs) in train_layers.iter().enumerate() {
        let (test_usable, _) = split_degenerate(&test_layers[l]);
        for &theta in &cfg.confusion_thetas {
            let readout = LayerReadout::fit(recs, theta, num_classes, cfg.top_a)?;
            readout.save(&lib_dir, &format!("layer{l}_theta{}", tag(theta)))?;
            let matrix = confusion_index(&readout.head, &readout.library, &test_usable)?;
            emit_csv(
                out_dir.join(format!("confusion_layer{l}_theta{}.csv", tag(theta))),
                CsvTable::Confusion(&matrix),
            )?;
            confusion.push(ConfusionResult {
                layer: l,
                theta,
                matrix,
            });
        }
    }

    let cpl_layers = train_layers
        .iter()
        .zip(&cfg.cpl_thetas)
        .enumerate()
        .map(|(l, (recs, &theta))| {
            let readout = LayerReadout::fit(recs, theta, num_classes, cfg.cpl_top_a)?;
            readout.save(&lib_dir, &format!("cpl_layer{l}_theta{}", tag(theta)))?;
            Ok(readout)
        })
        .collect::<Result<Vec<_>>>()?;
    // The first half of the test set is the normal population, the second
    // half is attacked.
    let half = test_set.len() / 2;
    let normal_layers: Vec<Vec<ActivationRecord>> =
        test_layers.iter().map(|l| l[..half].to_vec()).collect();
    let normal_scores = cpl_scores(&cpl_layers, &normal_layers, cfg.cpl_top_a)?;
    emit_csv(
        out_dir.join("cpl_normal.csv"),
        CsvTable::Cpl(&normal_scores),
    )?;
    let normal_values: Vec<f64> = normal_scores.iter().map(|s| s.value).collect();

    let mut attacks = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        let adversarial = test_set[half..]
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let pgd = cfg.pgd(eps, (half + i) as u64);
                Ok(Sample {
                    input: pgd_attack(&net, &s.input, s.label, &pgd)?,
                    label: s.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model_accuracy = net.accuracy(&adversarial)?;
        let adv_layers = store_split(&format!("adv_eps{}", tag(eps)), &adversarial, half as u64)?;
        let scores = cpl_scores(&cpl_layers, &adv_layers, cfg.cpl_top_a)?;
        emit_csv(
            out_dir.join(format!("cpl_eps{}.csv", tag(eps))),
            CsvTable::Cpl(&scores),
        )?;
        let adv_values: Vec<f64> = scores.iter().map(|s| s.value).collect();
        let auc = auroc(&normal_values, &adv_values)?.auroc;
        log::info!("epsilon {eps}: model accuracy {model_accuracy:.3}, AUROC {auc:.4}");
        attacks.push(AttackResult {
            epsilon: eps,
            model_accuracy,
            auroc: auc,
            scores,
        });
    }
    let roc: Vec<(f64, f64)> = attacks.iter().map(|a| (a.epsilon, a.auroc)).collect();
    emit_csv(out_dir.join("roc.csv"), CsvTable::Roc(&roc))?;

    Ok(DemoReport {
        train_accuracy: trained.train_accuracy,
        test_accuracy,
        sizes,
        accuracy,
        confusion,
        normal_scores,
        attacks,
    })
}
