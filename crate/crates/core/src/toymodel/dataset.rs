//! Procedural labeled datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::{cosine, normalize};

/// Largest allowed cosine between two synthetic class means.
pub const MAX_MEAN_COSINE: f64 = 0.3;

const GLYPH_SIDE: usize = 8;

// 4 and 9 share their right stem, left upper stroke and crossbar on purpose.
const GLYPHS: [[&str; GLYPH_SIDE]; 10] = [
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.",
        "..####..",
    ],
    [
        "...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...",
        "..####..",
    ],
    [
        "..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....",
        ".######.",
    ],
    [
        ".#####..", "......#.", "......#.", "..####..", "......#.", "......#.", "......#.",
        ".#####..",
    ],
    [
        ".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#####..", ".....#..", ".....#..",
        ".....#..",
    ],
    [
        ".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", "......#.",
        ".#####..",
    ],
    [
        "...###..", "..#.....", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.",
        "..####..",
    ],
    [
        ".######.", "......#.", ".....#..", ".....#..", "....#...", "....#...", "...#....",
        "...#....",
    ],
    [
        "..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.",
        "..####..",
    ],
    [
        ".#####..", ".#...#..", ".#...#..", ".#...#..", ".#####..", ".....#..", ".....#..",
        ".....#..",
    ],
];

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Unit-direction class means plus spherical Gaussian noise.
    SyntheticClusters,
    /// 8x8 digit glyphs with random pixel flips and brightness jitter.
    ToyDigits,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ToyDatasetConfig {
    pub kind: DatasetKind,
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Gaussian standard deviation for clusters, pixel flip probability for
    /// digits.
    pub noise: f64,
    /// Digits only: brightness is scaled by a uniform factor in
    /// `[1 - jitter, 1]`.
    pub brightness_jitter: f64,
    /// Clusters only; digits are always 64-dimensional.
    pub dim: usize,
    pub seed: u64,
}

impl ToyDatasetConfig {
    pub fn toy_digits(samples_per_class: usize, seed: u64) -> Self {
        Self {
            kind: DatasetKind::ToyDigits,
            num_classes: 10,
            samples_per_class,
            noise: 0.08,
            brightness_jitter: 0.0,
            dim: GLYPH_SIDE * GLYPH_SIDE,
            seed,
        }
    }

    pub fn synthetic_clusters(samples_per_class: usize, seed: u64) -> Self {
        Self {
            kind: DatasetKind::SyntheticClusters,
            num_classes: 10,
            samples_per_class,
            noise: 0.01,
            brightness_jitter: 0.0,
            dim: 64,
            seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            DatasetKind::SyntheticClusters => self.dim,
            DatasetKind::ToyDigits => GLYPH_SIDE * GLYPH_SIDE,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_classes == 0 || self.samples_per_class == 0 {
            return bad("num_classes and samples_per_class must be >= 1".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {}", self.noise));
        }
        match self.kind {
            DatasetKind::SyntheticClusters if self.dim < 2 => {
                bad(format!("cluster dimension {} < 2", self.dim))
            }
            DatasetKind::ToyDigits if self.num_classes > GLYPHS.len() => {
                bad(format!("at most {} digit classes", GLYPHS.len()))
            }
            DatasetKind::ToyDigits if self.noise > 1.0 => {
                bad(format!("flip probability {} > 1", self.noise))
            }
            DatasetKind::ToyDigits if !(0.0..1.0).contains(&self.brightness_jitter) => {
                bad(format!("brightness jitter {}", self.brightness_jitter))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

fn glyph(class: usize) -> Vec<f64> {
    GLYPHS[class]
        .iter()
        .flat_map(|row| row.bytes().map(|b| if b == b'#' { 1.0 } else { 0.0 }))
        .collect()
}

fn cluster_means(cfg: &ToyDatasetConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    const MAX_DRAWS: usize = 100_000;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_classes);
    for _ in 0..MAX_DRAWS {
        if means.len() == cfg.num_classes {
            break;
        }
        let raw: Vec<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
        let Ok(candidate) = normalize(&raw) else {
            continue;
        };
        let separated = means
            .iter()
            .all(|m| cosine(m, &candidate).is_ok_and(|c| c <= MAX_MEAN_COSINE));
        if separated {
            means.push(candidate);
        }
    }
    if means.len() < cfg.num_classes {
        return Err(Error::InvalidConfig(format!(
            "could not place {} class means with cosine <= {MAX_MEAN_COSINE} in dimension {}",
            cfg.num_classes, cfg.dim
        )));
    }
    Ok(means)
}

/// Noise-free class prototypes: the cluster means or the digit glyphs.
pub fn class_templates(cfg: &ToyDatasetConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    match cfg.kind {
        DatasetKind::SyntheticClusters => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            cluster_means(cfg, &mut rng)
        }
        DatasetKind::ToyDigits => Ok((0..cfg.num_classes).map(glyph).collect()),
    }
}

/// Generates `samples_per_class * num_classes` samples with classes
/// interleaved (`sample i` has label `i % num_classes`).
pub fn gen_dataset(cfg: &ToyDatasetConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let templates = match cfg.kind {
        DatasetKind::SyntheticClusters => cluster_means(cfg, &mut rng)?,
        DatasetKind::ToyDigits => (0..cfg.num_classes).map(glyph).collect(),
    };
    // Self-check; holds by construction for clusters.
    if cfg.kind == DatasetKind::SyntheticClusters {
        for i in 0..templates.len() {
            for j in 0..i {
                debug_assert!(cosine(&templates[i], &templates[j])? <= MAX_MEAN_COSINE);
            }
        }
    }
    let gauss = Normal::new(0.0, cfg.noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut samples = Vec::with_capacity(cfg.num_classes * cfg.samples_per_class);
    for _ in 0..cfg.samples_per_class {
        for (label, template) in templates.iter().enumerate() {
            let input = match cfg.kind {
                DatasetKind::SyntheticClusters => template
                    .iter()
                    .map(|m| {
                        if cfg.noise > 0.0 {
                            m + gauss.sample(&mut rng)
                        } else {
                            *m
                        }
                    })
                    .collect(),
                DatasetKind::ToyDigits => {
                    let scale = if cfg.brightness_jitter > 0.0 {
                        1.0 - rng.random_range(0.0..cfg.brightness_jitter)
                    } else {
                        1.0
                    };
                    template
                        .iter()
                        .map(|&p| {
                            let flipped = cfg.noise > 0.0 && rng.random_bool(cfg.noise);
                            let p = if flipped { 1.0 - p } else { p };
                            p * scale
                        })
                        .collect()
                }
            };
            samples.push(Sample { input, label });
        }
    }
    Ok(samples)
}
