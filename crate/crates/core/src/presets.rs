//! Named novelty-threshold presets.
//!
//! The `resnet-*` grids list the thresholds tried for each block of a
//! 44-layer residual network on CIFAR-10 (CN1, CL1-3, FC), and `cpl-set1`
//! through `cpl-set7` the per-block thresholds used for consistency scoring
//! on that network. The `toy-*` presets are the settings of the built-in demo.

use serde::Serialize;

/// A named set of thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "thetas", rename_all = "kebab-case")]
pub enum ThetaPreset {
    /// Alternative thresholds for a single layer.
    Grid(&'static [f64]),
    /// One threshold per layer, in layer order.
    PerLayer(&'static [f64]),
}

impl ThetaPreset {
    pub fn thetas(&self) -> &'static [f64] {
        match self {
            ThetaPreset::Grid(t) | ThetaPreset::PerLayer(t) => t,
        }
    }
}

pub const UNIT_GRID: &[f64] = &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub const RESNET_CN1_GRID: &[f64] = &[0.18, 0.2, 0.22, 0.24, 0.26, 0.3, 0.32, 0.34];
pub const RESNET_CL1_GRID: &[f64] = &[0.64, 0.66, 0.68, 0.7, 0.72, 0.74, 0.76, 0.78];
pub const RESNET_CL2_GRID: &[f64] = &[0.48, 0.5, 0.52, 0.54, 0.56, 0.58, 0.6, 0.62];
pub const RESNET_CL3_GRID: &[f64] = &[0.5, 0.52, 0.54, 0.56, 0.58, 0.6, 0.62, 0.64];
pub const RESNET_FC_GRID: &[f64] = &[0.8, 0.82, 0.84, 0.86, 0.88, 0.9, 0.92, 0.94];

/// Per-block thresholds (CN1, CL1, CL2, CL3, FC) for consistency scoring.
pub const CPL_SETS: [&[f64]; 7] = [
    &[0.24, 0.72, 0.58, 0.62, 0.94],
    &[0.26, 0.72, 0.56, 0.58, 0.88],
    &[0.3, 0.74, 0.58, 0.6, 0.9],
    &[0.32, 0.76, 0.6, 0.62, 0.92],
    &[0.34, 0.78, 0.62, 0.64, 0.94],
    &[0.26, 0.72, 0.6, 0.62, 0.92],
    &[0.26, 0.72, 0.62, 0.64, 0.94],
];

/// Thresholds used for the confusion matrices of a LeNet-style network.
pub const CNN_CONFUSION: &[f64] = &[0.65, 0.75];

/// Thresholds shared by every layer when comparing per-layer accuracy in the
/// demo.
pub const TOY_ACCURACY_GRID: &[f64] = &[0.5, 0.6, 0.7, 0.8];

/// Demo thresholds for confusion matrices. Patterns of the small demo network
/// are more alike than those of a convolutional network, so the thresholds
/// sit higher than [`CNN_CONFUSION`].
pub const TOY_CONFUSION: &[f64] = &[0.9, 0.95];

/// Demo thresholds for (hidden 1, hidden 2, logits) when scoring consistency.
pub const TOY_CPL: &[f64] = &[0.93, 0.97, 0.97];

const NAMED: &[(&str, ThetaPreset)] = &[
    ("unit-grid", ThetaPreset::Grid(UNIT_GRID)),
    ("resnet-cn1-grid", ThetaPreset::Grid(RESNET_CN1_GRID)),
    ("resnet-cl1-grid", ThetaPreset::Grid(RESNET_CL1_GRID)),
    ("resnet-cl2-grid", ThetaPreset::Grid(RESNET_CL2_GRID)),
    ("resnet-cl3-grid", ThetaPreset::Grid(RESNET_CL3_GRID)),
    ("resnet-fc-grid", ThetaPreset::Grid(RESNET_FC_GRID)),
    ("cpl-set1", ThetaPreset::PerLayer(CPL_SETS[0])),
    ("cpl-set2", ThetaPreset::PerLayer(CPL_SETS[1])),
    ("cpl-set3", ThetaPreset::PerLayer(CPL_SETS[2])),
    ("cpl-set4", ThetaPreset::PerLayer(CPL_SETS[3])),
    ("cpl-set5", ThetaPreset::PerLayer(CPL_SETS[4])),
    ("cpl-set6", ThetaPreset::PerLayer(CPL_SETS[5])),
    ("cpl-set7", ThetaPreset::PerLayer(CPL_SETS[6])),
    ("cnn-confusion", ThetaPreset::Grid(CNN_CONFUSION)),
    ("toy-accuracy-grid", ThetaPreset::Grid(TOY_ACCURACY_GRID)),
    ("toy-confusion", ThetaPreset::Grid(TOY_CONFUSION)),
    ("toy-cpl", ThetaPreset::PerLayer(TOY_CPL)),
];

pub fn preset(name: &str) -> Option<ThetaPreset> {
    NAMED.iter().find(|(n, _)| *n == name).map(|(_, p)| *p)
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    NAMED.iter().map(|(n, _)| *n)
}
