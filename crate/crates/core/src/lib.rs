//! Library networks: novelty-gated stores of hidden-layer activity patterns,
//! Hebbian prediction heads on top of them, and the analyses built from
//! those heads (per-layer accuracy, confusion indices, cross-layer
//! consistency and adversarial detection).
//!
//! A small self-contained classifier ([`toymodel`]) provides patterns for
//! experiments without an external framework, and [`dataio`] reads and
//! writes the binary pattern, library and head formats.

pub mod analysis;
pub mod dataio;
pub mod error;
pub mod library;
pub mod pipeline;
pub mod presets;
pub mod readout;
pub mod toymodel;
pub mod vecmath;

pub use analysis::{
    auroc, confusion_index, cpl, cpl_with_top_a, ConfusionMatrix, CplScore, RocResult,
};
pub use error::{Error, Result};
pub use library::{ActivationRecord, LibraryNetwork, LibraryResponse};
pub use readout::{train_head, train_head_default, ClassLikelihoods, PredictionHead, Target};
