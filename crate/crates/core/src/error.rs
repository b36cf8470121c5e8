use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm is below the 1e-12 floor")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("input vector is empty")]
    EmptyInput,

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("library is frozen")]
    FrozenLibrary,

    #[error("library must be frozen before use")]
    NotFrozen,

    #[error("theta must lie in (0, 1], got {0}")]
    InvalidTheta(f64),

    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("record {sample_id} has no model answer")]
    MissingAnswer { sample_id: u64 },

    #[error("record {sample_id} has no true label")]
    MissingLabel { sample_id: u64 },

    #[error("score population is empty")]
    EmptyPopulation,

    #[error("sample {sample_id}: {source}")]
    Record {
        sample_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("layer {layer_id}: {source}")]
    Layer {
        layer_id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },

    #[error("file is truncated")]
    TruncatedFile,

    #[error("{0} unexpected bytes after the declared records")]
    TrailingData(usize),

    #[error("non-finite feature in record {sample_id}")]
    NonFiniteFeature { sample_id: u64 },

    #[error("label {label} in record {sample_id} out of range for {num_classes} classes")]
    LabelOutOfRange {
        sample_id: u64,
        label: i16,
        num_classes: u16,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn for_record(self, sample_id: u64) -> Self {
        Error::Record {
            sample_id,
            source: Box::new(self),
        }
    }

    pub(crate) fn for_layer(self, layer_id: usize) -> Self {
        Error::Layer {
            layer_id,
            source: Box::new(self),
        }
    }

    /// Innermost error, with record/layer annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Record { source, .. } | Error::Layer { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by numerical divergence rather than bad data.
    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::NonFiniteLoss { .. })
    }
}
