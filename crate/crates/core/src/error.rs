use std::path::PathBuf;

use crate::basis::BasisFamily;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },

    #[error("unsupported format version {found} (supported: {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("malformed record: {0}")]
    Malformed(String),

    #[error("index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample")]
    EmptySample,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("value {value} outside the domain")]
    OutOfDomain { value: f64 },

    #[error("degree {degree} exceeds maximum {max}")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("{family:?} is a plot-only basis and cannot be used for estimation")]
    PlotOnlyBasis { family: BasisFamily },

    #[error("index set of {count} entries exceeds the cap of {cap}")]
    TooManyIndices { count: u128, cap: usize },

    #[error("histogram of {cells} cells exceeds the cap of {cap}")]
    GridTooLarge { cells: u128, cap: usize },

    #[error("moment tensors are not compatible: {0}")]
    SpecMismatch(String),

    #[error("negative value {value} at position {position}; expected post-ReLU data")]
    NegativeValue { value: f64, position: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("dead feature: every value is zero")]
    DeadFeature,

    #[error("model assigns zero mass to the test support")]
    ZeroModelMass,

    #[error("only {live} live features available, {needed} required")]
    NotEnoughFeatures { live: usize, needed: usize },

    #[error("unsupported dimension {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
