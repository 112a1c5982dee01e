use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no classes found under {0}")]
    NoClasses(PathBuf),

    #[error("cannot decode image {path}: {message}")]
    ImageDecode { path: PathBuf, message: String },

    #[error("cannot encode image {path}: {message}")]
    ImageEncode { path: PathBuf, message: String },

    #[error("image {path} is {found:?} but the dataset is {expected:?} (height, width); pass a resize directive")]
    MixedDimensions {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("class '{class}' has {count} samples; at least 3 are required to split")]
    ClassTooSmall { class: String, count: usize },

    #[error("unrecognized embedding file")]
    UnrecognizedEmbedding,

    #[error("unrecognized model checkpoint")]
    UnrecognizedCheckpoint,

    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("invalid feature set: {0}")]
    InvalidFeatures(String),

    #[error("need at least k+1 support points (k = {k}, rows = {rows})")]
    TooFewSupportPoints { k: usize, rows: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance undefined for {rows} row(s); need at least 2")]
    CovarianceUndefined { rows: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("symmetric eigendecomposition did not converge")]
    EigenNonConvergence,

    #[error("ssim needs equally sized images at least {window}x{window}; got {a:?} and {b:?}")]
    SsimShape {
        window: usize,
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },

    #[error("synthetic set has {available} images but q = {requested}; use --q {available} or smaller")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("architecture error: {0}")]
    Architecture(String),

    #[error("class index {index} out of range for {classes} classes")]
    ClassIndex { index: usize, classes: usize },

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    TrainingDiverged { epoch: usize },

    #[error("generator command failed ({status}): {output}")]
    GeneratorFailed { status: String, output: String },

    #[error("expected {expected} generated samples, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("synthetic pool too small for class '{class}': required {required}, available {available}")]
    InsufficientPool {
        class: String,
        required: usize,
        available: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
