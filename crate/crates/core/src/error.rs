use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("unsupported sample type {0}")]
    UnsupportedDtype(u8),

    #[error("truncated payload: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },

    #[error("zero dimension ({0})")]
    ZeroDimension(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cube is already normalized")]
    AlreadyNormalized,

    #[error("cube carries no normalization metadata")]
    MissingNormalization,

    #[error("patch size {patch} exceeds band extent {rows}x{cols}")]
    PatchTooLarge { patch: usize, rows: usize, cols: usize },

    #[error("band {rows}x{cols} is smaller than the {window}x{window} window")]
    BandTooSmall { window: usize, rows: usize, cols: usize },

    #[error("spectral window of {window} bands needs more than {bands} bands")]
    WindowTooLarge { window: usize, bands: usize },

    #[error("target SNR {target_db} dB unreachable: {reason}")]
    UnreachableSnr { target_db: f64, reason: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),
}
