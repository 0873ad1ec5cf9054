use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid robot description: {0}")]
    Robot(String),

    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("joint `{joint}` value {value} outside limits [{lower}, {upper}]")]
    JointLimit {
        joint: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("rotation is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("invalid grid parameters: {0}")]
    InvalidParams(String),

    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("index {index} out of bounds for dimension of size {size}")]
    IndexOutOfBounds { index: usize, size: usize },

    #[error("grid of {cells} cells exceeds the allocation cap of {cap}")]
    TooLarge { cells: u64, cap: u64 },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("corrupt map file: {0}")]
    Corrupt(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("map does not match model: {0}")]
    ParamMismatch(String),

    #[error("evaluation set is empty")]
    EmptyEvalSet,

    #[error("placement grid error: {0}")]
    Placement(String),

    #[error("no base position reaches any candidate")]
    NoFeasiblePlacement,

    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
