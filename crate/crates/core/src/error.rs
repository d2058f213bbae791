//! Error type shared by all solver and kernel modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has {got} entries, expected {rows}x{cols}={expected}")]
    BadDimensions {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at position {index}")]
    NonFiniteEntry { index: usize },
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("rank-deficient input: smallest pivot {smallest:.3e} below {threshold:.3e}")]
    RankDeficient { smallest: f64, threshold: f64 },
    #[error("iterative SVD did not converge within {sweeps} sweeps")]
    DidNotConverge { sweeps: usize },
    #[error("input matrix is zero (no detectable span)")]
    ZeroMatrix,
    #[error("degenerate initialization: sigma_{k} = {sigma_k:.3e} below {threshold:.3e} * sigma_1")]
    DegenerateInit {
        k: usize,
        sigma_k: f64,
        threshold: f64,
    },
    #[error("index ({i},{j}) out of bounds for {m}x{n} grid")]
    IndexOutOfBounds {
        i: usize,
        j: usize,
        m: usize,
        n: usize,
    },
    #[error("columns not orthonormal: defect {defect:.3e} exceeds {tolerance:.3e}")]
    NotOrthonormal { defect: f64, tolerance: f64 },
    #[error("clipping destroyed column rank")]
    ClippedToRankDeficient,
    #[error("observation partition is empty")]
    EmptyPartition,
    #[error("trace has {records} usable records, need at least {needed}")]
    InsufficientTrace { records: usize, needed: usize },
    #[error("invalid config: {field}: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("duplicate observation at ({i},{j})")]
    DuplicateObservation { i: usize, j: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
