use thiserror::Error;

/// Errors raised by the codebook toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Q ≥ M: the codebook would need at least as many sounding beams as antennas.
    #[error("infeasible configuration: {q} beams for {m} antennas (need Q < M)")]
    Infeasible { q: usize, m: usize },

    #[error("vector norm {norm} is not unit (tolerance {tol})")]
    NotUnitNorm { norm: f64, tol: f64 },

    #[error("beam index ({q}, {p}) out of range for a {q_h}x{q_v} codebook")]
    IndexOutOfRange {
        q: usize,
        p: usize,
        q_h: usize,
        q_v: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("target is orthogonal to the analog subspace; baseband solve is degenerate")]
    DegenerateBaseband,

    #[error("zero-norm combination in {0}")]
    ZeroNorm(&'static str),

    #[error("candidate sweep is empty")]
    EmptySweep,

    #[error("codebook is empty")]
    EmptyCodebook,

    #[error("malformed codebook file at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
