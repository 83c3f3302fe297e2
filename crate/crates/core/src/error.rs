use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("cannot rescale a matrix whose spectral radius is zero")]
    ZeroSpectralRadius,
    #[error("normal equations are rank deficient (pivot {pivot} at column {column}); use beta > 0")]
    RankDeficient { column: usize, pivot: f64 },
    #[error("integration produced a non-finite state")]
    BlowUp,
    #[error("closed loop diverged at step {step} (|output| = {magnitude})")]
    Diverged { step: usize, magnitude: f64 },
    #[error("histograms have different binning")]
    BinningMismatch,
}
