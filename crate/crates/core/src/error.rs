use thiserror::Error;

/// Errors raised by form operations, media construction, solvers and probes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rank overflow: rank {rank} exceeds dimension {dim}")]
    RankOverflow { rank: usize, dim: usize },
    #[error("rank underflow: operation needs rank >= 1, got {rank}")]
    RankUnderflow { rank: usize },
    #[error("rank mismatch: expected {expected}, got {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid multi-index {indices:?} for dimension {dim}")]
    InvalidMultiIndex { indices: Vec<usize>, dim: usize },
    #[error("operation requires a periodic grid")]
    NonPeriodic,
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("transformation not symmetric at node {node}: |A - A^T| = {asymmetry:e}")]
    NotSymmetric { node: usize, asymmetry: f64 },
    #[error("transformation not positive definite at node {node}: smallest Rayleigh quotient {rayleigh:e}")]
    NotPositive { node: usize, rayleigh: f64 },
    #[error("singular block at node {node}")]
    Singular { node: usize },
    #[error("step {step} is not a multiple of the grid spacing {spacing}")]
    NotGridAligned { step: f64, spacing: f64 },
    #[error("shift along the normal axis is not defined on a half-space field")]
    NormalAxisShift,
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("input is not closed: relative residual {residual:e}")]
    NotClosed { residual: f64 },
    #[error("input is not co-closed: relative residual {residual:e}")]
    NotCoclosed { residual: f64 },
    #[error("input has a nonzero mean mode: relative size {residual:e}")]
    NonzeroMean { residual: f64 },
    #[error("tangential trace does not vanish: |gamma_t E| = {trace_norm:e}, |E| = {norm:e}")]
    TraceNotZero { trace_norm: f64, norm: f64 },
    #[error("support extends too close to the box edge: {0}")]
    SupportTooLarge(String),
    #[error("sign bookkeeping self-check failed: residual {residual:e}")]
    SignSelfCheck { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
