use thiserror::Error;

use crate::eigensolve::SpectrumResult;

/// Errors raised across the library. Variant names follow the operation that raises them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate chart: {0}")]
    DegenerateChart(String),
    #[error("grid too coarse: axis {axis} has {nodes} nodes (need at least 4)")]
    TooCoarse { axis: usize, nodes: usize },
    #[error("pair {pair} needs axes {} and {} but the chart has dimension {dim}", 2 * pair + 1, 2 * pair + 2)]
    OddDimensionPairing { pair: usize, dim: usize },
    #[error("matrix is not skew-symmetric (max |B + Bᵀ| = {0:e})")]
    NotSkew(f64),
    #[error("operation requires a flat torus grid")]
    NotTorus,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("assembled matrix failed the Hermitian check (max deviation {0:e})")]
    NonHermitianAssembly(f64),
    #[error("shift is not a lattice vector of the magnetic translation group: {0}")]
    NonLatticeShift(String),
    #[error("flux is not quantized: {0}")]
    FluxNotQuantized(String),
    #[error("problem size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:e})")]
    NotConverged {
        iterations: usize,
        worst_residual: f64,
        best: Box<SpectrumResult>,
    },
    #[error("boundary amplitude {amplitude:e} exceeds 1e-8 at the {side} truncation")]
    BoundaryAmplitudeTooLarge { amplitude: f64, side: &'static str },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("tail bound {bound} at |m| = {edge} does not exceed the minimum {minimum}")]
    ScanRangeExhausted { edge: i64, bound: f64, minimum: f64 },
    #[error("minimax did not converge: gap {gap:e} after {iterations} iterations")]
    MinimaxNotConverged { gap: f64, iterations: usize },
    #[error("invalid quantum number: {0}")]
    InvalidQuantumNumber(String),
    #[error("unknown geometry `{0}`")]
    UnknownGeometry(String),
    #[error("lambda0 = {lambda0} exceeds c = {c} beyond tolerance {tol:e}")]
    ViolationFound { lambda0: f64, c: f64, tol: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
