use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the geometry, subspace and estimation stages.
///
/// Estimator failures (`UnderResolved`, `AmbiguousDealias`, `ParallelBearings`,
/// ...) are ordinary outcomes at low SNR; the Monte-Carlo harness records them
/// as misses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("target coincides with the reference element of ULA {ula}")]
    CoincidentTarget { ula: usize },
    #[error("pencil parameter L = {pencil} out of range for {len} samples")]
    PencilOutOfRange { pencil: usize, len: usize },
    #[error("model order K = {order} not identifiable (max {max})")]
    InvalidOrder { order: usize, max: usize },
    #[error("input length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("angle grid is empty")]
    EmptyGrid,
    #[error("spectra are sampled on different grids")]
    GridMismatch,
    #[error("noise subspace is empty")]
    EmptyNoiseSubspace,
    #[error("spectrum has {found} local maxima, {wanted} requested")]
    UnderResolved { found: usize, wanted: usize },
    #[error("least-squares system is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("eigenvector basis is singular")]
    SingularEigenbasis,
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
    #[error("dealiasing is ambiguous for source {source_index} (margin {margin:e})")]
    AmbiguousDealias { source_index: usize, margin: f64 },
    #[error("bearing lines are nearly parallel (|d1 x d2| = {cross:e})")]
    ParallelBearings { cross: f64 },
    #[error("bearing intersection lies behind the array")]
    BehindArray,
    #[error("DOA list is empty")]
    EmptyDoaList,
    #[error("per-ULA DOA lists differ in length ({first} vs {second})")]
    UnequalDoaLists { first: usize, second: usize },
}
