use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("length {0} is not a triangular number")]
    NotTriangular(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("gram matrix not PD")]
    GramNotPositiveDefinite,
    #[error("observation index {got} does not follow {last}")]
    NonConsecutiveIndex { last: usize, got: usize },
    #[error("bound undefined at stationary point")]
    StationaryPoint,
    #[error("symmetric eigendecomposition failed")]
    Eigendecomposition,
    #[error("particle degeneracy at t = {0}")]
    ParticleDegeneracy(usize),
    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),
    #[error("non-positive innovation variance at t = {0}")]
    InnovationVariance(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
