//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weight matrix is not symmetric at ({row}, {col})")]
    AsymmetricWeights { row: usize, col: usize },

    #[error("negative edge weight {weight} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, weight: f64 },

    #[error("weight matrix has nonzero diagonal entry at vertex {vertex}")]
    NonzeroDiagonal { vertex: usize },

    #[error("graph is disconnected")]
    DisconnectedGraph,

    #[error("eigendecomposition did not converge")]
    DecompositionFailure,

    #[error("signal is in the {found:?} domain, expected {expected:?}")]
    DomainMismatch {
        expected: crate::spectral::Domain,
        found: crate::spectral::Domain,
    },

    #[error("failed to generate a connected graph after {attempts} attempts")]
    GenerationFailure { attempts: usize },

    #[error("failed to find a connected edge removal after {attempts} attempts")]
    PerturbationFailure { attempts: usize },

    #[error("smoothness level must be positive, got {0}")]
    InvalidBeta(f64),

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("Gauss-Newton normal equations are singular")]
    SingularNormalEquations,

    #[error("graph-filter design system is singular")]
    SingularFilterSystem,

    #[error("objective became non-finite ({context})")]
    NonFinite { context: String },

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("power network is disconnected")]
    DisconnectedNetwork,

    #[error("susceptance Laplacian is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e}); check the sign convention of the case data")]
    InvalidSusceptanceSign { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
