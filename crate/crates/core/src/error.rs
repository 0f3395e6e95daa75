//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("result dimension {dim} exceeds maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("non-finite entry encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("vector has zero norm, cannot normalize")]
    ZeroNorm,

    #[error("matrix is not Hermitian (deviation {deviation:.3e} > {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("trace deviates from 1 by {deviation:.3e} (tolerance {tolerance:.3e})")]
    InvalidTrace { deviation: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("Kraus family has no branches")]
    EmptyFamily,

    #[error("branch weight must be positive, got {weight}")]
    NonPositiveWeight { weight: f64 },

    #[error("Kraus family incomplete: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    IncompleteFamily { residual: f64, tolerance: f64 },

    #[error("time step too large: completion of the deterministic branch is not positive (min eigenvalue {min_eigenvalue:.3e})")]
    StepTooLarge { min_eigenvalue: f64 },

    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("surface violates light-cone slope bound at site {site}: |Δt| = {slope} > 1")]
    SurfaceSlope { site: usize, slope: i64 },

    #[error("second surface dips below the first at site {site}")]
    SurfaceOrder { site: usize },

    #[error("no Kraus assignment for cell (site {site}, time {time})")]
    MissingAssignment { site: usize, time: i64 },

    #[error("regions are not mutually spacelike: cells (site {site_a}, t {time_a}) and (site {site_b}, t {time_b}) are causally related")]
    NotSpacelike {
        site_a: usize,
        time_a: i64,
        site_b: usize,
        time_b: i64,
    },

    #[error("observable at site {site} overlaps the causal shadow of the region")]
    ObservableInShadow { site: usize },

    #[error("operator does not commute with the algebra (residual {residual:.3e})")]
    NotCommuting { residual: f64 },

    #[error("vector is not cyclic for the algebra (rank {rank} < dimension {dim})")]
    NotCyclic { rank: usize, dim: usize },

    #[error("ground state is not unique (spectral gap {gap:.3e})")]
    DegenerateGround { gap: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
