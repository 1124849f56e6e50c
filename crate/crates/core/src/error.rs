//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input (non-bijective generator, malformed file,
    /// index out of range, inconsistent data).
    #[error("malformed input: {0}")]
    MalformedInput(String),

    /// A configured resource cap was exceeded (group size, scheme parameter).
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// Matrix dimensions do not match the expected shape.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation received arguments outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric routine failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A caller-side contract was violated (e.g. non-Hermitian input to a
    /// Hermitian routine).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Random sampling kept producing degenerate spectra.
    #[error("degenerate random sample after {attempts} attempts: {detail}")]
    DegenerateSample { attempts: usize, detail: String },

    /// A computed quantity failed an algebraic identity check.
    #[error("verification failed: {check} residual {residual:.3e} exceeds {tolerance:.3e}")]
    Verification {
        check: String,
        residual: f64,
        tolerance: f64,
    },

    /// SDP data is not invariant under the group.
    #[error("data not invariant under the group: distance {distance:.3e} (tolerance {tolerance:.3e})")]
    NotInvariant { distance: f64, tolerance: f64 },

    /// Exact arithmetic produced an internally inconsistent value.
    #[error("exact arithmetic inconsistency: {0}")]
    ExactInconsistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
