//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by the numerical routines and the experiment harness.
#[derive(Error, Debug)]
pub enum Error {
    /// Array shapes or dimensions do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// A resource guard (grid size, tensor size) was exceeded.
    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),

    /// Covariance failed to factor even after the jitter policy.
    #[error("covariance not positive semi-definite: {0}")]
    NotPsd(String),

    /// An invariant required at construction does not hold.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A learning-rate policy degenerated (zero drift coefficient).
    #[error("degenerate learning-rate policy: {0}")]
    DegeneratePolicy(String),

    /// Spherical update produced a zero vector (pathological step size).
    #[error("spherical step produced a zero vector at step {step}")]
    ZeroUpdate { step: u64 },

    /// Iterative solver did not converge; the best estimate is attached.
    #[error("iteration failed to converge (best estimate {estimate})")]
    NoConvergence { estimate: f64 },

    /// Experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem or serialization failure in the harness.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure in the harness.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
