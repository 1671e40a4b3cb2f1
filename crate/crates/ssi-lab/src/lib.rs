//! Numerical laboratory for one-pass SGD on sequence single-index (SSI) targets.
//!
//! An SSI target maps a token sequence `X ∈ R^{L×d}` to a label through the
//! `L` scalar projections `X·w*` onto a single hidden direction, generalizing
//! classical single-index models to sequential inputs. The trained models are
//! a single-layer tied attention head (key = query = `X·w`, identity values,
//! fixed reduction map) and tied/untied generalized-linear benchmark networks.
//!
//! The crate provides the pieces needed to study the training dynamics of
//! these models at desk scale:
//!
//! - [`hermite`]: probabilists' Hermite polynomials, Hermite tensors (dense
//!   and orthogonally decomposable), coefficient extraction by quadrature and
//!   the *sequence information exponent* (SIE) of a target.
//! - [`quadrature`]: Gauss-Hermite rules and multivariate Gaussian
//!   expectations by tensor-product quadrature with a Cholesky change of
//!   variables, plus a Monte Carlo cross-check.
//! - [`models`]: sequence sampling, positional encodings, reduction maps,
//!   forward passes and sufficient statistics `(e, m)`.
//! - [`sgd`]: spherical one-pass SGD with weak-recovery detection, gain
//!   measurement and learning-rate policies.
//! - [`flow`]: the deterministic sufficient-statistics flow (drift series,
//!   gradient-norm correction, RK4 integration, hitting times).
//! - [`landscape`]: the population loss `R(e, m)`, origin gradient/Hessian
//!   analysis, minima census on the stat sphere and the positional/semantic
//!   phase classification.
//! - [`harness`]: declarative experiment configs, deterministic seeded
//!   sweeps, persisted run records and tidy CSV/JSON emission.
//!
//! Every run is deterministic given its seed; experiment outputs are
//! bytewise reproducible. See the `examples/` directory for one runnable
//! example per capability and the `ssi-lab` binary for the experiment CLI.

pub mod error;
pub mod flow;
pub mod harness;
pub mod hermite;
pub mod landscape;
pub(crate) mod linalg;
pub mod models;
pub mod quadrature;
pub mod sgd;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
