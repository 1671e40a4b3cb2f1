//! Experiment harness: declarative configs, deterministic seeded sweeps,
//! persisted run records and tidy plot-data emission.
//!
//! Every experiment is described by one [`ExperimentSpec`] (a single TOML
//! file on disk). Replica seeds derive from the base seed and run index
//! through a fixed mix, never from the clock; runs execute on a work pool
//! and finished [`records::RunRecord`]s are persisted immediately, so an
//! interrupted sweep resumes without recomputing. Emission is
//! deterministic: the same spec and seed produce bytewise-identical output
//! files regardless of worker count.

pub mod config;
pub mod emit;
pub mod experiments;
pub mod records;

pub use config::{
    ExperimentSpec, GainSpec, LandscapeSpec, OdeSpec, OutputFormat, PhaseSpec, SgdRunSpec, SieSpec,
};
pub use experiments::{run_experiment, ExperimentOutput};
pub use records::{derive_seed, spec_hash, RecordStore, RunRecord};
