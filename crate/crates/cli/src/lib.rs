//! Experiment configuration, multiplex ingestion and the sweep runner behind
//! the `repsc` binary.

pub mod config;
pub mod experiment;
pub mod multiplex;
pub mod verify;

pub use config::{Algorithm, ExperimentConfig, ExperimentKind, SweepAxis};
pub use experiment::{run_experiment, write_results, ExperimentResults};
pub use multiplex::{ingest_multiplex, MultiplexSpec};
