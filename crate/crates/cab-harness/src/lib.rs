//! Experiment harness: configuration, seeded multi-run execution, parameter
//! sweeps, optimal-policy normalization, and CSV emission.
//!
//! A suite is a grid of cells (one per sweep value) × seeds × policies. Every
//! cell/seed pair regenerates the same environment instance from its seed, so
//! all policies — including the two full-information references used for
//! normalization — face identical contexts and hidden parameters. Runs are
//! independent and execute in parallel; outputs are written only after the
//! whole suite succeeds, and are byte-identical across repeated invocations.

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod csvout;
pub mod error;
pub mod figures;
pub mod runner;
pub mod seeding;

pub use aggregate::AggregateRecord;
pub use config::{ExperimentConfig, Sweep, SweepParam};
pub use error::HarnessError;
pub use runner::{run_on_instance, run_single, run_suite, RunOutput, SuiteResult};
