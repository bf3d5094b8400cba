//! Seeded experiment harness for the sparse Bayesian learning solvers of
//! `bethe-mp`: instance generation, sparsity sweeps written as CSV, and the
//! oracle suites behind `bethe-bench verify`.

mod error;
pub mod instance;
pub mod sweep;
pub mod verify;

pub use error::{BenchError, Result};
pub use instance::{generate_instance, Instance, InstanceSpec};
pub use sweep::{run_sweep, Solver, SolverOverrides, SweepConfig, SweepRecord};
pub use verify::{Suite, SuiteReport};
