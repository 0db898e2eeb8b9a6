//! Experiment harness for sensor-collaboration designs: seeded sweeps over correlation,
//! energy and collaboration radius, convergence traces and timing fits, written as CSV.

pub mod config;
pub mod error;
pub mod output;
pub mod scenario;

pub use config::{Algorithm, ExperimentConfig, Scenario};
pub use error::{CliError, CliResult};
pub use output::write_outputs;
pub use scenario::{run_point, run_scenario, GrowthFit, ResultRow, ScenarioOutput, TraceRecord};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod guide {}
