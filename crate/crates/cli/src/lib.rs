//! Benchmark harness for adaptive weighted cascade forests.
//!
//! `awdf run spec.json` executes an experiment grid and writes
//! `results.csv` and `summary.json`; `awdf single` runs one dataset under
//! one configuration.

pub mod manifest;
pub mod run;
pub mod spec;

pub use run::{execute, write_reports, Fatal, Outcome};
pub use spec::ExperimentSpec;
