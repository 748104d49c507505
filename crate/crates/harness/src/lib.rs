//! Experiment plumbing around `smc-chatter`.
//!
//! * [`config`]: declarative experiment files and their content hash
//! * [`experiment`]: one simulate/measure/predict/compare run
//! * [`tables`]: the constant and sinusoidal bias batteries
//! * [`sweep`]: total-deviation frequency sweeps
//! * [`acceptance`]: the acceptance criteria used by `smc check`

// `!(x > 0)` is used on purpose so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod sweep;
pub mod tables;

pub use config::{content_hash, ExperimentSpec, PredictionKind, Tolerances};
pub use error::HarnessError;
pub use experiment::{run_experiment, run_experiment_detailed, ExperimentOutcome};
pub use report::{ComparisonReport, QuantityComparison, ValidityFlags, Verdict};
pub use sweep::{default_horizon, sweep, write_sweep_csv, SweepPoint, SweepRequest};
pub use tables::{reproduce_table, TableId, TableReport, TableRow};
