//! Monte-Carlo experiment harness for the `elaa_doa` estimators: scenario
//! files, seeded trial execution, metric aggregation and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod seed;

pub use error::{HarnessError, Result};
pub use metrics::{MetricsRow, TrialOutcome};
pub use runner::{run_monte_carlo, run_trial, RunReport, TrialRecord};
pub use scenario::{builtin, builtin_scenarios, Algorithm, MetricUnit, ScenarioSpec};
