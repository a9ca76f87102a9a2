//! Scenario configuration, experiment orchestration, reports and the
//! verification suites.

pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{PairRecipe, PipelineKind, PipelineParams, ScenarioSpec};
pub use experiment::{run_experiment, run_trial, ExperimentSummary};
pub use report::{write_csv, ReportRow, CSV_SCHEMA};
pub use verify::{verify_suite, SuiteResult, SUITES};
