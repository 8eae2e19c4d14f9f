//! Experiment driver: synthesize or load signals, simulate acquisition, fit a
//! model, encode, reconstruct, classify and report.
//!
//! Every stage is deterministic given the config. Randomness is drawn from
//! independent streams of the config seed (data, operator, fit, split).

pub mod config;
pub mod csv;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use config::{
    DataSpec, EvalSpec, ExperimentConfig, FeatureProtocol, MixtureSpec, ModelSpec, OperatorSpec, PlantedSpec,
    SyntheticSpec, SEED_ENV,
};
pub use csv::{export_csv, format_g17, to_csv};
pub use pipeline::{
    acquire, classify, encode, fit, reconstruct, report, run, run_in, synth, Split, Stage, Workspace,
};
pub use report::{min_norm_least_squares, Report, REPORT_FORMAT, REPORT_SCHEMA, VERSION};
