//! Experiment driver: dispatches a parsed [`ExperimentConfig`] to the
//! pipelines in `rdl_core` and renders a deterministic [`RunReport`].

mod config;
mod run;

pub use config::{Command, EndToEndOracle, ExperimentConfig, ForwardOracle, ReverseOracle};
pub use run::{exit_code, gen_instance, run, RunReport, Timing};
