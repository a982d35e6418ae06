//! Experiment harness for online label shift adaptation.
//!
//! Builds on [`olas_core`] with file formats (TOML run configs, CSV datasets
//! and outputs), the multi-seed runner, run diagnostics, and the
//! independent oracles in [`verify`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod output;
pub mod verify;

pub use config::{AlgorithmId, RunConfig};
pub use error::{HarnessError, Result};
pub use harness::{
    average_error, dynamic_regret_diagnostic, prepare_offline, run_experiment, run_online, run_seeds,
    OfflinePhase, RoundRecord, RunResult, RunSummary,
};
pub use olas_core;
