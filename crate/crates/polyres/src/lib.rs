//! Experiment harness around `polyres-core`: JSON configs, the open-loop
//! and closed-loop experiments, CSV/JSON/SVG output and the `polyres` CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
mod error;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod readout_file;
pub mod summary;

pub use config::{ExperimentConfig, Mode, SystemKind};
pub use error::{HarnessError, Result};
pub use experiment::{run_closed_loop, run_open_loop, ResultRow};
