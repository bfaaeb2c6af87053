//! Library backing the `fuelcast` command line: run configurations, the
//! per-command entry points, and artifact writing.
//!
//! Every command is a pure function of its config. One master seed derives
//! every sub-seed, outputs carry no timestamps, and artifacts are staged in
//! memory and committed by temp-file rename, so reruns with the same config
//! produce byte-identical files and failures leave nothing half-written.

pub mod artifacts;
pub mod commands;
pub mod config;

pub use commands::{
    run_compare, run_curve, run_describe, run_predict, run_rank, run_synth, run_train,
};
