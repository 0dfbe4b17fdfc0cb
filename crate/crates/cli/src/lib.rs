//! Experiment harness for localized sum-of-norms clustering.
//!
//! The binary is a thin argument parser over the commands in [`experiments`];
//! tests call the same functions directly.

pub mod calibrate;
pub mod config;
pub mod experiments;
pub mod table;

pub use config::{ExperimentConfig, GammaRule};
pub use experiments::Outcome;

/// Exit status when a command ran but some bound check failed.
pub const EXIT_BOUND_VIOLATION: i32 = 2;
/// Exit status for usage, input and I/O errors.
pub const EXIT_ERROR: i32 = 1;

/// Process exit status for a finished command.
pub fn exit_status(outcome: &Outcome) -> i32 {
    if outcome.violations > 0 {
        EXIT_BOUND_VIOLATION
    } else {
        0
    }
}
