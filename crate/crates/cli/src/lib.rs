//! Verification harness over the `split-xray` library.

pub mod config;
pub mod report;
pub mod suites;

use config::ExperimentConfig;
use report::Report;

/// Runs the configured suite. Library errors here are precondition
/// failures (bad input, too few frames, poles on the contour), not check
/// failures; a failing check is reported through `Report::pass`.
pub fn run(config: &ExperimentConfig) -> split_xray::Result<Report> {
    let outcome = suites::run_suite(config)?;
    Ok(Report::new(config, outcome.checks, outcome.metrics))
}
