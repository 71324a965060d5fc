//! Report records and their JSON / CSV encodings.
//!
//! JSON schema (keys are emitted in sorted order):
//!
//! ```text
//! {
//!   "checks":    [{"name": str, "pass": bool, "tolerance": f64, "value": f64}, ...],
//!   "command":   str,
//!   "config":    {ExperimentConfig echo},
//!   "metrics":   {str: f64},          informational values, never gate the verdict
//!   "pass":      bool,                true iff every check passes
//!   "seed":      u64,
//!   "timestamp": str,                 RFC 3339; the only non-deterministic field
//!   "version":   str
//! }
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes iff `value ≤ tolerance`; NaN fails.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub command: String,
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, f64>,
    pub pass: bool,
    pub seed: u64,
    pub timestamp: String,
    pub version: String,
}

impl Report {
    pub fn new(config: &ExperimentConfig, checks: Vec<Check>, metrics: BTreeMap<String, f64>) -> Self {
        Self {
            pass: checks.iter().all(|c| c.pass),
            checks,
            command: config.command.clone(),
            config: config.clone(),
            metrics,
            seed: config.seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Canonical JSON: keys sorted at every level.
    pub fn to_json(&self) -> serde_json::Result<String> {
        // serde_json::Map is a BTreeMap unless `preserve_order` is enabled
        let value = serde_json::to_value(self)?;
        serde_json::to_string_pretty(&value)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "value", "tolerance", "pass"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                format!("{:e}", c.value),
                format!("{:e}", c.tolerance),
                c.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
