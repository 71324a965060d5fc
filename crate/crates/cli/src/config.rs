//! Experiment configuration: a TOML file merged with command-line flags.
//!
//! | key          | default                  | meaning                                   |
//! |--------------|--------------------------|-------------------------------------------|
//! | `command`    | (required)               | suite to run                              |
//! | `nodes`      | 64; 128 for John-type checks and the weight law | trapezoid nodes |
//! | `h`          | 1e-3                     | finite-difference step                    |
//! | `richardson` | true                     | Richardson extrapolation of FD stencils   |
//! | `tolerances` | see [`DEFAULT_TOLERANCES`] | per-check tolerance overrides           |
//! | `seed`       | 0                        | seed for every random draw                |
//! | `max_degree` | 4                        | largest harmonic degree in the basis      |
//! | `connection` | `flagship-u1`            | connection preset for instanton suites    |
//! | `output`     | stdout                   | report path                               |
//! | `format`     | `json`                   | `json` or `csv`                           |
//! | `points`     | 10; weight law 20, moments 5, geometry 100 | samples per check |
//! | `n_frames`   | 120                      | frames for reconstruct / injectivity      |
//! | `noise`      | 0                        | Gaussian noise added to reconstruct data  |
//! | `a`, `b`     | `1,0,i,0`, `i,0,1,0`     | elementary-state covectors                |
//! | `design_output` | none                  | write the design matrix CSV here          |
//! | `threads`    | all cores                | worker threads                            |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

pub const COMMANDS: [&str; 12] = [
    "verify-john",
    "verify-weight-law",
    "verify-equivariance",
    "verify-moments",
    "verify-selfdual",
    "verify-gauge",
    "verify-coupled-box",
    "penrose-elementary",
    "geometry-roundtrip",
    "reconstruct",
    "injectivity",
    "export-basis",
];

pub const DEFAULT_TOLERANCES: [(&str, f64); 18] = [
    ("john_residual", 1e-6),
    ("weight_law_residual", 1e-9),
    ("equivariance_residual", 1e-9),
    ("moment_residual", 1e-6),
    ("selfdual_residual", 1e-10),
    ("hodge_involution", 1e-14),
    ("gauge_invariance", 1e-8),
    ("gauge_covariance", 1e-6),
    ("coupled_box_value", 1e-6),
    ("coupled_box_flat", 1e-10),
    ("elementary_value", 1e-12),
    ("residue_spread", 1e-8),
    ("mu_round_trip", 1e-12),
    ("chart_round_trip", 1e-12),
    ("plucker_quadric", 1e-12),
    ("relative_error", 1e-6),
    ("flagship_closed_form", 1e-10),
    ("pole_margin", 1e-3),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Raw values as they appear in a config file or on the command line.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<String>,
    pub nodes: Option<usize>,
    pub h: Option<f64>,
    pub richardson: Option<bool>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub max_degree: Option<u32>,
    pub connection: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub points: Option<usize>,
    pub n_frames: Option<usize>,
    pub noise: Option<f64>,
    pub a: Option<String>,
    pub b: Option<String>,
    pub design_output: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Values set in `over` win.
    pub fn merge(mut self, over: PartialConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            command,
            nodes,
            h,
            richardson,
            seed,
            max_degree,
            connection,
            output,
            format,
            points,
            n_frames,
            noise,
            a,
            b,
            design_output,
            threads
        );
        self.tolerances.extend(over.tolerances);
        self
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Validated configuration with every default filled in.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub nodes: usize,
    pub h: f64,
    pub richardson: bool,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub max_degree: u32,
    pub connection: String,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub points: usize,
    pub n_frames: usize,
    pub noise: f64,
    pub a: String,
    pub b: String,
    pub design_output: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Suites that differentiate a transform numerically, plus the weight law,
/// whose 1e-9 tolerance leaves no room for 64-node quadrature error on
/// sheared frames.
pub fn uses_fine_quadrature(command: &str) -> bool {
    matches!(
        command,
        "verify-john" | "verify-moments" | "penrose-elementary" | "verify-weight-law"
    )
}

pub fn default_points(command: &str) -> usize {
    match command {
        "verify-weight-law" => 20,
        "verify-moments" => 5,
        "geometry-roundtrip" => 100,
        _ => 10,
    }
}

impl ExperimentConfig {
    pub fn resolve(p: PartialConfig) -> Result<Self, ConfigError> {
        let command = p.command.ok_or_else(|| ConfigError("no command given".into()))?;
        if !COMMANDS.contains(&command.as_str()) {
            return Err(ConfigError(format!(
                "unknown command {command:?}; expected one of {}",
                COMMANDS.join(", ")
            )));
        }
        let mut tolerances: BTreeMap<String, f64> =
            DEFAULT_TOLERANCES.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        for (k, v) in p.tolerances {
            if !tolerances.contains_key(&k) {
                return Err(ConfigError(format!("unknown tolerance {k:?}")));
            }
            tolerances.insert(k, v);
        }
        if let Some((k, v)) = tolerances.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(ConfigError(format!("tolerance {k} must be positive, got {v}")));
        }
        let nodes = p.nodes.unwrap_or(if uses_fine_quadrature(&command) { 128 } else { 64 });
        if nodes < 4 {
            return Err(ConfigError(format!("nodes must be at least 4, got {nodes}")));
        }
        let h = p.h.unwrap_or(1e-3);
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError(format!("h must be positive, got {h}")));
        }
        let max_degree = p.max_degree.unwrap_or(4);
        if max_degree % 2 == 1 {
            return Err(ConfigError(format!("max_degree must be even, got {max_degree}")));
        }
        let noise = p.noise.unwrap_or(0.0);
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(ConfigError(format!("noise must be non-negative, got {noise}")));
        }
        let points = p.points.unwrap_or_else(|| default_points(&command));
        if points == 0 {
            return Err(ConfigError("points must be at least 1".into()));
        }
        if p.threads == Some(0) {
            return Err(ConfigError("threads must be at least 1".into()));
        }
        Ok(Self {
            command,
            nodes,
            h,
            richardson: p.richardson.unwrap_or(true),
            tolerances,
            seed: p.seed.unwrap_or(0),
            max_degree,
            connection: p.connection.unwrap_or_else(|| "flagship-u1".into()),
            output: p.output,
            format: p.format.unwrap_or(Format::Json),
            points,
            n_frames: p.n_frames.unwrap_or(120),
            noise,
            a: p.a.unwrap_or_else(|| "1,0,i,0".into()),
            b: p.b.unwrap_or_else(|| "i,0,1,0".into()),
            design_output: p.design_output,
            threads: p.threads,
        })
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}
