//! Optional JSON configuration shared by subcommands.
//!
//! Precedence, lowest to highest: built-in defaults, `--config` file values,
//! command-line flags. Every command records the fully resolved values it
//! actually used in its manifest.

use std::path::Path;

use opmeter_core::solver::Penalty;
use opmeter_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Built-in defaults for the tunables that have one.
pub mod defaults {
    pub const SEED: u64 = 1;
    pub const SIGNALS: usize = 2000;
    pub const CONTRIBUTORS: usize = 50;
    pub const CLUSTERS: usize = 100;
    pub const RHO: f64 = 0.6;
    pub const CYCLES: usize = 10_000;
    pub const NOISE: f64 = 0.02;
    pub const GAMMA: f64 = 10.0;
    pub const TAU: usize = 8;
    pub const BITS: u32 = 10;
    pub const WINDOW: usize = 16;
    pub const VALIDATION_FRAC: f64 = 0.2;
}

/// Workload shape selector (mirrors the generator profiles).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Stationary activity levels.
    Uniform,
    /// Five equal phases sweeping activity from a quarter to double.
    Diverse,
}

/// Penalty selector for the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// Concave penalty with exact-unbiasedness past its knee.
    Mcp,
    /// Plain L1.
    Lasso,
}

impl From<PenaltyKind> for Penalty {
    fn from(kind: PenaltyKind) -> Penalty {
        match kind {
            PenaltyKind::Mcp => Penalty::Mcp,
            PenaltyKind::Lasso => Penalty::Lasso,
        }
    }
}

/// Every knob a config file may set. All fields optional; flags win.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // Synthetic-design knobs.
    pub seed: Option<u64>,
    pub signals: Option<usize>,
    pub contributors: Option<usize>,
    pub clusters: Option<usize>,
    pub rho: Option<f64>,
    pub cycles: Option<usize>,
    pub profile: Option<ProfileKind>,
    pub noise: Option<f64>,
    // Training knobs.
    pub target_q: Option<usize>,
    pub slack: Option<usize>,
    pub gamma: Option<f64>,
    pub tau: Option<usize>,
    pub penalty: Option<PenaltyKind>,
    pub validation_frac: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub max_probes: Option<usize>,
    pub lambda_min_ratio: Option<f64>,
    pub ridge_ratio: Option<f64>,
    // Meter knobs.
    pub bits: Option<u32>,
    pub window: Option<usize>,
}

impl FileConfig {
    /// Load a config file, or return defaults-only when no path was given.
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::param(format!("bad config {}: {e}", path.display())))
    }
}

/// `flag.or(config).unwrap_or(default)` spelled once.
pub fn pick<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
