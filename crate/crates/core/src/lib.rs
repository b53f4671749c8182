//! Toggle-to-power modeling toolkit: select a sparse set of signal proxies
//! whose toggle activity explains a per-cycle power trace, relax the
//! selected weights with a weak ridge, and quantize the result into a
//! fixed-point on-chip power meter that reports windowed averages.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`trace`]: toggle matrices, signal catalogs, power traces, and the
//!   VCD / packed-binary ingestion paths.
//! - [`syngen`]: seeded synthetic designs and workloads with clustered,
//!   correlated toggle activity for benchmarking.
//! - [`solver`]: nonnegative coordinate descent under a concave (or L1)
//!   sparsity penalty, plus the penalty-strength search and ridge refits.
//! - [`model`]: screening, training, per-cycle and windowed inference,
//!   evaluation, and model (de)serialization.
//! - [`opm`]: weight quantization and the bit-exact integer datapath
//!   simulation of the meter.
//! - [`metrics`]: error and collinearity measures shared by reports.

pub mod error;
pub mod metrics;
pub mod model;
pub mod opm;
pub mod solver;
pub mod syngen;
pub mod trace;

pub use error::{Error, Result};

/// Crate version, recorded in trained model metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
