//! Library half of the batch front end: configuration schema, CSV
//! emitters, and scenario runners. The `qboost` binary is a thin shell
//! over these.

pub mod config;
pub mod emit;
pub mod scenarios;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "QBOOST_OUT_DIR";
