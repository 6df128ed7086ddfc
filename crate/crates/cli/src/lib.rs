//! Command-line front end: CSV ingestion, the `fit`, `simulate` and
//! `bootstrap` commands, and their JSON/CSV reports.

pub mod commands;
pub mod error;
pub mod io;

pub use commands::{
    bootstrap_command, fit_command, simulate_command, BootstrapRequest, DataSource, FitReport, FitRequest,
    OptimizerOverrides, SimulateRequest,
};
pub use error::{CliError, CliResult};
pub use io::{read_csv, write_csv, Roles};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "TOBITM_THREADS";
