//! Parameter sweeps over the micromaser phase structure with CSV or NDJSON
//! output.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{parse_config, parse_with_overrides, Command, ConfigError, Format, Grid, SweepConfig, Value};
pub use output::{format_number, write_table, Cell, Table};
pub use sweep::run;

/// Exit status on success.
pub const EXIT_OK: i32 = 0;
/// Exit status when the output could not be written.
pub const EXIT_IO: i32 = 1;
/// Exit status for configuration and argument errors.
pub const EXIT_PARSE: i32 = 2;
/// Exit status when at least one value failed numerically.
pub const EXIT_NUMERIC: i32 = 3;
