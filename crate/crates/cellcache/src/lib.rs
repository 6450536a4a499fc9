//! Scenario files, reports, sweeps and the command line of the cellcache
//! simulator. The algorithms live in `cellcache-core`.

pub mod chart;
pub mod config;
pub mod oracle;
pub mod report;
pub mod sweep;

pub use config::{load_config, parse_config, ConfigError, Profile};
pub use sweep::{run_sweep, Axis, SweepResult, SweepSpec};
