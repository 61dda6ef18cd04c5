//! Command-line front end: scenario files in, CSV and JSON out.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{parse_config, ScenarioConfig};
pub use run::{run, RunError};
