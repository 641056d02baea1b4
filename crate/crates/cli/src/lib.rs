//! Configuration, presets and output writing behind the `esigma` binary.

pub mod config;
pub mod error;
pub mod presets;
pub mod run;

pub use config::{parse_toml, to_toml, Experiment, Kind};
pub use error::CliError;
pub use run::{load, render, run, Manifest, Overrides};
