//! Configuration parsing, run manifests and CSV/JSON emission.

mod config;
mod output;

pub use config::{parse_angle, ConfigError, ConfigSource, RunConfig, KNOWN_KEYS};
pub use output::{
    write_profile, write_series, write_spectrum, write_sweep, RunManifest, SweepSummary,
};
