//! Config parsing, command dispatch and deterministic CSV output for
//! `rmb-lab`.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use output::{fmt_real, read_csv, sha256_file, write_csv, RunManifest, Table};
pub use run::{random_smooth_patch, run, RunError, RunOptions};
