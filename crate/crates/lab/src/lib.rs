//! Command-line front end for `ple-core`: key=value configs, CSV and SVG
//! writers, run manifests and rayon-parallel runners.
//!
//! Every subcommand is a pure function of its resolved [`Settings`], so a
//! [`RunManifest`] that stores them reproduces the outputs byte for byte.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod svg;

pub use commands::{execute, rerun, Subcommand};
pub use config::Settings;
pub use error::{LabError, Result};
pub use manifest::RunManifest;
