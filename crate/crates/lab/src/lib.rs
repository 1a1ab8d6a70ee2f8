//! Experiment runtime for the KP-I control toolkit: configuration, engines
//! for every experiment kind, the frequency-localized and weak
//! observability scans, and the run manifest.

pub mod config;
pub mod engines;
pub mod error;
pub mod runner;
pub mod scan;
pub mod table;

pub use config::{Config, OutputFormat};
pub use error::{LabError, Result};
pub use runner::{run, RunOptions};
