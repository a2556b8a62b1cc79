//! Batch pipeline around `hrsim-core`: featurize audio, run the toy
//! recogniser, score trials, fit the calibration and report.

pub mod app;
pub mod cache;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod scores;

pub use app::{run, Cli};
pub use config::{FitSplit, PipelineConfig};
pub use error::{CliError, ExitCode};
