//! Pipeline, configuration and export layer behind the `gqrp-due` binary.

pub mod config;
pub mod export;
pub mod pipeline;

pub use config::RunConfig;
pub use export::{export_results, Manifest};
pub use pipeline::{run_pipeline, Overrides, PipelineOutput, RunSummary, StageError};
