//! File formats, configuration and the end-to-end pipeline.

pub mod config;
pub mod csv;
pub mod pipeline;
pub mod plots;
pub mod report;

pub use config::PipelineConfig;
pub use pipeline::{run_on, run_pipeline};
pub use report::PeakReport;
