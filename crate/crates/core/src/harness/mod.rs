//! Configuration, persistence, reports and orchestration of whole experiments.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod render;
pub mod report;

pub use config::{PipelineConfig, SCHEMA_VERSION};
pub use io::{read_kspace, read_volume, write_kspace, write_volume};
pub use pipeline::{recompute_reports, run_pipeline, ReportBundle};
pub use render::render_panel;
