//! File formats, configuration and stage orchestration around
//! `orgscope-core`.

pub mod config;
pub mod error;
pub mod layout;
pub mod run;
pub mod tables;
pub mod tiffio;

pub use config::RunConfig;
pub use error::{PipelineError, Result};
pub use layout::Layout;
pub use run::{run, Manifest, Stage};
