use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: tiff: {source}")]
    Tiff {
        path: PathBuf,
        source: tiff::TiffError,
    },
    #[error("{path}: csv: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact {0}; run the upstream stage first")]
    MissingArtifact(PathBuf),
    #[error(transparent)]
    Core(#[from] orgscope_core::Error),
    #[error("stage {stage}{}: {source}", frame.map(|t| format!(" (frame {t})")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        frame: Option<usize>,
        source: Box<PipelineError>,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }

    pub fn tiff(path: impl Into<PathBuf>) -> impl FnOnce(tiff::TiffError) -> Self {
        let path = path.into();
        move |source| PipelineError::Tiff { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| PipelineError::Csv { path, source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        PipelineError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Attach the stage context unless an inner call already did.
    pub fn in_stage(self, stage: &'static str, frame: Option<usize>) -> Self {
        if matches!(self, PipelineError::Stage { .. }) {
            return self;
        }
        PipelineError::Stage {
            stage,
            frame,
            source: Box::new(self),
        }
    }
}
