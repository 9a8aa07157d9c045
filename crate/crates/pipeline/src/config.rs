//! Run configuration: a TOML sidecar merged with command-line overrides.

use std::path::{Path, PathBuf};

use orgscope_core::VolumeMeta;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Environment variable consulted when no thread count is configured.
pub const THREADS_ENV: &str = "ORGSCOPE_THREADS";

pub const DEFAULT_MULTIMESH_FEATURES: [&str; 4] = [
    "thickness_raw",
    "intensity_raw_mean",
    "lin_vel_mag_raw_mean",
    "ang_vel_mag_raw_mean",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Axis order of the input stack, drawn from `T`, `C`, `Z`, `Y`, `X` and
    /// ending in `YX`.
    pub dim_order: String,
    pub spacing_x: Option<f64>,
    /// Defaults to `spacing_x`.
    pub spacing_y: Option<f64>,
    pub spacing_z: Option<f64>,
    pub dt: f64,
    /// Channel to analyse when the input has a `C` axis.
    pub channel: usize,
    /// Axis lengths for stacks with both `T` and `Z` when the file does not
    /// record them.
    pub size_z: Option<usize>,
    pub size_c: Option<usize>,
    pub max_speed_um_s: f64,
    pub min_peak_dist_um: Option<f64>,
    pub chunk_size: usize,
    pub threads: Option<usize>,
    pub multimesh_features: Vec<String>,
    pub jsonl: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::new(),
            output: PathBuf::new(),
            dim_order: "TZYX".into(),
            spacing_x: None,
            spacing_y: None,
            spacing_z: None,
            dt: 1.0,
            channel: 0,
            size_z: None,
            size_c: None,
            max_speed_um_s: 1.0,
            min_peak_dist_um: None,
            chunk_size: 1_000_000,
            threads: None,
            multimesh_features: DEFAULT_MULTIMESH_FEATURES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            jsonl: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
        toml::from_str(&text).map_err(|e| PipelineError::format(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Axis order with the channel axis removed.
    pub fn spatial_dim_order(&self) -> String {
        self.dim_order
            .to_ascii_uppercase()
            .chars()
            .filter(|&c| c != 'C')
            .collect()
    }

    pub fn meta(&self) -> Result<VolumeMeta> {
        let order = self.dim_order.to_ascii_uppercase();
        if let Some(bad) = order.chars().find(|c| !"TCZYX".contains(*c)) {
            return Err(PipelineError::Config(format!(
                "unknown axis '{bad}' in dim_order {order}"
            )));
        }
        if !order.ends_with("YX") {
            return Err(PipelineError::Config(format!(
                "dim_order {order} must end with YX"
            )));
        }
        if order.matches('C').count() > 1 {
            return Err(PipelineError::Config("repeated axis C in dim_order".into()));
        }
        let sx = self
            .spacing_x
            .ok_or_else(|| PipelineError::Config("spacing_x is required".into()))?;
        let sy = self.spacing_y.unwrap_or(sx);
        let is_3d = order.contains('Z');
        let sz = match (is_3d, self.spacing_z) {
            (true, Some(z)) => z,
            (true, None) => {
                return Err(PipelineError::Config(
                    "spacing_z is required for volumetric input".into(),
                ))
            }
            (false, _) => sx,
        };
        Ok(VolumeMeta::new(
            &self.spatial_dim_order(),
            sx,
            sy,
            sz,
            self.dt,
        )?)
    }

    pub fn validate(&self) -> Result<VolumeMeta> {
        if self.input.as_os_str().is_empty() {
            return Err(PipelineError::Config("input path is required".into()));
        }
        if self.output.as_os_str().is_empty() {
            return Err(PipelineError::Config("output path is required".into()));
        }
        if !(self.max_speed_um_s.is_finite() && self.max_speed_um_s > 0.0) {
            return Err(PipelineError::Config(format!(
                "max_speed_um_s must be > 0, got {}",
                self.max_speed_um_s
            )));
        }
        if self.chunk_size == 0 {
            return Err(PipelineError::Config("chunk_size must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(PipelineError::Config("threads must be >= 1".into()));
        }
        if let Some(d) = self.min_peak_dist_um {
            if !(d.is_finite() && d >= 0.0) {
                return Err(PipelineError::Config(format!(
                    "min_peak_dist_um must be >= 0, got {d}"
                )));
            }
        }
        self.meta()
    }

    /// Configured thread count, else the environment override, else rayon's
    /// default.
    pub fn effective_threads(&self) -> Result<Option<usize>> {
        if self.threads.is_some() {
            return Ok(self.threads);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(PipelineError::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                ))),
            },
            Err(_) => Ok(None),
        }
    }

    /// Largest displacement a structure can make in one frame interval.
    pub fn max_step_um(&self) -> f64 {
        self.max_speed_um_s * self.dt
    }
}
