//! Volume metadata, frames and the metadata-driven scale space.

use crate::error::{Error, Result};
use crate::grid::{Coord, Grid, Shape};

/// Smallest structure radius of interest, roughly the optical diffraction limit.
pub const MIN_RADIUS_UM: f64 = 0.20;
/// Largest structure radius of interest.
pub const MAX_RADIUS_UM: f64 = 1.0;
/// Number of scales spanning `[sigma_min, sigma_max]`.
pub const SCALE_COUNT: usize = 5;
/// Sigma increments below this (in pixels) are merged.
pub const MIN_SIGMA_STEP_PX: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMeta {
    /// Axis labels drawn from `T`, `Z`, `Y`, `X`.
    pub dim_order: String,
    pub spacing_x: f64,
    pub spacing_y: f64,
    pub spacing_z: f64,
    /// Seconds between frames.
    pub dt: f64,
    pub is_3d: bool,
}

impl VolumeMeta {
    /// Build and validate metadata. `spacing_z` is ignored for planar data.
    pub fn new(
        dim_order: &str,
        spacing_x: f64,
        spacing_y: f64,
        spacing_z: f64,
        dt: f64,
    ) -> Result<Self> {
        let dim_order = dim_order.to_ascii_uppercase();
        if let Some(bad) = dim_order.chars().find(|c| !"TZYX".contains(*c)) {
            return Err(Error::InvalidMeta(format!(
                "unknown axis '{bad}' in dim_order"
            )));
        }
        for axis in ['Y', 'X'] {
            if dim_order.matches(axis).count() != 1 {
                return Err(Error::InvalidMeta(format!(
                    "dim_order must contain exactly one {axis}"
                )));
            }
        }
        if dim_order.matches('Z').count() > 1 || dim_order.matches('T').count() > 1 {
            return Err(Error::InvalidMeta("repeated axis in dim_order".into()));
        }
        let is_3d = dim_order.contains('Z');
        let meta = VolumeMeta {
            spacing_z: if is_3d { spacing_z } else { spacing_x },
            dim_order,
            spacing_x,
            spacing_y,
            dt,
            is_3d,
        };
        meta.validate()?;
        Ok(meta)
    }

    /// Planar metadata with a single in-plane spacing.
    pub fn planar(spacing: f64, dt: f64) -> Self {
        Self::new("TYX", spacing, spacing, spacing, dt).expect("valid planar metadata")
    }

    /// Volumetric metadata with isotropic in-plane spacing.
    pub fn volumetric(spacing_xy: f64, spacing_z: f64, dt: f64) -> Self {
        Self::new("TZYX", spacing_xy, spacing_xy, spacing_z, dt).expect("valid volumetric metadata")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("spacing_x", self.spacing_x),
            ("spacing_y", self.spacing_y),
            ("spacing_z", self.spacing_z),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidMeta(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.spacing_x != self.spacing_y {
            return Err(Error::InvalidMeta(format!(
                "anisotropic in-plane spacing is unsupported (x={}, y={})",
                self.spacing_x, self.spacing_y
            )));
        }
        if self.has_time() && !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidMeta(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn has_time(&self) -> bool {
        self.dim_order.contains('T')
    }

    /// `spacing_z / spacing_x`; 1 for planar data.
    pub fn z_ratio(&self) -> f64 {
        if self.is_3d {
            self.spacing_z / self.spacing_x
        } else {
            1.0
        }
    }

    /// Per-axis voxel size in `(z, y, x)` order.
    pub fn spacing(&self) -> [f64; 3] {
        [self.spacing_z, self.spacing_y, self.spacing_x]
    }

    /// Physical position of a voxel in micrometers. Planar data sit at z = 0.
    pub fn to_um(&self, c: Coord) -> [f64; 3] {
        let s = self.spacing();
        [c[0] as f64 * s[0], c[1] as f64 * s[1], c[2] as f64 * s[2]]
    }

    /// Area of a pixel or volume of a voxel.
    pub fn voxel_size(&self) -> f64 {
        if self.is_3d {
            self.spacing_x * self.spacing_y * self.spacing_z
        } else {
            self.spacing_x * self.spacing_y
        }
    }
}

/// A single time point of scalar intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub values: Grid<f32>,
    pub meta: VolumeMeta,
}

impl Frame {
    pub fn new(values: Grid<f32>, meta: VolumeMeta) -> Result<Self> {
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame values"));
        }
        if !meta.is_3d && values.dims()[0] != 1 {
            return Err(Error::ShapeMismatch(format!(
                "planar metadata with {} z-slices",
                values.dims()[0]
            )));
        }
        Ok(Frame { values, meta })
    }

    pub fn shape(&self) -> Shape {
        self.values.shape()
    }
}

/// Ordered in-plane Gaussian sigmas plus the axial anisotropy ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpace {
    pub sigmas_px: Vec<f64>,
    pub z_ratio: f64,
}

impl ScaleSpace {
    pub fn len(&self) -> usize {
        self.sigmas_px.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas_px.is_empty()
    }
}

/// Derive the filter scales from voxel size.
///
/// The radius range `[max(0.2 µm, spacing_x), 1 µm]` is converted to pixels,
/// then halved (lower) and thirded (upper) to obtain sigma bounds. Five evenly
/// spaced sigmas are taken with a step no smaller than
/// [`MIN_SIGMA_STEP_PX`], capped at the upper bound and deduplicated.
pub fn compute_scale_sigmas(meta: &VolumeMeta) -> Result<ScaleSpace> {
    if !(meta.spacing_x.is_finite() && meta.spacing_x > 0.0) {
        return Err(Error::InvalidMeta(format!(
            "spacing_x must be > 0, got {}",
            meta.spacing_x
        )));
    }
    let r_min_px = MIN_RADIUS_UM.max(meta.spacing_x) / meta.spacing_x;
    let r_max_px = MAX_RADIUS_UM / meta.spacing_x;
    let sigma_min = r_min_px / 2.0;
    let sigma_max = r_max_px / 3.0;
    let z_ratio = meta.z_ratio();

    if sigma_max <= sigma_min {
        let only = sigma_min.max(sigma_max);
        log::warn!(
            "pixel size {} µm leaves no scale range; using single sigma {only:.3} px",
            meta.spacing_x
        );
        return Ok(ScaleSpace {
            sigmas_px: vec![only],
            z_ratio,
        });
    }

    let step = ((sigma_max - sigma_min) / (SCALE_COUNT - 1) as f64).max(MIN_SIGMA_STEP_PX);
    let mut sigmas: Vec<f64> = Vec::with_capacity(SCALE_COUNT);
    for i in 0..SCALE_COUNT {
        let s = (sigma_min + step * i as f64).min(sigma_max);
        if sigmas.last().is_none_or(|&prev| s > prev) {
            sigmas.push(s);
        }
    }
    Ok(ScaleSpace {
        sigmas_px: sigmas,
        z_ratio,
    })
}

/// Per-axis sigma `(z, y, x)` with equal physical extent on every axis.
/// The z entry is 0 for planar data (no smoothing across the absent axis).
pub fn anisotropic_sigma_vector(sigma_px: f64, meta: &VolumeMeta) -> [f64; 3] {
    if meta.is_3d {
        [sigma_px / meta.z_ratio(), sigma_px, sigma_px]
    } else {
        [0.0, sigma_px, sigma_px]
    }
}

/// Intensity-weighted centroid in micrometers.
pub fn center_of_mass(frame: &Frame) -> Result<[f64; 3]> {
    let mut total = 0.0f64;
    let mut acc = [0.0f64; 3];
    for (c, &v) in frame.values.indexed() {
        if v == 0.0 {
            continue;
        }
        let w = v as f64;
        let p = frame.meta.to_um(c);
        total += w;
        for a in 0..3 {
            acc[a] += w * p[a];
        }
    }
    if total <= 0.0 {
        return Err(Error::Empty(
            "frame has no positive intensity for a center of mass",
        ));
    }
    Ok(acc.map(|a| a / total))
}
