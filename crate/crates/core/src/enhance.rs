//! Multi-scale structural enhancement.
//!
//! For every scale the frame is Gaussian smoothed, the scale-normalised
//! Hessian is formed by central differences and masked at the Minotri
//! threshold of its Frobenius norm. Eigenvalues of the retained voxels are
//! solved in chunks and fed to a bright-structure Frangi measure whose gamma
//! is the Minotri threshold of the smoothed frame at that scale. The voxel-wise
//! maximum over scales is then refined into the preprocessed image.

use rayon::prelude::*;

use crate::eigen::{sort_by_magnitude, sym2, sym3};
use crate::error::{Error, Result};
use crate::filters::{active_axes, gaussian_smooth, log_filter, percentile, second_derivative};
use crate::grid::{Grid, Mask, Shape};
use crate::morphology::binary_open;
use crate::threshold::{minotri_threshold, nonzero};
use crate::volume::{Frame, ScaleSpace, VolumeMeta};

pub const DEFAULT_CHUNK_SIZE: usize = 1_000_000;
/// Marks voxels with no winning scale.
pub const NO_SCALE: u8 = u8::MAX;
const EPS: f64 = 1e-12;

/// Frangi shape and contrast parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrangiParams {
    pub alpha_sq: f64,
    pub beta_sq: f64,
    pub gamma: f64,
}

impl FrangiParams {
    pub fn with_gamma(gamma: f64) -> Self {
        FrangiParams {
            alpha_sq: 0.5,
            beta_sq: 0.5,
            gamma,
        }
    }
}

/// Scale-normalised Hessian entries per voxel plus the eigen-analysis mask.
///
/// Entries are the upper triangle `[zz, zy, zx, yy, yx, xx]`; planar frames
/// leave the z entries at zero.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub entries: Grid<[f32; 6]>,
    pub frobenius: Grid<f32>,
    pub mask: Mask,
    pub is_3d: bool,
}

/// Eigenvalues of the masked voxels, each tuple sorted by ascending magnitude.
/// Planar tuples carry `(λ1, λ2, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvalues {
    pub shape: Shape,
    pub is_3d: bool,
    pub indices: Vec<usize>,
    pub values: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedFrame {
    pub values: Grid<f32>,
    /// Index into the scale list of the strongest response, or [`NO_SCALE`].
    pub scale_index: Grid<u8>,
}

fn frobenius(h: &[f64; 6]) -> f64 {
    let [zz, zy, zx, yy, yx, xx] = *h;
    (zz * zz + yy * yy + xx * xx + 2.0 * (zy * zy + zx * zx + yx * yx)).sqrt()
}

/// Hessian of an already smoothed frame, multiplied by `sigma²`.
pub fn hessian_from_smoothed(smoothed: &Frame, sigma_px: f64) -> Result<HessianField> {
    let shape = smoothed.shape();
    let data = smoothed.values.as_slice();
    let is_3d = smoothed.meta.is_3d;
    let axes = active_axes(&smoothed.meta);
    let norm = sigma_px * sigma_px;
    // (a, b) pairs in upper-triangle order
    const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let computed: Vec<([f32; 6], f32)> = (0..shape.len())
        .into_par_iter()
        .map(|i| {
            let c = shape.coord(i);
            let c = [c[0] as isize, c[1] as isize, c[2] as isize];
            let mut h = [0f64; 6];
            for (k, &(a, b)) in PAIRS.iter().enumerate() {
                if axes.contains(&a) && axes.contains(&b) {
                    h[k] = norm * second_derivative(data, shape, c, a, b);
                }
            }
            (h.map(|v| v as f32), frobenius(&h) as f32)
        })
        .collect();
    let (entries, norms): (Vec<[f32; 6]>, Vec<f32>) = computed.into_iter().unzip();
    let frobenius = Grid::from_vec(shape, norms)?;
    let nz = nonzero(frobenius.as_slice());
    let mask = if nz.is_empty() {
        Grid::filled(shape, false)
    } else {
        let t = minotri_threshold(&nz)?;
        frobenius.map(|&s| s > t)
    };
    Ok(HessianField {
        entries: Grid::from_vec(shape, entries)?,
        frobenius,
        mask,
        is_3d,
    })
}

pub fn hessian_at_scale(frame: &Frame, sigma_px: f64) -> Result<HessianField> {
    hessian_from_smoothed(&gaussian_smooth(frame, sigma_px), sigma_px)
}

fn voxel_eigenvalues(h: &[f32; 6], is_3d: bool) -> [f64; 3] {
    let h = h.map(|v| v as f64);
    if is_3d {
        sort_by_magnitude(sym3(h))
    } else {
        let e = sort_by_magnitude(sym2(h[3], h[4], h[5]));
        [e[0], e[1], 0.0]
    }
}

/// Eigenvalues of masked voxels, solved `chunk_size` voxels at a time.
pub fn eigenvalues_chunked(field: &HessianField, chunk_size: usize) -> Eigenvalues {
    let chunk_size = chunk_size.max(1);
    let indices: Vec<usize> = field
        .mask
        .as_slice()
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect();
    let entries = field.entries.as_slice();
    let values: Vec<[f64; 3]> = indices
        .par_chunks(chunk_size)
        .flat_map_iter(|chunk| {
            chunk
                .iter()
                .map(|&i| voxel_eigenvalues(&entries[i], field.is_3d))
        })
        .collect();
    Eigenvalues {
        shape: field.entries.shape(),
        is_3d: field.is_3d,
        indices,
        values,
    }
}

/// Frangi measure of one magnitude-sorted eigenvalue tuple.
pub fn frangi_voxel(l: [f64; 3], params: &FrangiParams, is_3d: bool) -> f64 {
    let gamma_term = |s2: f64| 1.0 - (-s2 / (2.0 * params.gamma * params.gamma)).exp();
    if is_3d {
        let [l1, l2, l3] = l;
        if !(l2 < 0.0 && l3 < 0.0) {
            return 0.0;
        }
        let ra = l2.abs() / (l3.abs() + EPS);
        let rb = l1.abs() / ((l2 * l3).abs().sqrt() + EPS);
        let s2 = l1 * l1 + l2 * l2 + l3 * l3;
        (1.0 - (-ra * ra / (2.0 * params.alpha_sq)).exp())
            * (-rb * rb / (2.0 * params.beta_sq)).exp()
            * gamma_term(s2)
    } else {
        let [l1, l2, _] = l;
        if l2 >= 0.0 {
            return 0.0;
        }
        let rb = l1.abs() / (l2.abs() + EPS);
        (-rb * rb / (2.0 * params.beta_sq)).exp() * gamma_term(l1 * l1 + l2 * l2)
    }
}

/// Vesselness grid; voxels outside the Hessian mask are zero.
pub fn frangi_at_scale(eigs: &Eigenvalues, params: &FrangiParams) -> Grid<f32> {
    let mut out = Grid::filled(eigs.shape, 0f32);
    let vals: Vec<f32> = eigs
        .values
        .par_iter()
        .map(|&l| frangi_voxel(l, params, eigs.is_3d) as f32)
        .collect();
    for (&i, v) in eigs.indices.iter().zip(vals) {
        out[i] = v;
    }
    out
}

/// Minotri threshold of the nonzero smoothed intensities; 1.0 for an empty frame.
pub fn gamma_for_scale(smoothed: &Frame) -> Result<f64> {
    let nz = nonzero(smoothed.values.as_slice());
    if nz.is_empty() {
        log::warn!("smoothed frame is empty; using gamma = 1");
        return Ok(1.0);
    }
    Ok(minotri_threshold(&nz)? as f64)
}

/// Voxel-wise maximum with the first winning index (lowest on ties).
pub fn composite_max(responses: &[Grid<f32>]) -> Result<EnhancedFrame> {
    let first = responses
        .first()
        .ok_or(Error::Empty("no scale responses"))?;
    let shape = first.shape();
    if let Some(bad) = responses.iter().find(|r| r.shape() != shape) {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            bad.dims(),
            shape.0
        )));
    }
    let mut values = first.clone();
    let mut scale_index = first.map(|&v| if v > 0.0 { 0u8 } else { NO_SCALE });
    for (k, r) in responses.iter().enumerate().skip(1) {
        for i in 0..shape.len() {
            if r[i] > values[i] {
                values[i] = r[i];
                scale_index[i] = k as u8;
            }
        }
    }
    Ok(EnhancedFrame {
        values,
        scale_index,
    })
}

/// Percentile masking, opening, and (volumes only) multi-scale LoG refinement.
pub fn refine_preprocessed(
    enhanced: &EnhancedFrame,
    meta: &VolumeMeta,
    scales: &ScaleSpace,
) -> Result<EnhancedFrame> {
    let shape = enhanced.values.shape();
    let mut values = enhanced.values.clone();
    let nz = nonzero(values.as_slice());
    let Some(p1) = percentile(&nz, 1.0) else {
        log::warn!("enhanced frame is empty; nothing to refine");
        return Ok(enhanced.clone());
    };
    for v in values.as_mut_slice() {
        if *v < p1 {
            *v = 0.0;
        }
    }
    let support = binary_open(&values.map(|&v| v > 0.0), meta.is_3d);
    for i in 0..shape.len() {
        if !support[i] {
            values[i] = 0.0;
        }
    }
    if support.count() == 0 {
        log::warn!("refinement removed all structure");
    }

    if meta.is_3d && support.count() > 0 {
        let refined = Frame {
            values: values.clone(),
            meta: meta.clone(),
        };
        let mut best = Grid::filled(shape, 0f32);
        for &sigma in &scales.sigmas_px {
            let log = log_filter(&refined, sigma);
            for i in 0..shape.len() {
                best[i] = best[i].max((-log[i]).max(0.0));
            }
        }
        for i in 0..shape.len() {
            values[i] = if support[i] { best[i] } else { 0.0 };
        }
    }

    let scale_index = Grid::from_vec(
        shape,
        values
            .as_slice()
            .iter()
            .zip(enhanced.scale_index.as_slice())
            .map(|(&v, &s)| if v > 0.0 { s } else { NO_SCALE })
            .collect(),
    )?;
    Ok(EnhancedFrame {
        values,
        scale_index,
    })
}

/// Per-scale responses before compositing, for provenance output.
pub fn frangi_responses(
    frame: &Frame,
    scales: &ScaleSpace,
    chunk_size: usize,
) -> Result<Vec<Grid<f32>>> {
    scales
        .sigmas_px
        .iter()
        .map(|&sigma| {
            let smoothed = gaussian_smooth(frame, sigma);
            let gamma = gamma_for_scale(&smoothed)?;
            let field = hessian_from_smoothed(&smoothed, sigma)?;
            let eigs = eigenvalues_chunked(&field, chunk_size);
            Ok(frangi_at_scale(&eigs, &FrangiParams::with_gamma(gamma)))
        })
        .collect()
}

/// Full enhancement of one frame: per-scale Frangi, composite, refinement.
pub fn enhance_frame(
    frame: &Frame,
    scales: &ScaleSpace,
    chunk_size: usize,
) -> Result<EnhancedFrame> {
    let responses = frangi_responses(frame, scales, chunk_size)?;
    let composite = composite_max(&responses)?;
    refine_preprocessed(&composite, &frame.meta, scales)
}
