//! Motion-capture markers: multi-scale LoG maxima of the distance field.

use std::collections::HashMap;

use crate::filters::{log_filter, maximum_filter};
use crate::grid::{Coord, Grid, Mask};
use crate::volume::{anisotropic_sigma_vector, Frame, ScaleSpace, VolumeMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct MocapMarker {
    pub frame_index: usize,
    pub coord: Coord,
    pub coord_um: [f64; 3],
    pub radius_um: f64,
    pub scale_index: usize,
}

/// Default minimum marker separation in µm.
pub fn default_min_dist_um(meta: &VolumeMeta) -> f64 {
    crate::volume::MIN_RADIUS_UM.max(meta.spacing_x)
}

/// Max-filter half-widths `(z, y, x)` for one scale.
pub fn footprint(sigma_px: f64, meta: &VolumeMeta) -> [usize; 3] {
    let s = anisotropic_sigma_vector(sigma_px, meta);
    let hw = |v: f64| (v.round() as usize).max(1);
    [if meta.is_3d { hw(s[0]) } else { 0 }, hw(s[1]), hw(s[2])]
}

/// Candidate peaks of `-LoG(dist)` over all scales, in raster order. A voxel
/// joins at the lowest scale where it equals its neighbourhood maximum, lies
/// in the mask and has a positive response.
pub fn detect_peaks(
    dist: &Grid<f64>,
    scales: &ScaleSpace,
    mask: &Mask,
    meta: &VolumeMeta,
    frame_index: usize,
) -> Vec<MocapMarker> {
    let shape = dist.shape();
    if mask.count() == 0 {
        return Vec::new();
    }
    let frame = Frame {
        values: dist.map(|&d| d as f32),
        meta: meta.clone(),
    };
    let mut scale_of: Grid<Option<usize>> = Grid::filled(shape, None);
    for (k, &sigma) in scales.sigmas_px.iter().enumerate() {
        let response = log_filter(&frame, sigma).map(|&v| -v);
        let maxed = maximum_filter(&response, footprint(sigma, meta));
        for i in 0..shape.len() {
            if mask[i] && scale_of[i].is_none() && response[i] > 0.0 && response[i] == maxed[i] {
                scale_of[i] = Some(k);
            }
        }
    }
    scale_of
        .indexed()
        .filter_map(|(c, s)| {
            s.map(|k| MocapMarker {
                frame_index,
                coord: c,
                coord_um: meta.to_um(c),
                radius_um: *dist.get(c),
                scale_index: k,
            })
        })
        .collect()
}

/// Greedy suppression: strongest raw intensity first (lower coordinate on
/// ties); a peak is dropped if an accepted one lies closer than `min_dist_um`.
/// Separations come from integer voxel offsets so the outcome does not depend
/// on where a pair sits in the grid.
pub fn dedupe_peaks(
    peaks: Vec<MocapMarker>,
    raw: &Grid<f32>,
    meta: &VolumeMeta,
    min_dist_um: f64,
) -> Vec<MocapMarker> {
    let mut order: Vec<MocapMarker> = peaks;
    order.sort_by(|a, b| {
        raw.get(b.coord)
            .total_cmp(raw.get(a.coord))
            .then(a.coord.cmp(&b.coord))
    });
    let sp = meta.spacing();
    // bucket side in voxels per axis; any clash lies in an adjacent bucket
    let cell: [usize; 3] = std::array::from_fn(|a| ((min_dist_um / sp[a]).ceil() as usize).max(1));
    let key = |c: &Coord| -> [i64; 3] { std::array::from_fn(|a| (c[a] / cell[a]) as i64) };
    let sep = |p: &Coord, q: &Coord| {
        (0..3)
            .map(|a| ((p[a] as f64 - q[a] as f64) * sp[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut kept: Vec<MocapMarker> = Vec::new();
    for m in order {
        let k = key(&m.coord);
        let mut clash = false;
        'search: for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(ids) = buckets.get(&[k[0] + dz, k[1] + dy, k[2] + dx]) {
                        if ids
                            .iter()
                            .any(|&j| sep(&kept[j].coord, &m.coord) < min_dist_um)
                        {
                            clash = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !clash {
            buckets.entry(k).or_default().push(kept.len());
            kept.push(m);
        }
    }
    kept
}

/// Detect and deduplicate markers for one frame.
pub fn find_markers(
    dist: &Grid<f64>,
    mask: &Mask,
    raw: &Grid<f32>,
    scales: &ScaleSpace,
    meta: &VolumeMeta,
    min_dist_um: f64,
    frame_index: usize,
) -> Vec<MocapMarker> {
    let peaks = detect_peaks(dist, scales, mask, meta, frame_index);
    dedupe_peaks(peaks, raw, meta, min_dist_um)
}
