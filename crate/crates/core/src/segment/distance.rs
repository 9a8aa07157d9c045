//! Border distance transform through a k-d tree of border voxels.

use rayon::prelude::*;

use crate::grid::{neighbor_offsets, Grid, Mask};
use crate::spatial::KdTree;
use crate::volume::VolumeMeta;

/// Physical coordinates (µm) of the one-voxel dilation ring around `mask`.
///
/// The grid is treated as padded by one background voxel, so mask voxels on
/// the grid edge contribute virtual border points just outside it. Planar
/// frames are never padded along z.
pub fn border_points(mask: &Mask, meta: &VolumeMeta) -> Vec<[f64; 3]> {
    let sp = meta.spacing();
    border_voxels(mask, meta.is_3d)
        .into_iter()
        .map(|n| {
            [
                n[0] as f64 * sp[0],
                n[1] as f64 * sp[1],
                n[2] as f64 * sp[2],
            ]
        })
        .collect()
}

fn border_voxels(mask: &Mask, is_3d: bool) -> Vec<[isize; 3]> {
    let shape = mask.shape();
    let dims = shape.0;
    let offsets = neighbor_offsets(is_3d, true);
    let mut seen = std::collections::BTreeSet::new();
    for (c, &set) in mask.indexed() {
        if !set {
            continue;
        }
        for o in &offsets {
            let n = [
                c[0] as isize + o[0],
                c[1] as isize + o[1],
                c[2] as isize + o[2],
            ];
            let inside = shape.contains(n);
            if inside && *mask.get([n[0] as usize, n[1] as usize, n[2] as usize]) {
                continue;
            }
            if !inside && !(0..3).all(|a| n[a] >= -1 && n[a] <= dims[a] as isize) {
                continue;
            }
            seen.insert(n);
        }
    }
    seen.into_iter().collect()
}

/// Distance (µm) from every mask voxel to its nearest border point; zero
/// outside the mask.
pub fn distance_transform(mask: &Mask, meta: &VolumeMeta) -> Grid<f64> {
    let shape = mask.shape();
    let border = border_voxels(mask, meta.is_3d);
    let sp = meta.spacing();
    let mut out = Grid::filled(shape, 0f64);
    if border.is_empty() {
        return out;
    }
    let tree = KdTree::new(
        border
            .iter()
            .map(|n| std::array::from_fn(|a| n[a] as f64 * sp[a]))
            .collect(),
    );
    let values: Vec<f64> = (0..shape.len())
        .into_par_iter()
        .map(|i| {
            if !mask[i] {
                return 0.0;
            }
            let c = shape.coord(i);
            let Some((k, _)) = tree.nearest(&meta.to_um(c)) else {
                return 0.0;
            };
            // from the integer offset, so the value does not depend on where
            // the pair sits in the grid
            let b = border[k];
            (0..3)
                .map(|a| ((c[a] as isize - b[a]) as f64 * sp[a]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    out.as_mut_slice().copy_from_slice(&values);
    out
}
