//! Hierarchical segmentation: semantic mask, organelles, skeleton, branches
//! and nodes, with the border distance field.

pub mod distance;
pub mod skeleton;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use distance::{border_points, distance_transform};
pub use skeleton::{classify_and_split, has_full_block, skeletonize, thin, Skeleton, VoxelClass};

use crate::enhance::EnhancedFrame;
use crate::error::Result;
use crate::grid::{Coord, Grid, Mask};
use crate::morphology::{binary_open, fill_holes, label_components};
use crate::spatial::KdTree;
use crate::threshold::{minotri_threshold, nonzero};
use crate::volume::VolumeMeta;

/// Threshold the preprocessed image at Minotri, fill holes (volumes only)
/// and open.
pub fn semantic_mask(preprocessed: &EnhancedFrame, meta: &VolumeMeta) -> Result<Mask> {
    let values = &preprocessed.values;
    let nz = nonzero(values.as_slice());
    if nz.is_empty() {
        log::warn!("preprocessed frame is empty; semantic mask is empty");
        return Ok(Grid::filled(values.shape(), false));
    }
    let t = minotri_threshold(&nz)?;
    let mut mask = values.map(|&v| v > t);
    if meta.is_3d {
        mask = fill_holes(&mask, true);
    }
    let mask = binary_open(&mask, meta.is_3d);
    if mask.count() == 0 {
        log::warn!("semantic mask is empty after opening");
    }
    Ok(mask)
}

/// Skeleton points of one organelle with their labels, ordered so that the
/// k-d tree's lowest-index tie rule picks the lowest label.
fn nearest_label_tree(points: &mut [(u32, Coord)], meta: &VolumeMeta) -> KdTree {
    points.sort_unstable();
    KdTree::new(points.iter().map(|&(_, c)| meta.to_um(c)).collect())
}

/// Assign every mask voxel to the nearest labelled skeleton voxel of the same
/// organelle. `skeleton_labels` maps skeleton voxels to nonzero labels; an
/// organelle with no labelled skeleton voxel receives a fresh label.
fn assign_nearest(
    organelles: &Grid<u32>,
    organelle_count: u32,
    skeleton_labels: &[(Coord, u32)],
    next_label: u32,
    meta: &VolumeMeta,
) -> Grid<u32> {
    let shape = organelles.shape();
    let mut per_organelle: BTreeMap<u32, Vec<(u32, Coord)>> = BTreeMap::new();
    for &(c, label) in skeleton_labels {
        let org = *organelles.get(c);
        if label != 0 && org != 0 {
            per_organelle.entry(org).or_default().push((label, c));
        }
    }
    let mut voxels: Vec<Vec<usize>> = vec![Vec::new(); organelle_count as usize + 1];
    for (i, &o) in organelles.as_slice().iter().enumerate() {
        if o != 0 {
            voxels[o as usize].push(i);
        }
    }
    let mut fresh = next_label;
    let mut fresh_ids = vec![0u32; organelle_count as usize + 1];
    for org in 1..=organelle_count {
        if !per_organelle.contains_key(&org) && !voxels[org as usize].is_empty() {
            fresh_ids[org as usize] = fresh;
            fresh += 1;
        }
    }
    let assigned: Vec<Vec<(usize, u32)>> = (1..=organelle_count as usize)
        .into_par_iter()
        .map(|org| {
            let members = &voxels[org];
            match per_organelle.get(&(org as u32)) {
                None => members.iter().map(|&i| (i, fresh_ids[org])).collect(),
                Some(points) => {
                    let mut points = points.clone();
                    let tree = nearest_label_tree(&mut points, meta);
                    members
                        .iter()
                        .map(|&i| {
                            let (k, _) = tree
                                .nearest(&meta.to_um(shape.coord(i)))
                                .expect("nonempty tree");
                            (i, points[k].0)
                        })
                        .collect()
                }
            }
        })
        .collect();
    let mut out = Grid::filled(shape, 0u32);
    for (i, label) in assigned.into_iter().flatten() {
        out[i] = label;
    }
    out
}

/// Branch label volume: each organelle voxel takes the branch of its nearest
/// branch-labelled skeleton voxel within the same organelle (lowest branch id
/// on ties). Returns the volume and the total branch count including fresh ids.
pub fn assign_voxels_to_branches(
    organelles: &Grid<u32>,
    organelle_count: u32,
    skel: &Skeleton,
    meta: &VolumeMeta,
) -> (Grid<u32>, u32) {
    let labels: Vec<(Coord, u32)> = skel
        .voxels
        .iter()
        .copied()
        .zip(skel.branch.iter().copied())
        .collect();
    let grid = assign_nearest(
        organelles,
        organelle_count,
        &labels,
        skel.branch_count + 1,
        meta,
    );
    let count = grid
        .as_slice()
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(skel.branch_count);
    (grid, count)
}

/// Node label volume: node ids are `1 + index` into `skel.voxels`; each mask
/// voxel takes its nearest skeleton voxel in the same organelle.
pub fn assign_voxels_to_nodes(
    organelles: &Grid<u32>,
    organelle_count: u32,
    skel: &Skeleton,
    meta: &VolumeMeta,
) -> Grid<u32> {
    let labels: Vec<(Coord, u32)> = skel
        .voxels
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, k as u32 + 1))
        .collect();
    assign_nearest(
        organelles,
        organelle_count,
        &labels,
        skel.voxels.len() as u32 + 1,
        meta,
    )
}

/// One frame's hierarchical segmentation.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: Mask,
    pub organelles: Grid<u32>,
    pub organelle_count: u32,
    pub skeleton: Skeleton,
    pub branches: Grid<u32>,
    pub branch_count: u32,
    pub nodes: Grid<u32>,
    pub distance: Grid<f64>,
}

pub fn segment_frame(preprocessed: &EnhancedFrame, meta: &VolumeMeta) -> Result<Segmentation> {
    let mask = semantic_mask(preprocessed, meta)?;
    Ok(segment_mask(mask, meta))
}

pub fn segment_mask(mask: Mask, meta: &VolumeMeta) -> Segmentation {
    let (organelles, organelle_count) = label_components(&mask, meta.is_3d);
    let skeleton = skeletonize(&mask, meta.is_3d);
    let (branches, branch_count) =
        assign_voxels_to_branches(&organelles, organelle_count, &skeleton, meta);
    let nodes = assign_voxels_to_nodes(&organelles, organelle_count, &skeleton, meta);
    let distance = distance_transform(&mask, meta);
    Segmentation {
        mask,
        organelles,
        organelle_count,
        skeleton,
        branches,
        branch_count,
        nodes,
        distance,
    }
}
