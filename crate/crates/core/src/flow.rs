//! Flow interpolation from marker linkages and flow-guided label propagation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use rayon::prelude::*;

use crate::grid::{Grid, Mask};
use crate::linking::{Direction, Linkage};
use crate::mocap::MocapMarker;
use crate::spatial::KdTree;
use crate::volume::VolumeMeta;

/// One interpolated displacement over a frame interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVector {
    pub v_um: [f64; 3],
    pub anchored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub origin_um: [f64; 3],
    pub v_um: [f64; 3],
    pub cost: f64,
    pub src: usize,
    pub dst: usize,
}

/// Scattered anchors with a spatial index; empty fields leave every query
/// unanchored.
#[derive(Debug, Clone)]
pub struct FlowField {
    anchors: Vec<Anchor>,
    tree: KdTree,
    min_cost: f64,
    max_dist_um: f64,
}

/// Linkages reduced to unique `(src, dst)` pairs, keeping the lowest cost.
fn unique_pairs(linkages: &[Linkage]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> =
        linkages.iter().map(|l| (l.src, l.dst, l.cost)).collect();
    pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    pairs.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
    pairs
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl FlowField {
    pub fn new(anchors: Vec<Anchor>, max_dist_um: f64) -> Self {
        let min_cost = anchors.iter().map(|a| a.cost).fold(f64::INFINITY, f64::min);
        let tree = KdTree::new(anchors.iter().map(|a| a.origin_um).collect());
        FlowField {
            anchors,
            tree,
            min_cost,
            max_dist_um,
        }
    }

    pub fn empty(max_dist_um: f64) -> Self {
        FlowField::new(Vec::new(), max_dist_um)
    }

    /// Flow out of frame `t`: anchors at the `t` markers, vectors to their
    /// matched `t + 1` markers.
    pub fn forward(
        markers_t: &[MocapMarker],
        markers_t1: &[MocapMarker],
        linkages: &[Linkage],
        max_dist_um: f64,
    ) -> Self {
        let anchors = unique_pairs(linkages)
            .into_iter()
            .map(|(s, d, cost)| Anchor {
                origin_um: markers_t[s].coord_um,
                v_um: sub(markers_t1[d].coord_um, markers_t[s].coord_um),
                cost,
                src: s,
                dst: d,
            })
            .collect();
        FlowField::new(anchors, max_dist_um)
    }

    /// Flow from frame `t` back to `t - 1`, built from the `t - 1 → t`
    /// linkages: anchors at their destinations with negated vectors.
    pub fn backward(
        markers_tm1: &[MocapMarker],
        markers_t: &[MocapMarker],
        linkages: &[Linkage],
        max_dist_um: f64,
    ) -> Self {
        let anchors = unique_pairs(linkages)
            .into_iter()
            .map(|(s, d, cost)| Anchor {
                origin_um: markers_t[d].coord_um,
                v_um: sub(markers_tm1[s].coord_um, markers_t[d].coord_um),
                cost,
                src: s,
                dst: d,
            })
            .collect();
        FlowField::new(anchors, max_dist_um)
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn max_dist_um(&self) -> f64 {
        self.max_dist_um
    }

    /// Distance- and cost-weighted mean of anchor vectors in range.
    pub fn at(&self, p: &[f64; 3]) -> FlowVector {
        let mut wsum = 0.0;
        let mut acc = [0.0; 3];
        for (k, d2) in self.tree.within(p, self.max_dist_um) {
            let d = d2.sqrt();
            let a = &self.anchors[k];
            let w = (1.0 - d / self.max_dist_um) * (1.0 / (1.0 + a.cost - self.min_cost));
            if w <= 0.0 {
                continue;
            }
            wsum += w;
            for ax in 0..3 {
                acc[ax] += w * a.v_um[ax];
            }
        }
        if wsum > 0.0 {
            FlowVector {
                v_um: acc.map(|v| v / wsum),
                anchored: true,
            }
        } else {
            FlowVector {
                v_um: [0.0; 3],
                anchored: false,
            }
        }
    }

    pub fn interpolate(&self, points: &[[f64; 3]]) -> Vec<FlowVector> {
        points.par_iter().map(|p| self.at(p)).collect()
    }
}

pub fn interpolate_flow(cois: &[[f64; 3]], field: &FlowField) -> Vec<FlowVector> {
    field.interpolate(cois)
}

/// Mapping of frame `t + 1` mask voxels onto frame `t` voxels, reusable for
/// any label volume defined on the frame-`t` mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    /// `(t+1 index, t index)` matches from the priority queue.
    pub matches: Vec<(usize, usize)>,
    /// Nearest-labelled fill rounds: `(t+1 index, t+1 source index)`.
    pub fills: Vec<Vec<(usize, usize)>>,
}

#[derive(PartialEq)]
struct Candidate {
    dist: f64,
    target: usize,
    source: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then indices
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.target.cmp(&self.target))
            .then(other.source.cmp(&self.source))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Match voxels of `labeled_t` to `mask_t1` through forward and backward
/// flow, then grow labels into unmatched voxels.
pub fn correspondence(
    labeled_t: &Mask,
    mask_t1: &Mask,
    forward: &FlowField,
    backward_t1: &FlowField,
    meta: &VolumeMeta,
) -> Correspondence {
    let shape = mask_t1.shape();
    let max_dist = forward.max_dist_um().max(backward_t1.max_dist_um());
    let src: Vec<usize> = (0..labeled_t.len()).filter(|&i| labeled_t[i]).collect();
    let dst: Vec<usize> = (0..mask_t1.len()).filter(|&i| mask_t1[i]).collect();
    if src.is_empty() || dst.is_empty() {
        return Correspondence {
            matches: Vec::new(),
            fills: Vec::new(),
        };
    }
    let pos = |i: usize| meta.to_um(shape.coord(i));
    let src_pos: Vec<[f64; 3]> = src.iter().map(|&i| pos(i)).collect();
    let dst_pos: Vec<[f64; 3]> = dst.iter().map(|&i| pos(i)).collect();
    let src_tree = KdTree::new(src_pos.clone());
    let dst_tree = KdTree::new(dst_pos.clone());

    let add = |p: [f64; 3], f: FlowVector| [p[0] + f.v_um[0], p[1] + f.v_um[1], p[2] + f.v_um[2]];
    // t voxels pushed forward, matched to the nearest t+1 voxel
    let fwd: Vec<Option<Candidate>> = src_pos
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let q = add(*p, forward.at(p));
            dst_tree
                .nearest_within(&q, max_dist)
                .map(|(j, d2)| Candidate {
                    dist: d2.sqrt(),
                    target: j,
                    source: k,
                })
        })
        .collect();
    // t+1 voxels pulled back, matched to the nearest t voxel
    let bwd: Vec<Option<Candidate>> = dst_pos
        .par_iter()
        .enumerate()
        .map(|(j, p)| {
            let q = add(*p, backward_t1.at(p));
            src_tree
                .nearest_within(&q, max_dist)
                .map(|(k, d2)| Candidate {
                    dist: d2.sqrt(),
                    target: j,
                    source: k,
                })
        })
        .collect();
    let mut heap: BinaryHeap<Candidate> = fwd.into_iter().chain(bwd).flatten().collect();

    let mut assigned = vec![false; dst.len()];
    let mut matches = Vec::new();
    while let Some(c) = heap.pop() {
        if !assigned[c.target] {
            assigned[c.target] = true;
            matches.push((dst[c.target], src[c.source]));
        }
    }

    let mut fills = Vec::new();
    let mut unlabeled = assigned.iter().filter(|a| !**a).count();
    while unlabeled > 0 {
        let labeled: Vec<usize> = (0..dst.len()).filter(|&j| assigned[j]).collect();
        if labeled.is_empty() {
            break;
        }
        let tree = KdTree::new(labeled.iter().map(|&j| dst_pos[j]).collect());
        let round: Vec<(usize, usize)> = (0..dst.len())
            .into_par_iter()
            .filter(|&j| !assigned[j])
            .filter_map(|j| {
                tree.nearest_within(&dst_pos[j], max_dist)
                    .map(|(k, _)| (j, labeled[k]))
            })
            .collect();
        if round.is_empty() {
            break;
        }
        for &(j, _) in &round {
            assigned[j] = true;
        }
        unlabeled -= round.len();
        fills.push(round.into_iter().map(|(j, k)| (dst[j], dst[k])).collect());
    }
    Correspondence { matches, fills }
}

impl Correspondence {
    /// Carry `labels_t` to frame `t + 1`; unreached voxels stay 0.
    pub fn apply(&self, labels_t: &Grid<u32>) -> Grid<u32> {
        let mut out = Grid::filled(labels_t.shape(), 0u32);
        for &(j, i) in &self.matches {
            out[j] = labels_t[i];
        }
        for round in &self.fills {
            let snapshot: Vec<u32> = round.iter().map(|&(_, k)| out[k]).collect();
            for (&(j, _), l) in round.iter().zip(snapshot) {
                out[j] = l;
            }
        }
        out
    }
}

/// Propagate frame-`t` labels onto the frame-`t + 1` mask.
pub fn propagate_labels(
    labels_t: &Grid<u32>,
    mask_t1: &Mask,
    forward: &FlowField,
    backward_t1: &FlowField,
    meta: &VolumeMeta,
) -> Grid<u32> {
    let labeled = labels_t.map(|&l| l != 0);
    correspondence(&labeled, mask_t1, forward, backward_t1, meta).apply(labels_t)
}

/// Labels present in a volume.
pub fn label_set(labels: &Grid<u32>) -> BTreeSet<u32> {
    labels
        .as_slice()
        .iter()
        .copied()
        .filter(|&l| l != 0)
        .collect()
}

/// Linkages restricted to one direction tag.
pub fn with_direction(linkages: &[Linkage], dir: Direction) -> Vec<Linkage> {
    linkages
        .iter()
        .copied()
        .filter(|l| l.direction == dir)
        .collect()
}

/// Follow seeds through consecutive forward fields; one position per frame.
pub fn track_points(seeds: &[[f64; 3]], fields: &[FlowField]) -> Vec<Vec<([f64; 3], bool)>> {
    seeds
        .iter()
        .map(|&s| {
            let mut out = vec![(s, true)];
            let mut p = s;
            for f in fields {
                let v = f.at(&p);
                p = [p[0] + v.v_um[0], p[1] + v.v_um[1], p[2] + v.v_um[2]];
                out.push((p, v.anchored));
            }
            out
        })
        .collect()
}
