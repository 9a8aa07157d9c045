//! Topology-preserving thinning and skeleton voxel classification.
//!
//! Thinning peels border voxels one direction at a time (6 face directions in
//! a volume, 4 in the plane). A candidate is deleted when it is a simple point
//! (26/6 topology, 8/4 in the plane) and not a curve end. Candidates are
//! collected for a whole sub-iteration in raster order and re-checked one by
//! one against the current state before deletion.

use std::collections::VecDeque;

use crate::grid::{neighbor_offsets, Coord, Grid, Mask};
use crate::morphology::label_components;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VoxelClass {
    LoneTip,
    Tip,
    Edge,
    Junction,
}

impl VoxelClass {
    pub fn from_neighbors(n: usize) -> Self {
        match n {
            0 => VoxelClass::LoneTip,
            1 => VoxelClass::Tip,
            2 => VoxelClass::Edge,
            _ => VoxelClass::Junction,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VoxelClass::LoneTip => "lone_tip",
            VoxelClass::Tip => "tip",
            VoxelClass::Edge => "edge",
            VoxelClass::Junction => "junction",
        }
    }
}

/// Thinned skeleton with per-voxel classes and branch ids.
///
/// `voxels` is in raster order. `branch[i]` is 0 for junction voxels, otherwise
/// the branch in `1..=branch_count`. `classes` hold the original class for
/// junctions and the re-classified class (after junction removal) otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub mask: Mask,
    pub is_3d: bool,
    pub voxels: Vec<Coord>,
    pub classes: Vec<VoxelClass>,
    pub branch: Vec<u32>,
    pub branch_count: u32,
}

impl Skeleton {
    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// 3×3(×3) neighbourhood packed as bits; bit `(dz+1)*9 + (dy+1)*3 + (dx+1)`.
fn neighborhood(mask: &Mask, c: Coord) -> u32 {
    let shape = mask.shape();
    let mut bits = 0u32;
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if let Some(n) = shape.offset(c, [dz, dy, dx]) {
                    if *mask.get(n) {
                        bits |= 1 << ((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1));
                    }
                }
            }
        }
    }
    bits
}

#[cfg(test)]
const CENTER: usize = 13;

fn offsets_of(bit: usize) -> [isize; 3] {
    [
        bit as isize / 9 - 1,
        (bit as isize / 3) % 3 - 1,
        bit as isize % 3 - 1,
    ]
}

fn chebyshev_adjacent(a: usize, b: usize) -> bool {
    let (p, q) = (offsets_of(a), offsets_of(b));
    a != b && (0..3).all(|k| (p[k] - q[k]).abs() <= 1)
}

fn face_adjacent(a: usize, b: usize) -> bool {
    let (p, q) = (offsets_of(a), offsets_of(b));
    (0..3).map(|k| (p[k] - q[k]).abs()).sum::<isize>() == 1
}

/// Count components of `set` (bits) under the given adjacency, only counting
/// components that contain a bit from `seeds`.
fn components(set: u32, seeds: u32, adjacent: fn(usize, usize) -> bool) -> usize {
    let mut seen = 0u32;
    let mut count = 0;
    for s in 0..27 {
        if set & (1 << s) == 0 || seen & (1 << s) != 0 {
            continue;
        }
        let mut stack = vec![s];
        seen |= 1 << s;
        let mut hits_seed = false;
        while let Some(a) = stack.pop() {
            hits_seed |= seeds & (1 << a) != 0;
            for b in 0..27 {
                if set & (1 << b) != 0 && seen & (1 << b) == 0 && adjacent(a, b) {
                    seen |= 1 << b;
                    stack.push(b);
                }
            }
        }
        if hits_seed {
            count += 1;
        }
    }
    count
}

fn bits_where(pred: impl Fn([isize; 3]) -> bool) -> u32 {
    (0..27)
        .filter(|&b| pred(offsets_of(b)))
        .fold(0, |m, b| m | (1 << b))
}

struct Topology {
    n26: u32,
    n18: u32,
    n6: u32,
    plane8: u32,
    plane4: u32,
}

impl Topology {
    fn new() -> Self {
        let nz = |o: [isize; 3]| o.iter().filter(|&&v| v != 0).count();
        Topology {
            n26: bits_where(|o| nz(o) > 0),
            n18: bits_where(|o| (1..=2).contains(&nz(o))),
            n6: bits_where(|o| nz(o) == 1),
            plane8: bits_where(|o| o[0] == 0 && nz(o) > 0),
            plane4: bits_where(|o| o[0] == 0 && nz(o) == 1),
        }
    }

    /// Whether deleting the centre preserves topology.
    fn is_simple(&self, nb: u32, is_3d: bool) -> bool {
        if is_3d {
            let fg = nb & self.n26;
            let bg = !nb & self.n18;
            components(fg, fg, chebyshev_adjacent) == 1
                && components(bg, self.n6, face_adjacent) == 1
        } else {
            let fg = nb & self.plane8;
            let bg = !nb & self.plane8;
            components(fg, fg, chebyshev_adjacent) == 1
                && components(bg, self.plane4, face_adjacent) == 1
        }
    }
}

fn neighbor_count(mask: &Mask, c: Coord, offsets: &[[isize; 3]]) -> usize {
    let shape = mask.shape();
    offsets
        .iter()
        .filter(|&&o| shape.offset(c, o).is_some_and(|n| *mask.get(n)))
        .count()
}

/// Thin a binary mask to a one-voxel-wide skeleton.
pub fn thin(mask: &Mask, is_3d: bool) -> Mask {
    let shape = mask.shape();
    let topo = Topology::new();
    let full = neighbor_offsets(is_3d, true);
    // opposite directions back to back so thinning stays centred
    let directions: Vec<[isize; 3]> = if is_3d {
        vec![
            [-1, 0, 0],
            [1, 0, 0],
            [0, -1, 0],
            [0, 1, 0],
            [0, 0, -1],
            [0, 0, 1],
        ]
    } else {
        vec![[0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]]
    };
    let mut skel = mask.clone();
    let mut active: Vec<usize> = (0..shape.len()).filter(|&i| mask[i]).collect();

    let deletable = |skel: &Mask, c: Coord| {
        neighbor_count(skel, c, &full) > 1 && topo.is_simple(neighborhood(skel, c), is_3d)
    };

    loop {
        let mut changed = false;
        for dir in &directions {
            let candidates: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&i| {
                    let c = shape.coord(i);
                    skel[i] && !shape.offset(c, *dir).is_some_and(|n| *skel.get(n))
                })
                .collect();
            for i in candidates {
                if deletable(&skel, shape.coord(i)) {
                    skel[i] = false;
                    changed = true;
                }
            }
            active.retain(|&i| skel[i]);
        }
        if !changed {
            break;
        }
    }

    // residual full blocks: drop any simple voxel inside one
    loop {
        let mut changed = false;
        for i in active.clone() {
            let c = shape.coord(i);
            if skel[i] && in_full_block(&skel, c, is_3d) && deletable(&skel, c) {
                skel[i] = false;
                changed = true;
            }
        }
        active.retain(|&i| skel[i]);
        if !changed {
            break;
        }
    }
    skel
}

/// Whether `c` belongs to a fully set 2×2 (2×2×2) block.
pub fn in_full_block(mask: &Mask, c: Coord, is_3d: bool) -> bool {
    let shape = mask.shape();
    let zs: &[isize] = if is_3d { &[-1, 0] } else { &[0] };
    for &oz in zs {
        for oy in [-1isize, 0] {
            for ox in [-1isize, 0] {
                let zr: &[isize] = if is_3d { &[0, 1] } else { &[0] };
                let all = zr.iter().all(|&dz| {
                    (0..2).all(|dy| {
                        (0..2).all(|dx| {
                            shape
                                .offset(c, [oz + dz, oy + dy, ox + dx])
                                .is_some_and(|n| *mask.get(n))
                        })
                    })
                });
                if all {
                    return true;
                }
            }
        }
    }
    false
}

pub fn has_full_block(mask: &Mask, is_3d: bool) -> bool {
    mask.indexed()
        .any(|(c, &v)| v && in_full_block(mask, c, is_3d))
}

/// Classify skeleton voxels, remove junctions and label the remaining
/// fragments as branches.
pub fn classify_and_split(skel: &Mask, is_3d: bool) -> Skeleton {
    let shape = skel.shape();
    let full = neighbor_offsets(is_3d, true);
    let voxels = skel.coords();
    let mut classes: Vec<VoxelClass> = voxels
        .iter()
        .map(|&c| VoxelClass::from_neighbors(neighbor_count(skel, c, &full)))
        .collect();
    let mut pruned = skel.clone();
    for (c, class) in voxels.iter().zip(&classes) {
        if *class == VoxelClass::Junction {
            pruned.set(*c, false);
        }
    }
    for (c, class) in voxels.iter().zip(classes.iter_mut()) {
        if *class != VoxelClass::Junction {
            *class = VoxelClass::from_neighbors(neighbor_count(&pruned, *c, &full));
        }
    }
    let (labels, branch_count) = label_components(&pruned, is_3d);
    let branch = voxels.iter().map(|&c| labels[shape.index(c)]).collect();
    Skeleton {
        mask: skel.clone(),
        is_3d,
        voxels,
        classes,
        branch,
        branch_count,
    }
}

pub fn skeletonize(mask: &Mask, is_3d: bool) -> Skeleton {
    classify_and_split(&thin(mask, is_3d), is_3d)
}

/// Hop distances over full-connectivity skeleton adjacency from `start`.
pub fn hop_distances(skel: &Mask, start: Coord, is_3d: bool) -> Grid<Option<u32>> {
    let shape = skel.shape();
    let full = neighbor_offsets(is_3d, true);
    let mut dist = Grid::filled(shape, None);
    dist.set(start, Some(0));
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        let d = dist.get(c).unwrap_or(0);
        for &o in &full {
            if let Some(n) = shape.offset(c, o) {
                if *skel.get(n) && dist.get(n).is_none() {
                    dist.set(n, Some(d + 1));
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}
