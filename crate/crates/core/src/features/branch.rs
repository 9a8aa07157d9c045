//! Skeleton-derived branch metrics: length, thickness, tortuosity and aspect
//! ratio.

use crate::grid::Coord;
use crate::segment::VoxelClass;
use crate::spatial::KdTree;
use crate::volume::VolumeMeta;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BranchSkeletonFeatures {
    pub length: Option<f64>,
    pub thickness: Option<f64>,
    pub tortuosity: Option<f64>,
    pub aspect_ratio: Option<f64>,
}

/// Pairs of branch voxels closer than two voxel units, `i < j`.
pub fn branch_links(voxels: &[Coord]) -> Vec<(usize, usize)> {
    let pts: Vec<[f64; 3]> = voxels.iter().map(|c| c.map(|v| v as f64)).collect();
    let tree = KdTree::new(pts.clone());
    let mut out = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let mut near: Vec<usize> = tree
            .within(p, 2.0)
            .into_iter()
            .filter(|&(j, d2)| j > i && d2 < 4.0)
            .map(|(j, _)| j)
            .collect();
        near.sort_unstable();
        out.extend(near.into_iter().map(|j| (i, j)));
    }
    out
}

/// Metrics of one branch from its skeleton voxels, their classes and border
/// distances.
pub fn branch_skeleton_features(
    voxels: &[Coord],
    classes: &[VoxelClass],
    border: &[f64],
    meta: &VolumeMeta,
) -> BranchSkeletonFeatures {
    let n = voxels.len();
    if n == 0 {
        return BranchSkeletonFeatures::default();
    }
    let thickness = 2.0 * border.iter().sum::<f64>() / n as f64;
    let pos: Vec<[f64; 3]> = voxels.iter().map(|&c| meta.to_um(c)).collect();
    let dist = |i: usize, j: usize| crate::spatial::dist2(&pos[i], &pos[j]).sqrt();
    let (length, tortuosity) = if n == 1 {
        (2.0 * border[0], Some(1.0))
    } else {
        let links: f64 = branch_links(voxels)
            .into_iter()
            .map(|(i, j)| dist(i, j))
            .sum();
        let tips: Vec<usize> = (0..n)
            .filter(|&i| matches!(classes[i], VoxelClass::Tip | VoxelClass::LoneTip))
            .collect();
        let length = links + tips.iter().map(|&i| border[i]).sum::<f64>();
        // chord between the two farthest tips, extended by their border distances
        let mut chord: Option<(f64, usize, usize)> = None;
        for (a, &i) in tips.iter().enumerate() {
            for &j in &tips[a + 1..] {
                let d = dist(i, j);
                if chord.is_none_or(|(c, _, _)| d > c) {
                    chord = Some((d, i, j));
                }
            }
        }
        let tortuosity = chord.map(|(d, i, j)| length / (d + border[i] + border[j]));
        (length, tortuosity)
    };
    BranchSkeletonFeatures {
        length: Some(length),
        thickness: Some(thickness),
        tortuosity,
        aspect_ratio: (thickness > 0.0).then(|| length / thickness),
    }
}
