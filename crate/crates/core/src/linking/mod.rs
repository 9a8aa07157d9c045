//! Marker features, the three-term cost matrix and bidirectional matching.

pub mod hu;

use crate::grid::{Coord, Grid, Shape};
use crate::mocap::MocapMarker;
use crate::spatial::KdTree;
use crate::volume::VolumeMeta;

pub use hu::{hu_moments_first6, Image2};

/// Half-open voxel box `[lo, hi)` per axis `(z, y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelBox {
    pub lo: Coord,
    pub hi: Coord,
}

impl VoxelBox {
    pub fn sides(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0],
            self.hi[1] - self.lo[1],
            self.hi[2] - self.lo[2],
        ]
    }
}

/// Box of side `round(2·radius / spacing)` voxels per axis (at least one),
/// centred on the marker and clamped to the grid.
pub fn marker_bounding_box(marker: &MocapMarker, shape: Shape, meta: &VolumeMeta) -> VoxelBox {
    let sp = meta.spacing();
    let mut lo = [0; 3];
    let mut hi = [1; 3];
    for a in 0..3 {
        if a == 0 && !meta.is_3d {
            continue;
        }
        let side = ((2.0 * marker.radius_um / sp[a]).round() as isize).max(1);
        let start = marker.coord[a] as isize - side / 2;
        let end = start + side;
        let n = shape.0[a] as isize;
        let (s, e) = (start.clamp(0, n - 1), end.clamp(1, n));
        lo[a] = s as usize;
        hi[a] = (e.max(s + 1)) as usize;
    }
    VoxelBox { lo, hi }
}

/// Per-marker appearance descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerFeatures {
    /// Mean and variance of the raw crop, then of the preprocessed crop.
    pub stats: [f64; 4],
    /// Signed-log Hu φ1..φ6 for each projection of each image.
    pub hu: Vec<f64>,
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn crop(grid: &Grid<f32>, b: &VoxelBox) -> (Vec<f64>, [usize; 3]) {
    let mut out = Vec::new();
    for z in b.lo[0]..b.hi[0] {
        for y in b.lo[1]..b.hi[1] {
            for x in b.lo[2]..b.hi[2] {
                out.push(*grid.get([z, y, x]) as f64);
            }
        }
    }
    (out, b.sides())
}

/// Maximum projections `xy`, `xz`, `yz` of a `(z, y, x)` crop.
pub fn max_projections(data: &[f64], dims: [usize; 3]) -> [Image2; 3] {
    let [nz, ny, nx] = dims;
    let at = |z: usize, y: usize, x: usize| data[(z * ny + y) * nx + x];
    let fold = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    let mut xy = Vec::with_capacity(ny * nx);
    for y in 0..ny {
        for x in 0..nx {
            xy.push(fold(&mut (0..nz).map(|z| at(z, y, x))));
        }
    }
    let mut xz = Vec::with_capacity(nz * nx);
    for z in 0..nz {
        for x in 0..nx {
            xz.push(fold(&mut (0..ny).map(|y| at(z, y, x))));
        }
    }
    let mut yz = Vec::with_capacity(nz * ny);
    for z in 0..nz {
        for y in 0..ny {
            yz.push(fold(&mut (0..nx).map(|x| at(z, y, x))));
        }
    }
    [
        Image2::new(ny, nx, xy),
        Image2::new(nz, nx, xz),
        Image2::new(nz, ny, yz),
    ]
}

pub fn marker_features(
    marker: &MocapMarker,
    raw: &Grid<f32>,
    preprocessed: &Grid<f32>,
    meta: &VolumeMeta,
) -> MarkerFeatures {
    let b = marker_bounding_box(marker, raw.shape(), meta);
    let mut stats = [0.0; 4];
    let mut hu = Vec::with_capacity(if meta.is_3d { 36 } else { 12 });
    for (k, img) in [raw, preprocessed].into_iter().enumerate() {
        let (data, dims) = crop(img, &b);
        let (m, v) = mean_var(&data);
        stats[2 * k] = m;
        stats[2 * k + 1] = v;
        if meta.is_3d {
            for p in max_projections(&data, dims) {
                hu.extend(hu_moments_first6(&p));
            }
        } else {
            hu.extend(hu_moments_first6(&Image2::new(dims[1], dims[2], data)));
        }
    }
    MarkerFeatures { stats, hu }
}

/// Sparse cost matrix over allowed pairs; absent entries are prohibited.
///
/// Rows index markers at `t + 1`, columns markers at `t`. `entries` is sorted
/// by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CostMatrix {
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![f64::INFINITY; self.cols]; self.rows];
        for &(i, j, c) in &self.entries {
            d[i][j] = c;
        }
        d
    }
}

/// Z-score in place; degenerate sets (≤1 value or zero spread) become 0.
pub fn zscore(values: &mut [f64]) {
    if values.len() <= 1 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let (mean, var) = mean_var(values);
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}

/// Sum over features of z-scored absolute differences, divided by the
/// feature count.
fn feature_term(
    pairs: &[(usize, usize)],
    n: usize,
    get: impl Fn(usize, usize, usize) -> f64,
) -> Vec<f64> {
    let mut total = vec![0.0; pairs.len()];
    let mut col = vec![0.0; pairs.len()];
    for f in 0..n {
        for (k, &(i, j)) in pairs.iter().enumerate() {
            col[k] = get(i, j, f);
        }
        zscore(&mut col);
        for (t, c) in total.iter_mut().zip(&col) {
            *t += c;
        }
    }
    total.iter_mut().for_each(|t| *t /= n.max(1) as f64);
    total
}

pub fn build_cost_matrix(
    markers_t: &[MocapMarker],
    markers_t1: &[MocapMarker],
    feats_t: &[MarkerFeatures],
    feats_t1: &[MarkerFeatures],
    meta: &VolumeMeta,
    max_speed_um_s: f64,
) -> CostMatrix {
    let (rows, cols) = (markers_t1.len(), markers_t.len());
    let max_dist = max_speed_um_s * meta.dt;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut speed: Vec<f64> = Vec::new();
    if rows > 0 && cols > 0 {
        let tree = KdTree::new(markers_t.iter().map(|m| m.coord_um).collect());
        for (i, m) in markers_t1.iter().enumerate() {
            for (j, d2) in tree.within(&m.coord_um, max_dist * (1.0 + 1e-9)) {
                let s = d2.sqrt() / meta.dt / max_speed_um_s;
                if s <= 1.0 {
                    pairs.push((i, j));
                    speed.push(s);
                }
            }
        }
    }
    zscore(&mut speed);
    let stats = feature_term(&pairs, 4, |i, j, f| {
        (feats_t1[i].stats[f] - feats_t[j].stats[f]).abs()
    });
    let n_hu = feats_t
        .first()
        .or(feats_t1.first())
        .map_or(0, |f| f.hu.len());
    let hu = feature_term(&pairs, n_hu, |i, j, f| {
        (feats_t1[i].hu[f] - feats_t[j].hu[f]).abs()
    });
    let entries = pairs
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| (i, j, speed[k] + stats[k] + hu[k]))
        .collect();
    CostMatrix {
        rows,
        cols,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// A match between marker `src` at `t` and marker `dst` at `t + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linkage {
    pub src: usize,
    pub dst: usize,
    pub cost: f64,
    pub direction: Direction,
}

/// Forward: each `t` marker to its cheapest `t + 1` marker. Backward: each
/// `t + 1` marker to its cheapest `t` marker. Ties go to the lowest index.
pub fn assign_bidirectional(cost: &CostMatrix) -> Vec<Linkage> {
    let better = |c: f64, k: usize, best: Option<(f64, usize)>| {
        best.is_none_or(|(bc, bk)| c < bc || (c == bc && k < bk))
    };
    let mut by_col: Vec<Option<(f64, usize)>> = vec![None; cost.cols];
    let mut by_row: Vec<Option<(f64, usize)>> = vec![None; cost.rows];
    for &(i, j, c) in &cost.entries {
        if better(c, i, by_col[j]) {
            by_col[j] = Some((c, i));
        }
        if better(c, j, by_row[i]) {
            by_row[i] = Some((c, j));
        }
    }
    let mut out = Vec::new();
    for (j, best) in by_col.iter().enumerate() {
        if let Some((c, i)) = *best {
            out.push(Linkage {
                src: j,
                dst: i,
                cost: c,
                direction: Direction::Forward,
            });
        }
    }
    for (i, best) in by_row.iter().enumerate() {
        if let Some((c, j)) = *best {
            out.push(Linkage {
                src: j,
                dst: i,
                cost: c,
                direction: Direction::Backward,
            });
        }
    }
    out
}

/// Features, costs and linkages between two frames.
pub fn link_frames(
    markers_t: &[MocapMarker],
    markers_t1: &[MocapMarker],
    feats_t: &[MarkerFeatures],
    feats_t1: &[MarkerFeatures],
    meta: &VolumeMeta,
    max_speed_um_s: f64,
) -> Vec<Linkage> {
    let cost = build_cost_matrix(
        markers_t,
        markers_t1,
        feats_t,
        feats_t1,
        meta,
        max_speed_um_s,
    );
    assign_bidirectional(&cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marker(c: Coord, r: f64, meta: &VolumeMeta) -> MocapMarker {
        MocapMarker {
            frame_index: 0,
            coord: c,
            coord_um: meta.to_um(c),
            radius_um: r,
            scale_index: 0,
        }
    }

    #[test]
    fn box_sizes() {
        let meta = VolumeMeta::planar(0.1, 1.0);
        let b = marker_bounding_box(
            &marker([0, 10, 10], 0.2, &meta),
            Shape::planar(30, 30),
            &meta,
        );
        assert_eq!(b.sides(), [1, 4, 4]);
        let b = marker_bounding_box(&marker([0, 0, 0], 0.2, &meta), Shape::planar(30, 30), &meta);
        assert_eq!(b.lo, [0, 0, 0]);
        assert!(b.sides().iter().all(|&s| s >= 1));
        let meta = VolumeMeta::volumetric(0.1, 0.5, 1.0);
        let b = marker_bounding_box(
            &marker([10, 20, 20], 1.0, &meta),
            Shape::new(30, 50, 50),
            &meta,
        );
        assert_eq!(b.sides(), [4, 20, 20]);
    }

    #[test]
    fn constant_box_stats_and_lengths() {
        let meta = VolumeMeta::volumetric(0.1, 0.1, 1.0);
        let raw = Grid::filled(Shape::new(8, 8, 8), 3.0f32);
        let f = marker_features(&marker([4, 4, 4], 0.2, &meta), &raw, &raw, &meta);
        assert_eq!(f.stats[0], 3.0);
        assert_eq!(f.stats[1], 0.0);
        assert_eq!(f.hu.len(), 36);
        let meta = VolumeMeta::planar(0.1, 1.0);
        let raw = Grid::filled(Shape::planar(8, 8), 3.0f32);
        assert_eq!(
            marker_features(&marker([0, 4, 4], 0.2, &meta), &raw, &raw, &meta)
                .hu
                .len(),
            12
        );
    }

    #[test]
    fn speed_gate() {
        let meta = VolumeMeta::planar(0.1, 1.0);
        let a = [marker([0, 0, 0], 0.2, &meta)];
        let near = [marker([0, 0, 5], 0.2, &meta)];
        let far = [marker([0, 0, 15], 0.2, &meta)];
        let f = vec![MarkerFeatures {
            stats: [0.0; 4],
            hu: vec![0.0; 12],
        }];
        let c = build_cost_matrix(&a, &near, &f, &f, &meta, 1.0);
        assert_eq!(c.entries.len(), 1);
        assert_eq!(c.entries[0].2, 0.0);
        let c = build_cost_matrix(&a, &far, &f, &f, &meta, 1.0);
        assert!(c.entries.is_empty());
        assert!(assign_bidirectional(&c).is_empty());
    }

    #[test]
    fn zscore_degenerate() {
        let mut v = vec![5.0];
        zscore(&mut v);
        assert_eq!(v, vec![0.0]);
        let mut v = vec![2.0, 2.0, 2.0];
        zscore(&mut v);
        assert_eq!(v, vec![0.0; 3]);
        let mut v = vec![1.0, 3.0];
        zscore(&mut v);
        assert_eq!(v, vec![-1.0, 1.0]);
    }

    #[test]
    fn diagonal_dominant_mutual() {
        let c = CostMatrix {
            rows: 2,
            cols: 2,
            entries: vec![(0, 0, -1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, -1.0)],
        };
        let l = assign_bidirectional(&c);
        assert_eq!(l.len(), 4);
        assert!(l.iter().all(|k| k.src == k.dst));
    }

    #[test]
    fn split_gives_one_to_n() {
        let c = CostMatrix {
            rows: 2,
            cols: 1,
            entries: vec![(0, 0, 0.5), (1, 0, 0.7)],
        };
        let l = assign_bidirectional(&c);
        let back: Vec<_> = l
            .iter()
            .filter(|k| k.direction == Direction::Backward)
            .collect();
        assert_eq!(back.len(), 2);
        assert!(back.iter().all(|k| k.src == 0));
    }

    #[test]
    fn ties_take_lowest_index() {
        let c = CostMatrix {
            rows: 2,
            cols: 1,
            entries: vec![(0, 0, 1.0), (1, 0, 1.0)],
        };
        let fwd = assign_bidirectional(&c)
            .into_iter()
            .find(|k| k.direction == Direction::Forward)
            .unwrap();
        assert_eq!(fwd.dst, 0);
    }

    /// Dense oracle: build the same three terms over the full matrix.
    #[test]
    fn cost_matches_dense_oracle() {
        let meta = VolumeMeta::planar(0.1, 1.0);
        let mut s = 7u64;
        let mut rnd = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 33) as f64 / (1u64 << 31) as f64
        };
        let mk = |rnd: &mut dyn FnMut() -> f64| -> (Vec<MocapMarker>, Vec<MarkerFeatures>) {
            (0..6)
                .map(|_| {
                    let c = [0, (rnd() * 15.0) as usize, (rnd() * 15.0) as usize];
                    let f = MarkerFeatures {
                        stats: [rnd(), rnd(), rnd(), rnd()],
                        hu: (0..12).map(|_| rnd()).collect(),
                    };
                    (marker(c, 0.2, &meta), f)
                })
                .unzip()
        };
        let (mt, ft) = mk(&mut rnd);
        let (mt1, ft1) = mk(&mut rnd);
        let c = build_cost_matrix(&mt, &mt1, &ft, &ft1, &meta, 1.0);
        let mut finite = Vec::new();
        for (i, a) in mt1.iter().enumerate() {
            for (j, b) in mt.iter().enumerate() {
                let d = crate::spatial::dist2(&a.coord_um, &b.coord_um).sqrt();
                if d <= 1.0 {
                    finite.push((i, j, d));
                }
            }
        }
        let z = |v: Vec<f64>| -> Vec<f64> {
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
            if v.len() <= 1 || sd == 0.0 {
                vec![0.0; v.len()]
            } else {
                v.iter().map(|x| (x - m) / sd).collect()
            }
        };
        let mut want = z(finite.iter().map(|p| p.2).collect());
        for (n, get) in [
            (
                4usize,
                Box::new(|i: usize, j: usize, f: usize| (ft1[i].stats[f] - ft[j].stats[f]).abs())
                    as Box<dyn Fn(usize, usize, usize) -> f64>,
            ),
            (
                12,
                Box::new(|i: usize, j: usize, f: usize| (ft1[i].hu[f] - ft[j].hu[f]).abs()),
            ),
        ] {
            for f in 0..n {
                let col = z(finite.iter().map(|p| get(p.0, p.1, f)).collect());
                for (w, c) in want.iter_mut().zip(col) {
                    *w += c / n as f64;
                }
            }
        }
        assert_eq!(c.entries.len(), finite.len());
        for ((i, j, _), (fi, fj, _)) in c.entries.iter().zip(&finite) {
            assert_eq!((i, j), (fi, fj));
        }
        for (e, w) in c.entries.iter().zip(&want) {
            assert!((e.2 - w).abs() < 1e-9);
        }
    }
}
