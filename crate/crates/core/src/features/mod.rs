//! Hierarchical feature tables: voxels, nodes, branches, organelles and the
//! whole image, with cross-level summary statistics.

pub mod branch;
pub mod motility;
pub mod node;
pub mod region;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use branch::{branch_links, branch_skeleton_features, BranchSkeletonFeatures};
pub use motility::{pivot_points, rotation_rate, voxel_motility, MotilityInput, VoxelMotility, V3};
pub use node::{direction_uniformity, node_features, Member, NodeFeatures};
pub use region::{hull_lattice_count, region_properties, RegionProps};

use crate::grid::{Coord, Grid};
use crate::segment::Segmentation;
use crate::spatial::KdTree;
use crate::volume::VolumeMeta;

pub const STATS: [&str; 6] = ["mean", "median", "min", "max", "std", "sum"];

/// Summary statistics of the non-null values; all null when none remain.
pub fn aggregate(values: &[Option<f64>]) -> [Option<f64>; 6] {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return [None; 6];
    }
    let n = v.len() as f64;
    let sum: f64 = v.iter().sum();
    let mean = sum / n;
    let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    let median = if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    };
    [
        Some(mean),
        Some(median),
        Some(v[0]),
        Some(v[k - 1]),
        Some(std),
        Some(sum),
    ]
}

/// Integer id columns followed by nullable float columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub id_columns: Vec<String>,
    pub columns: Vec<String>,
    pub ids: Vec<Vec<i64>>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(id_columns: Vec<String>, columns: Vec<String>) -> Self {
        Table {
            id_columns,
            columns,
            ids: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, ids: Vec<i64>, values: Vec<Option<f64>>) {
        debug_assert_eq!(ids.len(), self.id_columns.len());
        debug_assert_eq!(values.len(), self.columns.len());
        self.ids.push(ids);
        self.values.push(values);
    }

    /// Append rows of a table with the same header.
    pub fn extend(&mut self, other: Table) {
        assert_eq!(self.id_columns, other.id_columns);
        assert_eq!(self.columns, other.columns);
        self.ids.extend(other.ids);
        self.values.extend(other.values);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column_index(name)?;
        Some(self.values.iter().map(|r| r[k]).collect())
    }

    pub fn id_column(&self, name: &str) -> Option<Vec<i64>> {
        let k = self.id_columns.iter().position(|c| c == name)?;
        Some(self.ids.iter().map(|r| r[k]).collect())
    }
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Scalar,
    Vector,
    /// Vector in volumes, signed scalar (the out-of-plane component) in planes.
    Angular,
}

const VOXEL_FEATURES: [(&str, Kind); 36] = [
    ("structure_raw", Kind::Scalar),
    ("intensity_raw", Kind::Scalar),
    ("lin_vel_raw", Kind::Vector),
    ("lin_vel_mag_raw", Kind::Scalar),
    ("lin_vel_orient_raw", Kind::Vector),
    ("lin_vel_rel_raw", Kind::Vector),
    ("lin_vel_mag_rel_raw", Kind::Scalar),
    ("lin_vel_orient_rel_raw", Kind::Vector),
    ("lin_vel_com_raw", Kind::Vector),
    ("lin_vel_mag_com_raw", Kind::Scalar),
    ("lin_vel_orient_com_raw", Kind::Vector),
    ("lin_acc_raw", Kind::Vector),
    ("lin_acc_mag_raw", Kind::Scalar),
    ("lin_acc_rel_raw", Kind::Vector),
    ("lin_acc_rel_mag_raw", Kind::Scalar),
    ("lin_acc_com_raw", Kind::Vector),
    ("lin_acc_com_mag_raw", Kind::Scalar),
    ("directionality_rel_raw", Kind::Scalar),
    ("directionality_com_raw", Kind::Scalar),
    ("directionality_acc_rel_raw", Kind::Scalar),
    ("directionality_acc_com_raw", Kind::Scalar),
    ("ang_vel_raw", Kind::Angular),
    ("ang_vel_mag_raw", Kind::Scalar),
    ("ang_vel_orient_raw", Kind::Angular),
    ("ang_vel_rel_raw", Kind::Angular),
    ("ang_vel_mag_rel_raw", Kind::Scalar),
    ("ang_vel_orient_rel_raw", Kind::Angular),
    ("ang_vel_com_raw", Kind::Angular),
    ("ang_vel_mag_com_raw", Kind::Scalar),
    ("ang_vel_orient_com_raw", Kind::Angular),
    ("ang_acc_raw", Kind::Angular),
    ("ang_acc_mag_raw", Kind::Scalar),
    ("ang_acc_rel_raw", Kind::Angular),
    ("ang_acc_rel_mag_raw", Kind::Scalar),
    ("ang_acc_com_raw", Kind::Angular),
    ("ang_acc_com_mag_raw", Kind::Scalar),
];

fn components(is_3d: bool) -> &'static [(&'static str, usize)] {
    if is_3d {
        &[("z", 0), ("y", 1), ("x", 2)]
    } else {
        &[("y", 1), ("x", 2)]
    }
}

/// Voxel feature columns; vectors are split into `_z/_y/_x` (`_y/_x` in planes).
pub fn voxel_columns(is_3d: bool) -> Vec<String> {
    let mut out = Vec::new();
    for &(name, kind) in &VOXEL_FEATURES {
        match (kind, is_3d) {
            (Kind::Scalar, _) | (Kind::Angular, false) => out.push(name.to_string()),
            _ => out.extend(components(is_3d).iter().map(|(s, _)| format!("{name}_{s}"))),
        }
    }
    out
}

/// Scalar voxel columns that are summarised at higher levels.
pub fn voxel_scalar_columns() -> Vec<&'static str> {
    VOXEL_FEATURES
        .iter()
        .filter(|(_, k)| *k == Kind::Scalar)
        .map(|(n, _)| *n)
        .collect()
}

fn voxel_row(structure: f64, intensity: f64, m: &VoxelMotility, is_3d: bool) -> Vec<Option<f64>> {
    use motility::{norm, unit};
    let mag = |v: Option<V3>| v.map(norm);
    let orient = |v: Option<V3>| v.and_then(unit);
    let s = |x: Option<f64>| (Kind::Scalar, x.map(|x| [x, 0.0, 0.0]));
    let triple = |x: Option<V3>, k: Kind| [(k, x), s(mag(x)), (k, orient(x))];
    let pair = |x: Option<V3>, k: Kind| [(k, x), s(mag(x))];
    let mut entries: Vec<(Kind, Option<V3>)> = vec![s(Some(structure)), s(Some(intensity))];
    entries.extend(triple(m.lin_vel, Kind::Vector));
    entries.extend(triple(m.lin_vel_rel, Kind::Vector));
    entries.extend(triple(m.lin_vel_com, Kind::Vector));
    entries.extend(pair(m.lin_acc, Kind::Vector));
    entries.extend(pair(m.lin_acc_rel, Kind::Vector));
    entries.extend(pair(m.lin_acc_com, Kind::Vector));
    entries.extend([
        s(m.directionality_rel),
        s(m.directionality_com),
        s(m.directionality_acc_rel),
        s(m.directionality_acc_com),
    ]);
    entries.extend(triple(m.ang_vel, Kind::Angular));
    entries.extend(triple(m.ang_vel_rel, Kind::Angular));
    entries.extend(triple(m.ang_vel_com, Kind::Angular));
    entries.extend(pair(m.ang_acc, Kind::Angular));
    entries.extend(pair(m.ang_acc_rel, Kind::Angular));
    entries.extend(pair(m.ang_acc_com, Kind::Angular));
    debug_assert_eq!(entries.len(), VOXEL_FEATURES.len());
    let mut out = Vec::new();
    for (kind, v) in entries {
        match (kind, is_3d) {
            (Kind::Scalar, _) | (Kind::Angular, false) => out.push(v.map(|v| v[0])),
            _ => out.extend(components(is_3d).iter().map(|&(_, k)| v.map(|v| v[k]))),
        }
    }
    out
}

pub const NODE_COLUMNS: [&str; 8] = [
    "thickness_raw",
    "ang_direction_uniformity_raw",
    "lin_direction_uniformity_raw",
    "ang_magnitude_variability_raw",
    "lin_magnitude_variability_raw",
    "vergere_raw",
    "convergence_raw",
    "divergence_raw",
];

fn node_row(f: &NodeFeatures) -> Vec<Option<f64>> {
    vec![
        f.thickness,
        f.ang_direction_uniformity,
        f.lin_direction_uniformity,
        f.ang_magnitude_variability,
        f.lin_magnitude_variability,
        f.vergere,
        f.convergence,
        f.divergence,
    ]
}

fn region_columns(is_3d: bool) -> Vec<&'static str> {
    let mut c = vec![
        "solidity_raw",
        "extent_raw",
        "axis_length_min_raw",
        "axis_length_maj_raw",
        "area_raw",
        "inertia_tensor_eig_sorted_min",
    ];
    if is_3d {
        c.push("inertia_tensor_eig_sorted_mid");
    }
    c.push("inertia_tensor_eig_sorted_max");
    c
}

fn region_row(p: Option<RegionProps>, is_3d: bool) -> Vec<Option<f64>> {
    let mut r = vec![
        p.map(|p| p.solidity),
        p.map(|p| p.extent),
        p.map(|p| p.axis_length_min),
        p.map(|p| p.axis_length_maj),
        p.map(|p| p.area),
        p.map(|p| p.inertia_eig_min),
    ];
    if is_3d {
        r.push(p.and_then(|p| p.inertia_eig_mid));
    }
    r.push(p.map(|p| p.inertia_eig_max));
    r
}

pub fn branch_columns(is_3d: bool) -> Vec<&'static str> {
    let mut c = vec!["reassigned_label_raw"];
    c.extend(region_columns(is_3d));
    c.extend([
        "tortuosity_raw",
        "aspect_ratio_raw",
        "length_raw",
        "thickness_raw",
    ]);
    c
}

pub fn organelle_columns(is_3d: bool) -> Vec<&'static str> {
    let mut c = vec!["reassigned_label_raw"];
    c.extend(region_columns(is_3d));
    c
}

fn aggregate_names(prefix: &str, cols: &[&str]) -> Vec<String> {
    cols.iter()
        .flat_map(|c| STATS.iter().map(move |s| format!("{prefix}{c}_{s}")))
        .collect()
}

/// Summaries of `cols` over the `members` rows of `values`.
fn aggregate_rows(
    values: &[Vec<Option<f64>>],
    cols: &[usize],
    members: &[usize],
) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(cols.len() * STATS.len());
    let mut buf = Vec::with_capacity(members.len());
    for &c in cols {
        buf.clear();
        buf.extend(members.iter().map(|&i| values[i][c]));
        out.extend(aggregate(&buf));
    }
    out
}

fn indices(header: &[String], names: &[&str]) -> Vec<usize> {
    names
        .iter()
        .map(|n| header.iter().position(|h| h == n).expect("known column"))
        .collect()
}

/// Members of each group id in `1..=count`, in row order.
fn groups(of: impl Iterator<Item = u32>, count: u32) -> Vec<Vec<usize>> {
    let mut g = vec![Vec::new(); count as usize + 1];
    for (i, id) in of.enumerate() {
        if id != 0 && id <= count {
            g[id as usize].push(i);
        }
    }
    g
}

/// Most frequent nonzero label, lowest label on ties.
fn mode(labels: impl Iterator<Item = u32>) -> Option<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for l in labels.filter(|&l| l != 0) {
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(u32, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l)
}

/// Inputs for one frame. Flow vectors are indexed like the mask voxels in
/// raster order.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    pub frame_index: usize,
    pub meta: &'a VolumeMeta,
    pub raw: &'a Grid<f32>,
    pub structure: &'a Grid<f32>,
    pub seg: &'a Segmentation,
    pub reassigned_organelles: &'a Grid<u32>,
    pub reassigned_branches: &'a Grid<u32>,
    pub fwd: &'a [Option<V3>],
    pub bwd: &'a [Option<V3>],
    pub prev_ang_vel: &'a [Option<V3>],
    pub com_prev: Option<V3>,
    pub com: Option<V3>,
    pub com_next: Option<V3>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameTables {
    pub voxels: Table,
    pub nodes: Table,
    pub branches: Table,
    pub organelles: Table,
    pub image: Table,
}

impl FrameTables {
    pub fn extend(&mut self, other: FrameTables) {
        if self.voxels.columns.is_empty() && self.voxels.id_columns.is_empty() {
            *self = other;
            return;
        }
        self.voxels.extend(other.voxels);
        self.nodes.extend(other.nodes);
        self.branches.extend(other.branches);
        self.organelles.extend(other.organelles);
        self.image.extend(other.image);
    }
}

/// Build all five tables for one frame.
pub fn frame_tables(inp: &FrameInput) -> FrameTables {
    let meta = inp.meta;
    let is_3d = meta.is_3d;
    let seg = inp.seg;
    let shape = seg.mask.shape();
    let frame = inp.frame_index as i64;
    let voxel_idx: Vec<usize> = (0..shape.len()).filter(|&i| seg.mask[i]).collect();
    let coords: Vec<Coord> = voxel_idx.iter().map(|&i| shape.coord(i)).collect();
    let positions: Vec<V3> = coords.iter().map(|&c| meta.to_um(c)).collect();
    let branch_of: Vec<u32> = voxel_idx.iter().map(|&i| seg.branches[i]).collect();
    let organelle_of: Vec<u32> = voxel_idx.iter().map(|&i| seg.organelles[i]).collect();
    assert_eq!(inp.fwd.len(), voxel_idx.len(), "forward flow length");
    assert_eq!(inp.bwd.len(), voxel_idx.len(), "backward flow length");
    assert_eq!(
        inp.prev_ang_vel.len(),
        voxel_idx.len(),
        "previous angular velocity length"
    );

    // voxels
    let motility = voxel_motility(&MotilityInput {
        positions: &positions,
        branch: &branch_of,
        fwd: inp.fwd,
        bwd: inp.bwd,
        prev_ang_vel: inp.prev_ang_vel,
        com_prev: inp.com_prev,
        com: inp.com,
        com_next: inp.com_next,
        dt: meta.dt,
    });
    let vcols = voxel_columns(is_3d);
    let mut voxels = Table::new(
        strings(&[
            "frame",
            "z",
            "y",
            "x",
            "organelle",
            "branch",
            "node",
            "reassigned_organelle",
            "reassigned_branch",
        ]),
        vcols.clone(),
    );
    let vrows: Vec<Vec<Option<f64>>> = voxel_idx
        .par_iter()
        .zip(motility.par_iter())
        .map(|(&i, m)| voxel_row(inp.structure[i] as f64, inp.raw[i] as f64, m, is_3d))
        .collect();
    for (k, &i) in voxel_idx.iter().enumerate() {
        let c = coords[k];
        voxels.ids.push(vec![
            frame,
            c[0] as i64,
            c[1] as i64,
            c[2] as i64,
            seg.organelles[i] as i64,
            seg.branches[i] as i64,
            seg.nodes[i] as i64,
            inp.reassigned_organelles[i] as i64,
            inp.reassigned_branches[i] as i64,
        ]);
    }
    voxels.values = vrows;
    let vscalar = voxel_scalar_columns();
    let vscalar_idx = indices(&vcols, &vscalar);

    // nodes
    let dt = meta.dt;
    let v01: Vec<Option<V3>> = inp
        .bwd
        .iter()
        .map(|d| d.map(|d| motility::scale(d, -1.0 / dt)))
        .collect();
    let tree = KdTree::new(positions.clone());
    let skel = &seg.skeleton;
    let node_data: Vec<(Vec<usize>, NodeFeatures)> = skel
        .voxels
        .par_iter()
        .map(|&c| {
            let center = meta.to_um(c);
            let radius = *seg.distance.get(c);
            let mut members: Vec<usize> = tree
                .within(&center, radius)
                .into_iter()
                .map(|(k, _)| k)
                .collect();
            members.sort_unstable();
            let m: Vec<Member> = members
                .iter()
                .map(|&k| Member {
                    pos: positions[k],
                    v01: v01[k],
                    v12: motility[k].lin_vel,
                    ang_vel: motility[k].ang_vel,
                })
                .collect();
            (members.clone(), node_features(center, radius, &m))
        })
        .collect();
    let mut ncols = strings(&NODE_COLUMNS);
    ncols.extend(aggregate_names("", &vscalar));
    let mut nodes = Table::new(
        strings(&["frame", "node_id", "z", "y", "x", "organelle", "branch"]),
        ncols,
    );
    let node_rows: Vec<Vec<Option<f64>>> = node_data
        .par_iter()
        .map(|(members, f)| {
            let mut row = node_row(f);
            row.extend(aggregate_rows(&voxels.values, &vscalar_idx, members));
            row
        })
        .collect();
    for (k, (&c, row)) in skel.voxels.iter().zip(node_rows).enumerate() {
        nodes.push(
            vec![
                frame,
                k as i64 + 1,
                c[0] as i64,
                c[1] as i64,
                c[2] as i64,
                *seg.organelles.get(c) as i64,
                *seg.branches.get(c) as i64,
            ],
            row,
        );
    }
    let node_branch: Vec<u32> = skel.voxels.iter().map(|&c| *seg.branches.get(c)).collect();
    let node_org: Vec<u32> = skel
        .voxels
        .iter()
        .map(|&c| *seg.organelles.get(c))
        .collect();
    let node_idx: Vec<usize> = (0..NODE_COLUMNS.len()).collect();

    // branches
    let bcount = seg.branch_count;
    let voxel_groups = groups(branch_of.iter().copied(), bcount);
    let node_groups = groups(node_branch.iter().copied(), bcount);
    let mut skel_groups: Vec<Vec<usize>> = vec![Vec::new(); bcount as usize + 1];
    for (k, &b) in skel.branch.iter().enumerate() {
        if b != 0 && b <= bcount {
            skel_groups[b as usize].push(k);
        }
    }
    let bown = branch_columns(is_3d);
    let mut bcols = strings(&bown);
    bcols.extend(aggregate_names("", &vscalar));
    bcols.extend(aggregate_names("node_", &NODE_COLUMNS));
    let mut branches = Table::new(strings(&["frame", "branch", "organelle"]), bcols);
    let branch_rows: Vec<(u32, Vec<Option<f64>>)> = (1..=bcount)
        .into_par_iter()
        .map(|b| {
            let members = &voxel_groups[b as usize];
            let vox: Vec<Coord> = members.iter().map(|&k| coords[k]).collect();
            let sk = &skel_groups[b as usize];
            let sk_vox: Vec<Coord> = sk.iter().map(|&k| skel.voxels[k]).collect();
            let sk_cls: Vec<_> = sk.iter().map(|&k| skel.classes[k]).collect();
            let border: Vec<f64> = sk_vox.iter().map(|&c| *seg.distance.get(c)).collect();
            let sf = branch_skeleton_features(&sk_vox, &sk_cls, &border, meta);
            let org = members.first().map_or(0, |&k| organelle_of[k]);
            let mut row = vec![mode(
                members
                    .iter()
                    .map(|&k| inp.reassigned_branches[voxel_idx[k]]),
            )
            .map(|l| l as f64)];
            row.extend(region_row(region_properties(&vox, meta), is_3d));
            row.extend([sf.tortuosity, sf.aspect_ratio, sf.length, sf.thickness]);
            row.extend(aggregate_rows(&voxels.values, &vscalar_idx, members));
            row.extend(aggregate_rows(
                &nodes.values,
                &node_idx,
                &node_groups[b as usize],
            ));
            (org, row)
        })
        .collect();
    for (b, (org, row)) in branch_rows.into_iter().enumerate() {
        branches.push(vec![frame, b as i64 + 1, org as i64], row);
    }
    let branch_org: Vec<u32> = branches.ids.iter().map(|r| r[2] as u32).collect();
    let bown_agg: Vec<&str> = bown[1..].to_vec();
    let bown_idx = indices(&branches.columns, &bown_agg);

    // organelles
    let ocount = seg.organelle_count;
    let org_vox = groups(organelle_of.iter().copied(), ocount);
    let org_nodes = groups(node_org.iter().copied(), ocount);
    let org_branches = groups(branch_org.iter().copied(), ocount);
    let oown = organelle_columns(is_3d);
    let mut ocols = strings(&oown);
    ocols.extend(aggregate_names("", &vscalar));
    ocols.extend(aggregate_names("node_", &NODE_COLUMNS));
    ocols.extend(aggregate_names("branch_", &bown_agg));
    let mut organelles = Table::new(strings(&["frame", "organelle"]), ocols);
    let org_rows: Vec<Vec<Option<f64>>> = (1..=ocount)
        .into_par_iter()
        .map(|o| {
            let members = &org_vox[o as usize];
            let vox: Vec<Coord> = members.iter().map(|&k| coords[k]).collect();
            let mut row = vec![mode(
                members
                    .iter()
                    .map(|&k| inp.reassigned_organelles[voxel_idx[k]]),
            )
            .map(|l| l as f64)];
            row.extend(region_row(region_properties(&vox, meta), is_3d));
            row.extend(aggregate_rows(&voxels.values, &vscalar_idx, members));
            row.extend(aggregate_rows(
                &nodes.values,
                &node_idx,
                &org_nodes[o as usize],
            ));
            row.extend(aggregate_rows(
                &branches.values,
                &bown_idx,
                &org_branches[o as usize],
            ));
            row
        })
        .collect();
    for (o, row) in org_rows.into_iter().enumerate() {
        organelles.push(vec![frame, o as i64 + 1], row);
    }
    let oown_agg: Vec<&str> = oown[1..].to_vec();
    let oown_idx = indices(&organelles.columns, &oown_agg);

    // image
    let mut icols = aggregate_names("", &vscalar);
    icols.extend(aggregate_names("node_", &NODE_COLUMNS));
    icols.extend(aggregate_names("branch_", &bown_agg));
    icols.extend(aggregate_names("organelle_", &oown_agg));
    let mut image = Table::new(strings(&["frame"]), icols);
    let mut row = aggregate_rows(
        &voxels.values,
        &vscalar_idx,
        &(0..voxels.len()).collect::<Vec<_>>(),
    );
    row.extend(aggregate_rows(
        &nodes.values,
        &node_idx,
        &(0..nodes.len()).collect::<Vec<_>>(),
    ));
    row.extend(aggregate_rows(
        &branches.values,
        &bown_idx,
        &(0..branches.len()).collect::<Vec<_>>(),
    ));
    row.extend(aggregate_rows(
        &organelles.values,
        &oown_idx,
        &(0..organelles.len()).collect::<Vec<_>>(),
    ));
    image.push(vec![frame], row);

    FrameTables {
        voxels,
        nodes,
        branches,
        organelles,
        image,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use crate::segment::segment_mask;

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[Some(1.0), None, Some(3.0), Some(2.0)]);
        assert_eq!(
            a,
            [
                Some(2.0),
                Some(2.0),
                Some(1.0),
                Some(3.0),
                Some((2.0f64 / 3.0).sqrt()),
                Some(6.0)
            ]
        );
        let one = aggregate(&[Some(4.5)]);
        assert_eq!(
            one,
            [
                Some(4.5),
                Some(4.5),
                Some(4.5),
                Some(4.5),
                Some(0.0),
                Some(4.5)
            ]
        );
        assert_eq!(aggregate(&[None, None]), [None; 6]);
        assert_eq!(aggregate(&[Some(1.0), Some(4.0)])[1], Some(2.5));
    }

    #[test]
    fn column_names() {
        let c3 = voxel_columns(true);
        assert!(c3.contains(&"lin_vel_raw_z".to_string()));
        assert!(c3.contains(&"ang_vel_rel_raw_x".to_string()));
        assert!(c3.contains(&"lin_vel_mag_rel_raw".to_string()));
        let c2 = voxel_columns(false);
        assert!(c2.contains(&"ang_vel_raw".to_string()));
        assert!(!c2.iter().any(|c| c.ends_with("_z")));
        let mut sorted = c3.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), c3.len());
    }

    #[test]
    fn mode_ties_lowest() {
        assert_eq!(mode([3, 2, 3, 2, 0, 0, 0].into_iter()), Some(2));
        assert_eq!(mode([0, 0].into_iter()), None);
    }

    fn tube_frame() -> (Segmentation, VolumeMeta) {
        let meta = VolumeMeta::planar(0.1, 1.0);
        let mut m = Grid::filled(Shape::planar(9, 24), false);
        for y in 3..6 {
            for x in 2..22 {
                m.set([0, y, x], true);
            }
        }
        (segment_mask(m, &meta), meta)
    }

    #[test]
    fn static_frame_tables_consistent() {
        let (seg, meta) = tube_frame();
        let n = seg.mask.count();
        let raw = seg.mask.map(|&b| if b { 1.0f32 } else { 0.0 });
        let zero = vec![Some([0.0; 3]); n];
        let none = vec![None; n];
        let t = frame_tables(&FrameInput {
            frame_index: 3,
            meta: &meta,
            raw: &raw,
            structure: &raw,
            seg: &seg,
            reassigned_organelles: &seg.organelles,
            reassigned_branches: &seg.branches,
            fwd: &zero,
            bwd: &zero,
            prev_ang_vel: &none,
            com_prev: None,
            com: None,
            com_next: None,
        });
        assert_eq!(t.voxels.len(), n);
        assert_eq!(t.nodes.len(), seg.skeleton.voxels.len());
        assert_eq!(t.branches.len(), seg.branch_count as usize);
        assert_eq!(t.organelles.len(), 1);
        assert_eq!(t.image.len(), 1);
        let mag = t.voxels.column("lin_vel_mag_raw").unwrap();
        assert!(mag.iter().all(|v| *v == Some(0.0)));
        // identities
        for r in 0..t.nodes.len() {
            let g = |c: &str| t.nodes.values[r][t.nodes.column_index(c).unwrap()];
            if let (Some(v), Some(d), Some(c)) =
                (g("vergere_raw"), g("divergence_raw"), g("convergence_raw"))
            {
                assert_eq!(v, d + c);
            }
        }
        let g = |c: &str| t.branches.values[0][t.branches.column_index(c).unwrap()].unwrap();
        assert!((g("aspect_ratio_raw") * g("thickness_raw") - g("length_raw")).abs() < 1e-12);
        assert!((g("tortuosity_raw") - 1.0).abs() < 1e-9);
        let length_sum = t.organelles.values[0]
            [t.organelles.column_index("branch_length_raw_sum").unwrap()]
        .unwrap();
        let lengths: f64 = t
            .branches
            .column("length_raw")
            .unwrap()
            .iter()
            .flatten()
            .sum();
        assert_eq!(length_sum, lengths);
        assert_eq!(t.branches.values[0][0], Some(1.0));
    }
}
