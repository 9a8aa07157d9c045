//! Per-voxel linear and angular kinematics relative to no reference, the
//! branch pivot and the image center of mass.

use std::collections::BTreeMap;

pub type V3 = [f64; 3];

/// Norms below this are treated as zero for orientations and angles.
pub const EPS: f64 = 1e-12;

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Cross product of `(z, y, x)` vectors in the right-handed `(x, y, z)` frame.
/// Planar inputs give `[ω_z, 0, 0]`.
pub fn cross(a: V3, b: V3) -> V3 {
    let (ax, ay, az) = (a[2], a[1], a[0]);
    let (bx, by, bz) = (b[2], b[1], b[0]);
    [ax * by - ay * bx, az * bx - ax * bz, ay * bz - az * by]
}

pub fn unit(a: V3) -> Option<V3> {
    let n = norm(a);
    (n > EPS).then(|| scale(a, 1.0 / n))
}

/// `r × v / |r|²`.
pub fn angular_velocity(r: V3, v: V3) -> Option<V3> {
    let r2 = dot(r, r);
    (r2 > EPS * EPS).then(|| scale(cross(r, v), 1.0 / r2))
}

/// Cosine between the relative velocity and the outward radius.
pub fn directionality(r: V3, v: V3) -> Option<f64> {
    let (nr, nv) = (norm(r), norm(v));
    (nr > EPS && nv > EPS).then(|| dot(r, v) / (nr * nv))
}

/// Axis-angle vector of the rotation taking `a` onto `b`.
pub fn rotation_vector(a: V3, b: V3) -> Option<V3> {
    if norm(a) <= EPS || norm(b) <= EPS {
        return None;
    }
    let c = cross(a, b);
    let s = norm(c);
    let angle = s.atan2(dot(a, b));
    if s <= EPS * norm(a) * norm(b) {
        // parallel: no rotation; antiparallel: axis undefined
        return (dot(a, b) > 0.0).then_some([0.0; 3]);
    }
    Some(scale(c, angle / s))
}

/// No-reference angular velocity from the incoming and outgoing velocities.
pub fn rotation_rate(v01: Option<V3>, v12: Option<V3>, dt: f64) -> Option<V3> {
    rotation_vector(v01?, v12?).map(|w| scale(w, 1.0 / dt))
}

fn vdiff(later: Option<V3>, earlier: Option<V3>, dt: f64) -> Option<V3> {
    Some(scale(sub(later?, earlier?), 1.0 / dt))
}

fn sdiff(later: Option<f64>, earlier: Option<f64>, dt: f64) -> Option<f64> {
    Some((later? - earlier?) / dt)
}

/// Per-branch pivot: index of the voxel with the smallest speed, lowest index
/// on ties. Voxels without velocity or branch are skipped.
pub fn pivot_points(branch: &[u32], velocity: &[Option<V3>]) -> BTreeMap<u32, usize> {
    let mut best: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (i, (&b, v)) in branch.iter().zip(velocity).enumerate() {
        let (Some(v), true) = (v, b != 0) else {
            continue;
        };
        let s = norm(*v);
        match best.get(&b) {
            Some(&(bs, _)) if bs <= s => {}
            _ => {
                best.insert(b, (s, i));
            }
        }
    }
    best.into_iter().map(|(b, (_, i))| (b, i)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VoxelMotility {
    pub lin_vel: Option<V3>,
    pub lin_vel_rel: Option<V3>,
    pub lin_vel_com: Option<V3>,
    pub lin_acc: Option<V3>,
    pub lin_acc_rel: Option<V3>,
    pub lin_acc_com: Option<V3>,
    pub directionality_rel: Option<f64>,
    pub directionality_com: Option<f64>,
    pub directionality_acc_rel: Option<f64>,
    pub directionality_acc_com: Option<f64>,
    pub ang_vel: Option<V3>,
    pub ang_vel_rel: Option<V3>,
    pub ang_vel_com: Option<V3>,
    pub ang_acc: Option<V3>,
    pub ang_acc_rel: Option<V3>,
    pub ang_acc_com: Option<V3>,
}

/// Everything one frame's voxels need. Displacements are in µm over one
/// interval: `fwd` towards `t + 1`, `bwd` towards `t - 1`.
#[derive(Debug, Clone, Copy)]
pub struct MotilityInput<'a> {
    pub positions: &'a [V3],
    pub branch: &'a [u32],
    pub fwd: &'a [Option<V3>],
    pub bwd: &'a [Option<V3>],
    /// No-reference angular velocity of the previous frame at each voxel's
    /// back-tracked position.
    pub prev_ang_vel: &'a [Option<V3>],
    pub com_prev: Option<V3>,
    pub com: Option<V3>,
    pub com_next: Option<V3>,
    pub dt: f64,
}

pub fn voxel_motility(inp: &MotilityInput) -> Vec<VoxelMotility> {
    let dt = inp.dt;
    let n = inp.positions.len();
    let v12: Vec<Option<V3>> = inp
        .fwd
        .iter()
        .map(|d| d.map(|d| scale(d, 1.0 / dt)))
        .collect();
    let v01: Vec<Option<V3>> = inp
        .bwd
        .iter()
        .map(|d| d.map(|d| scale(d, -1.0 / dt)))
        .collect();
    let piv12 = pivot_points(inp.branch, &v12);
    let piv01 = pivot_points(inp.branch, &v01);
    let com_v12 = match (inp.com, inp.com_next) {
        (Some(a), Some(b)) => Some(scale(sub(b, a), 1.0 / dt)),
        _ => None,
    };
    let com_v01 = match (inp.com_prev, inp.com) {
        (Some(a), Some(b)) => Some(scale(sub(b, a), 1.0 / dt)),
        _ => None,
    };
    let reference = |piv: &BTreeMap<u32, usize>, v: &[Option<V3>], i: usize| -> Option<(V3, V3)> {
        let p = *piv.get(&inp.branch[i])?;
        Some((sub(inp.positions[i], inp.positions[p]), sub(v[i]?, v[p]?)))
    };
    (0..n)
        .map(|i| {
            let x = inp.positions[i];
            let (a, b) = (v01[i], v12[i]);
            let rel12 = reference(&piv12, &v12, i);
            let rel01 = reference(&piv01, &v01, i);
            let r_com = inp.com.map(|c| sub(x, c));
            let com12 = r_com.zip(b.zip(com_v12).map(|(v, c)| sub(v, c)));
            let com01 = r_com.zip(a.zip(com_v01).map(|(v, c)| sub(v, c)));
            let ang = |rv: Option<(V3, V3)>| rv.and_then(|(r, v)| angular_velocity(r, v));
            let dir = |rv: Option<(V3, V3)>| rv.and_then(|(r, v)| directionality(r, v));
            let ang_vel = rotation_rate(a, b, dt);
            VoxelMotility {
                lin_vel: b,
                lin_vel_rel: rel12.map(|(_, v)| v),
                lin_vel_com: com12.map(|(_, v)| v),
                lin_acc: vdiff(b, a, dt),
                lin_acc_rel: vdiff(rel12.map(|(_, v)| v), rel01.map(|(_, v)| v), dt),
                lin_acc_com: vdiff(com12.map(|(_, v)| v), com01.map(|(_, v)| v), dt),
                directionality_rel: dir(rel12),
                directionality_com: dir(com12),
                directionality_acc_rel: sdiff(dir(rel12), dir(rel01), dt),
                directionality_acc_com: sdiff(dir(com12), dir(com01), dt),
                ang_vel,
                ang_vel_rel: ang(rel12),
                ang_vel_com: ang(com12),
                ang_acc: vdiff(ang_vel, inp.prev_ang_vel[i], dt),
                ang_acc_rel: vdiff(ang(rel12), ang(rel01), dt),
                ang_acc_com: vdiff(ang(com12), ang(com01), dt),
            }
        })
        .collect()
}
