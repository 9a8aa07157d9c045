//! Region properties: size, equivalent-ellipse axes, inertia eigenvalues,
//! extent and solidity.

use std::collections::BTreeMap;

use crate::eigen::{sym2, sym3};
use crate::grid::Coord;
use crate::volume::VolumeMeta;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionProps {
    pub count: usize,
    pub area: f64,
    pub axis_length_maj: f64,
    pub axis_length_min: f64,
    pub extent: f64,
    pub solidity: f64,
    /// Ascending; planar regions have two eigenvalues and no middle one.
    pub inertia_eig_min: f64,
    pub inertia_eig_mid: Option<f64>,
    pub inertia_eig_max: f64,
}

type P = [i64; 3];

fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: P, b: P) -> P {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: P, b: P) -> i128 {
    (0..3).map(|k| a[k] as i128 * b[k] as i128).sum()
}

fn orient(a: P, b: P, c: P, d: P) -> i128 {
    dot(cross(sub(b, a), sub(c, a)), sub(d, a))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn primitive(v: P) -> P {
    let g = gcd(gcd(v[0], v[1]), v[2]);
    if g == 0 {
        v
    } else {
        v.map(|x| x / g)
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b) - if b < 0 && a.rem_euclid(b) != 0 { 1 } else { 0 }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Points that can be hull vertices: the extremes of every x-row.
fn row_extremes(voxels: &[Coord]) -> Vec<P> {
    let mut rows: BTreeMap<(i64, i64), (i64, i64)> = BTreeMap::new();
    for c in voxels {
        let (z, y, x) = (c[0] as i64, c[1] as i64, c[2] as i64);
        let e = rows.entry((z, y)).or_insert((x, x));
        e.0 = e.0.min(x);
        e.1 = e.1.max(x);
    }
    let mut out = Vec::with_capacity(rows.len() * 2);
    for ((z, y), (lo, hi)) in rows {
        out.push([z, y, lo]);
        if hi != lo {
            out.push([z, y, hi]);
        }
    }
    out
}

/// Counter-clockwise hull of 2D lattice points without collinear vertices.
fn hull2(mut pts: Vec<[i64; 2]>) -> Vec<[i64; 2]> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cr = |o: [i64; 2], a: [i64; 2], b: [i64; 2]| {
        (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128
            - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
    };
    let mut h: Vec<[i64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &[i64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while h.len() >= start + 2 && cr(h[h.len() - 2], h[h.len() - 1], p) <= 0 {
                h.pop();
            }
            h.push(p);
        }
        h.pop();
    }
    h
}

/// Number of lattice points inside or on the convex hull of `voxels`.
pub fn hull_lattice_count(voxels: &[Coord]) -> usize {
    let pts = row_extremes(voxels);
    if pts.is_empty() {
        return 0;
    }
    let p0 = pts[0];
    let Some(p1) = pts.iter().copied().find(|&p| p != p0) else {
        return 1;
    };
    let dir = sub(p1, p0);
    let Some(p2) = pts
        .iter()
        .copied()
        .find(|&p| cross(dir, sub(p, p0)) != [0; 3])
    else {
        // collinear: lattice points along the primitive direction
        let d = primitive(dir);
        let dd = dot(d, d);
        let ts: Vec<i128> = pts.iter().map(|&p| dot(sub(p, p0), d) / dd).collect();
        let (lo, hi) = (ts.iter().min().unwrap(), ts.iter().max().unwrap());
        return (hi - lo + 1) as usize;
    };
    let normal = primitive(cross(dir, sub(p2, p0)));
    match pts.iter().copied().find(|&p| dot(normal, sub(p, p0)) != 0) {
        None => planar_count(&pts, p0, normal),
        Some(p3) => solid_count(&pts, [p0, p1, p2, p3]),
    }
}

fn planar_count(pts: &[P], p0: P, n: P) -> usize {
    // drop the axis with the largest normal component
    let k = (0..3)
        .max_by_key(|&k| (n[k].abs(), std::cmp::Reverse(k)))
        .unwrap();
    let (a, b) = match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let poly = hull2(pts.iter().map(|p| [p[a], p[b]]).collect());
    let rhs = dot(n, p0);
    let lo = [
        poly.iter().map(|p| p[0]).min().unwrap(),
        poly.iter().map(|p| p[1]).min().unwrap(),
    ];
    let hi = [
        poly.iter().map(|p| p[0]).max().unwrap(),
        poly.iter().map(|p| p[1]).max().unwrap(),
    ];
    let m = poly.len();
    let mut count = 0;
    for u in lo[0]..=hi[0] {
        for v in lo[1]..=hi[1] {
            let inside = (0..m).all(|i| {
                let (o, e) = (poly[i], poly[(i + 1) % m]);
                (e[0] - o[0]) as i128 * (v - o[1]) as i128
                    - (e[1] - o[1]) as i128 * (u - o[0]) as i128
                    >= 0
            });
            if !inside {
                continue;
            }
            let rest = rhs - n[a] as i128 * u as i128 - n[b] as i128 * v as i128;
            if rest % n[k] as i128 == 0 {
                count += 1;
            }
        }
    }
    count
}

fn solid_count(pts: &[P], seed: [P; 4]) -> usize {
    let mut verts: Vec<P> = seed.to_vec();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (a, b, c, d) in [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1), (1, 2, 3, 0)] {
        if orient(verts[a], verts[b], verts[c], verts[d]) > 0 {
            faces.push([a, c, b]);
        } else {
            faces.push([a, b, c]);
        }
    }
    for &p in pts {
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| orient(verts[f[0]], verts[f[1]], verts[f[2]], p) > 0)
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges: BTreeMap<(usize, usize), ()> = BTreeMap::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
            for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert(e, ());
            }
        }
        let pi = verts.len();
        verts.push(p);
        let mut next: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, v)| !**v)
            .map(|(f, _)| *f)
            .collect();
        for &(u, v) in edges.keys() {
            if !edges.contains_key(&(v, u)) {
                next.push([u, v, pi]);
            }
        }
        faces = next;
    }
    let planes: Vec<(P, i128)> = faces
        .iter()
        .map(|f| {
            let n = cross(sub(verts[f[1]], verts[f[0]]), sub(verts[f[2]], verts[f[0]]));
            (n, dot(n, verts[f[0]]))
        })
        .collect();
    let lo: P = std::array::from_fn(|k| pts.iter().map(|p| p[k]).min().unwrap());
    let hi: P = std::array::from_fn(|k| pts.iter().map(|p| p[k]).max().unwrap());
    let mut count = 0usize;
    for z in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            let (mut xl, mut xh) = (lo[2] as i128, hi[2] as i128);
            for (n, d) in &planes {
                let r = d - n[0] as i128 * z as i128 - n[1] as i128 * y as i128;
                let nx = n[2] as i128;
                if nx > 0 {
                    xh = xh.min(floor_div(r, nx));
                } else if nx < 0 {
                    xl = xl.max(ceil_div(r, nx));
                } else if r < 0 {
                    xh = xl - 1;
                }
                if xh < xl {
                    break;
                }
            }
            if xh >= xl {
                count += (xh - xl + 1) as usize;
            }
        }
    }
    count
}

/// Properties of a nonempty voxel set; `None` when empty.
pub fn region_properties(voxels: &[Coord], meta: &VolumeMeta) -> Option<RegionProps> {
    let n = voxels.len();
    if n == 0 {
        return None;
    }
    let sp = meta.spacing();
    let nf = n as f64;
    let mut mean = [0.0f64; 3];
    let mut lo = voxels[0];
    let mut hi = voxels[0];
    for c in voxels {
        for k in 0..3 {
            mean[k] += c[k] as f64 * sp[k];
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    mean = mean.map(|m| m / nf);
    let mut cov = [[0.0f64; 3]; 3];
    for c in voxels {
        let d: [f64; 3] = std::array::from_fn(|k| c[k] as f64 * sp[k] - mean[k]);
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for i in 0..3 {
        for j in i..3 {
            cov[i][j] /= nf;
        }
    }
    if n == 1 {
        for k in 0..3 {
            cov[k][k] += sp[k] * sp[k] / 12.0;
        }
    }
    let (maj, min, eig_min, eig_mid, eig_max) = if meta.is_3d {
        let trace = cov[0][0] + cov[1][1] + cov[2][2];
        let inertia = [
            trace - cov[0][0],
            -cov[0][1],
            -cov[0][2],
            trace - cov[1][1],
            -cov[1][2],
            trace - cov[2][2],
        ];
        let e = sym3(inertia);
        let (e0, e1, e2) = (e[2], e[1], e[0]);
        let maj = (10.0 * (e0 + e1 - e2)).max(0.0).sqrt();
        let min = (10.0 * (-e0 + e1 + e2)).max(0.0).sqrt();
        (maj, min, e[0], Some(e[1]), e[2])
    } else {
        let e = sym2(cov[1][1], cov[1][2], cov[2][2]);
        (
            4.0 * e[1].max(0.0).sqrt(),
            4.0 * e[0].max(0.0).sqrt(),
            e[0],
            None,
            e[1],
        )
    };
    let bbox: usize = (0..3).map(|k| hi[k] - lo[k] + 1).product();
    let hull = hull_lattice_count(voxels).max(n);
    Some(RegionProps {
        count: n,
        area: nf * meta.voxel_size(),
        axis_length_maj: maj,
        axis_length_min: min,
        extent: nf / bbox as f64,
        solidity: nf / hull as f64,
        inertia_eig_min: eig_min,
        inertia_eig_mid: eig_mid,
        inertia_eig_max: eig_max,
    })
}
