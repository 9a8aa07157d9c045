#![allow(dead_code)]

use std::path::Path;

use orgscope::tiffio::write_hyperstack_f32;
use orgscope::RunConfig;
use orgscope_core::{Grid, Shape};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Segment endpoints in µm, `(z, y, x)`.
pub type Segment = ([f64; 3], [f64; 3]);

pub fn dist_to_segment(p: [f64; 3], (a, b): Segment) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let l2: f64 = ab.iter().map(|v| v * v).sum();
    let s = if l2 > 0.0 {
        (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..3)
        .map(|k| (ap[k] - s * ab[k]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Tubes with a Gaussian cross-section of width `sigma_um`, shifted by
/// `offset_um`, over a small noise floor.
pub fn tubes(
    shape: Shape,
    spacing: [f64; 3],
    segments: &[Segment],
    sigma_um: f64,
    offset_um: [f64; 3],
    seed: u64,
) -> Grid<f32> {
    tubes_with_noise(shape, spacing, segments, sigma_um, offset_um, seed, 5.0)
}

pub fn tubes_with_noise(
    shape: Shape,
    spacing: [f64; 3],
    segments: &[Segment],
    sigma_um: f64,
    offset_um: [f64; 3],
    seed: u64,
    noise: f64,
) -> Grid<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Grid::filled(shape, 0.0f32);
    for i in 0..shape.len() {
        let c = shape.coord(i);
        let p = [
            c[0] as f64 * spacing[0] - offset_um[0],
            c[1] as f64 * spacing[1] - offset_um[1],
            c[2] as f64 * spacing[2] - offset_um[2],
        ];
        let d = segments
            .iter()
            .map(|s| dist_to_segment(p, *s))
            .fold(f64::INFINITY, f64::min);
        let v = 1000.0 * (-d * d / (2.0 * sigma_um * sigma_um)).exp()
            + 10.0
            + rng.random::<f64>() * noise;
        g[i] = v as f32;
    }
    g
}

/// A branched network inside a `16 × 64 × 64` volume at 0.2 µm (0.25 µm in z).
pub fn network_segments() -> Vec<Segment> {
    vec![
        ([2.0, 3.0, 2.0], [2.0, 6.0, 7.0]),
        ([2.0, 6.0, 7.0], [2.0, 10.0, 9.0]),
        ([2.0, 6.0, 7.0], [2.0, 2.5, 10.5]),
        ([1.6, 9.5, 2.5], [2.4, 11.0, 5.5]),
    ]
}

pub const TUBE_SIGMA_UM: f64 = 0.3;
pub const NET_SHAPE: [usize; 3] = [16, 64, 64];
pub const NET_SPACING: [f64; 3] = [0.25, 0.2, 0.2];

/// Frames of the network translating by `step_um` per frame.
pub fn network_frames(n: usize, step_um: [f64; 3]) -> Vec<Grid<f32>> {
    let [nz, ny, nx] = NET_SHAPE;
    (0..n)
        .map(|t| {
            let off = step_um.map(|s| s * t as f64);
            tubes(
                Shape::new(nz, ny, nx),
                NET_SPACING,
                &network_segments(),
                TUBE_SIGMA_UM,
                off,
                t as u64 + 1,
            )
        })
        .collect()
}

pub fn write_input(path: &Path, frames: &[Grid<f32>]) {
    write_hyperstack_f32(path, frames).unwrap();
}

pub fn volumetric_config(input: &Path, output: &Path) -> RunConfig {
    RunConfig {
        input: input.to_path_buf(),
        output: output.to_path_buf(),
        dim_order: "TZYX".into(),
        spacing_x: Some(NET_SPACING[2]),
        spacing_z: Some(NET_SPACING[0]),
        dt: 1.0,
        threads: Some(2),
        ..RunConfig::default()
    }
}

/// Copy of `g` moved by `dx` voxels along x; vacated voxels take `fill`.
pub fn shift_x(g: &Grid<f32>, dx: usize, fill: f32) -> Grid<f32> {
    let shape = g.shape();
    let mut out = Grid::filled(shape, fill);
    for i in 0..shape.len() {
        let c = shape.coord(i);
        if c[2] + dx < shape.0[2] {
            out.set([c[0], c[1], c[2] + dx], g[i]);
        }
    }
    out
}

/// Random segments chained into a few connected trees inside `extent_um`.
pub fn random_network(
    seed: u64,
    extent_um: [f64; 3],
    trees: usize,
    per_tree: usize,
) -> Vec<Segment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = [0.3 * extent_um[0], 1.5, 1.5];
    let pick = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        std::array::from_fn(|a| margin[a] + rng.random::<f64>() * (extent_um[a] - 2.0 * margin[a]))
    };
    let mut out = Vec::new();
    for _ in 0..trees {
        let mut nodes = vec![pick(&mut rng)];
        for _ in 0..per_tree {
            let from = nodes[rng.random_range(0..nodes.len())];
            let mut to = pick(&mut rng);
            // keep segments short so trees stay compact
            for a in 0..3 {
                to[a] = from[a] + (to[a] - from[a]).clamp(-4.0, 4.0);
            }
            out.push((from, to));
            nodes.push(to);
        }
    }
    out
}
