//! Separable Gaussian smoothing, finite-difference derivatives and rank filters.
//!
//! Boundaries use half-sample symmetric reflection (`d c b a | a b c d`).
//! Values are stored as `f32`; every output voxel is accumulated in `f64`.

use rayon::prelude::*;

use crate::grid::{Grid, Shape};
use crate::volume::{anisotropic_sigma_vector, Frame, VolumeMeta};

/// Kernel half-width in standard deviations.
const TRUNCATE: f64 = 4.0;

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Normalised sampled Gaussian, centre at index `radius`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (TRUNCATE * sigma + 0.5) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Correlate `data` with a centred 1-D kernel along `axis` (0 = z, 1 = y, 2 = x).
pub fn convolve_axis(data: &[f32], shape: Shape, axis: usize, kernel: &[f64]) -> Vec<f32> {
    let [_, ny, nx] = shape.0;
    let n = shape.0[axis];
    let radius = (kernel.len() / 2) as isize;
    let stride = [ny * nx, nx, 1][axis];
    let plane = ny * nx;
    let mut out = vec![0f32; data.len()];
    out.par_chunks_mut(plane.max(1))
        .enumerate()
        .for_each(|(z, chunk)| {
            for (off, o) in chunk.iter_mut().enumerate() {
                let idx = z * plane + off;
                let pos = [z, off / nx, off % nx][axis] as isize;
                let base = idx - pos as usize * stride;
                let mut acc = 0.0f64;
                for (j, &w) in kernel.iter().enumerate() {
                    let p = reflect(pos + j as isize - radius, n);
                    acc += w * data[base + p * stride] as f64;
                }
                *o = acc as f32;
            }
        });
    out
}

/// Gaussian smoothing with a per-axis sigma `(z, y, x)`; zero entries skip the axis.
pub fn gaussian_filter(values: &Grid<f32>, sigmas: [f64; 3]) -> Grid<f32> {
    let shape = values.shape();
    let mut data = values.as_slice().to_vec();
    for axis in (0..3).rev() {
        if sigmas[axis] > 0.0 && shape.0[axis] > 1 {
            data = convolve_axis(&data, shape, axis, &gaussian_kernel(sigmas[axis]));
        }
    }
    Grid::from_vec(shape, data).expect("shape preserved")
}

/// Anisotropy-corrected Gaussian smoothing at in-plane scale `sigma_px`.
pub fn gaussian_smooth(frame: &Frame, sigma_px: f64) -> Frame {
    let sigmas = anisotropic_sigma_vector(sigma_px, &frame.meta);
    Frame {
        values: gaussian_filter(&frame.values, sigmas),
        meta: frame.meta.clone(),
    }
}

/// Axes that carry derivatives: `(z, y, x)` for volumes, `(y, x)` for planes.
pub fn active_axes(meta: &VolumeMeta) -> &'static [usize] {
    if meta.is_3d {
        &[0, 1, 2]
    } else {
        &[1, 2]
    }
}

#[inline]
fn sample(data: &[f32], shape: Shape, c: [isize; 3]) -> f64 {
    let [nz, ny, nx] = shape.0;
    let i = (reflect(c[0], nz) * ny + reflect(c[1], ny)) * nx + reflect(c[2], nx);
    data[i] as f64
}

/// Central-difference second derivative `d²f / da db` at one voxel.
#[inline]
pub fn second_derivative(data: &[f32], shape: Shape, c: [isize; 3], a: usize, b: usize) -> f64 {
    let shift = |c: [isize; 3], axis: usize, d: isize| {
        let mut n = c;
        n[axis] += d;
        n
    };
    if a == b {
        sample(data, shape, shift(c, a, 1)) - 2.0 * sample(data, shape, c)
            + sample(data, shape, shift(c, a, -1))
    } else {
        let pp = sample(data, shape, shift(shift(c, a, 1), b, 1));
        let pm = sample(data, shape, shift(shift(c, a, 1), b, -1));
        let mp = sample(data, shape, shift(shift(c, a, -1), b, 1));
        let mm = sample(data, shape, shift(shift(c, a, -1), b, -1));
        (pp - pm - mp + mm) / 4.0
    }
}

/// Scale-normalised Laplacian of Gaussian: `sigma² · Σ d²(G * f)/da²`.
pub fn log_filter(frame: &Frame, sigma_px: f64) -> Grid<f32> {
    let smoothed = gaussian_smooth(frame, sigma_px);
    let shape = smoothed.shape();
    let axes = active_axes(&frame.meta);
    let data = smoothed.values.as_slice();
    let norm = sigma_px * sigma_px;
    let out: Vec<f32> = (0..shape.len())
        .into_par_iter()
        .map(|i| {
            let c = shape.coord(i);
            let c = [c[0] as isize, c[1] as isize, c[2] as isize];
            let lap: f64 = axes
                .iter()
                .map(|&a| second_derivative(data, shape, c, a, a))
                .sum();
            (lap * norm) as f32
        })
        .collect();
    Grid::from_vec(shape, out).expect("shape preserved")
}

/// Sliding maximum with per-axis half-widths `(z, y, x)`; the window is
/// clipped at the grid boundary.
pub fn maximum_filter(values: &Grid<f32>, half_widths: [usize; 3]) -> Grid<f32> {
    let shape = values.shape();
    let [_, ny, nx] = shape.0;
    let plane = ny * nx;
    let mut data = values.as_slice().to_vec();
    for axis in (0..3).rev() {
        let h = half_widths[axis] as isize;
        let n = shape.0[axis] as isize;
        if h == 0 || n == 1 {
            continue;
        }
        let stride = [plane, nx, 1][axis];
        let src = data.clone();
        data.par_chunks_mut(plane.max(1))
            .enumerate()
            .for_each(|(z, chunk)| {
                for (off, o) in chunk.iter_mut().enumerate() {
                    let idx = z * plane + off;
                    let pos = [z, off / nx, off % nx][axis] as isize;
                    let base = idx - pos as usize * stride;
                    let lo = (pos - h).max(0);
                    let hi = (pos + h).min(n - 1);
                    let mut m = f32::NEG_INFINITY;
                    for p in lo..=hi {
                        m = m.max(src[base + p as usize * stride]);
                    }
                    *o = m;
                }
            });
    }
    Grid::from_vec(shape, data).expect("shape preserved")
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of unsorted samples.
pub fn percentile(values: &[f32], q: f64) -> Option<f32> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    let rank = q / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some((v[lo] as f64 + (v[hi] as f64 - v[lo] as f64) * frac) as f32)
}
