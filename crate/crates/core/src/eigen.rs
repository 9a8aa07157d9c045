//! Closed-form eigenvalues of small symmetric matrices.

use std::f64::consts::PI;

/// Eigenvalues of `[[a, b], [b, c]]`, ascending.
pub fn sym2(a: f64, b: f64, c: f64) -> [f64; 2] {
    let m = 0.5 * (a + c);
    let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    [m - d, m + d]
}

/// Eigenvalues of the symmetric matrix with upper triangle
/// `[a00, a01, a02, a11, a12, a22]`, ascending.
pub fn sym3(m: [f64; 6]) -> [f64; 3] {
    let [a00, a01, a02, a11, a12, a22] = m;
    let p1 = a01 * a01 + a02 * a02 + a12 * a12;
    if p1 == 0.0 {
        let mut d = [a00, a11, a22];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let q = (a00 + a11 + a22) / 3.0;
    let p2 = (a00 - q).powi(2) + (a11 - q).powi(2) + (a22 - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let (b00, b11, b22) = ((a00 - q) / p, (a11 - q) / p, (a22 - q) / p);
    let (b01, b02, b12) = (a01 / p, a02 / p, a12 / p);
    let det = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    let mut e = [lo, mid, hi];
    e.sort_by(f64::total_cmp);
    e
}

/// Order eigenvalues by ascending magnitude (sign breaks ties, negative first).
pub fn sort_by_magnitude<const N: usize>(mut e: [f64; N]) -> [f64; N] {
    e.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    e
}
