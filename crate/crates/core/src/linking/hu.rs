//! Hu moment invariants of 2D intensity images.

/// A dense 2D image in row-major `(rows, cols)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Image2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Image2 { rows, cols, data }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

pub fn signed_log(x: f64) -> f64 {
    x.signum() * (x.abs() + 1e-30).log10()
}

/// Raw Hu invariants φ1..φ6; `None` when the image has zero mass.
pub fn hu_raw(img: &Image2) -> Option<[f64; 6]> {
    let mut m00 = 0.0;
    let (mut m10, mut m01) = (0.0, 0.0);
    for r in 0..img.rows {
        for c in 0..img.cols {
            let v = img.at(r, c);
            m00 += v;
            m10 += v * c as f64;
            m01 += v * r as f64;
        }
    }
    if m00 == 0.0 || !m00.is_finite() {
        return None;
    }
    let (xc, yc) = (m10 / m00, m01 / m00);
    let mut mu = [[0.0f64; 4]; 4];
    for r in 0..img.rows {
        let dy = r as f64 - yc;
        for c in 0..img.cols {
            let v = img.at(r, c);
            if v == 0.0 {
                continue;
            }
            let dx = c as f64 - xc;
            let xp = [1.0, dx, dx * dx, dx * dx * dx];
            let yp = [1.0, dy, dy * dy, dy * dy * dy];
            for p in 0..4 {
                for q in 0..4 - p {
                    mu[p][q] += v * xp[p] * yp[q];
                }
            }
        }
    }
    let eta = |p: usize, q: usize| mu[p][q] / m00.powf(1.0 + (p + q) as f64 / 2.0);
    let (n20, n02, n11) = (eta(2, 0), eta(0, 2), eta(1, 1));
    let (n30, n03, n21, n12) = (eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2));
    let a = n30 + n12;
    let b = n21 + n03;
    Some([
        n20 + n02,
        (n20 - n02).powi(2) + 4.0 * n11 * n11,
        (n30 - 3.0 * n12).powi(2) + (3.0 * n21 - n03).powi(2),
        a * a + b * b,
        (n30 - 3.0 * n12) * a * (a * a - 3.0 * b * b)
            + (3.0 * n21 - n03) * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
    ])
}

/// Signed-log Hu invariants; all zeros for an empty image.
pub fn hu_moments_first6(img: &Image2) -> [f64; 6] {
    hu_raw(img).map_or([0.0; 6], |h| h.map(signed_log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(rows: usize, cols: usize, f: impl Fn(f64, f64) -> f64) -> Image2 {
        let mut d = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                d.push(f(r as f64, c as f64));
            }
        }
        Image2::new(rows, cols, d)
    }

    #[test]
    fn empty_is_sentinel() {
        assert_eq!(hu_moments_first6(&raster(4, 4, |_, _| 0.0)), [0.0; 6]);
    }

    #[test]
    fn centred_square_has_known_phi1() {
        // uniform n×n square: mu20 = n²·(n²−1)/12, m00 = n²
        let n: f64 = 5.0;
        let h = hu_raw(&raster(5, 5, |_, _| 1.0)).unwrap();
        let mu20 = n * n * (n * n - 1.0) / 12.0;
        let want = 2.0 * mu20 / (n * n).powi(2);
        assert!((h[0] - want).abs() < 1e-12);
        assert!(h[1].abs() < 1e-15);
    }
}
