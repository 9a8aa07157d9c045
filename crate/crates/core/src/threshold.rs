//! Automatic histogram thresholds: Otsu, Triangle and their minimum.
//!
//! All methods bin the samples into [`BINS`] uniform bins spanning
//! `[min, max]` of the input. A threshold is reported as a bin edge `t`;
//! foreground is `value > t`.

use crate::error::{Error, Result};

pub const BINS: usize = 256;

/// 256-bin histogram over the sample range.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub counts: [u64; BINS],
    pub min: f64,
    pub max: f64,
}

impl Histogram {
    pub fn new(values: &[f32]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("threshold input"));
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            if !v.is_finite() {
                return Err(Error::NonFinite("threshold input"));
            }
            min = min.min(v as f64);
            max = max.max(v as f64);
        }
        let mut counts = [0u64; BINS];
        let width = (max - min) / BINS as f64;
        for &v in values {
            let b = if width > 0.0 {
                (((v as f64 - min) / width) as usize).min(BINS - 1)
            } else {
                0
            };
            counts[b] += 1;
        }
        Ok(Histogram { counts, min, max })
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / BINS as f64
    }

    /// Lower edge of bin `k` (`k == BINS` is the upper bound).
    pub fn edge(&self, k: usize) -> f64 {
        self.min + self.width() * k as f64
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }
}

/// Keep only nonzero samples, the convention for gamma and mask thresholds.
pub fn nonzero(values: &[f32]) -> Vec<f32> {
    values.iter().copied().filter(|&v| v != 0.0).collect()
}

/// Between-class separation of splitting the histogram before bin `k`, in
/// bin-index units, up to a constant factor.
fn otsu_score(n0: u64, s0: u64, n1: u64, s1: u64) -> f64 {
    if n0 == 0 || n1 == 0 {
        return f64::NEG_INFINITY;
    }
    let diff = s0 as i128 * n1 as i128 - s1 as i128 * n0 as i128;
    let diff = diff as f64;
    diff * diff / (n0 as f64 * n1 as f64)
}

/// Split index in `1..BINS` maximising between-class variance.
///
/// Splits inside an empty gap between modes score identically; the middle of
/// the first maximal run is returned.
pub fn otsu_bin(hist: &Histogram) -> usize {
    let total_n: u64 = hist.counts.iter().sum();
    let total_s: u64 = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u64 * c)
        .sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut scores = [f64::NEG_INFINITY; BINS];
    for k in 1..BINS {
        n0 += hist.counts[k - 1];
        s0 += (k as u64 - 1) * hist.counts[k - 1];
        scores[k] = otsu_score(n0, s0, total_n - n0, total_s - s0);
    }
    middle_of_first_max_run(&scores)
}

fn middle_of_first_max_run(scores: &[f64]) -> usize {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = scores.iter().position(|&s| s == best).unwrap_or(1);
    let run = scores[first..].iter().take_while(|&&s| s == best).count();
    first + (run - 1) / 2
}

pub fn otsu_threshold(values: &[f32]) -> Result<f32> {
    let hist = Histogram::new(values)?;
    if hist.is_constant() {
        return Ok(hist.min as f32);
    }
    Ok(hist.edge(otsu_bin(&hist)) as f32)
}

/// Knee bin of the triangle construction and whether the long tail lies
/// below the peak.
pub fn triangle_bin(hist: &Histogram) -> (usize, bool) {
    let c = &hist.counts;
    let mut peak = 0;
    for i in 1..BINS {
        if c[i] > c[peak] {
            peak = i;
        }
    }
    let lo = c.iter().position(|&v| v > 0).unwrap_or(0);
    let hi = c.iter().rposition(|&v| v > 0).unwrap_or(BINS - 1);
    // far end; equal spans resolve to the lower side
    let tail_below = peak - lo >= hi - peak;
    let end = if tail_below { lo } else { hi };

    let (px, py) = (peak as i128, c[peak] as i128);
    let (ex, ey) = (end as i128, c[end] as i128);
    let range: Vec<usize> = if tail_below {
        (end + 1..peak).collect()
    } else {
        (peak + 1..end).collect()
    };
    let mut best: Option<(i128, usize)> = None;
    for b in range {
        // signed cross product; positive when the bin lies below the chord
        let (bx, by) = (b as i128, c[b] as i128);
        let mut cross = (ex - px) * (by - py) - (ey - py) * (bx - px);
        if !tail_below {
            cross = -cross;
        }
        if best.is_none_or(|(d, _)| cross > d) {
            best = Some((cross, b));
        }
    }
    let knee = match best {
        Some((_, b)) => b,
        None if tail_below => peak.saturating_sub(1),
        None => (peak + 1).min(BINS - 1),
    };
    (knee, tail_below)
}

pub fn triangle_threshold(values: &[f32]) -> Result<f32> {
    let hist = Histogram::new(values)?;
    if hist.is_constant() {
        return Ok(hist.min as f32);
    }
    let (knee, tail_below) = triangle_bin(&hist);
    let k = if tail_below { knee + 1 } else { knee };
    Ok(hist.edge(k) as f32)
}

/// Minimum of the Otsu and Triangle thresholds.
pub fn minotri_threshold(values: &[f32]) -> Result<f32> {
    Ok(otsu_threshold(values)?.min(triangle_threshold(values)?))
}
