//! Flow statistics of the voxels surrounding a skeleton node.

use super::motility::{dot, norm, scale, sub, unit, EPS, V3};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeFeatures {
    pub thickness: Option<f64>,
    pub divergence: Option<f64>,
    pub convergence: Option<f64>,
    pub vergere: Option<f64>,
    pub lin_magnitude_variability: Option<f64>,
    pub ang_magnitude_variability: Option<f64>,
    pub lin_direction_uniformity: Option<f64>,
    pub ang_direction_uniformity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Member {
    pub pos: V3,
    pub v01: Option<V3>,
    pub v12: Option<V3>,
    pub ang_vel: Option<V3>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn population_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some((xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt())
}

/// Mean of the full pairwise dot-product matrix of unit orientations,
/// diagonal included. Zero vectors have no orientation and are skipped.
pub fn direction_uniformity(vectors: impl Iterator<Item = V3>) -> Option<f64> {
    let units: Vec<V3> = vectors.filter_map(unit).collect();
    if units.is_empty() {
        return None;
    }
    let n = units.len() as f64;
    let mut total = 0.0;
    for a in &units {
        for b in &units {
            total += dot(*a, *b);
        }
    }
    Some(total / (n * n))
}

/// Features of a node at `center` with border distance `radius`.
pub fn node_features(center: V3, radius: f64, members: &[Member]) -> NodeFeatures {
    let mut conv = Vec::new();
    let mut div = Vec::new();
    for m in members {
        let d = sub(center, m.pos);
        if norm(d) <= EPS {
            continue;
        }
        let u = scale(d, 1.0 / norm(d));
        if let Some(v) = m.v01 {
            conv.push(dot(v, u));
        }
        if let Some(v) = m.v12 {
            div.push(-dot(v, u));
        }
    }
    let convergence = mean(&conv);
    let divergence = mean(&div);
    let lin_mags: Vec<f64> = members.iter().filter_map(|m| m.v12.map(norm)).collect();
    let ang_mags: Vec<f64> = members.iter().filter_map(|m| m.ang_vel.map(norm)).collect();
    NodeFeatures {
        thickness: Some(2.0 * radius),
        divergence,
        convergence,
        vergere: divergence.zip(convergence).map(|(d, c)| d + c),
        lin_magnitude_variability: population_std(&lin_mags),
        ang_magnitude_variability: population_std(&ang_mags),
        lin_direction_uniformity: direction_uniformity(members.iter().filter_map(|m| m.v12)),
        ang_direction_uniformity: direction_uniformity(members.iter().filter_map(|m| m.ang_vel)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize, v: impl Fn(V3) -> (Option<V3>, Option<V3>)) -> Vec<Member> {
        (0..n)
            .map(|k| {
                let th = k as f64 * std::f64::consts::TAU / n as f64;
                let p = [0.0, 0.3 * th.sin(), 0.3 * th.cos()];
                let (v01, v12) = v(p);
                Member {
                    pos: p,
                    v01,
                    v12,
                    ang_vel: None,
                }
            })
            .collect()
    }

    #[test]
    fn uniform_inflow_converges() {
        let s = 0.25;
        let m = ring(12, |p| {
            let inward = scale(p, -s / norm(p));
            (Some(inward), Some(inward))
        });
        let f = node_features([0.0; 3], 0.3, &m);
        assert!((f.convergence.unwrap() - s).abs() < 1e-12);
        assert!((f.divergence.unwrap() + s).abs() < 1e-12);
        assert_eq!(
            f.vergere.unwrap(),
            f.divergence.unwrap() + f.convergence.unwrap()
        );
        assert!(f.lin_magnitude_variability.unwrap() < 1e-12);
        assert_eq!(f.thickness, Some(0.6));
    }

    #[test]
    fn uniformity_extremes() {
        let same: Vec<V3> = (0..7)
            .map(|k| [0.0, 0.1 * (k + 1) as f64, 0.2 * (k + 1) as f64])
            .collect();
        assert!((direction_uniformity(same.into_iter()).unwrap() - 1.0).abs() < 1e-12);
        let split: Vec<V3> = (0..10)
            .map(|k| {
                if k < 5 {
                    [0.0, 0.0, 1.0]
                } else {
                    [0.0, 0.0, -1.0]
                }
            })
            .collect();
        assert_eq!(direction_uniformity(split.into_iter()), Some(0.0));
        assert_eq!(direction_uniformity(std::iter::empty()), None);
    }

    #[test]
    fn members_without_flow_give_nulls() {
        let m = ring(4, |_| (None, None));
        let f = node_features([0.0; 3], 0.2, &m);
        assert_eq!(f.convergence, None);
        assert_eq!(f.vergere, None);
        assert_eq!(f.lin_direction_uniformity, None);
        assert_eq!(f.thickness, Some(0.4));
    }

    proptest::proptest! {
        #[test]
        fn vergere_is_exact_sum_and_uniformity_bounded(
            vs in proptest::collection::vec((proptest::array::uniform3(-1.0f64..1.0), proptest::array::uniform3(-1.0f64..1.0), proptest::array::uniform3(-1.0f64..1.0)), 1..30)
        ) {
            let m: Vec<Member> = vs.iter().map(|&(p, a, b)| Member { pos: p, v01: Some(a), v12: Some(b), ang_vel: Some(a) }).collect();
            let f = node_features([0.0; 3], 1.0, &m);
            if let (Some(d), Some(c), Some(v)) = (f.divergence, f.convergence, f.vergere) {
                proptest::prop_assert_eq!(v, d + c);
            }
            if let Some(u) = f.lin_direction_uniformity {
                proptest::prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&u));
            }
        }
    }
}
