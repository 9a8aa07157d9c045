//! Binary morphology and connected components.

use std::collections::VecDeque;

use crate::grid::{neighbor_offsets, Grid, Mask, Shape};

/// Erosion with a structuring element given as neighbour offsets (origin
/// implied). Voxels outside the grid count as background.
pub fn erode(mask: &Mask, offsets: &[[isize; 3]]) -> Mask {
    let shape = mask.shape();
    let mut out = Grid::filled(shape, false);
    for (i, &set) in mask.as_slice().iter().enumerate() {
        if !set {
            continue;
        }
        let c = shape.coord(i);
        let keep = offsets
            .iter()
            .all(|&o| shape.offset(c, o).is_some_and(|n| *mask.get(n)));
        out[i] = keep;
    }
    out
}

pub fn dilate(mask: &Mask, offsets: &[[isize; 3]]) -> Mask {
    let shape = mask.shape();
    let mut out = mask.clone();
    for (i, &set) in mask.as_slice().iter().enumerate() {
        if !set {
            continue;
        }
        let c = shape.coord(i);
        for &o in offsets {
            if let Some(n) = shape.offset(c, o) {
                out.set(n, true);
            }
        }
    }
    out
}

/// Opening with the radius-1 cross (face neighbours).
pub fn binary_open(mask: &Mask, is_3d: bool) -> Mask {
    let cross = neighbor_offsets(is_3d, false);
    dilate(&erode(mask, &cross), &cross)
}

/// Fill background regions not face-connected to the grid boundary.
pub fn fill_holes(mask: &Mask, is_3d: bool) -> Mask {
    let shape = mask.shape();
    let [nz, ny, nx] = shape.0;
    let offsets = neighbor_offsets(is_3d, false);
    let mut outside = Grid::filled(shape, false);
    let mut queue = VecDeque::new();
    for (i, &set) in mask.as_slice().iter().enumerate() {
        let [z, y, x] = shape.coord(i);
        let on_edge =
            y == 0 || y == ny - 1 || x == 0 || x == nx - 1 || (is_3d && (z == 0 || z == nz - 1));
        if on_edge && !set {
            outside[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let c = shape.coord(i);
        for &o in &offsets {
            if let Some(n) = shape.offset(c, o) {
                let j = shape.index(n);
                if !mask[j] && !outside[j] {
                    outside[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    outside.map(|&o| !o)
}

/// Full-connectivity components labelled `1..=K` in order of first raster
/// visit; returns the label grid and `K`.
pub fn label_components(mask: &Mask, is_3d: bool) -> (Grid<u32>, u32) {
    label_with(mask, &neighbor_offsets(is_3d, true))
}

pub fn label_with(mask: &Mask, offsets: &[[isize; 3]]) -> (Grid<u32>, u32) {
    let shape: Shape = mask.shape();
    let mut labels = Grid::filled(shape, 0u32);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..shape.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let c = shape.coord(i);
            for &o in offsets {
                if let Some(n) = shape.offset(c, o) {
                    let j = shape.index(n);
                    if mask[j] && labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> Mask {
        let ny = rows.len();
        let nx = rows[0].len();
        let mut m = Grid::filled(Shape::planar(ny, nx), false);
        for (y, r) in rows.iter().enumerate() {
            for (x, ch) in r.chars().enumerate() {
                m.set([0, y, x], ch == '#');
            }
        }
        m
    }

    /// Union-find oracle over full connectivity.
    fn uf_count(mask: &Mask, is_3d: bool) -> usize {
        let shape = mask.shape();
        let mut parent: Vec<usize> = (0..shape.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for i in 0..shape.len() {
            if !mask[i] {
                continue;
            }
            for o in neighbor_offsets(is_3d, true) {
                if let Some(n) = shape.offset(shape.coord(i), o) {
                    let j = shape.index(n);
                    if mask[j] {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
            }
        }
        let mut roots: Vec<usize> = (0..shape.len())
            .filter(|&i| mask[i])
            .map(|i| find(&mut parent, i))
            .collect();
        roots.sort();
        roots.dedup();
        roots.len()
    }

    #[test]
    fn components_basic() {
        let m = mask_from(&["##...", "##..#", "....#"]);
        let (l, k) = label_components(&m, false);
        assert_eq!(k, 2);
        assert_eq!(*l.get([0, 0, 0]), 1);
        assert_eq!(*l.get([0, 2, 4]), 2);
        let m = mask_from(&["#..", ".#.", "..#"]);
        assert_eq!(label_components(&m, false).1, 1);
        assert_eq!(uf_count(&m, false), 1);
        assert_eq!(
            label_components(&Grid::filled(Shape::new(3, 3, 3), false), true).1,
            0
        );
    }

    #[test]
    fn components_match_union_find_on_noise() {
        let shape = Shape::new(6, 7, 8);
        let mut m = Grid::filled(shape, false);
        let mut s = 12345u64;
        for i in 0..shape.len() {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            m[i] = (s >> 33).is_multiple_of(5);
        }
        assert_eq!(label_components(&m, true).1 as usize, uf_count(&m, true));
    }

    #[test]
    fn labels_are_translation_equivariant() {
        let m = mask_from(&["#....", "#..##", "....."]);
        let t = {
            // shift by (+1, +1); voxels pushed off the grid are dropped
            let mut g = Grid::filled(m.shape(), false);
            for (c, &v) in m.indexed() {
                if v && c[1] + 1 < 3 && c[2] + 1 < 5 {
                    g.set([0, c[1] + 1, c[2] + 1], true);
                }
            }
            g
        };
        let (a, ka) = label_components(&m, false);
        let (b, kb) = label_components(&t, false);
        assert_eq!(ka, kb);
        for (c, &v) in a.indexed() {
            if v != 0 && c[1] + 1 < 3 && c[2] + 1 < 5 {
                assert_eq!(*b.get([0, c[1] + 1, c[2] + 1]), v);
            }
        }
    }

    #[test]
    fn opening_removes_specks_and_bridges() {
        let m = mask_from(&[
            ".......", ".#.....", ".......", "..###..", "..###..", "..###..",
        ]);
        let o = binary_open(&m, false);
        assert!(!*o.get([0, 1, 1]));
        assert!(*o.get([0, 4, 3]));
    }

    fn cube(n: usize, f: impl Fn(usize, usize, usize) -> bool) -> Mask {
        let mut m = Grid::filled(Shape::new(n, n, n), false);
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    m.set([z, y, x], f(z, y, x));
                }
            }
        }
        m
    }

    #[test]
    fn hole_filling() {
        let solid = cube(7, |z, y, x| {
            (1..6).contains(&z) && (1..6).contains(&y) && (1..6).contains(&x)
        });
        assert_eq!(fill_holes(&solid, true), solid);

        let inner = |v: usize| (2..5).contains(&v);
        let shell = cube(7, |z, y, x| {
            let outer = (1..6).contains(&z) && (1..6).contains(&y) && (1..6).contains(&x);
            outer && !(inner(z) && inner(y) && inner(x))
        });
        assert_eq!(fill_holes(&shell, true), solid);

        let tunnel = cube(7, |z, y, x| {
            (1..6).contains(&z) && (1..6).contains(&y) && (0..7).contains(&x) && !(z == 3 && y == 3)
        });
        assert_eq!(fill_holes(&tunnel, true), tunnel);
    }

    #[test]
    fn planar_ring_can_be_filled_when_asked() {
        let ring = mask_from(&[".....", ".###.", ".#.#.", ".###.", "....."]);
        assert!(*fill_holes(&ring, false).get([0, 2, 2]));
    }
}
