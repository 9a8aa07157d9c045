//! Multi-level mesh graphs over skeleton nodes: level `L` links nodes whose
//! hop distance from a start node differs by `2^L` along a monotone walk.

use std::collections::{HashMap, VecDeque};

use crate::features::Table;
use crate::grid::Coord;
use crate::spatial::KdTree;

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub level: u32,
    /// Local node indices with hop distance divisible by `2^level`.
    pub valid: Vec<usize>,
    /// `(u, v)` local index pairs, `u < v` for level 0 and `jump[u] < jump[v]`
    /// above, sorted.
    pub edges: Vec<(usize, usize)>,
}

/// Mesh of one connected skeleton component.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiMesh {
    /// Indices into the frame's skeleton voxel list, ascending.
    pub nodes: Vec<usize>,
    pub coords: Vec<Coord>,
    pub adjacency: Vec<Vec<usize>>,
    pub start: usize,
    pub jump: Vec<u32>,
    pub levels: Vec<Level>,
}

/// 26-neighbourhood adjacency (radius √3 in voxel units), sorted lists.
pub fn neighbor_graph(voxels: &[Coord]) -> Vec<Vec<usize>> {
    let pts: Vec<[f64; 3]> = voxels.iter().map(|c| c.map(|v| v as f64)).collect();
    let tree = KdTree::new(pts.clone());
    let r = 3f64.sqrt() + 1e-9;
    pts.iter()
        .enumerate()
        .map(|(i, p)| {
            let mut n: Vec<usize> = tree
                .within(p, r)
                .into_iter()
                .map(|(j, _)| j)
                .filter(|&j| j != i)
                .collect();
            n.sort_unstable();
            n
        })
        .collect()
}

/// Lowest-index tip (single neighbour), else the lowest index.
pub fn select_start_node(adjacency: &[Vec<usize>]) -> usize {
    adjacency.iter().position(|n| n.len() == 1).unwrap_or(0)
}

/// Breadth-first hop counts from `start`; unreachable nodes are `None`.
pub fn jump_distances(adjacency: &[Vec<usize>], start: usize) -> Vec<Option<u32>> {
    let mut d = vec![None; adjacency.len()];
    if adjacency.is_empty() {
        return d;
    }
    d[start] = Some(0);
    let mut q = VecDeque::from([start]);
    while let Some(u) = q.pop_front() {
        let du = d[u].unwrap();
        for &v in &adjacency[u] {
            if d[v].is_none() {
                d[v] = Some(du + 1);
                q.push_back(v);
            }
        }
    }
    d
}

pub fn max_level(jump: &[u32]) -> u32 {
    let m = jump.iter().copied().max().unwrap_or(0);
    if m == 0 {
        0
    } else {
        m.ilog2()
    }
}

/// Levels `0..=max_level` for one connected component.
pub fn build_levels(adjacency: &[Vec<usize>], jump: &[u32]) -> Vec<Level> {
    let n = adjacency.len();
    let top = max_level(jump);
    let mut levels = Vec::new();
    for l in 0..=top {
        let step = 1u32 << l;
        let valid: Vec<usize> = (0..n).filter(|&i| jump[i].is_multiple_of(step)).collect();
        let mut edges = Vec::new();
        if l == 0 {
            for (u, nb) in adjacency.iter().enumerate() {
                edges.extend(nb.iter().filter(|&&v| v > u).map(|&v| (u, v)));
            }
        } else {
            for &u in &valid {
                let mut frontier = vec![u];
                for s in 1..=step {
                    let want = jump[u] + s;
                    let mut next: Vec<usize> = frontier
                        .iter()
                        .flat_map(|&w| adjacency[w].iter().copied())
                        .filter(|&x| jump[x] == want)
                        .collect();
                    next.sort_unstable();
                    next.dedup();
                    frontier = next;
                    if frontier.is_empty() {
                        break;
                    }
                }
                frontier.sort_unstable();
                edges.extend(frontier.into_iter().map(|v| (u, v)));
            }
        }
        edges.sort_unstable();
        levels.push(Level {
            level: l,
            valid,
            edges,
        });
    }
    levels
}

/// One mesh per connected component of the skeleton voxels.
pub fn build_multimesh(voxels: &[Coord]) -> Vec<MultiMesh> {
    let adj = neighbor_graph(voxels);
    let mut comp = vec![usize::MAX; voxels.len()];
    let mut meshes = Vec::new();
    for seed in 0..voxels.len() {
        if comp[seed] != usize::MAX {
            continue;
        }
        let id = meshes.len();
        let mut members = vec![seed];
        comp[seed] = id;
        let mut q = VecDeque::from([seed]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    q.push_back(v);
                }
            }
        }
        members.sort_unstable();
        let local = |g: usize| members.binary_search(&g).expect("component member");
        let adjacency: Vec<Vec<usize>> = members
            .iter()
            .map(|&g| adj[g].iter().map(|&v| local(v)).collect())
            .collect();
        let start = select_start_node(&adjacency);
        let jump: Vec<u32> = jump_distances(&adjacency, start)
            .into_iter()
            .map(|d| d.expect("connected"))
            .collect();
        let levels = build_levels(&adjacency, &jump);
        meshes.push(MultiMesh {
            coords: members.iter().map(|&g| voxels[g]).collect(),
            nodes: members,
            adjacency,
            start,
            jump,
            levels,
        });
    }
    meshes
}

/// Z-score in place over non-null entries; constant columns become 0.
pub fn zscore_column(values: &mut [Option<f64>]) {
    let xs: Vec<f64> = values.iter().flatten().copied().collect();
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    for v in values.iter_mut().flatten() {
        *v = if std > 0.0 && std.is_finite() {
            (*v - mean) / std
        } else {
            0.0
        };
    }
}

/// Node and edge tables for one frame. Node ids are `1 + skeleton index`,
/// matching the node feature table; `features` are columns of `node_table`.
pub fn export_tables(
    frame: usize,
    meshes: &[MultiMesh],
    node_table: &Table,
    features: &[&str],
) -> (Table, Table) {
    let cols: Vec<String> = features.iter().map(|s| s.to_string()).collect();
    let mut nodes = Table::new(
        [
            "frame",
            "node_id",
            "component",
            "z",
            "y",
            "x",
            "jump_distance",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        cols,
    );
    let idx: Vec<Option<usize>> = features
        .iter()
        .map(|f| node_table.column_index(f))
        .collect();
    let row_by_id: HashMap<i64, usize> = node_table
        .id_column("node_id")
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(r, id)| (id, r))
        .collect();
    let row_of = |g: usize| row_by_id.get(&(g as i64 + 1)).copied();
    let mut rows: Vec<(Vec<i64>, Vec<Option<f64>>)> = Vec::new();
    for (ci, m) in meshes.iter().enumerate() {
        for (k, &g) in m.nodes.iter().enumerate() {
            let c = m.coords[k];
            let r = row_of(g);
            let vals = idx
                .iter()
                .map(|col| Some((r?, (*col)?)).and_then(|(r, col)| node_table.values[r][col]))
                .collect();
            rows.push((
                vec![
                    frame as i64,
                    g as i64 + 1,
                    ci as i64,
                    c[0] as i64,
                    c[1] as i64,
                    c[2] as i64,
                    m.jump[k] as i64,
                ],
                vals,
            ));
        }
    }
    rows.sort_by_key(|(ids, _)| ids[1]);
    for f in 0..features.len() {
        let mut col: Vec<Option<f64>> = rows.iter().map(|(_, v)| v[f]).collect();
        zscore_column(&mut col);
        for (r, v) in rows.iter_mut().zip(col) {
            r.1[f] = v;
        }
    }
    for (ids, vals) in rows {
        nodes.push(ids, vals);
    }
    let mut edges = Table::new(
        ["frame", "level", "u", "v"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Vec::new(),
    );
    for m in meshes {
        for lvl in &m.levels {
            for &(u, v) in &lvl.edges {
                edges.push(
                    vec![
                        frame as i64,
                        lvl.level as i64,
                        m.nodes[u] as i64 + 1,
                        m.nodes[v] as i64 + 1,
                    ],
                    Vec::new(),
                );
            }
        }
    }
    (nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Vec<Coord> {
        (0..n).map(|k| [0, 0, k]).collect()
    }

    #[test]
    fn neighbor_graph_examples() {
        assert_eq!(neighbor_graph(&path(3)), vec![vec![1], vec![0, 2], vec![1]]);
        assert_eq!(
            neighbor_graph(&[[0, 0, 0], [1, 1, 1]]),
            vec![vec![1], vec![0]]
        );
        assert_eq!(
            neighbor_graph(&[[0, 0, 0], [0, 0, 2]]),
            vec![Vec::<usize>::new(), vec![]]
        );
    }

    fn cycle(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| {
                let mut v = vec![(i + 1) % n, (i + n - 1) % n];
                v.sort_unstable();
                v
            })
            .collect()
    }

    #[test]
    fn start_and_jumps() {
        let p = neighbor_graph(&path(4));
        assert_eq!(select_start_node(&p), 0);
        assert_eq!(
            jump_distances(&p, 0),
            vec![Some(0), Some(1), Some(2), Some(3)]
        );
        let c = cycle(6);
        assert_eq!(select_start_node(&c), 0);
        assert_eq!(jump_distances(&c, 0), [0, 1, 2, 3, 2, 1].map(Some).to_vec());
        let star = vec![vec![1, 2, 3], vec![0], vec![0], vec![0]];
        assert_eq!(jump_distances(&star, 0), [0, 1, 1, 1].map(Some).to_vec());
        assert_eq!(select_start_node(&[vec![]]), 0);
    }

    #[test]
    fn path_of_nine_levels() {
        let m = &build_multimesh(&path(9))[0];
        let counts: Vec<usize> = m.levels.iter().map(|l| l.edges.len()).collect();
        assert_eq!(counts, vec![8, 4, 2, 1]);
        assert_eq!(m.levels[1].valid, vec![0, 2, 4, 6, 8]);
        assert_eq!(m.levels[2].edges, vec![(0, 4), (4, 8)]);
        assert_eq!(m.levels[3].edges, vec![(0, 8)]);
    }

    #[test]
    fn small_meshes() {
        let one = &build_multimesh(&path(1))[0];
        assert_eq!(one.levels.len(), 1);
        assert!(one.levels[0].edges.is_empty());
        let two = &build_multimesh(&path(2))[0];
        assert_eq!(two.levels.len(), 1);
        assert_eq!(two.levels[0].edges, vec![(0, 1)]);
    }

    #[test]
    fn levels_on_tree() {
        // T shape: stem of 4 with two arms of 2 from the top
        let v: Vec<Coord> = vec![
            [0, 0, 2],
            [0, 1, 2],
            [0, 2, 2],
            [0, 3, 2],
            [0, 4, 1],
            [0, 5, 0],
            [0, 4, 3],
            [0, 5, 4],
        ];
        let meshes = build_multimesh(&v);
        assert_eq!(meshes.len(), 1);
        let m = &meshes[0];
        for lvl in &m.levels {
            let step = 1u32 << lvl.level;
            for &(u, w) in &lvl.edges {
                assert!(m.jump[u].is_multiple_of(step) && m.jump[w].is_multiple_of(step));
                if lvl.level > 0 {
                    assert_eq!(m.jump[w] - m.jump[u], step);
                }
            }
        }
        // jump 0..5 along each arm: level 2 links jump 0 to both jump-4 nodes
        assert_eq!(m.levels[2].edges.len(), 2);
    }

    #[test]
    fn components_split() {
        let mut v = path(3);
        v.extend([[0, 5, 0], [0, 5, 1]]);
        let meshes = build_multimesh(&v);
        assert_eq!(meshes.len(), 2);
        assert_eq!(meshes[1].nodes, vec![3, 4]);
    }

    #[test]
    fn zscore_handles_constant_and_nulls() {
        let mut c = vec![Some(2.0), None, Some(2.0)];
        zscore_column(&mut c);
        assert_eq!(c, vec![Some(0.0), None, Some(0.0)]);
        let mut d = vec![Some(1.0), Some(3.0)];
        zscore_column(&mut d);
        assert_eq!(d, vec![Some(-1.0), Some(1.0)]);
    }

    #[test]
    fn export_path_of_nine() {
        let meshes = build_multimesh(&path(9));
        let mut nt = Table::new(vec!["frame".into(), "node_id".into()], vec!["f".into()]);
        for k in 0..9 {
            nt.push(vec![0, k + 1], vec![Some(k as f64)]);
        }
        let (nodes, edges) = export_tables(0, &meshes, &nt, &["f"]);
        assert_eq!(nodes.len(), 9);
        assert_eq!(edges.len(), 15);
        let col = nodes.column("f").unwrap();
        let mean: f64 = col.iter().flatten().sum::<f64>() / 9.0;
        assert!(mean.abs() < 1e-12);
        let (n0, e0) = export_tables(0, &[], &nt, &["f"]);
        assert!(n0.is_empty() && e0.is_empty());
    }

    proptest::proptest! {
        #[test]
        fn power_of_two_paths(k in 1u32..6) {
            let n = (1usize << k) + 1;
            let m = &build_multimesh(&path(n))[0];
            proptest::prop_assert_eq!(m.levels.len() as u32, k + 1);
            for lvl in &m.levels {
                proptest::prop_assert_eq!(lvl.edges.len(), 1usize << (k - lvl.level));
            }
            for w in m.levels.windows(2) {
                proptest::prop_assert!(w[1].valid.iter().all(|v| w[0].valid.contains(v)));
            }
        }
    }
}
