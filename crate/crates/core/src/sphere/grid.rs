//! Icosphere triangulation of the unit sphere.
//!
//! Level `L` has `10·4^L + 2` nodes. Each level keeps the nodes of the
//! previous one as a prefix, so results at coinciding nodes can be compared
//! across levels by index.

use std::collections::HashMap;

use crate::geometry::Vec3;

#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub level: u32,
    pub nodes: Vec<Vec3>,
    /// `(θ, φ)` of each node.
    pub angles: Vec<(f64, f64)>,
    pub edges: Vec<(usize, usize)>,
    pub triangles: Vec<[usize; 3]>,
    pub antipode: Vec<usize>,
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node indices adjacent to each node.
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Mean great-circle edge length.
    pub fn mean_spacing(&self) -> f64 {
        let sum: f64 = self
            .edges
            .iter()
            .map(|&(a, b)| self.nodes[a].dot(&self.nodes[b]).clamp(-1.0, 1.0).acos())
            .sum();
        sum / self.edges.len().max(1) as f64
    }

    /// Node closest to `v`.
    pub fn nearest(&self, v: &Vec3) -> usize {
        let v = v.normalize();
        (0..self.len())
            .max_by(|&a, &b| self.nodes[a].dot(&v).total_cmp(&self.nodes[b].dot(&v)))
            .unwrap_or(0)
    }
}

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ];
    let nodes = raw.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (nodes, faces)
}

pub fn icosphere(level: u32) -> SphereGrid {
    let (mut nodes, mut faces) = icosahedron();
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                nodes.push((nodes[a] + nodes[b]).normalize());
                nodes.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut edges: Vec<(usize, usize)> = faces
        .iter()
        .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();

    let key = |v: &Vec3| {
        let q = |x: f64| (x * 1e9).round() as i64;
        (q(v[0]), q(v[1]), q(v[2]))
    };
    let index: HashMap<_, usize> = nodes.iter().enumerate().map(|(i, v)| (key(v), i)).collect();
    let antipode = nodes
        .iter()
        .map(|v| {
            index.get(&key(&-v)).copied().unwrap_or_else(|| {
                // rounding landed on a boundary; fall back to a search
                (0..nodes.len())
                    .min_by(|&a, &b| (nodes[a] + v).norm().total_cmp(&(nodes[b] + v).norm()))
                    .unwrap()
            })
        })
        .collect();
    let angles = nodes
        .iter()
        .map(|v| (v[2].clamp(-1.0, 1.0).acos(), v[1].atan2(v[0])))
        .collect();
    SphereGrid {
        level,
        nodes,
        angles,
        edges,
        triangles: faces,
        antipode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts_and_norms() {
        for level in 0..=4 {
            let g = icosphere(level);
            assert_eq!(g.len(), 10 * 4usize.pow(level) + 2);
            assert_eq!(g.edges.len(), 30 * 4usize.pow(level));
            assert!(g.nodes.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn antipodes_and_nesting() {
        let g3 = icosphere(3);
        let g4 = icosphere(4);
        for (i, v) in g4.nodes.iter().enumerate() {
            let a = g4.antipode[i];
            assert!((g4.nodes[a] + v).norm() < 1e-12);
            assert_eq!(g4.antipode[a], i);
        }
        for (a, b) in g3.nodes.iter().zip(&g4.nodes) {
            assert_eq!(a, b);
        }
        assert!((g4.nodes[g4.nearest(&Vec3::z())] - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn triangulation_is_connected() {
        let g = icosphere(2);
        let adj = g.neighbours();
        let mut seen = vec![false; g.len()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                continue;
            }
            stack.extend(adj[i].iter().copied().filter(|&j| !seen[j]));
        }
        assert!(seen.iter().all(|s| *s));
    }
}
