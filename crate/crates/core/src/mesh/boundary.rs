use std::collections::HashMap;

use super::{edge_key, Mesh, MeshError, Point};

/// Local faces of a 10-node tetrahedron. Face `f` is opposite vertex `f`;
/// corners are listed so the right-hand normal points out of a positively
/// oriented element, followed by the midsides of edges (c0,c1), (c1,c2), (c2,c0).
pub const TET10_FACES: [[usize; 6]; 4] = [
    [1, 2, 3, 5, 9, 8],
    [0, 3, 2, 7, 9, 6],
    [0, 1, 3, 4, 8, 7],
    [0, 2, 1, 6, 5, 4],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub element: usize,
    pub local_face: usize,
    /// Three corners then three midsides, outward oriented.
    pub nodes: [usize; 6],
}

impl BoundaryFace {
    pub fn corners(&self) -> [usize; 3] {
        [self.nodes[0], self.nodes[1], self.nodes[2]]
    }

    pub fn coords(&self, mesh: &Mesh) -> [Point; 6] {
        self.nodes.map(|i| mesh.nodes()[i])
    }

    /// Unit normal of the flat corner triangle.
    pub fn corner_normal(&self, mesh: &Mesh) -> Point {
        let [a, b, c] = self.corners().map(|i| mesh.nodes()[i]);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn corner_centroid(&self, mesh: &Mesh) -> Point {
        let [a, b, c] = self.corners().map(|i| mesh.nodes()[i]);
        (a + b + c) / 3.0
    }

    pub fn edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.corners();
        [edge_key(a, b), edge_key(b, c), edge_key(c, a)]
    }
}

fn face_key(mut c: [usize; 3]) -> [usize; 3] {
    c.sort_unstable();
    c
}

/// Faces that belong to exactly one element, in element order.
///
/// Fails if any boundary edge is not shared by exactly two boundary faces.
pub fn extract_boundary(mesh: &Mesh) -> Result<Vec<BoundaryFace>, MeshError> {
    let cells = mesh.quadratic_elements()?;
    let mut count: HashMap<[usize; 3], u32> = HashMap::with_capacity(cells.len() * 2);
    for c in cells {
        for f in &TET10_FACES {
            *count.entry(face_key([c[f[0]], c[f[1]], c[f[2]]])).or_insert(0) += 1;
        }
    }
    let mut faces = Vec::new();
    for (e, c) in cells.iter().enumerate() {
        for (lf, f) in TET10_FACES.iter().enumerate() {
            if count[&face_key([c[f[0]], c[f[1]], c[f[2]]])] == 1 {
                faces.push(BoundaryFace {
                    element: e,
                    local_face: lf,
                    nodes: f.map(|i| c[i]),
                });
            }
        }
    }
    let mut edge_use: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 2);
    for f in &faces {
        for e in f.edges() {
            *edge_use.entry(e).or_insert(0) += 1;
        }
    }
    let mut bad: Vec<_> = edge_use.into_iter().filter(|&(_, n)| n != 2).collect();
    bad.sort_unstable();
    if let Some(&((a, b), n)) = bad.first() {
        return Err(MeshError::NonManifoldBoundary(a, b, n));
    }
    Ok(faces)
}

/// Connected components of a face set, linking faces that share an edge.
/// Returns a component id per face, numbered in order of first appearance.
pub fn face_components(faces: &[BoundaryFace]) -> Vec<usize> {
    let adjacency = face_adjacency(faces);
    let mut comp = vec![usize::MAX; faces.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for seed in 0..faces.len() {
        if comp[seed] != usize::MAX {
            continue;
        }
        comp[seed] = next;
        stack.push(seed);
        while let Some(f) = stack.pop() {
            for &g in &adjacency[f] {
                if comp[g] == usize::MAX {
                    comp[g] = next;
                    stack.push(g);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Edge-neighbours of each face, ascending.
pub(crate) fn face_adjacency(faces: &[BoundaryFace]) -> Vec<Vec<usize>> {
    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(faces.len() * 2);
    for (i, f) in faces.iter().enumerate() {
        for e in f.edges() {
            by_edge.entry(e).or_default().push(i);
        }
    }
    let mut adj = vec![Vec::new(); faces.len()];
    for users in by_edge.values() {
        for &a in users {
            for &b in users {
                if a != b {
                    adj[a].push(b);
                }
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}
