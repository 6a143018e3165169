//! Tetrahedral meshes: storage, file formats, generators, and boundary topology.

pub mod boundary;
pub mod classify;
pub mod generate;
pub mod msh;
pub mod quality;
pub mod stl;

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::quadrature::tet_degree5;
use crate::element::shape::{tet10_shape_grad, TET10_EDGES};

pub use boundary::{extract_boundary, BoundaryFace};
pub use classify::{classify_patches, ClassifyOptions, PatchKind, SurfacePatch};
pub use generate::{generate_box, generate_cylinder_shell, generate_sphere_shell, ShellLayout};
pub use msh::{read_msh, write_msh};
pub use quality::{mesh_quality, MeshQualityReport};
pub use stl::{read_stl, TriangleSoup};

/// Node coordinates in mm.
pub type Point = Vector3<f64>;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("malformed file (line {line}): {reason}")]
    MalformedFile { line: usize, reason: String },
    #[error("unsupported element type {0}")]
    UnsupportedElementType(i64),
    #[error("element {element} has non-positive volume {volume:e}")]
    NonPositiveVolume { element: usize, volume: f64 },
    #[error("element {element} references missing node {node}")]
    NodeOutOfRange { element: usize, node: usize },
    #[error("mesh is already quadratic")]
    AlreadyQuadratic,
    #[error("operation requires a quadratic mesh")]
    NotQuadratic,
    #[error("midside nodes are not shared consistently on edge ({0}, {1})")]
    NonConforming(usize, usize),
    #[error("boundary edge ({0}, {1}) is shared by {2} boundary faces")]
    NonManifoldBoundary(usize, usize, usize),
    #[error("degenerate generator parameters: {0}")]
    DegenerateParams(String),
    #[error("no lateral surface: every boundary region is planar")]
    NoLateralSurface,
    #[error("cannot tell interior from exterior (mean ray crossings {0:.2} vs {1:.2})")]
    AmbiguousClassification(f64, f64),
    #[error("expected 2 lateral regions, found {0}")]
    TooManyLateralRegions(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MeshError {
    pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> Self {
        MeshError::MalformedFile {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementOrder {
    Linear,
    Quadratic,
}

/// Element connectivity. Quadratic elements list vertices 0..4 followed by
/// midside nodes on edges (0,1), (1,2), (0,2), (0,3), (1,3), (2,3).
#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Linear(Vec<[usize; 4]>),
    Quadratic(Vec<[usize; 10]>),
}

impl Cells {
    pub fn len(&self) -> usize {
        match self {
            Cells::Linear(c) => c.len(),
            Cells::Quadratic(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn vertices(&self, e: usize) -> [usize; 4] {
        match self {
            Cells::Linear(c) => c[e],
            Cells::Quadratic(c) => [c[e][0], c[e][1], c[e][2], c[e][3]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    cells: Cells,
}

/// Six times the signed volume of the straight tetrahedron (a, b, c, d).
pub fn signed_volume6(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

impl Mesh {
    /// Builds a mesh, checking node ranges and that every vertex
    /// sub-tetrahedron has positive volume.
    pub fn new(nodes: Vec<Point>, cells: Cells) -> Result<Self, MeshError> {
        let n = nodes.len();
        let check = |e: usize, ids: &[usize]| -> Result<(), MeshError> {
            match ids.iter().find(|&&id| id >= n) {
                Some(&node) => Err(MeshError::NodeOutOfRange { element: e, node }),
                None => Ok(()),
            }
        };
        match &cells {
            Cells::Linear(c) => c.iter().enumerate().try_for_each(|(e, ids)| check(e, ids))?,
            Cells::Quadratic(c) => c.iter().enumerate().try_for_each(|(e, ids)| check(e, ids))?,
        }
        let mesh = Mesh { nodes, cells };
        for e in 0..mesh.cells.len() {
            let volume = mesh.vertex_volume(e);
            if !(volume > 0.0) {
                return Err(MeshError::NonPositiveVolume { element: e, volume });
            }
        }
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    pub fn order(&self) -> ElementOrder {
        match self.cells {
            Cells::Linear(_) => ElementOrder::Linear,
            Cells::Quadratic(_) => ElementOrder::Quadratic,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.cells.len()
    }

    pub fn quadratic_elements(&self) -> Result<&[[usize; 10]], MeshError> {
        match &self.cells {
            Cells::Quadratic(c) => Ok(c),
            Cells::Linear(_) => Err(MeshError::NotQuadratic),
        }
    }

    pub fn element_vertices(&self, e: usize) -> [usize; 4] {
        self.cells.vertices(e)
    }

    /// Volume of the straight tetrahedron spanned by element `e`'s vertices.
    pub fn vertex_volume(&self, e: usize) -> f64 {
        let v = self.cells.vertices(e);
        signed_volume6(&self.nodes[v[0]], &self.nodes[v[1]], &self.nodes[v[2]], &self.nodes[v[3]]) / 6.0
    }

    pub fn element_coords(&self, element: &[usize; 10]) -> [Point; 10] {
        element.map(|i| self.nodes[i])
    }

    /// Volume of quadratic element `e` under its isoparametric map.
    pub fn element_volume(&self, e: usize) -> f64 {
        match &self.cells {
            Cells::Linear(_) => self.vertex_volume(e),
            Cells::Quadratic(c) => {
                let x = self.element_coords(&c[e]);
                tet_degree5()
                    .iter()
                    .map(|(l, w)| tet10_shape_grad(*l, &x).map(|g| w * g.det_j).unwrap_or(0.0))
                    .sum()
            }
        }
    }

    pub fn volume(&self) -> f64 {
        (0..self.element_count()).map(|e| self.element_volume(e)).sum()
    }

    /// Checks that each edge maps to a single midside node.
    pub fn check_conforming(&self) -> Result<(), MeshError> {
        let cells = self.quadratic_elements()?;
        let mut midside: HashMap<(usize, usize), usize> = HashMap::new();
        for c in cells {
            for (k, &(i, j)) in TET10_EDGES.iter().enumerate() {
                let key = edge_key(c[i], c[j]);
                let existing = *midside.entry(key).or_insert(c[4 + k]);
                if existing != c[4 + k] {
                    return Err(MeshError::NonConforming(key.0, key.1));
                }
            }
        }
        Ok(())
    }

    /// Adds a node at the midpoint of every unique edge.
    pub fn promote_to_quadratic(&self) -> Result<Mesh, MeshError> {
        let cells = match &self.cells {
            Cells::Linear(c) => c,
            Cells::Quadratic(_) => return Err(MeshError::AlreadyQuadratic),
        };
        let mut nodes = self.nodes.clone();
        let mut midside: HashMap<(usize, usize), usize> = HashMap::new();
        let mut out = Vec::with_capacity(cells.len());
        for c in cells {
            let mut q = [0usize; 10];
            q[..4].copy_from_slice(c);
            for (k, &(i, j)) in TET10_EDGES.iter().enumerate() {
                let key = edge_key(c[i], c[j]);
                q[4 + k] = *midside.entry(key).or_insert_with(|| {
                    nodes.push(0.5 * (self.nodes[c[i]] + self.nodes[c[j]]));
                    nodes.len() - 1
                });
            }
            out.push(q);
        }
        Ok(Mesh {
            nodes,
            cells: Cells::Quadratic(out),
        })
    }

    /// Applies `f` to every node coordinate.
    pub fn map_nodes(&self, f: impl Fn(&Point) -> Point) -> Mesh {
        Mesh {
            nodes: self.nodes.iter().map(f).collect(),
            cells: self.cells.clone(),
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn unit_tet_linear() -> Mesh {
        Mesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            Cells::Linear(vec![[0, 1, 2, 3]]),
        )
        .unwrap()
    }

    /// Two tetrahedra sharing the face (1, 2, 3).
    pub fn two_tets_linear() -> Mesh {
        Mesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
                Point::new(1.0, 1.0, 1.0),
            ],
            Cells::Linear(vec![[0, 1, 2, 3], [1, 2, 3, 4]]),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn promote_single_tet() {
        let m = unit_tet_linear().promote_to_quadratic().unwrap();
        assert_eq!(m.node_count(), 10);
        let c = m.quadratic_elements().unwrap()[0];
        for (k, &(i, j)) in TET10_EDGES.iter().enumerate() {
            let mid = 0.5 * (m.nodes()[c[i]] + m.nodes()[c[j]]);
            assert_eq!(m.nodes()[c[4 + k]], mid);
        }
        assert!(matches!(m.promote_to_quadratic(), Err(MeshError::AlreadyQuadratic)));
    }

    #[test]
    fn promote_shares_midsides_between_neighbours() {
        let lin = two_tets_linear();
        // brute-force unique edge count
        let mut edges = HashSet::new();
        if let Cells::Linear(c) = lin.cells() {
            for t in c {
                for &(i, j) in &TET10_EDGES {
                    edges.insert(edge_key(t[i], t[j]));
                }
            }
        }
        assert_eq!(edges.len(), 9);
        let q = lin.promote_to_quadratic().unwrap();
        assert_eq!(q.node_count(), 5 + edges.len());
        q.check_conforming().unwrap();
    }

    #[test]
    fn rejects_inverted_and_out_of_range() {
        let nodes = unit_tet_linear().nodes().to_vec();
        assert!(matches!(
            Mesh::new(nodes.clone(), Cells::Linear(vec![[0, 2, 1, 3]])),
            Err(MeshError::NonPositiveVolume { .. })
        ));
        assert!(matches!(
            Mesh::new(nodes, Cells::Linear(vec![[0, 1, 2, 7]])),
            Err(MeshError::NodeOutOfRange { node: 7, .. })
        ));
    }

    #[test]
    fn quadratic_volume_of_straight_tet() {
        let m = unit_tet_linear().promote_to_quadratic().unwrap();
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-15);
    }
}
