use std::collections::BTreeMap;

use super::csr::CsrMatrix;
use super::SolveError;
use crate::mesh::{Mesh, PatchKind, Point, SurfacePatch};

/// Prescribed displacements, keyed by DOF (3 * node + axis), in mm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dirichlet {
    values: BTreeMap<usize, f64>,
}

impl Dirichlet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(&mut self, dof: usize, value: f64) {
        self.values.insert(dof, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.values.contains_key(&dof)
    }

    /// (dof, value) pairs in ascending DOF order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&d, &v)| (d, v))
    }

    pub fn nodes(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.values.keys().map(|d| d / 3).collect();
        n.dedup();
        n
    }
}

/// Clamps every node of every cap patch in all three directions.
pub fn fixed_caps(patches: &[SurfacePatch]) -> Result<Dirichlet, SolveError> {
    let caps: Vec<_> = patches.iter().filter(|p| p.kind == PatchKind::Cap).collect();
    if caps.is_empty() {
        return Err(SolveError::NoCaps);
    }
    let mut d = Dirichlet::new();
    for cap in caps {
        for &node in &cap.node_set {
            for axis in 0..3 {
                d.fix(3 * node + axis, 0.0);
            }
        }
    }
    Ok(d)
}

/// 3-2-1 point supports removing the rigid-body modes of a free body.
///
/// A is the node farthest from the centroid (fully fixed), B the node farthest
/// from A (fixed along the two axes other than the dominant axis of A->B), and
/// C the node farthest from line AB (fixed along the axis closest to the
/// normal of plane ABC). Ties go to the lowest node index.
pub fn rigid_mode_anchors(mesh: &Mesh) -> Result<Dirichlet, SolveError> {
    let pts = mesh.nodes();
    if pts.len() < 3 {
        return Err(SolveError::DegenerateGeometry("fewer than three nodes".into()));
    }
    let centroid = pts.iter().sum::<Point>() / pts.len() as f64;
    let argmax = |f: &dyn Fn(&Point) -> f64| {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let v = f(p);
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    };
    let (a, _) = argmax(&|p| (p - centroid).norm_squared());
    let pa = pts[a];
    let (b, dist_ab) = argmax(&|p| (p - pa).norm_squared());
    let ab = pts[b] - pa;
    if dist_ab <= 0.0 {
        return Err(SolveError::DegenerateGeometry("all nodes coincide".into()));
    }
    let axis_dir = ab / ab.norm();
    let (c, off_line) = argmax(&|p| {
        let d = p - pa;
        (d - axis_dir * d.dot(&axis_dir)).norm_squared()
    });
    if off_line <= 1e-20 * dist_ab {
        return Err(SolveError::DegenerateGeometry("all nodes are collinear".into()));
    }
    let normal = ab.cross(&(pts[c] - pa));

    let mut d = Dirichlet::new();
    for axis in 0..3 {
        d.fix(3 * a + axis, 0.0);
    }
    let dominant = ab.iamax();
    for axis in (0..3).filter(|&x| x != dominant) {
        d.fix(3 * b + axis, 0.0);
    }
    d.fix(3 * c + normal.iamax(), 0.0);
    Ok(d)
}

/// Maps solutions of the reduced system back to all DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    n_full: usize,
    /// Full DOF id of each free (reduced) DOF.
    free: Vec<usize>,
    prescribed: Vec<(usize, f64)>,
}

impl DofMap {
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.free.len());
        let mut u = vec![0.0; self.n_full];
        for (&dof, &v) in self.free.iter().zip(reduced) {
            u[dof] = v;
        }
        for &(dof, v) in &self.prescribed {
            u[dof] = v;
        }
        u
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    pub map: DofMap,
}

/// Eliminates constrained rows and columns in place, moving their
/// prescribed contributions to the right-hand side.
pub fn apply_dirichlet(mut k: CsrMatrix, f: &[f64], dirichlet: &Dirichlet) -> ReducedSystem {
    let n = k.nrows();
    assert_eq!(f.len(), n);
    let mut new_id = vec![u32::MAX; n];
    let mut prescribed_value = vec![0.0; n];
    let mut free = Vec::with_capacity(n - dirichlet.len().min(n));
    let mut prescribed = Vec::with_capacity(dirichlet.len());
    for (dof, v) in dirichlet.iter() {
        prescribed_value[dof] = v;
        prescribed.push((dof, v));
    }
    for dof in 0..n {
        if !dirichlet.contains(dof) {
            new_id[dof] = free.len() as u32;
            free.push(dof);
        }
    }

    let mut rhs = Vec::with_capacity(free.len());
    let mut write = 0usize;
    let mut row_ptr = Vec::with_capacity(free.len() + 1);
    row_ptr.push(0);
    for &dof in &free {
        let (start, end) = (k.row_ptr[dof], k.row_ptr[dof + 1]);
        let mut b = f[dof];
        for p in start..end {
            let col = k.col_idx[p] as usize;
            let v = k.values[p];
            let nc = new_id[col];
            if nc == u32::MAX {
                b -= v * prescribed_value[col];
            } else {
                k.col_idx[write] = nc;
                k.values[write] = v;
                write += 1;
            }
        }
        rhs.push(b);
        row_ptr.push(write);
    }
    let m = free.len();
    k.col_idx.truncate(write);
    k.values.truncate(write);
    k.col_idx.shrink_to_fit();
    k.values.shrink_to_fit();
    let reduced = CsrMatrix::new(m, m, row_ptr, std::mem::take(&mut k.col_idx), std::mem::take(&mut k.values));
    ReducedSystem {
        k: reduced,
        f: rhs,
        map: DofMap {
            n_full: n,
            free,
            prescribed,
        },
    }
}
