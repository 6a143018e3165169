//! Structured quadratic shell meshes for verification geometries.
//!
//! Both generators extrude a quadrilateral surface grid through the wall in
//! radial layers. Each hexahedral cell is cut into two prisms along a surface
//! diagonal and each prism into three tetrahedra; the quad-face diagonals are
//! chosen from the surface vertex with the smaller key, so neighbouring cells
//! always agree. Midside nodes live on the half-spacing lattice of the
//! parameterization, so every node sits on an exact radius.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Serialize;

use super::{signed_volume6, Cells, Mesh, MeshError, Point};
use crate::element::shape::TET10_EDGES;

const MAX_NODES: usize = 40_000_000;

/// Cell counts of a generated shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShellLayout {
    pub radial: usize,
    pub circumferential: usize,
    pub axial: usize,
}

fn cells_for(length: f64, h: f64) -> usize {
    // guard against 1.5 / 0.5 landing a hair above 3
    (length / h - 1e-9).ceil().max(1.0) as usize
}

fn check_shell_params(a: f64, b: f64, h: f64) -> Result<(), MeshError> {
    if !(a.is_finite() && b.is_finite() && h.is_finite()) {
        return Err(MeshError::DegenerateParams("non-finite parameter".into()));
    }
    if !(a > 0.0 && b > a) {
        return Err(MeshError::DegenerateParams(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    if !(h > 0.0) {
        return Err(MeshError::DegenerateParams(format!("element size must be positive, got {h}")));
    }
    Ok(())
}

pub fn cylinder_layout(a: f64, b: f64, length: f64, h: f64) -> Result<ShellLayout, MeshError> {
    check_shell_params(a, b, h)?;
    if !(length > 0.0 && length.is_finite()) {
        return Err(MeshError::DegenerateParams(format!("length must be positive, got {length}")));
    }
    let layout = ShellLayout {
        radial: cells_for(b - a, h).max(2),
        circumferential: cells_for(2.0 * PI * 0.5 * (a + b), h).max(8),
        axial: cells_for(length, h),
    };
    let nodes = (2 * layout.radial + 1) * 2 * layout.circumferential * (2 * layout.axial + 1);
    if nodes > MAX_NODES {
        return Err(MeshError::DegenerateParams(format!("{nodes} nodes exceeds the generator limit")));
    }
    Ok(layout)
}

pub fn sphere_layout(a: f64, b: f64, h: f64) -> Result<ShellLayout, MeshError> {
    check_shell_params(a, b, h)?;
    let per_face = cells_for(0.5 * PI * 0.5 * (a + b), h).max(2);
    let layout = ShellLayout {
        radial: cells_for(b - a, h).max(2),
        circumferential: per_face,
        axial: per_face,
    };
    let nodes = (2 * layout.radial + 1) * 6 * (2 * per_face + 1).pow(2);
    if nodes > MAX_NODES {
        return Err(MeshError::DegenerateParams(format!("{nodes} nodes exceeds the generator limit")));
    }
    Ok(layout)
}

/// Thick-walled open cylinder along z: inner radius `a`, outer `b`, length `length`.
pub fn generate_cylinder_shell(a: f64, b: f64, length: f64, h: f64) -> Result<Mesh, MeshError> {
    let layout = cylinder_layout(a, b, length, h)?;
    let n_theta = layout.circumferential as i64;
    let n_z = layout.axial as i64;
    let period = 2 * n_theta;
    let mut builder = ShellBuilder::new(
        layout.radial,
        move |k: [i64; 3]| [k[0].rem_euclid(period), k[1], 0],
        move |k: [i64; 3], r: f64| {
            let theta = PI * k[0] as f64 / n_theta as f64;
            let z = length * k[1] as f64 / (2 * n_z) as f64;
            Point::new(r * theta.cos(), r * theta.sin(), z)
        },
        a,
        b,
    );
    for k in 0..n_z {
        for j in 0..n_theta {
            let (j2, k2) = (2 * j, 2 * k);
            builder.add_quad([[j2, k2, 0], [j2 + 2, k2, 0], [j2 + 2, k2 + 2, 0], [j2, k2 + 2, 0]]);
        }
    }
    builder.finish()
}

/// Spherical shell centred at the origin, built on a gnomonic cubed sphere
/// with equiangular spacing.
pub fn generate_sphere_shell(a: f64, b: f64, h: f64) -> Result<Mesh, MeshError> {
    let layout = sphere_layout(a, b, h)?;
    let m = layout.circumferential as i64;
    let mut builder = ShellBuilder::new(
        layout.radial,
        |k| k,
        move |k: [i64; 3], r: f64| {
            let t = |c: i64| (0.25 * PI * c as f64 / m as f64).tan();
            Point::new(t(k[0]), t(k[1]), t(k[2])).normalize() * r
        },
        a,
        b,
    );
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [-1i64, 1] {
            for i in 0..m {
                for j in 0..m {
                    let corner = |di: i64, dj: i64| {
                        let mut k = [0i64; 3];
                        k[axis] = sign * m;
                        k[u] = -m + 2 * (i + di);
                        k[v] = -m + 2 * (j + dj);
                        k
                    };
                    builder.add_quad([corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)]);
                }
            }
        }
    }
    builder.finish()
}

/// Tetrahedral mesh of the box [0, size]^3 with `n` cells per side, each cube
/// cut into six tetrahedra around its main diagonal.
pub fn generate_box(n: usize, size: f64) -> Result<Mesh, MeshError> {
    if n == 0 || !(size > 0.0) {
        return Err(MeshError::DegenerateParams(format!("box needs n > 0 and size > 0, got {n}, {size}")));
    }
    let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let step = size / n as f64;
    let mut nodes = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                nodes.push(Point::new(i as f64 * step, j as f64 * step, k as f64 * step));
            }
        }
    }
    const PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(6 * n.pow(3));
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for path in PATHS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(i, j, k); 4];
                    for (s, &axis) in path.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    let p = tet.map(|v| nodes[v]);
                    if signed_volume6(&p[0], &p[1], &p[2], &p[3]) < 0.0 {
                        tet.swap(1, 2);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    Mesh::new(nodes, Cells::Linear(cells))?.promote_to_quadratic()
}

struct ShellBuilder<C, P> {
    canon: C,
    point: P,
    layers: i64,
    inner: f64,
    outer: f64,
    ids: HashMap<([i64; 3], i64), usize>,
    nodes: Vec<Point>,
    cells: Vec<[usize; 10]>,
}

impl<C, P> ShellBuilder<C, P>
where
    C: Fn([i64; 3]) -> [i64; 3],
    P: Fn([i64; 3], f64) -> Point,
{
    fn new(layers: usize, canon: C, point: P, inner: f64, outer: f64) -> Self {
        ShellBuilder {
            canon,
            point,
            layers: layers as i64,
            inner,
            outer,
            ids: HashMap::new(),
            nodes: Vec::new(),
            cells: Vec::new(),
        }
    }

    fn radius(&self, level: i64) -> f64 {
        if level == 2 * self.layers {
            return self.outer;
        }
        self.inner + (self.outer - self.inner) * level as f64 / (2 * self.layers) as f64
    }

    fn node(&mut self, key: [i64; 3], level: i64) -> usize {
        let key = (self.canon)(key);
        if let Some(&id) = self.ids.get(&(key, level)) {
            return id;
        }
        let p = (self.point)(key, self.radius(level));
        self.nodes.push(p);
        let id = self.nodes.len() - 1;
        self.ids.insert((key, level), id);
        id
    }

    /// Corners in cyclic order, in doubled lattice units (even coordinates).
    fn add_quad(&mut self, q: [[i64; 3]; 4]) {
        self.add_prism_column([q[0], q[1], q[2]]);
        self.add_prism_column([q[0], q[2], q[3]]);
    }

    fn add_prism_column(&mut self, mut tri: [[i64; 3]; 3]) {
        tri.sort_by_key(|k| (self.canon)(*k));
        let [v0, v1, v2] = tri;
        for layer in 0..self.layers {
            let (lo, hi) = (2 * layer, 2 * layer + 2);
            for tet in [
                [(v0, lo), (v1, lo), (v2, lo), (v2, hi)],
                [(v0, lo), (v1, lo), (v1, hi), (v2, hi)],
                [(v0, lo), (v0, hi), (v1, hi), (v2, hi)],
            ] {
                self.add_tet(tet);
            }
        }
    }

    fn add_tet(&mut self, mut v: [([i64; 3], i64); 4]) {
        let pos = v.map(|(k, l)| (self.point)((self.canon)(k), self.radius(l)));
        if signed_volume6(&pos[0], &pos[1], &pos[2], &pos[3]) < 0.0 {
            v.swap(1, 2);
        }
        let mut ids = [0usize; 10];
        for i in 0..4 {
            ids[i] = self.node(v[i].0, v[i].1);
        }
        for (e, &(i, j)) in TET10_EDGES.iter().enumerate() {
            let (ki, li) = v[i];
            let (kj, lj) = v[j];
            let mid = [0, 1, 2].map(|c| (ki[c] + kj[c]) / 2);
            ids[4 + e] = self.node(mid, (li + lj) / 2);
        }
        self.cells.push(ids);
    }

    fn finish(self) -> Result<Mesh, MeshError> {
        Mesh::new(self.nodes, Cells::Quadratic(self.cells))
    }
}
