//! Quadratic (P2) Lagrange bases on the tetrahedron and triangle.

use nalgebra::{Matrix3, Vector3};

use super::ElementError;
use crate::mesh::Point;

/// Vertex pairs of the six midside nodes, in canonical order (local nodes 4..10).
pub const TET10_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)];

/// Vertex pairs of the three midside nodes of a 6-node triangle (local nodes 3..6).
pub const TRI6_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Barycentric coordinates of the ten element nodes.
pub const TET10_NODE_BARY: [[f64; 4]; 10] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0, 0.0],
    [0.0, 0.5, 0.5, 0.0],
    [0.5, 0.0, 0.5, 0.0],
    [0.5, 0.0, 0.0, 0.5],
    [0.0, 0.5, 0.0, 0.5],
    [0.0, 0.0, 0.5, 0.5],
];

pub fn tet10_shape(l: [f64; 4]) -> [f64; 10] {
    let mut n = [0.0; 10];
    for i in 0..4 {
        n[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, &(i, j)) in TET10_EDGES.iter().enumerate() {
        n[4 + k] = 4.0 * l[i] * l[j];
    }
    n
}

/// Derivatives of the basis with respect to the reference coordinates
/// (xi, eta, zeta) = (L1, L2, L3), with L0 = 1 - xi - eta - zeta.
pub fn tet10_reference_gradients(l: [f64; 4]) -> [[f64; 3]; 10] {
    // dN/dL_k first, then chain through L0.
    let mut dl = [[0.0; 4]; 10];
    for i in 0..4 {
        dl[i][i] = 4.0 * l[i] - 1.0;
    }
    for (k, &(i, j)) in TET10_EDGES.iter().enumerate() {
        dl[4 + k][i] = 4.0 * l[j];
        dl[4 + k][j] = 4.0 * l[i];
    }
    let mut out = [[0.0; 3]; 10];
    for (o, d) in out.iter_mut().zip(dl.iter()) {
        for m in 0..3 {
            o[m] = d[m + 1] - d[0];
        }
    }
    out
}

/// Spatial basis gradients at one reference point of an isoparametric element.
#[derive(Debug, Clone, Copy)]
pub struct ShapeGradients {
    pub grads: [Vector3<f64>; 10],
    pub det_j: f64,
}

pub fn tet10_shape_grad(l: [f64; 4], coords: &[Point; 10]) -> Result<ShapeGradients, ElementError> {
    let dref = tet10_reference_gradients(l);
    let mut jac = Matrix3::<f64>::zeros();
    for (x, d) in coords.iter().zip(dref.iter()) {
        for m in 0..3 {
            for a in 0..3 {
                jac[(a, m)] += x[a] * d[m];
            }
        }
    }
    let det_j = jac.determinant();
    if !(det_j > 0.0) || !det_j.is_finite() {
        return Err(ElementError::SingularJacobian { det_j });
    }
    let inv_t = jac
        .try_inverse()
        .ok_or(ElementError::SingularJacobian { det_j })?
        .transpose();
    let mut grads = [Vector3::zeros(); 10];
    for (g, d) in grads.iter_mut().zip(dref.iter()) {
        *g = inv_t * Vector3::new(d[0], d[1], d[2]);
    }
    Ok(ShapeGradients { grads, det_j })
}

/// Geometric map of the element: x(L) = sum_i N_i(L) x_i.
pub fn tet10_map(l: [f64; 4], coords: &[Point; 10]) -> Point {
    tet10_shape(l)
        .iter()
        .zip(coords.iter())
        .fold(Vector3::zeros(), |acc, (n, x)| acc + *n * x)
}

pub fn tri6_shape(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Derivatives with respect to (s, t) = (L1, L2).
pub fn tri6_reference_gradients(l: [f64; 3]) -> [[f64; 2]; 6] {
    let [l0, l1, l2] = l;
    [
        [-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)],
        [4.0 * l1 - 1.0, 0.0],
        [0.0, 4.0 * l2 - 1.0],
        [4.0 * (l0 - l1), -4.0 * l1],
        [4.0 * l2, 4.0 * l1],
        [-4.0 * l2, 4.0 * (l0 - l2)],
    ]
}

/// Area-scaled normal (x_s x x_t) of a 6-node triangle at a reference point.
pub fn tri6_area_normal(l: [f64; 3], coords: &[Point; 6]) -> Vector3<f64> {
    let d = tri6_reference_gradients(l);
    let mut xs = Vector3::zeros();
    let mut xt = Vector3::zeros();
    for (x, g) in coords.iter().zip(d.iter()) {
        xs += g[0] * x;
        xt += g[1] * x;
    }
    xs.cross(&xt)
}
