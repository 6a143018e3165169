use nalgebra::SMatrix;

use super::material::ElasticMaterial;
use super::quadrature::QuadratureRule;
use super::shape::tet10_shape_grad;
use super::ElementError;
use crate::mesh::Point;

pub type ElementMatrix = SMatrix<f64, 30, 30>;

/// Stiffness of a 10-node tetrahedron, DOF order (node, axis) -> 3 * node + axis.
///
/// Evaluates the integral of B^T D B in its isotropic block form:
/// K_ij[a][b] = lambda g_i[a] g_j[b] + mu g_i[b] g_j[a] + mu delta_ab (g_i . g_j).
pub fn element_stiffness(
    coords: &[Point; 10],
    material: &ElasticMaterial,
    rule: &QuadratureRule<4>,
) -> Result<Box<ElementMatrix>, ElementError> {
    let (lambda, mu) = material.lame();
    let mut k = Box::new(ElementMatrix::zeros());
    for (l, w) in rule.iter() {
        let sg = tet10_shape_grad(*l, coords)?;
        let scale = w * sg.det_j;
        let g = &sg.grads;
        for i in 0..10 {
            for j in i..10 {
                let dot = g[i].dot(&g[j]) * mu;
                for a in 0..3 {
                    for b in 0..3 {
                        let mut v = lambda * g[i][a] * g[j][b] + mu * g[i][b] * g[j][a];
                        if a == b {
                            v += dot;
                        }
                        k[(3 * i + a, 3 * j + b)] += scale * v;
                    }
                }
            }
        }
    }
    for i in 0..30 {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    Ok(k)
}
