//! Nodal stress recovery and derived scalar fields.

use nalgebra::{Matrix3, SVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::element::{tet10_shape_grad, ElasticMaterial, ElementError, TET10_NODE_BARY};
use crate::mesh::{Mesh, MeshError, SurfacePatch};

pub type Voigt = SVector<f64, 6>;

#[derive(Debug, Error)]
pub enum StressError {
    #[error("element {element}: singular or inverted Jacobian (det = {det_j:e})")]
    SingularJacobian { element: usize, det_j: f64 },
    #[error("patch has no nodes")]
    EmptyPatch,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Per-node stress tensors in Voigt order (xx, yy, zz, xy, yz, zx), MPa.
#[derive(Debug, Clone, PartialEq)]
pub struct StressTensorField {
    pub values: Vec<Voigt>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarField {
    pub name: String,
    pub values: Vec<f64>,
}

pub fn voigt_to_matrix(s: &Voigt) -> Matrix3<f64> {
    Matrix3::new(s[0], s[3], s[5], s[3], s[1], s[4], s[5], s[4], s[2])
}

pub fn matrix_to_voigt(m: &Matrix3<f64>) -> Voigt {
    Voigt::from([m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(1, 2)], m[(0, 2)]])
}

const BATCH: usize = 4096;

/// Evaluates sigma = D sym(grad u) at each element's ten nodes and averages
/// the element values at shared nodes, weighted by element volume.
pub fn recover_stress(mesh: &Mesh, u: &[f64], material: &ElasticMaterial) -> Result<StressTensorField, StressError> {
    let cells = mesh.quadratic_elements()?;
    let n = mesh.node_count();
    assert_eq!(u.len(), 3 * n);
    let d = material.d();
    let mut sum = vec![Voigt::zeros(); n];
    let mut weight = vec![0.0; n];

    for (b, batch) in cells.chunks(BATCH).enumerate() {
        let local = batch
            .par_iter()
            .enumerate()
            .map(|(o, c)| {
                let x = mesh.element_coords(c);
                let volume = mesh.element_volume(b * BATCH + o);
                let mut out = [Voigt::zeros(); 10];
                for (node, l) in TET10_NODE_BARY.iter().enumerate() {
                    let sg = tet10_shape_grad(*l, &x).map_err(|e| match e {
                        ElementError::SingularJacobian { det_j } => StressError::SingularJacobian {
                            element: b * BATCH + o,
                            det_j,
                        },
                        _ => unreachable!("shape gradients only fail on the Jacobian"),
                    })?;
                    let mut grad = Matrix3::zeros();
                    for (g, &id) in sg.grads.iter().zip(c.iter()) {
                        let ui = nalgebra::Vector3::new(u[3 * id], u[3 * id + 1], u[3 * id + 2]);
                        grad += ui * g.transpose();
                    }
                    let strain = Voigt::from([
                        grad[(0, 0)],
                        grad[(1, 1)],
                        grad[(2, 2)],
                        grad[(0, 1)] + grad[(1, 0)],
                        grad[(1, 2)] + grad[(2, 1)],
                        grad[(2, 0)] + grad[(0, 2)],
                    ]);
                    out[node] = d * strain;
                }
                Ok((volume, out))
            })
            .collect::<Result<Vec<_>, StressError>>()?;
        for (c, (volume, values)) in batch.iter().zip(local) {
            for (&id, s) in c.iter().zip(values.iter()) {
                sum[id] += s * volume;
                weight[id] += volume;
            }
        }
    }
    let values = sum
        .into_iter()
        .zip(weight)
        .map(|(s, w)| if w > 0.0 { s / w } else { Voigt::zeros() })
        .collect();
    Ok(StressTensorField { values })
}

/// Principal stresses (s1 >= s2 >= s3) by the trigonometric closed form.
pub fn principal_stresses(s: &Voigt) -> [f64; 3] {
    let (xx, yy, zz, xy, yz, zx) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let mean = (xx + yy + zz) / 3.0;
    let off = xy * xy + yz * yz + zx * zx;
    let (dx, dy, dz) = (xx - mean, yy - mean, zz - mean);
    let j2 = (dx * dx + dy * dy + dz * dz) / 2.0 + off;
    if j2 <= f64::MIN_POSITIVE {
        return [mean; 3];
    }
    // det of the deviator
    let j3 = dx * (dy * dz - yz * yz) - xy * (xy * dz - yz * zx) + zx * (xy * yz - dy * zx);
    let r = (j2 / 3.0).sqrt();
    let cos3 = (j3 / (2.0 * r * r * r)).clamp(-1.0, 1.0);
    let phi = cos3.acos() / 3.0;
    let two_pi_3 = 2.0 * std::f64::consts::FRAC_PI_3;
    let s1 = mean + 2.0 * r * phi.cos();
    let s3 = mean + 2.0 * r * (phi + two_pi_3).cos();
    let s2 = 3.0 * mean - s1 - s3;
    let mut out = [s1, s2, s3];
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

pub fn von_mises(s: &Voigt) -> f64 {
    let [s1, s2, s3] = principal_stresses(s);
    (0.5 * ((s1 - s2).powi(2) + (s2 - s3).powi(2) + (s3 - s1).powi(2))).sqrt()
}

impl StressTensorField {
    pub fn max_principal(&self) -> ScalarField {
        ScalarField {
            name: "MPS".into(),
            values: self.values.iter().map(|s| principal_stresses(s)[0]).collect(),
        }
    }

    pub fn von_mises(&self) -> ScalarField {
        ScalarField {
            name: "vonMises".into(),
            values: self.values.iter().map(von_mises).collect(),
        }
    }
}

/// Field values on the patch's nodes, in ascending node order.
pub fn restrict_to_patch(field: &ScalarField, patch: &SurfacePatch) -> Result<Vec<f64>, StressError> {
    if patch.faces.is_empty() || patch.node_set.is_empty() {
        return Err(StressError::EmptyPatch);
    }
    Ok(patch.node_set.iter().map(|&i| field.values[i]).collect())
}
