//! Quadratic tetrahedral element mathematics.

pub mod material;
pub mod pressure;
pub mod quadrature;
pub mod shape;
pub mod stiffness;

pub use material::{material_matrix, ElasticMaterial, Matrix6};
pub use pressure::{face_area, face_pressure_load, FaceLoad};
pub use quadrature::{QuadratureRule, StiffnessQuadrature};
pub use shape::{tet10_shape, tet10_shape_grad, ShapeGradients, TET10_EDGES, TET10_NODE_BARY};
pub use stiffness::{element_stiffness, ElementMatrix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error("Poisson's ratio {nu} is at or beyond the incompressible limit 0.5")]
    IncompressibleLimit { nu: f64 },
    #[error("non-physical material (E = {e}, nu = {nu})")]
    NonPhysical { e: f64, nu: f64 },
    #[error("singular or inverted Jacobian (det = {det_j:e})")]
    SingularJacobian { det_j: f64 },
    #[error("degenerate boundary face")]
    DegenerateFace,
}
