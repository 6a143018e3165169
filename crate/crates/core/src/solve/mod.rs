//! Global assembly, boundary conditions, and the iterative solve.

pub mod amg;
pub mod assemble;
pub mod bc;
pub mod cg;
pub mod csr;

pub use assemble::{assemble, assemble_load, LoadSpec};
pub use bc::{apply_dirichlet, fixed_caps, rigid_mode_anchors, Dirichlet, DofMap, ReducedSystem};
pub use amg::{
    quadratic_to_linear, rigid_body_space, solve_multigrid, AmgOptions, BlockSpace, Jacobi, Multigrid, Preconditioner,
    DIRECT_COARSE_LIMIT,
};
pub use cg::{solve_cg, solve_pcg, CgOptions, SolveResult};
pub use csr::CsrMatrix;

use thiserror::Error;

use crate::element::ElementError;
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("element {element}: singular or inverted Jacobian (det = {det_j:e})")]
    SingularJacobian { element: usize, det_j: f64 },
    #[error("no Interior patch to load")]
    MissingInteriorPatch,
    #[error("no cap patches to fix")]
    NoCaps,
    #[error("cannot place rigid-mode anchors: {0}")]
    DegenerateGeometry(String),
    #[error("CG did not converge after {iterations} iterations (relative residual {rel_residual:e}; last: {history_tail:?})")]
    SolverDiverged {
        iterations: usize,
        rel_residual: f64,
        history_tail: Vec<f64>,
    },
    #[error("coarse-grid operator of size {size} is not positive definite")]
    SingularCoarseOperator { size: usize },
    #[error("non-positive diagonal at DOF {dof}")]
    ZeroDiagonal { dof: usize },
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}
