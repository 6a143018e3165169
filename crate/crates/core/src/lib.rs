//! Linear-elastic wall stress in pressurized vessel geometries.
//!
//! The pipeline meshes (or reads) a wall solid of 10-node tetrahedra, finds
//! its lumen, outer, and cap surfaces, applies a uniform lumen pressure with
//! the caps held fixed, and reports the maximum principal stress on the outer
//! surface as a percentile curve. Units are mm, N, and MPa throughout.

pub mod element;
pub mod io;
pub mod mesh;
pub mod pipeline;
pub mod solve;
pub mod stats;
pub mod stress;

pub use element::{ElasticMaterial, ElementError, StiffnessQuadrature};
pub use mesh::{Mesh, MeshError, PatchKind, SurfacePatch};
pub use pipeline::{run_analysis, AnalysisConfig, PipelineError, ResultBundle};
pub use solve::{SolveError, SolveResult};
pub use stats::{PercentileCurve, StatsError};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
