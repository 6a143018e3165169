//! End-to-end runs: configuration, analysis, output files, and studies.

mod config;
mod output;
mod studies;

pub use config::{AnalysisConfig, GeneratorSpec, PressureUnit, SolverKind, KPA_PER_MPA, MPA_PER_MMHG};
pub use output::{format_vtk, report, write_report, write_vtk, Report, StressSummary, REPORT_SCHEMA};
pub use studies::{
    cylinder_hoop, load_cohort, run_benchmark, run_cohort, run_convergence, sphere_hoop, synthetic_cylinders,
    BenchmarkKind, BenchmarkReport, CaseFailure, CohortEntry, CohortReport, ConvergenceLevel, ConvergenceReport, HoopComparison, LevelComparison, TOLERANCE,
};

use std::fmt;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::mesh::{self, classify_patches, extract_boundary, ElementOrder, Mesh, MeshError, PatchKind, SurfacePatch};
use crate::solve::{self, CgOptions, LoadSpec, SolveError};
use crate::stats::{PercentileCurve, StatsError};
use crate::stress::{self, ScalarField, StressError, StressTensorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Input,
    Classify,
    Assemble,
    Constrain,
    Solve,
    Recover,
    Statistics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Input => "input",
            Stage::Classify => "classify",
            Stage::Assemble => "assemble",
            Stage::Constrain => "constrain",
            Stage::Solve => "solve",
            Stage::Recover => "recover",
            Stage::Statistics => "statistics",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{stage}: {source}")]
    Mesh { stage: Stage, source: MeshError },
    #[error("{stage}: {source}")]
    Solve { stage: Stage, source: SolveError },
    #[error("{stage}: {source}")]
    Stress { stage: Stage, source: StressError },
    #[error("{stage}: {source}")]
    Stats { stage: Stage, source: StatsError },
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown benchmark '{0}' (expected cylinder or sphere)")]
    UnknownBenchmark(String),
    #[error("a convergence study needs at least two element sizes")]
    NeedTwoSizes,
    #[error("the cohort is empty")]
    EmptyCohort,
}

impl PipelineError {
    /// True for failures of the numerics rather than of the user's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PipelineError::Solve {
                source: SolveError::SolverDiverged { .. }
                    | SolveError::SingularJacobian { .. }
                    | SolveError::ZeroDiagonal { .. }
                    | SolveError::SingularCoarseOperator { .. },
                ..
            } | PipelineError::Stress {
                source: StressError::SingularJacobian { .. },
                ..
            }
        )
    }
}

fn at<E>(stage: Stage) -> impl Fn(E) -> PipelineError
where
    PipelineError: From<(Stage, E)>,
{
    move |e| PipelineError::from((stage, e))
}

impl From<(Stage, MeshError)> for PipelineError {
    fn from((stage, source): (Stage, MeshError)) -> Self {
        PipelineError::Mesh { stage, source }
    }
}
impl From<(Stage, SolveError)> for PipelineError {
    fn from((stage, source): (Stage, SolveError)) -> Self {
        PipelineError::Solve { stage, source }
    }
}
impl From<(Stage, StressError)> for PipelineError {
    fn from((stage, source): (Stage, StressError)) -> Self {
        PipelineError::Stress { stage, source }
    }
}
impl From<(Stage, StatsError)> for PipelineError {
    fn from((stage, source): (Stage, StatsError)) -> Self {
        PipelineError::Stats { stage, source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshSummary {
    pub nodes: usize,
    pub elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PatchSummary {
    pub kind: PatchKind,
    pub faces: usize,
    pub nodes: usize,
    /// mm^2
    pub area: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planarity: Option<f64>,
}

impl From<&SurfacePatch> for PatchSummary {
    fn from(p: &SurfacePatch) -> Self {
        PatchSummary {
            kind: p.kind,
            faces: p.faces.len(),
            nodes: p.node_set.len(),
            area: p.area,
            planarity: p.planarity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Constraint {
    FixedCaps,
    RigidModeAnchors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverSummary {
    pub dofs: usize,
    pub constrained_dofs: usize,
    pub constraint: Constraint,
    pub solver: SolverKind,
    /// Unknowns per multigrid level, finest first; just the system size
    /// for the Jacobi solver.
    pub levels: Vec<usize>,
    pub iterations: usize,
    pub rel_residual: f64,
    /// Wall time of the solve, including preconditioner setup.
    pub seconds: f64,
    /// Wall time of the whole analysis.
    pub total_seconds: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub config: AnalysisConfig,
    pub mesh: Mesh,
    pub patches: Vec<SurfacePatch>,
    pub solver: SolverSummary,
    /// Nodal displacements (mm), 3 per node.
    pub displacement: Vec<f64>,
    pub stress: StressTensorField,
    pub mps: ScalarField,
    pub von_mises: ScalarField,
    /// Percentile curve of maximum principal stress over exterior-surface nodes.
    pub exterior_curve: PercentileCurve,
    pub p99_mpa: f64,
}

impl ResultBundle {
    pub fn mesh_summary(&self) -> MeshSummary {
        MeshSummary {
            nodes: self.mesh.node_count(),
            elements: self.mesh.element_count(),
        }
    }

    pub fn patch(&self, kind: PatchKind) -> Option<&SurfacePatch> {
        self.patches.iter().find(|p| p.kind == kind)
    }
}

/// Reads or generates the quadratic mesh a config describes.
pub fn load_mesh(config: &AnalysisConfig) -> Result<Mesh, PipelineError> {
    let mesh = match (&config.input, &config.generator) {
        (Some(path), None) => mesh::read_msh(path).map_err(at(Stage::Input))?,
        (None, Some(GeneratorSpec::Cylinder { a, b, length, h })) => {
            mesh::generate_cylinder_shell(*a, *b, *length, *h).map_err(at(Stage::Input))?
        }
        (None, Some(GeneratorSpec::Sphere { a, b, h })) => {
            mesh::generate_sphere_shell(*a, *b, *h).map_err(at(Stage::Input))?
        }
        _ => return Err(PipelineError::ConfigInvalid("one of input or generator is required".into())),
    };
    match mesh.order() {
        ElementOrder::Linear => mesh.promote_to_quadratic().map_err(at(Stage::Input)),
        ElementOrder::Quadratic => {
            mesh.check_conforming().map_err(at(Stage::Input))?;
            Ok(mesh)
        }
    }
}

pub fn classify(mesh: &Mesh, config: &AnalysisConfig) -> Result<Vec<SurfacePatch>, PipelineError> {
    let boundary = extract_boundary(mesh).map_err(at(Stage::Classify))?;
    classify_patches(mesh, &boundary, &config.classify_options()).map_err(at(Stage::Classify))
}

/// Runs the full analysis. Every reduction in the engine has a fixed
/// evaluation order, so results do not depend on the thread count and
/// reruns are bit-identical; with `deterministic` set the run is also
/// strictly sequential.
pub fn run_analysis(config: &AnalysisConfig) -> Result<ResultBundle, PipelineError> {
    if config.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| PipelineError::ConfigInvalid(format!("cannot start a sequential pool: {e}")))?;
        pool.install(|| analyze(config))
    } else {
        analyze(config)
    }
}

fn analyze(config: &AnalysisConfig) -> Result<ResultBundle, PipelineError> {
    let start = Instant::now();
    config.validate()?;
    let material = config.material()?;
    let mesh = load_mesh(config)?;
    let patches = classify(&mesh, config)?;

    let k = solve::assemble(&mesh, &material, config.quadrature).map_err(at(Stage::Assemble))?;
    let f = solve::assemble_load(
        &mesh,
        &patches,
        &LoadSpec {
            pressure: config.pressure_mpa(),
        },
    )
    .map_err(at(Stage::Assemble))?;

    let (dirichlet, constraint) = match solve::fixed_caps(&patches) {
        Ok(d) => (d, Constraint::FixedCaps),
        Err(SolveError::NoCaps) => (
            solve::rigid_mode_anchors(&mesh).map_err(at(Stage::Constrain))?,
            Constraint::RigidModeAnchors,
        ),
        Err(e) => return Err(at(Stage::Constrain)(e)),
    };
    let dofs = k.nrows();
    let reduced = solve::apply_dirichlet(k, &f, &dirichlet);
    drop(f);
    let options = CgOptions {
        rel_tol: config.rel_tol,
        max_iter: None,
    };
    let (result, levels) = match config.solver {
        SolverKind::Multigrid => solve::solve_multigrid(&mesh, &reduced, &options),
        SolverKind::Jacobi => solve::solve_cg(&reduced.k, &reduced.f, &options).map(|r| (r, vec![reduced.k.nrows()])),
    }
    .map_err(at(Stage::Solve))?;
    let displacement = reduced.map.expand(&result.u);
    drop(reduced);

    let stress = stress::recover_stress(&mesh, &displacement, &material).map_err(at(Stage::Recover))?;
    let mps = stress.max_principal();
    let von_mises = stress.von_mises();
    let exterior = patches
        .iter()
        .find(|p| p.kind == PatchKind::Exterior)
        .ok_or(PipelineError::Mesh {
            stage: Stage::Statistics,
            source: MeshError::NoLateralSurface,
        })?;
    let values = stress::restrict_to_patch(&mps, exterior).map_err(at(Stage::Statistics))?;
    let exterior_curve = PercentileCurve::from_values(&values).map_err(at(Stage::Statistics))?;
    let p99_mpa = exterior_curve.p99();

    Ok(ResultBundle {
        config: config.clone(),
        solver: SolverSummary {
            dofs,
            constrained_dofs: dirichlet.len(),
            constraint,
            solver: config.solver,
            levels,
            iterations: result.iterations,
            rel_residual: result.rel_residual,
            seconds: result.seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
        mesh,
        patches,
        displacement,
        stress,
        mps,
        von_mises,
        exterior_curve,
        p99_mpa,
    })
}
