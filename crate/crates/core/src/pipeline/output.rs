use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{AnalysisConfig, MeshSummary, PatchSummary, PipelineError, ResultBundle, SolverSummary};
use crate::io::write_atomic;
use crate::mesh::Mesh;
use crate::stress::ScalarField;

/// JSON schema the report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

/// VTK cell type of the 10-node tetrahedron.
const VTK_QUADRATIC_TETRA: u8 = 24;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Legacy ASCII unstructured grid. The internal midside ordering
/// (01, 12, 02, 03, 13, 23) is already VTK's, so connectivity is written as is.
pub fn format_vtk(mesh: &Mesh, displacement: Option<&[f64]>, scalars: &[&ScalarField]) -> String {
    let n = mesh.node_count();
    let cells = mesh.quadratic_elements().expect("VTK output needs a quadratic mesh");
    let mut s = String::with_capacity(64 * n + 64 * cells.len());
    s.push_str("# vtk DataFile Version 3.0\nvesselstress\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:e} {:e} {:e}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {} {}", cells.len(), 11 * cells.len());
    for c in cells {
        s.push_str("10");
        for id in c {
            let _ = write!(s, " {id}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", cells.len());
    for _ in cells {
        let _ = writeln!(s, "{VTK_QUADRATIC_TETRA}");
    }
    if displacement.is_none() && scalars.is_empty() {
        return s;
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    if let Some(u) = displacement {
        assert_eq!(u.len(), 3 * n);
        s.push_str("VECTORS displacement double\n");
        for d in u.chunks_exact(3) {
            let _ = writeln!(s, "{:e} {:e} {:e}", d[0], d[1], d[2]);
        }
    }
    for field in scalars {
        assert_eq!(field.values.len(), n);
        let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", field.name);
        for v in &field.values {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

/// Writes mesh, displacement, MPS, and von Mises stress.
pub fn write_vtk(bundle: &ResultBundle, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let text = format_vtk(&bundle.mesh, Some(&bundle.displacement), &[&bundle.mps, &bundle.von_mises]);
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StressSummary {
    #[serde(rename = "p99MPa")]
    pub p99_mpa: f64,
    #[serde(rename = "maxMPa")]
    pub max_mpa: f64,
    pub percentile_curve: Vec<f64>,
}

/// The machine-readable summary of a run. Field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: AnalysisConfig,
    pub mesh: MeshSummary,
    pub patches: Vec<PatchSummary>,
    pub solver: SolverSummary,
    pub stress: StressSummary,
    pub version: String,
}

pub fn report(bundle: &ResultBundle) -> Report {
    let curve = bundle.exterior_curve.values().to_vec();
    Report {
        config: bundle.config.clone(),
        mesh: bundle.mesh_summary(),
        patches: bundle.patches.iter().map(PatchSummary::from).collect(),
        solver: bundle.solver.clone(),
        stress: StressSummary {
            p99_mpa: bundle.p99_mpa,
            max_mpa: curve[100],
            percentile_curve: curve,
        },
        version: crate::VERSION.to_string(),
    }
}

pub fn write_report(bundle: &ResultBundle, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&report(bundle)).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::unit_tet_linear;

    #[test]
    fn single_element_vtk_layout() {
        let mesh = unit_tet_linear().promote_to_quadratic().unwrap();
        let mps = ScalarField {
            name: "MPS".into(),
            values: (0..10).map(f64::from).collect(),
        };
        let u = vec![0.0; 30];
        let text = format_vtk(&mesh, Some(&u), &[&mps]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(lines.contains(&"POINTS 10 double"));
        assert!(lines.contains(&"CELLS 1 11"));
        assert!(lines.contains(&"10 0 1 2 3 4 5 6 7 8 9"));
        let types = lines.iter().position(|l| *l == "CELL_TYPES 1").unwrap();
        assert_eq!(lines[types + 1], "24");
        assert!(lines.contains(&"POINT_DATA 10"));
        assert!(lines.contains(&"SCALARS MPS double 1"));
    }
}
