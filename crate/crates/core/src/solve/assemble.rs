use rayon::prelude::*;

use super::csr::CsrMatrix;
use super::SolveError;
use crate::element::{element_stiffness, face_pressure_load, ElasticMaterial, ElementError, StiffnessQuadrature};
use crate::mesh::{Mesh, PatchKind, SurfacePatch};

/// Elements evaluated per parallel batch before their matrices are scattered
/// in element order.
const BATCH: usize = 2048;

/// Uniform lumen pressure in MPa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSpec {
    pub pressure: f64,
}

/// Node-level sparsity: for every node, the sorted nodes it shares an element with.
struct NodeGraph {
    ptr: Vec<usize>,
    adj: Vec<u32>,
}

impl NodeGraph {
    fn build(n_nodes: usize, cells: &[[usize; 10]]) -> Self {
        // node -> elements
        let mut count = vec![0usize; n_nodes + 1];
        for c in cells {
            for &i in c {
                count[i + 1] += 1;
            }
        }
        for i in 0..n_nodes {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut elems = vec![0u32; count[n_nodes]];
        for (e, c) in cells.iter().enumerate() {
            for &i in c {
                elems[fill[i]] = e as u32;
                fill[i] += 1;
            }
        }
        drop(fill);

        let rows: Vec<Vec<u32>> = (0..n_nodes)
            .into_par_iter()
            .map(|i| {
                let mut nb: Vec<u32> = elems[count[i]..count[i + 1]]
                    .iter()
                    .flat_map(|&e| cells[e as usize].iter().map(|&j| j as u32))
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect();
        let mut ptr = Vec::with_capacity(n_nodes + 1);
        ptr.push(0);
        let mut adj = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in rows {
            adj.extend_from_slice(&r);
            ptr.push(adj.len());
        }
        NodeGraph { ptr, adj }
    }

    fn neighbours(&self, i: usize) -> &[u32] {
        &self.adj[self.ptr[i]..self.ptr[i + 1]]
    }
}

/// Zero-valued matrix with the 3x3-block pattern of the mesh.
fn block_pattern(n_nodes: usize, graph: &NodeGraph) -> CsrMatrix {
    let nnz = 9 * graph.adj.len();
    let mut row_ptr = Vec::with_capacity(3 * n_nodes + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for i in 0..n_nodes {
        let nb = graph.neighbours(i);
        for _axis in 0..3 {
            for &j in nb {
                col_idx.extend_from_slice(&[3 * j, 3 * j + 1, 3 * j + 2]);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let values = vec![0.0; col_idx.len()];
    CsrMatrix::new(3 * n_nodes, 3 * n_nodes, row_ptr, col_idx, values)
}

/// Global stiffness over DOFs 3 * node + axis.
pub fn assemble(
    mesh: &Mesh,
    material: &ElasticMaterial,
    quadrature: StiffnessQuadrature,
) -> Result<CsrMatrix, SolveError> {
    let cells = mesh.quadratic_elements()?;
    let n = mesh.node_count();
    let graph = NodeGraph::build(n, cells);
    let mut k = block_pattern(n, &graph);
    let rule = quadrature.rule();

    for (b, batch) in cells.chunks(BATCH).enumerate() {
        let mats = batch
            .par_iter()
            .enumerate()
            .map(|(o, c)| {
                element_stiffness(&mesh.element_coords(c), material, &rule).map_err(|err| match err {
                    ElementError::SingularJacobian { det_j } => SolveError::SingularJacobian {
                        element: b * BATCH + o,
                        det_j,
                    },
                    other => other.into(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (c, ke) in batch.iter().zip(mats) {
            for (li, &gi) in c.iter().enumerate() {
                let nb = graph.neighbours(gi);
                let deg = nb.len();
                let node_base = 9 * graph.ptr[gi];
                for (lj, &gj) in c.iter().enumerate() {
                    let pos = nb.binary_search(&(gj as u32)).expect("pattern covers element couplings");
                    for a in 0..3 {
                        let row_start = node_base + a * 3 * deg + 3 * pos;
                        for bcol in 0..3 {
                            k.values[row_start + bcol] += ke[(3 * li + a, 3 * lj + bcol)];
                        }
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Consistent load of the lumen pressure on the Interior patch.
pub fn assemble_load(mesh: &Mesh, patches: &[SurfacePatch], load: &LoadSpec) -> Result<Vec<f64>, SolveError> {
    let interior = patches
        .iter()
        .find(|p| p.kind == PatchKind::Interior)
        .ok_or(SolveError::MissingInteriorPatch)?;
    let mut f = vec![0.0; 3 * mesh.node_count()];
    for face in &interior.faces {
        let fe = face_pressure_load(&face.coords(mesh), load.pressure)?;
        for (i, &node) in face.nodes.iter().enumerate() {
            for a in 0..3 {
                f[3 * node + a] += fe[3 * i + a];
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::quadrature::tet_degree2;
    use crate::mesh::fixtures::*;
    use crate::mesh::generate::generate_cylinder_shell;
    use crate::mesh::{classify_patches, extract_boundary, ClassifyOptions};
    use nalgebra::Vector3;

    fn dense_oracle(mesh: &Mesh, m: &ElasticMaterial) -> Vec<Vec<f64>> {
        let n = 3 * mesh.node_count();
        let mut d = vec![vec![0.0; n]; n];
        for c in mesh.quadratic_elements().unwrap() {
            let ke = element_stiffness(&mesh.element_coords(c), m, &tet_degree2()).unwrap();
            for i in 0..30 {
                for j in 0..30 {
                    d[3 * c[i / 3] + i % 3][3 * c[j / 3] + j % 3] += ke[(i, j)];
                }
            }
        }
        d
    }

    #[test]
    fn single_element_matches_element_matrix() {
        let mesh = unit_tet_linear().promote_to_quadratic().unwrap();
        let m = ElasticMaterial::default();
        let k = assemble(&mesh, &m, StiffnessQuadrature::Degree2).unwrap();
        assert_eq!(k.to_dense(), dense_oracle(&mesh, &m));
    }

    #[test]
    fn two_elements_match_dense_assembly() {
        let mesh = two_tets_linear().promote_to_quadratic().unwrap();
        let m = ElasticMaterial::new(70.0, 0.33).unwrap();
        let k = assemble(&mesh, &m, StiffnessQuadrature::Degree2).unwrap();
        let oracle = dense_oracle(&mesh, &m);
        let dense = k.to_dense();
        let scale = k.max_abs();
        for (r1, r2) in dense.iter().zip(&oracle) {
            for (a, b) in r1.iter().zip(r2) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
        assert!(k.symmetry_defect() <= 1e-12 * scale);
    }

    #[test]
    fn stiffness_is_positive_semidefinite() {
        let mesh = generate_cylinder_shell(2.0, 3.0, 2.0, 1.0).unwrap();
        let k = assemble(&mesh, &ElasticMaterial::default(), StiffnessQuadrature::Degree2).unwrap();
        let mut s = 11u64;
        for _ in 0..5 {
            let x: Vec<f64> = (0..k.nrows())
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let kx = k.mul_vec(&x);
            let energy: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
            let xx: f64 = x.iter().map(|v| v * v).sum();
            assert!(energy >= -1e-12 * k.max_abs() * xx);
        }
    }

    #[test]
    fn cylinder_pressure_load_has_zero_resultant() {
        let mesh = generate_cylinder_shell(10.0, 11.5, 20.0, 1.5).unwrap();
        let boundary = extract_boundary(&mesh).unwrap();
        let patches = classify_patches(&mesh, &boundary, &ClassifyOptions::default()).unwrap();
        let p = 0.013;
        let f = assemble_load(&mesh, &patches, &LoadSpec { pressure: p }).unwrap();
        let resultant: Vector3<f64> = (0..mesh.node_count()).map(|i| Vector3::new(f[3 * i], f[3 * i + 1], f[3 * i + 2])).sum();
        assert!(resultant.norm() < 1e-9 * p * patches[0].area);

        let zero = assemble_load(&mesh, &patches, &LoadSpec { pressure: 0.0 }).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        // loads on non-interior nodes are zero
        let interior: std::collections::HashSet<_> = patches[0].node_set.iter().copied().collect();
        for i in 0..mesh.node_count() {
            if !interior.contains(&i) {
                assert_eq!(&f[3 * i..3 * i + 3], &[0.0; 3]);
            }
        }
    }

    #[test]
    fn missing_interior_patch() {
        let mesh = unit_tet_linear().promote_to_quadratic().unwrap();
        assert!(matches!(
            assemble_load(&mesh, &[], &LoadSpec { pressure: 1.0 }),
            Err(SolveError::MissingInteriorPatch)
        ));
    }
}
