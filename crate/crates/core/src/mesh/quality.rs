use serde::Serialize;

use super::{Mesh, Point};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeshQualityReport {
    pub elements: usize,
    pub nodes: usize,
    pub min_volume: f64,
    pub max_volume: f64,
    pub mean_volume: f64,
    /// Smallest normalized radius ratio; 1 for a regular tetrahedron.
    pub min_quality: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub through_thickness_layers: Option<usize>,
    pub boundary_faces: usize,
}

/// Normalized radius ratio 3 r_in / r_circ of a straight tetrahedron.
pub fn radius_ratio(p: [Point; 4]) -> f64 {
    let vol6 = (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])).abs();
    if vol6 == 0.0 {
        return 0.0;
    }
    let face_area = |a: usize, b: usize, c: usize| 0.5 * (p[b] - p[a]).cross(&(p[c] - p[a])).norm();
    let area = face_area(1, 2, 3) + face_area(0, 2, 3) + face_area(0, 1, 3) + face_area(0, 1, 2);
    let r_in = 0.5 * vol6 / area;

    // circumradius: |a|^2 (b x c) + |b|^2 (c x a) + |c|^2 (a x b) over 2 det
    let a = p[1] - p[0];
    let b = p[2] - p[0];
    let c = p[3] - p[0];
    let num = a.norm_squared() * b.cross(&c) + b.norm_squared() * c.cross(&a) + c.norm_squared() * a.cross(&b);
    let r_circ = num.norm() / (2.0 * vol6);
    (3.0 * r_in / r_circ).clamp(0.0, 1.0)
}

/// Boundary-face counting is left to the caller; pass 0 if unknown.
pub fn mesh_quality(mesh: &Mesh, boundary_faces: usize) -> MeshQualityReport {
    let n = mesh.element_count();
    let mut min_volume = f64::INFINITY;
    let mut max_volume = f64::NEG_INFINITY;
    let mut total = 0.0;
    let mut min_quality: f64 = if n == 0 { 0.0 } else { 1.0 };
    for e in 0..n {
        let v = mesh.element_volume(e);
        min_volume = min_volume.min(v);
        max_volume = max_volume.max(v);
        total += v;
        let ids = mesh.element_vertices(e);
        min_quality = min_quality.min(radius_ratio(ids.map(|i| mesh.nodes()[i])));
    }
    if n == 0 {
        min_volume = 0.0;
        max_volume = 0.0;
    }
    MeshQualityReport {
        elements: n,
        nodes: mesh.node_count(),
        min_volume,
        max_volume,
        mean_volume: if n == 0 { 0.0 } else { total / n as f64 },
        min_quality,
        through_thickness_layers: None,
        boundary_faces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::generate_cylinder_shell;

    #[test]
    fn regular_tet_is_one() {
        let s = 1.0 / 2f64.sqrt();
        let q = radius_ratio([
            Point::new(1.0, 0.0, -s),
            Point::new(-1.0, 0.0, -s),
            Point::new(0.0, 1.0, s),
            Point::new(0.0, -1.0, s),
        ]);
        assert!((q - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_tet_is_zero() {
        let q = radius_ratio([
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.5, 0.5, 0.0),
        ]);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn generated_cylinder_quality_floor() {
        let m = generate_cylinder_shell(10.0, 11.5, 80.0, 0.75).unwrap();
        let report = mesh_quality(&m, 0);
        assert!(report.min_quality > 0.1, "min quality {}", report.min_quality);
        assert!(report.min_volume > 0.0);
        assert!(report.min_volume <= report.mean_volume && report.mean_volume <= report.max_volume);
    }
}
