//! Automatic labelling of the boundary into lumen-side, outer, and cap surfaces.
//!
//! Boundary faces are grown into smooth regions that stop at crease edges.
//! Planar regions are caps. The two remaining regions are told apart by
//! casting rays out of the solid: rays leaving the lumen wall cross the
//! boundary again, rays leaving the outer wall mostly escape.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::boundary::{face_adjacency, BoundaryFace};
use super::{Mesh, MeshError, Point};
use crate::element::pressure::face_area;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatchKind {
    Interior,
    Exterior,
    Cap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    pub kind: PatchKind,
    pub faces: Vec<BoundaryFace>,
    /// Sorted, unique node indices of all face nodes.
    pub node_set: Vec<usize>,
    /// Max point-to-plane deviation in mm; set for caps only.
    pub planarity: Option<f64>,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub crease_angle_deg: f64,
    pub cap_planarity_rel: f64,
    pub ray_samples: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            crease_angle_deg: 40.0,
            cap_planarity_rel: 0.01,
            ray_samples: 64,
        }
    }
}

struct Region {
    faces: Vec<usize>,
    nodes: Vec<usize>,
}

pub fn classify_patches(
    mesh: &Mesh,
    boundary: &[BoundaryFace],
    options: &ClassifyOptions,
) -> Result<Vec<SurfacePatch>, MeshError> {
    let regions = grow_regions(mesh, boundary, options.crease_angle_deg);

    let mut caps = Vec::new();
    let mut lateral = Vec::new();
    for region in regions {
        let (deviation, diameter) = plane_fit(mesh, &region.nodes);
        if deviation <= options.cap_planarity_rel * diameter {
            caps.push((region, deviation));
        } else {
            lateral.push(region);
        }
    }
    match lateral.len() {
        0 => return Err(MeshError::NoLateralSurface),
        1 => return Err(MeshError::AmbiguousClassification(f64::NAN, f64::NAN)),
        2 => {}
        n => return Err(MeshError::TooManyLateralRegions(n)),
    }

    let tris = boundary_triangles(mesh, boundary);
    let scale = {
        let (lo, hi) = mesh.bounding_box();
        (hi - lo).norm()
    };
    let crossings: Vec<f64> = lateral
        .iter()
        .map(|r| mean_crossings(mesh, boundary, &tris, &r.faces, options.ray_samples, scale))
        .collect();
    if (crossings[0] - crossings[1]).abs() < 0.5 {
        return Err(MeshError::AmbiguousClassification(crossings[0], crossings[1]));
    }
    let exterior_first = crossings[0] < crossings[1];

    let mut patches = Vec::with_capacity(2 + caps.len());
    let (first, second) = {
        let mut it = lateral.into_iter();
        (it.next().unwrap(), it.next().unwrap())
    };
    let (interior, exterior) = if exterior_first { (second, first) } else { (first, second) };
    patches.push(make_patch(mesh, boundary, PatchKind::Interior, interior, None));
    patches.push(make_patch(mesh, boundary, PatchKind::Exterior, exterior, None));
    for (region, deviation) in caps {
        patches.push(make_patch(mesh, boundary, PatchKind::Cap, region, Some(deviation)));
    }
    Ok(patches)
}

fn make_patch(
    mesh: &Mesh,
    boundary: &[BoundaryFace],
    kind: PatchKind,
    region: Region,
    planarity: Option<f64>,
) -> SurfacePatch {
    let faces: Vec<BoundaryFace> = region.faces.iter().map(|&f| boundary[f]).collect();
    let area = faces.iter().map(|f| face_area(&f.coords(mesh))).sum();
    SurfacePatch {
        kind,
        faces,
        node_set: region.nodes,
        planarity,
        area,
    }
}

fn grow_regions(mesh: &Mesh, boundary: &[BoundaryFace], crease_angle_deg: f64) -> Vec<Region> {
    let normals: Vec<Point> = boundary.iter().map(|f| f.corner_normal(mesh)).collect();
    let adjacency = face_adjacency(boundary);
    let cos_limit = crease_angle_deg.to_radians().cos();
    let mut label = vec![usize::MAX; boundary.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..boundary.len() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = regions.len();
        label[seed] = id;
        queue.push_back(seed);
        let mut faces = Vec::new();
        while let Some(f) = queue.pop_front() {
            faces.push(f);
            for &g in &adjacency[f] {
                if label[g] == usize::MAX && normals[f].dot(&normals[g]) >= cos_limit {
                    label[g] = id;
                    queue.push_back(g);
                }
            }
        }
        faces.sort_unstable();
        let nodes: BTreeSet<usize> = faces.iter().flat_map(|&f| boundary[f].nodes).collect();
        regions.push(Region {
            faces,
            nodes: nodes.into_iter().collect(),
        });
    }
    regions
}

/// Best-fit plane through the points: (max deviation, extent), where the
/// extent is twice the largest distance from the centroid.
fn plane_fit(mesh: &Mesh, nodes: &[usize]) -> (f64, f64) {
    let pts: Vec<Point> = nodes.iter().map(|&i| mesh.nodes()[i]).collect();
    let centroid = pts.iter().sum::<Point>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let normal = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let mut deviation: f64 = 0.0;
    let mut radius: f64 = 0.0;
    for p in &pts {
        let d = p - centroid;
        deviation = deviation.max(d.dot(&normal).abs());
        radius = radius.max(d.norm());
    }
    (deviation, 2.0 * radius)
}

struct Triangle {
    a: Point,
    e1: Point,
    e2: Point,
}

fn boundary_triangles(mesh: &Mesh, boundary: &[BoundaryFace]) -> Vec<Triangle> {
    boundary
        .iter()
        .map(|f| {
            let [a, b, c] = f.corners().map(|i| mesh.nodes()[i]);
            Triangle { a, e1: b - a, e2: c - a }
        })
        .collect()
}

fn ray_hits(tri: &Triangle, origin: &Point, dir: &Point) -> bool {
    let p = dir.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < 1e-300 {
        return false;
    }
    let inv = 1.0 / det;
    let s = origin - tri.a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&tri.e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    tri.e2.dot(&q) * inv > 0.0
}

fn mean_crossings(
    mesh: &Mesh,
    boundary: &[BoundaryFace],
    tris: &[Triangle],
    region: &[usize],
    samples: usize,
    scale: f64,
) -> f64 {
    let n = region.len();
    let picks: Vec<usize> = if n <= samples {
        region.to_vec()
    } else {
        (0..samples).map(|i| region[i * n / samples]).collect()
    };
    let total: usize = picks
        .iter()
        .map(|&f| {
            let face = &boundary[f];
            let dir = face.corner_normal(mesh);
            let origin = face.corner_centroid(mesh) + dir * (1e-7 * scale);
            tris.iter()
                .enumerate()
                .filter(|&(g, t)| g != f && ray_hits(t, &origin, &dir))
                .count()
        })
        .sum();
    total as f64 / picks.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::boundary::extract_boundary;
    use crate::mesh::generate::{generate_box, generate_cylinder_shell, generate_sphere_shell};
    use nalgebra::Rotation3;

    fn kinds(patches: &[SurfacePatch]) -> Vec<PatchKind> {
        patches.iter().map(|p| p.kind).collect()
    }

    fn check_partition(boundary: &[BoundaryFace], patches: &[SurfacePatch]) {
        let total: usize = patches.iter().map(|p| p.faces.len()).sum();
        assert_eq!(total, boundary.len());
        let mut seen: Vec<(usize, usize)> = patches
            .iter()
            .flat_map(|p| p.faces.iter().map(|f| (f.element, f.local_face)))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), boundary.len());
    }

    #[test]
    fn cylinder_gets_lumen_outer_and_two_caps() {
        let mesh = generate_cylinder_shell(10.0, 11.5, 80.0, 1.5).unwrap();
        let boundary = extract_boundary(&mesh).unwrap();
        let patches = classify_patches(&mesh, &boundary, &ClassifyOptions::default()).unwrap();
        assert_eq!(
            kinds(&patches),
            vec![PatchKind::Interior, PatchKind::Exterior, PatchKind::Cap, PatchKind::Cap]
        );
        check_partition(&boundary, &patches);
        for &i in &patches[0].node_set {
            assert!((mesh.nodes()[i].xy().norm() - 10.0).abs() < 1e-9);
        }
        for &i in &patches[1].node_set {
            assert!((mesh.nodes()[i].xy().norm() - 11.5).abs() < 1e-9);
        }
        for cap in &patches[2..] {
            assert!(cap.planarity.unwrap() < 1e-9);
            let exact = std::f64::consts::PI * (11.5f64.powi(2) - 100.0);
            assert!((cap.area - exact).abs() / exact < 1e-3);
        }
        let shared: Vec<_> = patches[2]
            .node_set
            .iter()
            .filter(|i| patches[3].node_set.binary_search(i).is_ok())
            .collect();
        assert!(shared.is_empty());
    }

    #[test]
    fn sphere_shell_has_no_caps() {
        let mesh = generate_sphere_shell(10.0, 11.5, 1.5).unwrap();
        let boundary = extract_boundary(&mesh).unwrap();
        let patches = classify_patches(&mesh, &boundary, &ClassifyOptions::default()).unwrap();
        assert_eq!(kinds(&patches), vec![PatchKind::Interior, PatchKind::Exterior]);
        check_partition(&boundary, &patches);
        let r = mesh.nodes()[patches[0].node_set[0]].norm();
        assert!((r - 10.0).abs() < 1e-9);
    }

    #[test]
    fn solid_cube_has_no_lateral_surface() {
        let mesh = generate_box(3, 1.0).unwrap();
        let boundary = extract_boundary(&mesh).unwrap();
        assert!(matches!(
            classify_patches(&mesh, &boundary, &ClassifyOptions::default()),
            Err(MeshError::NoLateralSurface)
        ));
    }

    #[test]
    fn labels_survive_rotation_and_scaling() {
        let mesh = generate_cylinder_shell(10.0, 11.5, 30.0, 1.5).unwrap();
        let boundary = extract_boundary(&mesh).unwrap();
        let base = classify_patches(&mesh, &boundary, &ClassifyOptions::default()).unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let moved = mesh.map_nodes(|p| rot * p * 3.7);
        let boundary2 = extract_boundary(&moved).unwrap();
        let patches = classify_patches(&moved, &boundary2, &ClassifyOptions::default()).unwrap();
        assert_eq!(kinds(&base), kinds(&patches));
        for (a, b) in base.iter().zip(&patches) {
            assert_eq!(a.faces, b.faces);
        }
    }
}
