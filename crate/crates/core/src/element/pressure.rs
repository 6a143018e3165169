use nalgebra::SVector;

use super::quadrature::tri_degree5;
use super::shape::{tri6_area_normal, tri6_shape};
use super::ElementError;
use crate::mesh::Point;

pub type FaceLoad = SVector<f64, 18>;

/// Consistent nodal load of a uniform pressure `p` on a 6-node face.
///
/// The face must be ordered so its normal points out of the solid; the
/// traction is -p n, so p > 0 pushes into the wall.
pub fn face_pressure_load(coords: &[Point; 6], p: f64) -> Result<FaceLoad, ElementError> {
    let scale = face_scale(coords);
    let mut f = FaceLoad::zeros();
    for (l, w) in tri_degree5().iter() {
        let an = tri6_area_normal(*l, coords);
        if !(an.norm() > 1e-12 * scale * scale) {
            return Err(ElementError::DegenerateFace);
        }
        let n = tri6_shape(*l);
        for i in 0..6 {
            for a in 0..3 {
                f[3 * i + a] -= w * p * n[i] * an[a];
            }
        }
    }
    Ok(f)
}

/// Area of a (possibly curved) 6-node face.
pub fn face_area(coords: &[Point; 6]) -> f64 {
    tri_degree5()
        .iter()
        .map(|(l, w)| w * tri6_area_normal(*l, coords).norm())
        .sum()
}

fn face_scale(coords: &[Point; 6]) -> f64 {
    let a = (coords[1] - coords[0]).norm();
    let b = (coords[2] - coords[1]).norm();
    let c = (coords[0] - coords[2]).norm();
    a.max(b).max(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn flat_face(v: [Point; 3]) -> [Point; 6] {
        [
            v[0],
            v[1],
            v[2],
            0.5 * (v[0] + v[1]),
            0.5 * (v[1] + v[2]),
            0.5 * (v[2] + v[0]),
        ]
    }

    #[test]
    fn flat_face_loads_only_midsides() {
        let x = flat_face([
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(2.0, 0.5, 1.0),
            Vector3::new(0.3, 1.5, 1.0),
        ]);
        let p = 0.013;
        let f = face_pressure_load(&x, p).unwrap();
        let area_normal = 0.5 * (x[1] - x[0]).cross(&(x[2] - x[0]));
        for i in 0..3 {
            for a in 0..3 {
                assert!(f[3 * i + a].abs() < 1e-15);
            }
        }
        for i in 3..6 {
            for a in 0..3 {
                assert!((f[3 * i + a] + p * area_normal[a] / 3.0).abs() < 1e-15);
            }
        }
        let resultant: Vector3<f64> = (0..6).map(|i| Vector3::new(f[3 * i], f[3 * i + 1], f[3 * i + 2])).sum();
        assert!((resultant + p * area_normal).norm() < 1e-15);
        assert!((face_area(&x) - area_normal.norm()).abs() < 1e-14);
    }

    #[test]
    fn load_is_linear_in_pressure() {
        let mut x = flat_face([
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.1),
            Vector3::new(0.0, 1.0, 0.2),
        ]);
        x[4] += Vector3::new(0.05, 0.05, 0.1);
        let f1 = face_pressure_load(&x, 0.25).unwrap();
        let f2 = face_pressure_load(&x, 0.75).unwrap();
        assert!((f1 * 3.0 - f2).amax() <= 1e-15 * f2.amax());
    }

    #[test]
    fn degenerate_face_is_rejected() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        let x = flat_face([p, p, p + Vector3::new(1.0, 0.0, 0.0)]);
        assert!(matches!(face_pressure_load(&x, 1.0), Err(ElementError::DegenerateFace)));
    }
}
