//! Quadrature rules on the reference tetrahedron and triangle.
//!
//! Points are barycentric coordinates; weights are measured against the
//! reference simplex volume (1/6 for the tetrahedron, 1/2 for the triangle).

use serde::{Deserialize, Serialize};

/// Which tetrahedral rule to use for element stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StiffnessQuadrature {
    /// 4-point rule, exact for polynomials of degree 2.
    #[default]
    Degree2,
    /// 14-point rule with positive weights, exact for degree 5.
    Degree4,
}

impl StiffnessQuadrature {
    pub fn rule(self) -> QuadratureRule<4> {
        match self {
            StiffnessQuadrature::Degree2 => tet_degree2(),
            StiffnessQuadrature::Degree4 => tet_degree5(),
        }
    }
}

impl std::str::FromStr for StiffnessQuadrature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree2" => Ok(StiffnessQuadrature::Degree2),
            "degree4" => Ok(StiffnessQuadrature::Degree4),
            other => Err(format!("unknown quadrature '{other}' (expected degree2 or degree4)")),
        }
    }
}

/// A quadrature rule with `N` barycentric coordinates per point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const N: usize> {
    pub points: Vec<[f64; N]>,
    pub weights: Vec<f64>,
}

impl<const N: usize> QuadratureRule<N> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; N], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn tet_class_1(a: f64) -> Vec<[f64; 4]> {
    let b = 1.0 - 3.0 * a;
    vec![[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
}

fn tet_class_2(a: f64) -> Vec<[f64; 4]> {
    let b = 0.5 - a;
    vec![
        [a, a, b, b],
        [a, b, a, b],
        [a, b, b, a],
        [b, a, a, b],
        [b, a, b, a],
        [b, b, a, a],
    ]
}

pub fn tet_degree2() -> QuadratureRule<4> {
    let a = (5.0 - 5f64.sqrt()) / 20.0;
    QuadratureRule {
        points: tet_class_1(a),
        weights: vec![1.0 / 24.0; 4],
    }
}

/// 14-point degree-5 rule (all weights positive).
pub fn tet_degree5() -> QuadratureRule<4> {
    let mut points = Vec::with_capacity(14);
    let mut weights = Vec::with_capacity(14);
    for (a, w) in [
        (0.092_735_250_310_891_2, 0.012_248_840_519_393_66),
        (0.310_885_919_263_300_6, 0.018_781_320_953_002_64),
    ] {
        points.extend(tet_class_1(a));
        weights.extend([w; 4]);
    }
    points.extend(tet_class_2(0.045_503_704_125_649_6));
    weights.extend([0.007_091_003_462_846_911; 6]);
    QuadratureRule { points, weights }
}

/// 7-point degree-5 triangle rule.
pub fn tri_degree5() -> QuadratureRule<3> {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 2400.0;
    let w2 = (155.0 + s15) / 2400.0;
    let third = 1.0 / 3.0;
    let mut points = vec![[third, third, third]];
    let mut weights = vec![9.0 / 80.0];
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        points.extend([[b, a, a], [a, b, a], [a, a, b]]);
        weights.extend([w; 3]);
    }
    QuadratureRule { points, weights }
}
