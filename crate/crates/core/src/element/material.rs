use nalgebra::SMatrix;
use serde::Serialize;

use super::ElementError;

pub type Matrix6 = SMatrix<f64, 6, 6>;

/// Isotropic linear elastic material in mm-N-MPa units.
///
/// Voigt order is (xx, yy, zz, xy, yz, zx) with engineering shear strains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElasticMaterial {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    #[serde(skip)]
    d: Matrix6,
}

impl ElasticMaterial {
    pub const DEFAULT_YOUNGS_MPA: f64 = 100_000.0;
    pub const DEFAULT_POISSON: f64 = 0.49;

    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self, ElementError> {
        let d = material_matrix(youngs_modulus, poisson_ratio)?;
        Ok(ElasticMaterial {
            youngs_modulus,
            poisson_ratio,
            d,
        })
    }

    pub fn d(&self) -> &Matrix6 {
        &self.d
    }

    /// Lame parameters (lambda, mu).
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }
}

impl Default for ElasticMaterial {
    fn default() -> Self {
        ElasticMaterial::new(Self::DEFAULT_YOUNGS_MPA, Self::DEFAULT_POISSON)
            .expect("default material is valid")
    }
}

pub fn material_matrix(e: f64, nu: f64) -> Result<Matrix6, ElementError> {
    if !e.is_finite() || !nu.is_finite() || e <= 0.0 || nu <= -1.0 {
        return Err(ElementError::NonPhysical { e, nu });
    }
    if nu >= 0.5 {
        return Err(ElementError::IncompressibleLimit { nu });
    }
    let scale = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let d11 = scale * (1.0 - nu);
    let d12 = scale * nu;
    let g = e / (2.0 * (1.0 + nu));
    let mut d = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = if i == j { d11 } else { d12 };
        }
        d[(i + 3, i + 3)] = g;
    }
    Ok(d)
}
