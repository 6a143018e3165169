use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::element::{ElasticMaterial, StiffnessQuadrature};
use crate::mesh::ClassifyOptions;

pub const KPA_PER_MPA: f64 = 1000.0;
pub const MPA_PER_MMHG: f64 = 1.33322e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PressureUnit {
    #[serde(rename = "kPa")]
    #[default]
    KPa,
    #[serde(rename = "mmHg")]
    MmHg,
    #[serde(rename = "MPa")]
    MPa,
}

impl PressureUnit {
    pub fn to_mpa(self, value: f64) -> f64 {
        match self {
            PressureUnit::KPa => value / KPA_PER_MPA,
            PressureUnit::MmHg => value * MPA_PER_MMHG,
            PressureUnit::MPa => value,
        }
    }
}

/// Linear solver. Both run conjugate gradients to the same tolerance; the
/// multigrid preconditioner stays effective as the Poisson ratio nears 0.5,
/// where plain diagonal scaling stalls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Multigrid,
    Jacobi,
}

/// Parametric wall geometry, all lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Cylinder { a: f64, b: f64, length: f64, h: f64 },
    Sphere { a: f64, b: f64, h: f64 },
}

impl GeneratorSpec {
    pub fn h(&self) -> f64 {
        match *self {
            GeneratorSpec::Cylinder { h, .. } | GeneratorSpec::Sphere { h, .. } => h,
        }
    }

    pub fn with_h(self, h: f64) -> Self {
        match self {
            GeneratorSpec::Cylinder { a, b, length, .. } => GeneratorSpec::Cylinder { a, b, length, h },
            GeneratorSpec::Sphere { a, b, .. } => GeneratorSpec::Sphere { a, b, h },
        }
    }
}

fn default_pressure() -> f64 {
    13.0
}
fn default_e() -> f64 {
    100_000.0
}
fn default_nu() -> f64 {
    0.49
}
fn default_crease() -> f64 {
    40.0
}
fn default_rel_tol() -> f64 {
    1e-8
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One analysis run. Readable from TOML or JSON; field names are camelCase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnalysisConfig {
    /// MSH 4.1 volume mesh. Exclusive with `generator`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default = "default_pressure")]
    pub pressure: f64,
    #[serde(default)]
    pub pressure_unit: PressureUnit,
    /// Young's modulus in MPa.
    #[serde(default = "default_e")]
    pub youngs_modulus: f64,
    #[serde(default = "default_nu")]
    pub poisson_ratio: f64,
    #[serde(default = "default_crease")]
    pub crease_angle_deg: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub quadrature: StiffnessQuadrature,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl AnalysisConfig {
    pub fn generated(generator: GeneratorSpec) -> Self {
        AnalysisConfig {
            input: None,
            generator: Some(generator),
            pressure: default_pressure(),
            pressure_unit: PressureUnit::KPa,
            youngs_modulus: default_e(),
            poisson_ratio: default_nu(),
            crease_angle_deg: default_crease(),
            rel_tol: default_rel_tol(),
            quadrature: StiffnessQuadrature::Degree2,
            solver: SolverKind::Multigrid,
            deterministic: false,
            out_dir: default_out_dir(),
        }
    }

    /// Parses by extension: `.json` as JSON, anything else as TOML. A
    /// relative `input` path is resolved against the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        if let (Some(input), Some(dir)) = (&config.input, path.parent()) {
            if input.is_relative() {
                config.input = Some(dir.join(input));
            }
        }
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))
    }

    pub fn pressure_mpa(&self) -> f64 {
        self.pressure_unit.to_mpa(self.pressure)
    }

    pub fn material(&self) -> Result<ElasticMaterial, PipelineError> {
        ElasticMaterial::new(self.youngs_modulus, self.poisson_ratio)
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            crease_angle_deg: self.crease_angle_deg,
            ..ClassifyOptions::default()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |m: &str| Err(PipelineError::ConfigInvalid(m.into()));
        match (&self.input, &self.generator) {
            (Some(_), Some(_)) => return invalid("give either input or generator, not both"),
            (None, None) => return invalid("one of input or generator is required"),
            _ => {}
        }
        if !(self.pressure > 0.0 && self.pressure.is_finite()) {
            return invalid("pressure must be positive");
        }
        if !(self.crease_angle_deg > 0.0 && self.crease_angle_deg < 180.0) {
            return invalid("creaseAngleDeg must lie in (0, 180)");
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return invalid("relTol must lie in (0, 1)");
        }
        self.material()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert_eq!(PressureUnit::KPa.to_mpa(13.0), 0.013);
        assert_eq!(PressureUnit::MmHg.to_mpa(1.0), 1.33322e-4);
        assert_eq!(PressureUnit::MPa.to_mpa(0.5), 0.5);
    }

    #[test]
    fn toml_with_defaults() {
        let c = AnalysisConfig::from_toml(
            r#"
            pressure = 120
            pressureUnit = "mmHg"

            [generator]
            kind = "cylinder"
            a = 10.0
            b = 11.5
            length = 80.0
            h = 1.0
            "#,
        )
        .unwrap();
        assert_eq!(c.youngs_modulus, 100_000.0);
        assert_eq!(c.poisson_ratio, 0.49);
        assert_eq!(c.quadrature, StiffnessQuadrature::Degree2);
        assert_eq!(c.solver, SolverKind::Multigrid);
        assert!((c.pressure_mpa() - 120.0 * 1.33322e-4).abs() < 1e-18);
        c.validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let c = AnalysisConfig::generated(GeneratorSpec::Sphere { a: 10.0, b: 11.5, h: 1.0 });
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(AnalysisConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn invalid_configs() {
        let base = AnalysisConfig::generated(GeneratorSpec::Sphere { a: 10.0, b: 11.5, h: 1.0 });
        let bad = |f: &dyn Fn(&mut AnalysisConfig)| {
            let mut c = base.clone();
            f(&mut c);
            matches!(c.validate(), Err(PipelineError::ConfigInvalid(_)))
        };
        assert!(bad(&|c| c.poisson_ratio = 0.5));
        assert!(bad(&|c| c.pressure = 0.0));
        assert!(bad(&|c| c.generator = None));
        assert!(bad(&|c| c.input = Some("x.msh".into())));
        assert!(bad(&|c| c.youngs_modulus = -1.0));
        assert!(AnalysisConfig::from_toml("pressure = \"high\"").is_err());
        assert!(AnalysisConfig::from_toml("bogus = 1").is_err());
    }
}
