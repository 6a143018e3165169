use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{run_analysis, AnalysisConfig, GeneratorSpec, PipelineError, PressureUnit, ResultBundle, SolverSummary};
use crate::io::write_atomic;
use crate::mesh::PatchKind;
use crate::stats::{cohort_summary, compare_curves, Aggregate, CohortCase, CurveComparison, PercentileCurve};
use crate::stress::{voigt_to_matrix, StressTensorField};

/// Largest relative error a benchmark or convergence check accepts.
pub const TOLERANCE: f64 = 0.03;

/// Mean hoop stress over the nodes of `kind` lying on the plane z = z0,
/// for a cylinder whose axis is the z axis.
pub fn cylinder_hoop(bundle: &ResultBundle, kind: PatchKind, z0: f64) -> Option<f64> {
    let patch = bundle.patch(kind)?;
    let nodes = bundle.mesh.nodes();
    let (lo, hi) = bundle.mesh.bounding_box();
    let tol = 1e-9 * (hi - lo).norm();
    let ring: Vec<usize> = patch.node_set.iter().copied().filter(|&i| (nodes[i].z - z0).abs() <= tol).collect();
    mean_over(&ring, |i| {
        let p = nodes[i];
        let e = Vector3::new(-p.y, p.x, 0.0).normalize();
        hoop_component(&bundle.stress, i, &e)
    })
}

/// Mean hoop stress over the nodes of `kind` on a sphere centred at the
/// origin: the average of the two tangential normal stresses.
pub fn sphere_hoop(bundle: &ResultBundle, kind: PatchKind) -> Option<f64> {
    let patch = bundle.patch(kind)?;
    let nodes = bundle.mesh.nodes();
    mean_over(&patch.node_set, |i| {
        let s = voigt_to_matrix(&bundle.stress.values[i]);
        let n = nodes[i].normalize();
        0.5 * (s.trace() - (n.transpose() * s * n)[(0, 0)])
    })
}

fn hoop_component(stress: &StressTensorField, node: usize, e: &Vector3<f64>) -> f64 {
    (e.transpose() * voigt_to_matrix(&stress.values[node]) * e)[(0, 0)]
}

fn mean_over(nodes: &[usize], f: impl Fn(usize) -> f64) -> Option<f64> {
    (!nodes.is_empty()).then(|| nodes.iter().map(|&i| f(i)).sum::<f64>() / nodes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Cylinder,
    Sphere,
}

impl FromStr for BenchmarkKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cylinder" => Ok(BenchmarkKind::Cylinder),
            "sphere" => Ok(BenchmarkKind::Sphere),
            other => Err(PipelineError::UnknownBenchmark(other.to_string())),
        }
    }
}

impl BenchmarkKind {
    /// Thick-wall (Lamé) hoop stress at the inner and outer surface.
    pub fn lame_hoop(self, a: f64, b: f64, p: f64) -> (f64, f64) {
        match self {
            BenchmarkKind::Cylinder => {
                let d = b * b - a * a;
                (p * (a * a + b * b) / d, 2.0 * p * a * a / d)
            }
            BenchmarkKind::Sphere => {
                let d = b.powi(3) - a.powi(3);
                (p * (2.0 * a.powi(3) + b.powi(3)) / (2.0 * d), 3.0 * p * a.powi(3) / (2.0 * d))
            }
        }
    }

    /// The benchmark geometry with the given wall, length (ignored for the
    /// sphere), and element size.
    pub fn config(self, a: f64, b: f64, length: f64, h: f64) -> AnalysisConfig {
        let generator = match self {
            BenchmarkKind::Cylinder => GeneratorSpec::Cylinder { a, b, length, h },
            BenchmarkKind::Sphere => GeneratorSpec::Sphere { a, b, h },
        };
        let mut config = AnalysisConfig::generated(generator);
        config.pressure = 0.013;
        config.pressure_unit = PressureUnit::MPa;
        config
    }

    /// a = 10, b = 11.5, L = 80, h = 0.5 mm; p = 0.013 MPa.
    pub fn default_config(self) -> AnalysisConfig {
        self.config(10.0, 11.5, 80.0, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HoopComparison {
    #[serde(rename = "referenceMPa")]
    pub reference_mpa: f64,
    #[serde(rename = "computedMPa")]
    pub computed_mpa: f64,
    pub rel_error: f64,
}

impl HoopComparison {
    fn new(reference_mpa: f64, computed_mpa: f64) -> Self {
        HoopComparison {
            reference_mpa,
            computed_mpa,
            rel_error: (computed_mpa - reference_mpa).abs() / reference_mpa.abs(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchmarkReport {
    pub kind: BenchmarkKind,
    pub config: AnalysisConfig,
    pub inner: HoopComparison,
    pub outer: HoopComparison,
    pub passed: bool,
    pub nodes: usize,
    pub elements: usize,
    pub solver: SolverSummary,
    #[serde(rename = "p99MPa")]
    pub p99_mpa: f64,
    #[serde(skip)]
    pub bundle: ResultBundle,
}

/// Runs a generated cylinder or sphere benchmark and compares hoop stress
/// with the thick-wall solution: on the mid-height ring for the cylinder and
/// over the whole inner and outer surfaces for the sphere.
pub fn run_benchmark(kind: &str, config: &AnalysisConfig) -> Result<BenchmarkReport, PipelineError> {
    let kind = BenchmarkKind::from_str(kind)?;
    let (a, b) = match (kind, config.generator) {
        (BenchmarkKind::Cylinder, Some(GeneratorSpec::Cylinder { a, b, .. }))
        | (BenchmarkKind::Sphere, Some(GeneratorSpec::Sphere { a, b, .. })) => (a, b),
        _ => {
            return Err(PipelineError::ConfigInvalid(format!(
                "the {kind:?} benchmark needs a matching generator"
            )))
        }
    };
    let bundle = run_analysis(config)?;
    let (ref_in, ref_out) = kind.lame_hoop(a, b, config.pressure_mpa());
    let (inner, outer) = match (kind, config.generator) {
        (BenchmarkKind::Cylinder, Some(GeneratorSpec::Cylinder { length, .. })) => (
            cylinder_hoop(&bundle, PatchKind::Interior, 0.5 * length),
            cylinder_hoop(&bundle, PatchKind::Exterior, 0.5 * length),
        ),
        _ => (sphere_hoop(&bundle, PatchKind::Interior), sphere_hoop(&bundle, PatchKind::Exterior)),
    };
    let missing = || PipelineError::ConfigInvalid("benchmark surface has no sample nodes".into());
    let inner = HoopComparison::new(ref_in, inner.ok_or_else(missing)?);
    let outer = HoopComparison::new(ref_out, outer.ok_or_else(missing)?);
    Ok(BenchmarkReport {
        kind,
        config: config.clone(),
        passed: inner.rel_error < TOLERANCE && outer.rel_error < TOLERANCE,
        inner,
        outer,
        nodes: bundle.mesh.node_count(),
        elements: bundle.mesh.element_count(),
        solver: bundle.solver.clone(),
        p99_mpa: bundle.p99_mpa,
        bundle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceLevel {
    pub h: f64,
    pub nodes: usize,
    pub elements: usize,
    pub iterations: usize,
    pub seconds: f64,
    #[serde(rename = "p99MPa")]
    pub p99_mpa: f64,
    pub percentile_curve: PercentileCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelComparison {
    pub coarse_h: f64,
    pub fine_h: f64,
    #[serde(flatten)]
    pub metrics: CurveComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceReport {
    pub levels: Vec<ConvergenceLevel>,
    pub comparisons: Vec<LevelComparison>,
    /// relDiffAt99 shrinks with every refinement.
    pub monotone: bool,
    /// relDiffAt99 between the two finest sizes is below 3%.
    pub converged: bool,
}

/// Reruns a generated geometry at each element size (largest first) and
/// compares successive exterior MPS percentile curves.
pub fn run_convergence(config: &AnalysisConfig, sizes: &[f64]) -> Result<ConvergenceReport, PipelineError> {
    if sizes.len() < 2 {
        return Err(PipelineError::NeedTwoSizes);
    }
    if sizes.windows(2).any(|w| !(w[0] > w[1])) || sizes.iter().any(|&h| !(h > 0.0)) {
        return Err(PipelineError::ConfigInvalid("sizes must be positive and strictly descending".into()));
    }
    let generator = config
        .generator
        .ok_or_else(|| PipelineError::ConfigInvalid("a convergence study needs a generator".into()))?;
    let mut levels = Vec::with_capacity(sizes.len());
    for &h in sizes {
        let mut c = config.clone();
        c.generator = Some(generator.with_h(h));
        let bundle = run_analysis(&c)?;
        levels.push(ConvergenceLevel {
            h,
            nodes: bundle.mesh.node_count(),
            elements: bundle.mesh.element_count(),
            iterations: bundle.solver.iterations,
            seconds: bundle.solver.total_seconds,
            p99_mpa: bundle.p99_mpa,
            percentile_curve: bundle.exterior_curve,
        });
    }
    let comparisons: Vec<LevelComparison> = levels
        .windows(2)
        .map(|w| LevelComparison {
            coarse_h: w[0].h,
            fine_h: w[1].h,
            metrics: compare_curves(&w[0].percentile_curve, &w[1].percentile_curve),
        })
        .collect();
    let rel: Vec<f64> = comparisons.iter().map(|c| c.metrics.rel_diff_at99).collect();
    Ok(ConvergenceReport {
        monotone: rel.windows(2).all(|w| w[1] < w[0]),
        converged: *rel.last().expect("two or more levels") < TOLERANCE,
        levels,
        comparisons,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseFailure {
    pub name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CohortReport {
    pub cases: Vec<CohortCase>,
    pub failures: Vec<CaseFailure>,
    #[serde(rename = "p99MPa")]
    pub p99_mpa: Option<Aggregate>,
    pub seconds: Option<Aggregate>,
}

impl CohortReport {
    pub fn from_outcomes(cases: Vec<CohortCase>, failures: Vec<CaseFailure>) -> Result<Self, PipelineError> {
        if cases.is_empty() && failures.is_empty() {
            return Err(PipelineError::EmptyCohort);
        }
        let (p99_mpa, seconds) = match cohort_summary(&cases) {
            Ok(s) => (Some(s.p99_mpa), Some(s.seconds)),
            Err(_) => (None, None),
        };
        Ok(CohortReport {
            cases,
            failures,
            p99_mpa,
            seconds,
        })
    }

    /// One row per case, then Minimum/Maximum/Average/Standard deviation rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,p99MPa,seconds,status\n");
        let num = |v: f64| format!("{v}");
        for c in &self.cases {
            out.push_str(&format!("{},{},{},ok\n", csv_field(&c.name), num(c.p99_mpa), num(c.seconds)));
        }
        for f in &self.failures {
            out.push_str(&format!("{},,,{}\n", csv_field(&f.name), csv_field(&format!("failed: {}", f.error))));
        }
        if let (Some(p), Some(s)) = (&self.p99_mpa, &self.seconds) {
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            out.push_str(&format!("Minimum,{},{},\n", num(p.min), num(s.min)));
            out.push_str(&format!("Maximum,{},{},\n", num(p.max), num(s.max)));
            out.push_str(&format!("Average,{},{},\n", num(p.mean), num(s.mean)));
            out.push_str(&format!("Standard deviation,{},{},\n", opt(p.std), opt(s.std)));
        }
        out
    }

    /// Writes `cohort.csv` and `cohort.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let json = serde_json::to_string_pretty(self).expect("cohort report serializes") + "\n";
        for (name, bytes) in [("cohort.csv", self.to_csv().into_bytes()), ("cohort.json", json.into_bytes())] {
            let path = dir.join(name);
            write_atomic(&path, &bytes).map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs each named case in turn. A failing case is recorded and the
/// cohort continues.
pub fn run_cohort(cases: &[(String, AnalysisConfig)]) -> Result<CohortReport, PipelineError> {
    if cases.is_empty() {
        return Err(PipelineError::EmptyCohort);
    }
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (name, config) in cases {
        match run_analysis(config) {
            Ok(bundle) => ok.push(CohortCase {
                name: name.clone(),
                p99_mpa: bundle.p99_mpa,
                seconds: bundle.solver.total_seconds,
            }),
            Err(e) => failures.push(CaseFailure {
                name: name.clone(),
                error: e.to_string(),
            }),
        }
    }
    CohortReport::from_outcomes(ok, failures)
}

/// One case of a cohort file: a config file path (relative to the cohort
/// file) or an inline config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortEntry {
    pub name: String,
    #[serde(default)]
    pub config: Option<PathBuf>,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CohortFile {
    cases: Vec<CohortEntry>,
}

/// Reads a cohort file (TOML, or JSON by extension) into named configs.
pub fn load_cohort(path: impl AsRef<Path>) -> Result<Vec<(String, AnalysisConfig)>, PipelineError> {
    let path = path.as_ref();
    let invalid = |m: String| PipelineError::ConfigInvalid(format!("{}: {m}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
    let file: CohortFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| invalid(e.to_string()))?
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    file.cases
        .into_iter()
        .map(|entry| {
            let config = match (entry.config, entry.analysis) {
                (Some(p), None) => AnalysisConfig::from_file(dir.join(p))?,
                (None, Some(c)) => c,
                _ => return Err(invalid(format!("case '{}' needs exactly one of config or analysis", entry.name))),
            };
            Ok((entry.name, config))
        })
        .collect()
}

/// `n` benchmark cylinders (L = 80 mm, 1.5 mm wall, 13 kPa) whose inner
/// radius steps evenly through 9..11 mm.
pub fn synthetic_cylinders(n: usize, h: f64) -> Vec<(String, AnalysisConfig)> {
    (0..n)
        .map(|i| {
            let a = if n > 1 { 9.0 + 2.0 * i as f64 / (n - 1) as f64 } else { 10.0 };
            let mut config = AnalysisConfig::generated(GeneratorSpec::Cylinder {
                a,
                b: a + 1.5,
                length: 80.0,
                h,
            });
            config.pressure = 13.0;
            (format!("cylinder-{:02}", i + 1), config)
        })
        .collect()
}
