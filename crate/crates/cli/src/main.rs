use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vesselstress::mesh::{extract_boundary, mesh_quality};
use vesselstress::pipeline::{
    self, load_cohort, run_benchmark, run_cohort, run_convergence, synthetic_cylinders, write_report, write_vtk,
    AnalysisConfig, BenchmarkKind, PatchSummary, PipelineError, PressureUnit, SolverKind,
};
use vesselstress::StiffnessQuadrature;

/// Wall stress in pressurized vessels from quadratic tetrahedral meshes.
#[derive(Parser)]
#[command(name = "vesselstress", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one analysis; writes report.json and result.vtk.
    Solve(Overrides),
    /// Compare a generated cylinder or sphere with the thick-wall solution.
    Benchmark {
        /// cylinder or sphere
        kind: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rerun a generated geometry at decreasing element sizes.
    Convergence {
        /// Element sizes in mm, largest first.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every case of a cohort file and summarize p99 stress and time.
    Cohort {
        /// Cohort file listing named cases.
        #[arg(long, conflicts_with = "synthetic")]
        config: Option<PathBuf>,
        /// Use N generated cylinders with stepped radii instead of a file.
        #[arg(long)]
        synthetic: Option<usize>,
        #[command(flatten)]
        overrides: CaseOverrides,
    },
    /// Print mesh size and element quality.
    MeshInfo(Overrides),
    /// Print the detected surface patches with their areas.
    Classify(Overrides),
}

#[derive(Args, Clone)]
struct Overrides {
    /// Analysis config (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    case: CaseOverrides,
}

#[derive(Args, Clone, Default)]
struct CaseOverrides {
    #[arg(long)]
    pressure_kpa: Option<f64>,
    /// Young's modulus.
    #[arg(long)]
    e_mpa: Option<f64>,
    /// Poisson ratio.
    #[arg(long)]
    nu: Option<f64>,
    /// Element size of a generated mesh.
    #[arg(long)]
    hmax_mm: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum)]
    quadrature: Option<QuadratureArg>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuadratureArg {
    Degree2,
    Degree4,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Multigrid,
    Jacobi,
}

impl CaseOverrides {
    fn apply(&self, mut config: AnalysisConfig) -> Result<AnalysisConfig, PipelineError> {
        if let Some(p) = self.pressure_kpa {
            config.pressure = p;
            config.pressure_unit = PressureUnit::KPa;
        }
        if let Some(e) = self.e_mpa {
            config.youngs_modulus = e;
        }
        if let Some(nu) = self.nu {
            config.poisson_ratio = nu;
        }
        if let Some(h) = self.hmax_mm {
            let generator = config.generator.ok_or_else(|| {
                PipelineError::ConfigInvalid("--hmax-mm applies only to generated meshes".into())
            })?;
            config.generator = Some(generator.with_h(h));
        }
        if let Some(dir) = &self.out_dir {
            config.out_dir = dir.clone();
        }
        if self.deterministic {
            config.deterministic = true;
        }
        if let Some(q) = self.quadrature {
            config.quadrature = match q {
                QuadratureArg::Degree2 => StiffnessQuadrature::Degree2,
                QuadratureArg::Degree4 => StiffnessQuadrature::Degree4,
            };
        }
        if let Some(s) = self.solver {
            config.solver = match s {
                SolverArg::Multigrid => SolverKind::Multigrid,
                SolverArg::Jacobi => SolverKind::Jacobi,
            };
        }
        Ok(config)
    }
}

impl Overrides {
    fn load(&self) -> Result<AnalysisConfig, PipelineError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| PipelineError::ConfigInvalid("--config is required".into()))?;
        self.case.apply(AnalysisConfig::from_file(path)?)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

/// Caps the worker pool at VESSELSTRESS_THREADS when set.
fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("VESSELSTRESS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("VESSELSTRESS_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Solve(o) => {
            let config = o.load()?;
            let bundle = pipeline::run_analysis(&config)?;
            let report_path = config.out_dir.join("report.json");
            let vtk_path = config.out_dir.join("result.vtk");
            write_report(&bundle, &report_path)?;
            write_vtk(&bundle, &vtk_path)?;
            println!(
                "p99 MPS {:.6} MPa over {} nodes, {} elements; {} CG iterations, {:.1} s",
                bundle.p99_mpa,
                bundle.mesh.node_count(),
                bundle.mesh.element_count(),
                bundle.solver.iterations,
                bundle.solver.total_seconds
            );
            println!("wrote {} and {}", report_path.display(), vtk_path.display());
        }
        Command::Benchmark { kind, overrides } => {
            let parsed: BenchmarkKind = kind.parse()?;
            let base = match &overrides.config {
                Some(path) => AnalysisConfig::from_file(path)?,
                None => parsed.default_config(),
            };
            let config = overrides.case.apply(base)?;
            let report = run_benchmark(&kind, &config)?;
            for (surface, c) in [("inner", &report.inner), ("outer", &report.outer)] {
                println!(
                    "{surface} hoop {:.6} MPa, reference {:.6} MPa, error {:.2}%",
                    c.computed_mpa,
                    c.reference_mpa,
                    100.0 * c.rel_error
                );
            }
            println!(
                "{} in {:.1} s",
                if report.passed { "PASS" } else { "FAIL" },
                report.solver.total_seconds
            );
            write_json(&config.out_dir, &format!("benchmark-{kind}.json"), &report)?;
        }
        Command::Convergence { sizes, overrides } => {
            let config = overrides.load()?;
            let report = run_convergence(&config, &sizes)?;
            for level in &report.levels {
                println!("h {:>5} mm  p99 {:.6} MPa  {:>8} nodes", level.h, level.p99_mpa, level.nodes);
            }
            for c in &report.comparisons {
                println!(
                    "{} -> {} mm: relDiffAt99 {:.2}%",
                    c.coarse_h,
                    c.fine_h,
                    100.0 * c.metrics.rel_diff_at99
                );
            }
            println!("monotone: {}, converged: {}", report.monotone, report.converged);
            write_json(&config.out_dir, "convergence.json", &report)?;
        }
        Command::Cohort {
            config,
            synthetic,
            overrides,
        } => {
            let cases = match (config, synthetic) {
                (Some(path), None) => load_cohort(path)?,
                (None, Some(n)) => synthetic_cylinders(n, overrides.hmax_mm.unwrap_or(1.0)),
                _ => return Err(PipelineError::ConfigInvalid("give --config or --synthetic".into())),
            };
            let cases = cases
                .into_iter()
                .map(|(name, c)| overrides.apply(c).map(|c| (name, c)))
                .collect::<Result<Vec<_>, _>>()?;
            let out_dir = overrides.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let report = run_cohort(&cases)?;
            print!("{}", report.to_csv());
            report.write(&out_dir)?;
        }
        Command::MeshInfo(o) => {
            let config = o.load()?;
            let mesh = pipeline::load_mesh(&config)?;
            let boundary = extract_boundary(&mesh).map_err(|source| PipelineError::Mesh {
                stage: pipeline::Stage::Classify,
                source,
            })?;
            print_json(&mesh_quality(&mesh, boundary.len()));
        }
        Command::Classify(o) => {
            let config = o.load()?;
            let mesh = pipeline::load_mesh(&config)?;
            let patches = pipeline::classify(&mesh, &config)?;
            let summary: Vec<PatchSummary> = patches.iter().map(PatchSummary::from).collect();
            print_json(&summary);
        }
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), PipelineError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    vesselstress::io::write_atomic(&path, text.as_bytes()).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    println!("wrote {}", path.display());
    Ok(())
}
