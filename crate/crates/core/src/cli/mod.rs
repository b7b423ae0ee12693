//! Command-line front end: `oseen-lab <subcommand> [--config FILE] [--key value]...`.
//!
//! Exit codes: 0 all checks pass, 1 a study failed or was inconclusive,
//! 2 usage or config error, 3 numerical failure.

pub mod config;

use std::io::BufReader;
use std::path::Path;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

pub use config::RunConfig;

use crate::error::{Error, Result};
use crate::fem::{assemble, dirichlet_lift, solve_with, write_coefficients_csv, write_solution_vtk, SolveOptions};
use crate::kernels::{read_points_csv, write_samples_csv, KernelConfig, ReferenceSolution};
use crate::mesh::{build_shell_mesh, validate, write_shellmesh, write_vtk};
use crate::verify::report::{self, write_atomic};
use crate::verify::{self, Report, Status, StudyOutcome};

/// Caps the worker threads of the global pool.
pub const THREADS_ENV: &str = "OSEEN_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "oseen-lab", version, about = "Exterior rotating Oseen flow: reference fields, truncated solves and studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
enum Command {
    /// Build, validate and export the shell mesh.
    Mesh {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
    /// Kernel invariant suite, plus batch evaluation when `points` is set.
    Kernels {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
    /// Decay exponents of the reference fields, `c0`, and sphere-weight growth.
    Decay {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
    /// One truncated solve with VTK export.
    Solve {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
    /// Discrete inf-sup constants, uniqueness and the energy identity.
    Infsup {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
    /// Truncation error against the outer radius.
    Truncation {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
    /// Decay of the artificial-boundary traction of the reference fields.
    Traction {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
    /// Every study listed in `studies`, aggregated into one report.
    Report {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        rest: Vec<String>,
    },
}

/// Splits `--config FILE` and `--key value` pairs.
fn parse_rest(rest: &[String]) -> Result<(Option<String>, Vec<(String, String)>)> {
    let usage = |message: String, origin: &str| Error::Config { origin: origin.into(), message };
    let mut config = None;
    let mut pairs = Vec::new();
    let mut it = rest.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| usage(format!("expected `--key value`, got {arg:?}"), "command line"))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| usage("missing value".into(), arg))?;
                (key.to_string(), v.clone())
            }
        };
        if key == "config" {
            if config.replace(value).is_some() {
                return Err(usage("given twice".into(), "--config"));
            }
        } else {
            pairs.push((key, value));
        }
    }
    Ok((config, pairs))
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config { origin: THREADS_ENV.into(), message: format!("expected a positive integer, got {v:?}") })?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn error_json(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }).to_string()
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(Status::Pass) => 0,
        Ok(_) => 1,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

fn resolve(rest: &[String]) -> Result<RunConfig> {
    let (path, pairs) = parse_rest(rest)?;
    let mut cfg = match path {
        Some(p) => RunConfig::load(Path::new(&p))?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&pairs)?;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<Status> {
    init_threads()?;
    let (Command::Mesh { rest }
    | Command::Kernels { rest }
    | Command::Decay { rest }
    | Command::Solve { rest }
    | Command::Infsup { rest }
    | Command::Truncation { rest }
    | Command::Traction { rest }
    | Command::Report { rest }) = &cmd;
    let cfg = resolve(rest)?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::Config { origin: "output".into(), message: e.to_string() })?;
    write_atomic(&cfg.output.join("config.txt"), cfg.to_text())?;
    match cmd {
        Command::Mesh { .. } => run_mesh(&cfg),
        Command::Solve { .. } => run_solve(&cfg),
        Command::Kernels { .. } => {
            if let Some(points) = &cfg.points {
                batch_evaluate(&cfg, points)?;
            }
            finish(&cfg, &["kernels"])
        }
        Command::Decay { .. } => finish(&cfg, &["decay", "sphere_weight"]),
        Command::Infsup { .. } => finish(&cfg, &["infsup", "energy"]),
        Command::Truncation { .. } => finish(&cfg, &["truncation"]),
        Command::Traction { .. } => finish(&cfg, &["traction"]),
        Command::Report { .. } => {
            let names: Vec<&str> = config::STUDIES.iter().copied().filter(|s| cfg.studies.iter().any(|n| n == s)).collect();
            finish(&cfg, &names)
        }
    }
}

/// Runs one named study.
pub fn run_study(cfg: &RunConfig, name: &str, reference: &ReferenceSolution) -> Result<StudyOutcome> {
    match name {
        "kernels" => report::kernels_outcome(&verify::kernel_suite(reference, &cfg.kernel_suite_options())?),
        "decay" => report::decay_outcome(&verify::reference_decay_study(reference, &cfg.decay_options())?),
        "sphere_weight" => report::sphere_weight_outcome(&verify::sphere_weight_study(&cfg.sphere_weight_radii)?),
        "energy" => report::energy_outcome(&verify::energy_identity_study(&cfg.flow_params()?, &cfg.energy_options())?),
        "infsup" => report::wellposed_outcome(&verify::wellposedness_study(&cfg.flow_params()?, &cfg.wellposedness_options())?),
        "traction" => report::traction_outcome(&verify::traction_decay_study(reference, &cfg.traction_options())?),
        "truncation" => {
            let study = verify::truncation_study_with_progress(reference, &cfg.truncation_options(), |r| {
                eprintln!(
                    "truncation: R = {} level {} ({} velocity dofs) error {:.4e}",
                    r.radius, r.angular_level, r.velocity_dofs, r.error
                )
            })?;
            report::truncation_outcome(&study)
        }
        _ => Err(Error::InvalidParameter(format!("unknown study {name}"))),
    }
}

/// Runs the studies, writes the report into the output directory and
/// prints one status line per study.
pub fn run_studies(cfg: &RunConfig, names: &[&str]) -> Result<Report> {
    let reference = cfg.reference()?;
    let mut report = Report::new();
    for name in names {
        let outcome = run_study(cfg, name, &reference)?;
        println!("{}: {}", outcome.name, outcome.status.as_str());
        report.push(outcome)?;
    }
    report.write(&cfg.output)?;
    Ok(report)
}

fn finish(cfg: &RunConfig, names: &[&str]) -> Result<Status> {
    let report = run_studies(cfg, names)?;
    let status = report.status();
    println!("overall: {} ({})", status.as_str(), cfg.output.join("report.json").display());
    Ok(status)
}

fn batch_evaluate(cfg: &RunConfig, points: &Path) -> Result<()> {
    let file = std::fs::File::open(points).map_err(|e| Error::Config { origin: "points".into(), message: format!("{}: {e}", points.display()) })?;
    let pts = read_points_csv(BufReader::new(file))?;
    let samples = cfg.reference()?.evaluate_batch(&pts)?;
    let mut buf = Vec::new();
    write_samples_csv(&mut buf, &samples)?;
    write_atomic(&cfg.output.join("samples.csv"), buf)?;
    Ok(())
}

fn run_mesh(cfg: &RunConfig) -> Result<Status> {
    let mesh = build_shell_mesh(cfg.r_inner, cfg.mesh_outer_radius, cfg.mesh_level, cfg.mesh_layers, cfg.mesh_grading)?;
    let quality = validate(&mesh)?;
    let mut buf = Vec::new();
    write_shellmesh(&mut buf, &mesh)?;
    write_atomic(&cfg.output.join("mesh.shellmesh"), &buf)?;
    buf.clear();
    write_vtk(&mut buf, &mesh, &[])?;
    write_atomic(&cfg.output.join("mesh.vtk"), &buf)?;
    write_atomic(&cfg.output.join("mesh_quality.json"), pretty(&quality)?)?;
    println!("mesh: {} tets, {} vertices, min dihedral {:.2} deg", quality.tets, quality.vertices, quality.min_dihedral_deg);
    Ok(Status::Pass)
}

#[derive(Serialize)]
struct SolverStats {
    method: &'static str,
    velocity_dofs: usize,
    pressure_dofs: usize,
    constrained_dofs: usize,
    pressure_pinned: bool,
    residual: f64,
    iterations: usize,
    /// `|I_h u_ref - V_R|^(R)`.
    error_to_reference: f64,
}

fn run_solve(cfg: &RunConfig) -> Result<Status> {
    let p = cfg.flow_params()?;
    let mesh = build_shell_mesh(cfg.r_inner, cfg.mesh_outer_radius, cfg.mesh_level, cfg.mesh_layers, cfg.mesh_grading)?;
    let sys = assemble(&mesh, &p)?;
    let reference = ReferenceSolution::new(p, cfg.source()?, KernelConfig::default().with_rel_tol(cfg.truncation_kernel_rel_tol))?;
    let lift = dirichlet_lift(&sys, |x| Ok(reference.velocity(x)?.value))?;
    let source = reference.source;
    let opts = SolveOptions { tolerance: cfg.solver_tolerance, method: cfg.solver, ..Default::default() };
    let sol = solve_with(&sys, &lift, |x| source.value(x), opts)?;
    let iu = sys.space.interpolate(|x| Ok(reference.velocity(x)?.value))?;
    let diff: Vec<f64> = iu.iter().zip(&sol.velocity).map(|(a, b)| a - b).collect();
    let stats = SolverStats {
        method: config::solver_name(sol.method),
        velocity_dofs: sol.velocity_dofs,
        pressure_dofs: sol.pressure_dofs,
        constrained_dofs: sol.constrained_dofs,
        pressure_pinned: sol.pressure_pinned,
        residual: sol.residual,
        iterations: sol.iterations,
        error_to_reference: crate::fem::weighted_norm(&sys, &diff),
    };
    let mut buf = Vec::new();
    write_solution_vtk(&mut buf, &sys, &sol.velocity, &sol.pressure)?;
    write_atomic(&cfg.output.join("solution.vtk"), &buf)?;
    buf.clear();
    write_coefficients_csv(&mut buf, &sys, &sol.velocity, &sol.pressure)?;
    write_atomic(&cfg.output.join("coefficients.csv"), &buf)?;
    write_atomic(&cfg.output.join("solver.json"), pretty(&stats)?)?;
    println!(
        "solve: {} velocity dofs, {} iterations, residual {:.2e}, error to reference {:.4e}",
        stats.velocity_dofs, stats.iterations, stats.residual, stats.error_to_reference
    );
    Ok(Status::Pass)
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rest_arguments() {
        let (c, p) = parse_rest(&args(&["--tau", "2", "--config=a.cfg", "--rho=3"])).unwrap();
        assert_eq!(c.as_deref(), Some("a.cfg"));
        assert_eq!(p, vec![("tau".into(), "2".into()), ("rho".into(), "3".into())]);
        assert!(parse_rest(&args(&["tau", "2"])).is_err());
        assert!(parse_rest(&args(&["--tau"])).is_err());
    }

    #[test]
    fn unknown_override_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        assert_eq!(run(["oseen-lab", "mesh", "--output", out.to_str().unwrap(), "--taus", "1"]), 2);
        assert_eq!(run(["oseen-lab", "frobnicate"]), 2);
    }

    #[test]
    fn mesh_subcommand_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m");
        let code = run([
            "oseen-lab", "mesh", "--mesh_level", "0", "--mesh_layers", "1", "--mesh_outer_radius", "2", "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let q: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("mesh_quality.json")).unwrap()).unwrap();
        assert_eq!(q["tets"], 60);
        assert!(out.join("mesh.vtk").exists() && out.join("config.txt").exists());
    }
}
