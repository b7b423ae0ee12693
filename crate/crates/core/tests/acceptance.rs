//! Acceptance suite: one line per criterion, at the default configuration.
//! Failing criteria are reported but only fail the process when
//! `ACCEPTANCE_STRICT=1` is set.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::oracle::{lambda_by_convolution, oracle_samples, relative_error};
use oseen_lab::cli::{run_study, RunConfig};
use oseen_lab::kernels::oseen_tensor;
use oseen_lab::verify::{kernel_suite, Check, Report, Status, StudyOutcome};

struct Line {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn check<'a>(checks: &'a [Check], name: &str) -> &'a Check {
    checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("missing check {name}"))
}

fn summary(checks: &[&Check]) -> String {
    checks.iter().map(|c| format!("{}={:.3e}", c.name, c.value)).collect::<Vec<_>>().join(", ")
}

/// Study status plus the runtime limit.
fn study_line(id: usize, title: &'static str, outcome: &StudyOutcome, secs: f64, limit: f64) -> Line {
    let failing: Vec<&str> = outcome.failing_checks().map(|c| c.name.as_str()).collect();
    let mut detail = summary(&outcome.checks.iter().collect::<Vec<_>>());
    if outcome.status == Status::Inconclusive {
        detail.push_str("; certificate failed, no slope reported");
    } else if !failing.is_empty() {
        detail.push_str(&format!("; failing: {}", failing.join(",")));
    }
    detail.push_str(&format!(" ({secs:.1} s, limit {limit:.0} s)"));
    Line { id, title, passed: outcome.status == Status::Pass && secs < limit, detail }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Two runs of every study at reduced size, with different thread counts.
fn determinism(root: &Path) -> Line {
    let args = [
        "report",
        "--kernel_samples", "4",
        "--adjoint_pairs", "2",
        "--pde_points", "2",
        "--decay_radii", "4,8,16,32",
        "--energy_samples", "2",
        "--energy_level", "0",
        "--infsup_refinements", "2",
        "--traction_radii", "4,8,16,32",
        "--traction_polar", "8",
        "--traction_azimuth", "8",
        "--truncation_radii", "4,6",
        "--truncation_kernel_rel_tol", "1e-4",
        "--policy_level", "0",
        "--policy_near_layers", "3",
        "--policy_far_ratio", "1.6",
        "--output", "out",
    ];
    let mut trees = Vec::new();
    for (run, threads) in [("run1", "1"), ("run2", "2")] {
        let dir = root.join(run);
        fs::create_dir_all(&dir).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_oseen-lab"))
            .args(args)
            .current_dir(&dir)
            .env("OSEEN_LAB_THREADS", threads)
            .output()
            .unwrap()
            .status;
        if !matches!(status.code(), Some(0) | Some(1)) {
            return Line { id: 10, title: "determinism", passed: false, detail: format!("run exited with {status}") };
        }
        trees.push(read_tree(&dir.join("out")));
    }
    let names: Vec<&str> = trees[0].iter().map(|f| f.0.as_str()).collect();
    let same = trees[0] == trees[1];
    Line {
        id: 10,
        title: "determinism",
        passed: same && names.len() == 10,
        detail: format!("{} files byte-identical across two runs (1 and 2 threads): {}", names.len(), if same { "yes" } else { "no" }),
    }
}

fn main() {
    let cfg = RunConfig::default();
    let out: PathBuf = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&out);
    fs::create_dir_all(&out).unwrap();
    let reference = cfg.reference().expect("default reference");
    let mut lines = Vec::new();
    let mut report = Report::new();

    // 1-3: kernels.
    let (oracle, oracle_secs) = timed(|| {
        oracle_samples(20, 11)
            .into_iter()
            .map(|(z, t)| relative_error(&oseen_tensor(&z, t).unwrap(), &lambda_by_convolution(&z, t)))
            .fold(0.0f64, f64::max)
    });
    let (suite, suite_secs) = timed(|| kernel_suite(&reference, &cfg.kernel_suite_options()).expect("kernel suite"));
    let c = &suite.checks;
    let (tr, dv) = (check(c, "trace_equals_twice_heat_kernel"), check(c, "column_divergence"));
    lines.push(Line {
        id: 1,
        title: "kernel tensor vs convolution",
        passed: oracle <= 1e-6 && tr.passed && dv.passed && oracle_secs + suite_secs < 60.0,
        detail: format!(
            "convolution max rel err={oracle:.3e} (20 samples), {} ({:.1} s, limit 60 s)",
            summary(&[tr, dv]),
            oracle_secs + suite_secs
        ),
    });
    let adj = check(c, "adjoint_identity");
    lines.push(Line {
        id: 2,
        title: "adjoint identity",
        passed: adj.passed && suite_secs < 120.0,
        detail: format!("{} over {} pairs ({suite_secs:.1} s shared with 1 and 3, limit 120 s)", summary(&[adj]), cfg.adjoint_pairs),
    });
    let (mo, di) = (check(c, "momentum_residual"), check(c, "velocity_divergence"));
    lines.push(Line {
        id: 3,
        title: "manufactured PDE residual",
        passed: mo.passed && di.passed && suite_secs < 300.0,
        detail: format!("{} at {} points ({suite_secs:.1} s shared, limit 300 s)", summary(&[mo, di]), cfg.pde_points),
    });
    report.push(oseen_lab::verify::report::kernels_outcome(&suite).unwrap()).unwrap();

    // 4-9: studies through the same entry point as the command line.
    for (id, title, name, limit) in [
        (4, "decay exponents", "decay", 600.0),
        (5, "sphere-weight scaling", "sphere_weight", 60.0),
        (6, "discrete energy identity", "energy", 120.0),
        (7, "well-posedness", "infsup", 300.0),
        (8, "truncation error law", "truncation", 1800.0),
        (9, "traction decay", "traction", 600.0),
    ] {
        let (outcome, secs) = timed(|| run_study(&cfg, name, &reference));
        match outcome {
            Ok(o) => {
                lines.push(study_line(id, title, &o, secs, limit));
                report.push(o).unwrap();
            }
            Err(e) => lines.push(Line { id, title, passed: false, detail: format!("error: {e}") }),
        }
    }

    lines.push(determinism(&out.join("determinism")));
    report.write(&out.join("report")).unwrap();

    println!();
    for l in &lines {
        println!("criterion {:>2} {:<30} {}  {}", l.id, l.title, if l.passed { "PASS" } else { "FAIL" }, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!("\n{} of {} criteria passed; report in {}", lines.len() - failed, lines.len(), out.join("report").display());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
