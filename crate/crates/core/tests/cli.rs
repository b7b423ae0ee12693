use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oseen_lab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_oseen-lab"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("OSEEN_LAB_THREADS", n),
        None => cmd.env_remove("OSEEN_LAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "tau = 1\ntaus=1\n").unwrap();
    let o = oseen_lab(&["mesh", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("unknown key") && err.contains("run.cfg:2"), "{err}");
    let json: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(json["error"], "config");
    assert_eq!(json["exit_code"], 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(oseen_lab(&["nope"], None).status.code(), Some(2));
    assert_eq!(oseen_lab(&["mesh", "--tau"], None).status.code(), Some(2));
    assert_eq!(oseen_lab(&["mesh", "--tau", "-1"], None).status.code(), Some(2));
    assert_eq!(oseen_lab(&["mesh"], Some("zero")).status.code(), Some(2));
}

#[test]
fn mesh_level_0_single_layer_has_60_tets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = oseen_lab(
        &["mesh", "--mesh_level", "0", "--mesh_layers", "1", "--mesh_outer_radius", "2", "--output", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mesh = fs::read_to_string(out.join("mesh.shellmesh")).unwrap();
    assert!(mesh.lines().any(|l| l == "tets 60"));
    let back = oseen_lab::mesh::read_shellmesh(mesh.as_bytes()).unwrap();
    assert_eq!(back.tets.len(), 60);
}

#[test]
fn numerical_failure_exits_3() {
    // A zero source gives identically zero fields, which cannot be fitted.
    let dir = tempfile::tempdir().unwrap();
    let o = oseen_lab(
        &[
            "traction",
            "--source_amplitude",
            "0,0,0",
            "--traction_polar",
            "4",
            "--traction_azimuth",
            "4",
            "--output",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(json["error"], "degenerate_fit");
}

const SMALL_SOLVE: [&str; 8] = ["--mesh_level", "1", "--mesh_layers", "3", "--mesh_outer_radius", "4", "--mesh_grading", "1.4"];

#[test]
fn solve_writes_vtk_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let mut args = vec!["solve", "--output", out.to_str().unwrap()];
    args.extend(SMALL_SOLVE);
    let o = oseen_lab(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("solver.json")).unwrap()).unwrap();
    assert!(stats["residual"].as_f64().unwrap() <= 1e-8);
    assert!(stats["error_to_reference"].as_f64().unwrap() > 0.0);
    let vtk = fs::read_to_string(out.join("solution.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
    assert!(out.join("coefficients.csv").exists());
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
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

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = oseen_lab(
            &[
                "report",
                "--studies",
                "kernels,energy",
                "--kernel_samples",
                "3",
                "--adjoint_pairs",
                "2",
                "--pde_points",
                "2",
                "--energy_samples",
                "2",
                "--energy_level",
                "0",
                "--output",
                out.to_str().unwrap(),
            ],
            Some(threads),
        );
        assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
        read_dir_sorted(&out)
    };
    let a = run("a", "1");
    let b = run("b", "3");
    let c = run("a", "2");
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["config.txt", "report.json", "report.md", "study_energy.csv", "study_kernels.csv"]);
    // The output directory is part of config.txt; compare the rest.
    assert_eq!(a[1..], b[1..]);
    assert_eq!(a, c);
}
