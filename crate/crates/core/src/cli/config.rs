//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Lists are comma separated. Every key has a default, unknown keys and
//! repeated keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::SolverMethod;
use crate::fit::geometric_radii;
use crate::kernels::{KernelConfig, ReferenceSolution, SourceDensity};
use crate::params::FlowParams;
use crate::verify::{
    DecayOptions, EnergyOptions, KernelSuiteOptions, MeshPolicy, TractionOptions, TruncationOptions,
    WellPosednessOptions,
};
use crate::Vec3;

/// Names accepted by the `studies` key.
pub const STUDIES: [&str; 7] = ["kernels", "decay", "sphere_weight", "energy", "infsup", "traction", "truncation"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tau: f64,
    pub rho: f64,
    pub r_inner: f64,
    pub source_center: Vec3,
    pub source_radius: f64,
    pub source_amplitude: Vec3,
    pub source_power: u32,
    pub kernel_rel_tol: f64,

    pub mesh_level: u32,
    pub mesh_layers: usize,
    pub mesh_grading: f64,
    pub mesh_outer_radius: f64,

    pub policy_level: u32,
    pub policy_near_layers: usize,
    pub policy_near_radius: f64,
    pub policy_far_ratio: f64,

    pub truncation_radii: Vec<f64>,
    pub truncation_kernel_rel_tol: f64,
    pub certificate_limit: f64,
    pub solver_tolerance: f64,
    /// Linear solver of the `solve` subcommand.
    pub solver: SolverMethod,

    pub decay_radii: Vec<f64>,
    pub c0_shell_factor: f64,
    pub sphere_weight_radii: Vec<f64>,
    pub traction_radii: Vec<f64>,
    pub traction_polar: usize,
    pub traction_azimuth: usize,

    pub energy_samples: usize,
    pub energy_level: u32,
    pub energy_layers: usize,
    pub energy_grading: f64,
    pub energy_outer_radius: f64,

    pub infsup_outer_radius: f64,
    pub infsup_level: u32,
    pub infsup_layers: usize,
    pub infsup_refinements: usize,

    pub kernel_samples: usize,
    pub adjoint_pairs: usize,
    pub pde_points: usize,
    pub pde_step: f64,
    /// Optional CSV of `x,y,z` points for batch evaluation by `kernels`.
    pub points: Option<PathBuf>,

    pub studies: Vec<String>,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            rho: 1.0,
            r_inner: 1.0,
            source_center: Vec3::new(2.2, 0.0, 0.0),
            source_radius: 1.1,
            source_amplitude: Vec3::new(1.0, -0.5, 0.0),
            source_power: 3,
            kernel_rel_tol: 1e-8,
            mesh_level: 2,
            mesh_layers: 6,
            mesh_grading: 1.3,
            mesh_outer_radius: 4.0,
            policy_level: 2,
            policy_near_layers: 8,
            policy_near_radius: 4.0,
            policy_far_ratio: 1.35,
            truncation_radii: vec![4.0, 6.0, 8.0, 12.0],
            truncation_kernel_rel_tol: 1e-5,
            certificate_limit: 0.3,
            solver_tolerance: 1e-8,
            solver: SolverMethod::Iterative,
            decay_radii: geometric_radii(4.0, 64.0, 9),
            c0_shell_factor: 2.0,
            sphere_weight_radii: vec![8.0, 16.0, 32.0, 64.0, 128.0],
            traction_radii: geometric_radii(4.0, 32.0, 7),
            traction_polar: 32,
            traction_azimuth: 32,
            energy_samples: 10,
            energy_level: 2,
            energy_layers: 6,
            energy_grading: 1.3,
            energy_outer_radius: 4.0,
            infsup_outer_radius: 4.0,
            infsup_level: 0,
            infsup_layers: 2,
            infsup_refinements: 3,
            kernel_samples: 20,
            adjoint_pairs: 10,
            pde_points: 6,
            pde_step: 0.05,
            points: None,
            studies: STUDIES.iter().map(|s| s.to_string()).collect(),
            seed: 7,
            output: PathBuf::from("out"),
        }
    }
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, got {v:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got {v:?}"))
    }
}

fn parse_int<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| parse_f64(s.trim())).collect()
}

fn parse_vec3(v: &str) -> std::result::Result<Vec3, String> {
    let xs = parse_list(v)?;
    if xs.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {v:?}"));
    }
    Ok(Vec3::new(xs[0], xs[1], xs[2]))
}

pub fn solver_name(m: SolverMethod) -> &'static str {
    match m {
        SolverMethod::Auto => "auto",
        SolverMethod::Direct => "direct",
        SolverMethod::Iterative => "iterative",
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every key with its current value, one `key = value` line each, in a
    /// fixed order. Parsing the result gives back the same config.
    pub fn to_text(&self) -> String {
        let v3 = |v: &Vec3| fmt_list(&[v.x, v.y, v.z]);
        let mut out = String::new();
        for (k, v) in [
            ("tau", format!("{:?}", self.tau)),
            ("rho", format!("{:?}", self.rho)),
            ("r_inner", format!("{:?}", self.r_inner)),
            ("source_center", v3(&self.source_center)),
            ("source_radius", format!("{:?}", self.source_radius)),
            ("source_amplitude", v3(&self.source_amplitude)),
            ("source_power", self.source_power.to_string()),
            ("kernel_rel_tol", format!("{:e}", self.kernel_rel_tol)),
            ("mesh_level", self.mesh_level.to_string()),
            ("mesh_layers", self.mesh_layers.to_string()),
            ("mesh_grading", format!("{:?}", self.mesh_grading)),
            ("mesh_outer_radius", format!("{:?}", self.mesh_outer_radius)),
            ("policy_level", self.policy_level.to_string()),
            ("policy_near_layers", self.policy_near_layers.to_string()),
            ("policy_near_radius", format!("{:?}", self.policy_near_radius)),
            ("policy_far_ratio", format!("{:?}", self.policy_far_ratio)),
            ("truncation_radii", fmt_list(&self.truncation_radii)),
            ("truncation_kernel_rel_tol", format!("{:e}", self.truncation_kernel_rel_tol)),
            ("certificate_limit", format!("{:?}", self.certificate_limit)),
            ("solver_tolerance", format!("{:e}", self.solver_tolerance)),
            ("solver", solver_name(self.solver).to_string()),
            ("decay_radii", fmt_list(&self.decay_radii)),
            ("c0_shell_factor", format!("{:?}", self.c0_shell_factor)),
            ("sphere_weight_radii", fmt_list(&self.sphere_weight_radii)),
            ("traction_radii", fmt_list(&self.traction_radii)),
            ("traction_polar", self.traction_polar.to_string()),
            ("traction_azimuth", self.traction_azimuth.to_string()),
            ("energy_samples", self.energy_samples.to_string()),
            ("energy_level", self.energy_level.to_string()),
            ("energy_layers", self.energy_layers.to_string()),
            ("energy_grading", format!("{:?}", self.energy_grading)),
            ("energy_outer_radius", format!("{:?}", self.energy_outer_radius)),
            ("infsup_outer_radius", format!("{:?}", self.infsup_outer_radius)),
            ("infsup_level", self.infsup_level.to_string()),
            ("infsup_layers", self.infsup_layers.to_string()),
            ("infsup_refinements", self.infsup_refinements.to_string()),
            ("kernel_samples", self.kernel_samples.to_string()),
            ("adjoint_pairs", self.adjoint_pairs.to_string()),
            ("pde_points", self.pde_points.to_string()),
            ("pde_step", format!("{:?}", self.pde_step)),
            ("points", self.points.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("studies", self.studies.join(",")),
            ("seed", self.seed.to_string()),
            ("output", self.output.display().to_string()),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Sets one key. The error message is the diagnostic without location.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "tau" => self.tau = parse_f64(v)?,
            "rho" => self.rho = parse_f64(v)?,
            "r_inner" => self.r_inner = parse_f64(v)?,
            "source_center" => self.source_center = parse_vec3(v)?,
            "source_radius" => self.source_radius = parse_f64(v)?,
            "source_amplitude" => self.source_amplitude = parse_vec3(v)?,
            "source_power" => self.source_power = parse_int(v)?,
            "kernel_rel_tol" => self.kernel_rel_tol = parse_f64(v)?,
            "mesh_level" => self.mesh_level = parse_int(v)?,
            "mesh_layers" => self.mesh_layers = parse_int(v)?,
            "mesh_grading" => self.mesh_grading = parse_f64(v)?,
            "mesh_outer_radius" => self.mesh_outer_radius = parse_f64(v)?,
            "policy_level" => self.policy_level = parse_int(v)?,
            "policy_near_layers" => self.policy_near_layers = parse_int(v)?,
            "policy_near_radius" => self.policy_near_radius = parse_f64(v)?,
            "policy_far_ratio" => self.policy_far_ratio = parse_f64(v)?,
            "truncation_radii" => self.truncation_radii = parse_list(v)?,
            "truncation_kernel_rel_tol" => self.truncation_kernel_rel_tol = parse_f64(v)?,
            "certificate_limit" => self.certificate_limit = parse_f64(v)?,
            "solver_tolerance" => self.solver_tolerance = parse_f64(v)?,
            "solver" => {
                self.solver = match v {
                    "auto" => SolverMethod::Auto,
                    "direct" => SolverMethod::Direct,
                    "iterative" => SolverMethod::Iterative,
                    _ => return Err(format!("expected auto, direct or iterative, got {v:?}")),
                }
            }
            "decay_radii" => self.decay_radii = parse_list(v)?,
            "c0_shell_factor" => self.c0_shell_factor = parse_f64(v)?,
            "sphere_weight_radii" => self.sphere_weight_radii = parse_list(v)?,
            "traction_radii" => self.traction_radii = parse_list(v)?,
            "traction_polar" => self.traction_polar = parse_int(v)?,
            "traction_azimuth" => self.traction_azimuth = parse_int(v)?,
            "energy_samples" => self.energy_samples = parse_int(v)?,
            "energy_level" => self.energy_level = parse_int(v)?,
            "energy_layers" => self.energy_layers = parse_int(v)?,
            "energy_grading" => self.energy_grading = parse_f64(v)?,
            "energy_outer_radius" => self.energy_outer_radius = parse_f64(v)?,
            "infsup_outer_radius" => self.infsup_outer_radius = parse_f64(v)?,
            "infsup_level" => self.infsup_level = parse_int(v)?,
            "infsup_layers" => self.infsup_layers = parse_int(v)?,
            "infsup_refinements" => self.infsup_refinements = parse_int(v)?,
            "kernel_samples" => self.kernel_samples = parse_int(v)?,
            "adjoint_pairs" => self.adjoint_pairs = parse_int(v)?,
            "pde_points" => self.pde_points = parse_int(v)?,
            "pde_step" => self.pde_step = parse_f64(v)?,
            "points" => self.points = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "studies" => {
                let names: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                if let Some(bad) = names.iter().find(|n| !STUDIES.contains(&n.as_str())) {
                    return Err(format!("unknown study {bad:?}, expected some of {}", STUDIES.join(",")));
                }
                self.studies = names;
            }
            "seed" => self.seed = parse_int(v)?,
            "output" => {
                if v.is_empty() {
                    return Err("output directory must not be empty".into());
                }
                self.output = PathBuf::from(v);
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults. `source` names the text
    /// in diagnostics.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let origin = format!("{source}:{}", i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { origin: origin.clone(), message: format!("expected `key = value`, got {line:?}") })?;
            let k = k.trim();
            if seen.iter().any(|s| s == k) {
                return Err(Error::Config { origin, message: format!("duplicate key `{k}`") });
            }
            cfg.set(k, v).map_err(|message| Error::Config { origin: origin.clone(), message })?;
            seen.push(k.to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { origin: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `--key value` pairs.
    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v).map_err(|message| Error::Config { origin: format!("--{k}"), message })?;
        }
        Ok(())
    }

    pub fn flow_params(&self) -> Result<FlowParams> {
        FlowParams::new(self.tau, self.rho, self.r_inner)
    }

    pub fn source(&self) -> Result<SourceDensity> {
        SourceDensity::new(self.source_center, self.source_radius, self.source_amplitude, self.source_power, self.r_inner)
    }

    pub fn reference(&self) -> Result<ReferenceSolution> {
        ReferenceSolution::new(self.flow_params()?, self.source()?, KernelConfig::default().with_rel_tol(self.kernel_rel_tol))
    }

    pub fn policy(&self) -> MeshPolicy {
        MeshPolicy {
            angular_level: self.policy_level,
            near_layers: self.policy_near_layers,
            near_radius: self.policy_near_radius,
            far_ratio: self.policy_far_ratio,
        }
    }

    pub fn truncation_options(&self) -> TruncationOptions {
        TruncationOptions {
            radii: self.truncation_radii.clone(),
            policy: self.policy(),
            kernel_rel_tol: self.truncation_kernel_rel_tol,
            solver_tolerance: self.solver_tolerance,
            certificate_limit: self.certificate_limit,
            ..Default::default()
        }
    }

    pub fn decay_options(&self) -> DecayOptions {
        DecayOptions { radii: self.decay_radii.clone(), c0_shell_factor: self.c0_shell_factor, pressure_offset: 0.0 }
    }

    pub fn traction_options(&self) -> TractionOptions {
        TractionOptions { radii: self.traction_radii.clone(), polar: self.traction_polar, azimuth: self.traction_azimuth }
    }

    pub fn energy_options(&self) -> EnergyOptions {
        EnergyOptions {
            r_outer: self.energy_outer_radius,
            layers: self.energy_layers,
            grading: self.energy_grading,
            level: self.energy_level,
            samples: self.energy_samples,
            seed: self.seed,
        }
    }

    pub fn wellposedness_options(&self) -> WellPosednessOptions {
        WellPosednessOptions {
            r_outer: self.infsup_outer_radius,
            coarsest_level: self.infsup_level,
            coarsest_layers: self.infsup_layers,
            refinements: self.infsup_refinements,
        }
    }

    pub fn kernel_suite_options(&self) -> KernelSuiteOptions {
        KernelSuiteOptions {
            seed: self.seed,
            tensor_samples: self.kernel_samples,
            adjoint_pairs: self.adjoint_pairs,
            pde_points: self.pde_points,
            pde_step: self.pde_step,
        }
    }

    /// Cross-key checks that the individual parsers cannot do.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(Error::Config { origin: key.into(), message });
        self.flow_params().map_err(|e| Error::Config { origin: "tau/rho/r_inner".into(), message: e.to_string() })?;
        self.source().map_err(|e| Error::Config { origin: "source_*".into(), message: e.to_string() })?;
        KernelConfig::default()
            .with_rel_tol(self.kernel_rel_tol)
            .validate()
            .map_err(|e| Error::Config { origin: "kernel_rel_tol".into(), message: e.to_string() })?;
        self.policy().validate().map_err(|e| Error::Config { origin: "policy_*".into(), message: e.to_string() })?;
        for (key, radii) in [
            ("truncation_radii", &self.truncation_radii),
            ("decay_radii", &self.decay_radii),
            ("traction_radii", &self.traction_radii),
            ("sphere_weight_radii", &self.sphere_weight_radii),
        ] {
            if radii.windows(2).any(|w| w[1] <= w[0]) || radii.iter().any(|&r| r <= 0.0) {
                return bad(key, "radii must be positive and strictly increasing".into());
            }
        }
        if self.infsup_refinements == 0 {
            return bad("infsup_refinements", "need at least one mesh".into());
        }
        if self.energy_samples == 0 {
            return bad("energy_samples", "need at least one sample".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text(), "t").unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let err = RunConfig::parse("tau = 1\n\ntaus=1\n", "run.cfg").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key") && msg.contains("run.cfg:3"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn comments_lists_and_overrides() {
        let mut cfg = RunConfig::parse("# c\ntruncation_radii = 4, 8 # two\nsource_center=3,0,0\n", "t").unwrap();
        assert_eq!(cfg.truncation_radii, vec![4.0, 8.0]);
        assert_eq!(cfg.source_center, Vec3::new(3.0, 0.0, 0.0));
        cfg.apply_overrides(&[("tau".into(), "2".into())]).unwrap();
        assert_eq!(cfg.tau, 2.0);
        let err = cfg.apply_overrides(&[("nope".into(), "2".into())]).unwrap_err();
        assert!(err.to_string().contains("--nope"));
    }

    #[test]
    fn malformed_values() {
        for text in ["tau = x", "tau", "source_center = 1,2", "mesh_level = -1", "studies = foo", "tau = 1\ntau = 2", "rho = inf"] {
            assert!(RunConfig::parse(text, "t").is_err(), "{text}");
        }
    }

    #[test]
    fn validation_catches_cross_key_errors() {
        let mut cfg = RunConfig::default();
        cfg.rho = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.truncation_radii = vec![8.0, 4.0];
        assert!(cfg.validate().is_err());
    }
}
