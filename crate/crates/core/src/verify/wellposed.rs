//! Discrete inf-sup constants under refinement and uniqueness of the
//! truncated problem.

use serde::{Deserialize, Serialize};

use super::{Check, Status};
use crate::error::Result;
use crate::fem::{assemble, discrete_infsup, solve, InfSupEstimate};
use crate::mesh::build_shell_mesh;
use crate::params::FlowParams;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPosednessOptions {
    pub r_outer: f64,
    /// Angular level of the coarsest mesh; each refinement adds one level and
    /// doubles the number of layers, so the meshes are nested.
    pub coarsest_level: u32,
    pub coarsest_layers: usize,
    pub refinements: usize,
}

impl Default for WellPosednessOptions {
    fn default() -> Self {
        Self { r_outer: 4.0, coarsest_level: 0, coarsest_layers: 2, refinements: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfSupRun {
    pub level: u32,
    pub layers: usize,
    pub estimate: InfSupEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPosednessStudy {
    pub runs: Vec<InfSupRun>,
    /// Largest velocity and pressure coefficient of the zero-data solve.
    pub zero_data_solution: f64,
    pub pressure_pinned: bool,
    pub checks: Vec<Check>,
    pub status: Status,
}

pub fn wellposedness_study(p: &FlowParams, opts: &WellPosednessOptions) -> Result<WellPosednessStudy> {
    let mut runs = Vec::new();
    let mut finest = None;
    for k in 0..opts.refinements {
        let level = opts.coarsest_level + k as u32;
        let layers = opts.coarsest_layers << k;
        // Exactly geometric radii, so doubling the layer count bisects layers.
        let grading = (opts.r_outer / p.r_inner).powf(1.0 / layers as f64);
        let mesh = build_shell_mesh(p.r_inner, opts.r_outer, level, layers, grading)?;
        let sys = assemble(&mesh, p)?;
        runs.push(InfSupRun { level, layers, estimate: discrete_infsup(&sys)? });
        finest = Some(sys);
    }
    let sys = finest.expect("at least one refinement");
    let lift = vec![0.0; sys.velocity_dofs()];
    let sol = solve(&sys, &lift, |_| Vec3::zeros())?;
    let zero = sol.velocity.iter().chain(&sol.pressure).fold(0.0f64, |m, v| m.max(v.abs()));

    let values: Vec<f64> = runs.iter().map(|r| r.estimate.value).collect();
    let coarsest = values[0];
    let worst = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::at_least("infsup_positive", worst, f64::MIN_POSITIVE),
        Check::at_least("infsup_ratio_to_coarsest", worst / coarsest, 0.5),
        Check::at_most("zero_data_solution", zero, 1e-12),
        Check::holds("no_pressure_pin", !sol.pressure_pinned),
    ];
    let status = Status::from_checks(&checks);
    Ok(WellPosednessStudy { runs, zero_data_solution: zero, pressure_pinned: sol.pressure_pinned, checks, status })
}
