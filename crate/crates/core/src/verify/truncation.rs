//! Truncation error `|I_h u_ref - V_R|^(R)` as a function of the outer
//! radius, with a finer control run certifying that the mesh error is
//! subdominant.

use serde::{Deserialize, Serialize};

use super::{Check, Status};
use crate::error::{Error, Result};
use crate::fem::{assemble, solve_with, weighted_norm, SolveOptions, SolverMethod};
use crate::fit::DecayFit;
use crate::kernels::ReferenceSolution;
use crate::mesh::{build_from_radii, ShellMesh};

/// Radial layering: geometric layers up to `near_radius` (where the source
/// lives), then geometric layers with ratio at most `far_ratio`. The layer
/// count grows like `log R` at a fixed angular level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshPolicy {
    pub angular_level: u32,
    pub near_layers: usize,
    pub near_radius: f64,
    pub far_ratio: f64,
}

impl Default for MeshPolicy {
    fn default() -> Self {
        Self { angular_level: 2, near_layers: 8, near_radius: 4.0, far_ratio: 1.35 }
    }
}

impl MeshPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.near_layers == 0 || !(self.near_radius > 0.0) || !(self.far_ratio > 1.0) {
            return Err(Error::InvalidParameter(format!("invalid mesh policy {self:?}")));
        }
        Ok(())
    }

    pub fn radii(&self, r_inner: f64, r_outer: f64) -> Vec<f64> {
        let near = self.near_radius.min(r_outer);
        let n_near = if near < self.near_radius {
            ((self.near_layers as f64) * (near / r_inner).ln() / (self.near_radius / r_inner).ln()).ceil().max(1.0) as usize
        } else {
            self.near_layers
        };
        let mut radii: Vec<f64> = (0..=n_near).map(|i| r_inner * (near / r_inner).powf(i as f64 / n_near as f64)).collect();
        if r_outer > near {
            let n_far = ((r_outer / near).ln() / self.far_ratio.ln()).ceil() as usize;
            radii.extend((1..=n_far).map(|i| near * (r_outer / near).powf(i as f64 / n_far as f64)));
        }
        *radii.last_mut().expect("non-empty") = r_outer;
        radii
    }

    pub fn mesh(&self, r_inner: f64, r_outer: f64) -> Result<ShellMesh> {
        self.validate()?;
        build_from_radii(&self.radii(r_inner, r_outer), self.angular_level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationOptions {
    pub radii: Vec<f64>,
    pub policy: MeshPolicy,
    /// Relative tolerance of the kernel quadrature for the interpolated reference.
    pub kernel_rel_tol: f64,
    pub solver_tolerance: f64,
    /// Largest admissible relative change of `e(R)` in the control run.
    pub certificate_limit: f64,
    pub slope_band: [f64; 2],
}

impl Default for TruncationOptions {
    fn default() -> Self {
        Self {
            radii: vec![4.0, 6.0, 8.0, 12.0],
            policy: MeshPolicy::default(),
            kernel_rel_tol: 1e-5,
            solver_tolerance: 1e-8,
            certificate_limit: 0.3,
            slope_band: [-1.4, -0.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRun {
    pub radius: f64,
    pub angular_level: u32,
    pub layers: usize,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub error: f64,
    /// `|I_h u_ref|^(R)`, for scale.
    pub reference_norm: f64,
    pub solver: SolverMethod,
    pub solver_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationStudy {
    pub runs: Vec<TruncationRun>,
    /// Same radii and layers, one angular level finer.
    pub control: Vec<TruncationRun>,
    /// `|e_control - e| / e` per radius.
    pub control_shift: Vec<f64>,
    pub certified: bool,
    pub monotone: bool,
    /// Present only when the certificate holds.
    pub fit: Option<DecayFit>,
    pub checks: Vec<Check>,
    pub status: Status,
}

/// One truncated solve at `radius` and its error against the interpolated reference.
pub fn truncation_run(r: &ReferenceSolution, radius: f64, policy: &MeshPolicy, solver_tolerance: f64) -> Result<TruncationRun> {
    let p = &r.params;
    let mesh = policy.mesh(p.r_inner, radius)?;
    let layers = mesh.radial_layers;
    let sys = assemble(&mesh, p)?;
    let iu = sys.space.interpolate(|x| Ok(r.velocity(x)?.value))?;
    let mut lift = vec![0.0; iu.len()];
    for &n in &sys.space.inner_nodes {
        lift[3 * n..3 * n + 3].copy_from_slice(&iu[3 * n..3 * n + 3]);
    }
    // Direct factorization fill on these meshes exceeds desk memory.
    let opts = SolveOptions { tolerance: solver_tolerance, method: SolverMethod::Iterative, ..Default::default() };
    let source = r.source;
    let sol = solve_with(&sys, &lift, |x| source.value(x), opts)?;
    let diff: Vec<f64> = iu.iter().zip(&sol.velocity).map(|(a, b)| a - b).collect();
    Ok(TruncationRun {
        radius,
        angular_level: policy.angular_level,
        layers,
        velocity_dofs: sol.velocity_dofs,
        pressure_dofs: sol.pressure_dofs,
        error: weighted_norm(&sys, &diff),
        reference_norm: weighted_norm(&sys, &iu),
        solver: sol.method,
        solver_residual: sol.residual,
        iterations: sol.iterations,
    })
}

pub fn truncation_study(r: &ReferenceSolution, opts: &TruncationOptions) -> Result<TruncationStudy> {
    truncation_study_with_progress(r, opts, |_| {})
}

/// As [`truncation_study`], calling `progress` after every solve.
pub fn truncation_study_with_progress<F: FnMut(&TruncationRun)>(
    r: &ReferenceSolution,
    opts: &TruncationOptions,
    mut progress: F,
) -> Result<TruncationStudy> {
    let p = &r.params;
    if opts.radii.len() < 2 {
        return Err(Error::InvalidParameter("truncation study needs at least two radii".into()));
    }
    if let Some(bad) = opts.radii.iter().find(|&&rad| rad < 2.0 * p.r_inner) {
        return Err(Error::InvalidParameter(format!("radius {bad} is below twice the obstacle radius")));
    }
    if opts.radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("truncation radii must be strictly increasing".into()));
    }
    let reach = r.source.center().norm() + r.source.radius();
    if reach >= opts.radii[0] {
        return Err(Error::InvalidParameter(format!(
            "source support reaches radius {reach}, outside the smallest domain B_{}",
            opts.radii[0]
        )));
    }
    let reference = ReferenceSolution::new(*p, r.source, r.config.with_rel_tol(opts.kernel_rel_tol))?;
    let fine = MeshPolicy { angular_level: opts.policy.angular_level + 1, ..opts.policy };
    let mut runs = Vec::new();
    let mut control = Vec::new();
    for &radius in &opts.radii {
        let run = truncation_run(&reference, radius, &opts.policy, opts.solver_tolerance)?;
        progress(&run);
        runs.push(run);
        let run = truncation_run(&reference, radius, &fine, opts.solver_tolerance)?;
        progress(&run);
        control.push(run);
    }
    let control_shift: Vec<f64> = runs.iter().zip(&control).map(|(a, b)| (b.error - a.error).abs() / a.error).collect();
    let certified = control_shift.iter().all(|&s| s <= opts.certificate_limit);
    let monotone = runs.windows(2).all(|w| w[1].error < w[0].error);

    let mut checks: Vec<Check> = opts
        .radii
        .iter()
        .zip(&control_shift)
        .map(|(rad, s)| Check::at_most(&format!("control_shift_R{rad}"), *s, opts.certificate_limit))
        .collect();
    checks.push(Check::holds("error_decreases_with_radius", monotone));
    let fit = if certified {
        let radii: Vec<f64> = runs.iter().map(|r| r.radius).collect();
        let errors: Vec<f64> = runs.iter().map(|r| r.error).collect();
        let fit = DecayFit::fit("truncation_error", "weighted_norm", &radii, &errors)?;
        checks.push(Check::within("truncation_slope", fit.exponent, opts.slope_band[0], opts.slope_band[1]));
        checks.push(Check::at_most("truncation_fit_residual", fit.residual, crate::fit::MAX_RELIABLE_RESIDUAL));
        Some(fit)
    } else {
        None
    };
    let status = if certified { Status::from_checks(&checks) } else { Status::Inconclusive };
    Ok(TruncationStudy { runs, control, control_shift, certified, monotone, fit, checks, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_layers_grow_logarithmically() {
        let pol = MeshPolicy::default();
        let r4 = pol.radii(1.0, 4.0);
        assert_eq!(r4.len(), 9);
        assert!((r4[1] / r4[0] - r4[8] / r4[7]).abs() < 1e-12);
        let r12 = pol.radii(1.0, 12.0);
        assert_eq!(r12.len(), 13);
        assert_eq!(*r12.last().unwrap(), 12.0);
        assert!(r12.windows(2).all(|w| w[1] / w[0] <= 1.35 + 1e-12));
        let r2 = pol.radii(1.0, 2.0);
        assert_eq!(r2.len(), 5);
    }
}
