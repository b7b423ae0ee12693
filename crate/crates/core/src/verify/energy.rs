//! Discrete energy identity `wᵀAw = (|w|^(R))²` for test functions that
//! vanish on the inner sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{max_of, Check, Status};
use crate::error::Result;
use crate::fem::{assemble, weighted_norm, MixedSystem};
use crate::mesh::build_shell_mesh;
use crate::params::FlowParams;
use crate::Vec3;

/// A smooth random vector field `(|x| - r_inner) Σ a_m sin(k_m·x + φ_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothField {
    pub r_inner: f64,
    modes: Vec<(Vec3, Vec3, f64)>,
}

impl SmoothField {
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        let s: Vec3 = self.modes.iter().map(|(k, a, phi)| a * (k.dot(x) + phi).sin()).sum();
        s * (x.norm() - self.r_inner)
    }
}

/// Four modes with wave numbers below 1.5 and unit-scale amplitudes.
pub fn smooth_test_field(seed: u64, r_inner: f64) -> SmoothField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = |s: f64| Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * s;
    let modes = (0..4).map(|_| (v(3.0), v(2.0), v(2.0 * std::f64::consts::TAU).x + std::f64::consts::PI)).collect();
    SmoothField { r_inner, modes }
}

/// Interpolates `field` and zeroes the inner-sphere dofs.
pub fn discrete_test_function(sys: &MixedSystem, field: &SmoothField) -> Result<Vec<f64>> {
    let mut w = sys.space.interpolate(|x| Ok(field.eval(x)))?;
    sys.restrict_to_test_space(&mut w);
    Ok(w)
}

/// `|wᵀAw - (|w|^(R))²| / (|w|^(R))²`.
pub fn energy_residual(sys: &MixedSystem, w: &[f64]) -> f64 {
    let n2 = weighted_norm(sys, w).powi(2);
    (sys.form(w, w) - n2).abs() / n2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyOptions {
    pub r_outer: f64,
    pub layers: usize,
    pub grading: f64,
    /// Default mesh level; the refinement runs at `level + 1`.
    pub level: u32,
    pub samples: usize,
    pub seed: u64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { r_outer: 4.0, layers: 6, grading: 1.3, level: 2, samples: 10, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyStudy {
    pub levels: [u32; 2],
    pub max_element_diameter: [f64; 2],
    /// Relative residual per sample at the default and the refined level.
    pub residuals: Vec<[f64; 2]>,
    pub checks: Vec<Check>,
    pub status: Status,
}

pub fn energy_identity_study(p: &FlowParams, opts: &EnergyOptions) -> Result<EnergyStudy> {
    let fields: Vec<SmoothField> = (0..opts.samples).map(|i| smooth_test_field(opts.seed.wrapping_mul(1000) + i as u64, p.r_inner)).collect();
    let levels = [opts.level, opts.level + 1];
    let mut residuals = vec![[0.0; 2]; opts.samples];
    let mut diam = [0.0; 2];
    for (l, &level) in levels.iter().enumerate() {
        let mesh = build_shell_mesh(p.r_inner, opts.r_outer, level, opts.layers, opts.grading)?;
        diam[l] = mesh.max_diameter();
        let sys = assemble(&mesh, p)?;
        for (i, f) in fields.iter().enumerate() {
            residuals[i][l] = energy_residual(&sys, &discrete_test_function(&sys, f)?);
        }
    }
    // Worst case over the samples; a single residual can sit near a sign
    // change and not shrink.
    let worst = |l: usize| max_of(residuals.iter().map(|r| r[l]));
    let shrink = worst(0) / worst(1);
    let checks = vec![
        Check::at_most("energy_residual_default_mesh", worst(0), 0.05),
        Check::at_least("energy_residual_shrink_per_refinement", shrink, 3.0),
    ];
    let status = Status::from_checks(&checks);
    Ok(EnergyStudy { levels, max_element_diameter: diam, residuals, checks, status })
}
