//! Decay of the artificial traction `L_R(u_ref, π_ref + c0)` on spheres.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decay::{estimate_c0, shell_points};
use super::{Check, Status};
use crate::error::Result;
use crate::fit::{geometric_radii, DecayFit};
use crate::kernels::ReferenceSolution;
use crate::params::SphereQuadrature;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractionOptions {
    pub radii: Vec<f64>,
    pub polar: usize,
    pub azimuth: usize,
}

impl Default for TractionOptions {
    fn default() -> Self {
        Self { radii: geometric_radii(4.0, 32.0, 7), polar: 32, azimuth: 32 }
    }
}

/// Surface norms on one sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractionSample {
    pub radius: f64,
    /// `‖∇u‖` on the sphere.
    pub gradient: f64,
    /// `‖π + c0‖` on the sphere.
    pub pressure: f64,
    /// `(∫ (1 - x1/R)² |u|²)^{1/2}`.
    pub velocity: f64,
    /// `‖L_R(u, π + c0)‖` on the sphere.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractionStudy {
    pub c0: f64,
    pub samples: Vec<TractionSample>,
    /// Fits of the total and of the three terms, in that order.
    pub fits: Vec<DecayFit>,
    pub checks: Vec<Check>,
    pub status: Status,
}

fn sphere_norms(r: &ReferenceSolution, radius: f64, c0: f64, quad: SphereQuadrature) -> Result<TractionSample> {
    let tau = r.params.tau;
    let parts = quad
        .points(radius)
        .par_iter()
        .map(|(x, w)| {
            let g = r.velocity_gradient(x)?;
            let u = g.value;
            let pi = r.pressure(x) + c0;
            let n = x / radius;
            let weight = 1.0 - x.x / radius;
            // Σ_j ∂_j u_k x_j / R - π x_k / R + (τ/2)(1 - x1/R) u_k
            let l: Vec3 = g.gradient * n - n * pi + u * (0.5 * tau * weight);
            Ok([
                w * g.gradient.norm_squared(),
                w * pi * pi,
                w * weight * weight * u.norm_squared(),
                w * l.norm_squared(),
            ])
        })
        .collect::<Result<Vec<[f64; 4]>>>()?;
    let mut s = [0.0; 4];
    for p in &parts {
        for k in 0..4 {
            s[k] += p[k];
        }
    }
    Ok(TractionSample { radius, gradient: s[0].sqrt(), pressure: s[1].sqrt(), velocity: s[2].sqrt(), total: s[3].sqrt() })
}

pub fn traction_decay_study(r: &ReferenceSolution, opts: &TractionOptions) -> Result<TractionStudy> {
    let hi = opts.radii.iter().cloned().fold(0.0, f64::max);
    let shell: Vec<(Vec3, f64)> = shell_points(2.0 * hi, 2).into_iter().map(|x| (x, r.pressure(&x))).collect();
    let c0 = estimate_c0(&shell, r.params.r_inner)?;
    let quad = SphereQuadrature { polar: opts.polar, azimuth: opts.azimuth, ..Default::default() };
    let samples = opts.radii.iter().map(|&rad| sphere_norms(r, rad, c0, quad)).collect::<Result<Vec<_>>>()?;
    let series = |f: fn(&TractionSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    let fits = vec![
        DecayFit::fit("traction_total", "sphere", &opts.radii, &series(|s| s.total))?,
        DecayFit::fit("traction_gradient_term", "sphere", &opts.radii, &series(|s| s.gradient))?,
        DecayFit::fit("traction_pressure_term", "sphere", &opts.radii, &series(|s| s.pressure))?,
        DecayFit::fit("traction_velocity_term", "sphere", &opts.radii, &series(|s| s.velocity))?,
    ];
    let checks = vec![
        Check::within("traction_total_slope", fits[0].exponent, -1.3, -0.7),
        Check::at_most("traction_total_fit_residual", fits[0].residual, crate::fit::MAX_RELIABLE_RESIDUAL),
    ];
    let status = Status::from_checks(&checks);
    Ok(TractionStudy { c0, samples, fits, checks, status })
}
