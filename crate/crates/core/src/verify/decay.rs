//! Decay exponents of the reference fields along rays and the pressure
//! normalisation constant `c0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, Status};
use crate::error::{Error, Result};
use crate::fit::{geometric_radii, DecayFit};
use crate::kernels::ReferenceSolution;
use crate::mesh::icosphere;
use crate::params::{fa_scaling_fit, sphere_weight_exponent, wake_weight, SphereQuadrature};
use crate::Vec3;

/// `-median(π)` over samples on a far shell, so that `π + c0` has median
/// zero there. The shell must have radius at least `4 r_inner`.
pub fn estimate_c0(samples: &[(Vec3, f64)], r_inner: f64) -> Result<f64> {
    if samples.len() < 8 {
        return Err(Error::InvalidParameter(format!("c0 needs at least 8 shell samples, got {}", samples.len())));
    }
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.norm() < 4.0 * r_inner) {
        return Err(Error::InvalidParameter(format!(
            "c0 samples must lie at radius >= {}, found one at {}",
            4.0 * r_inner,
            x.norm()
        )));
    }
    let mut v: Vec<f64> = samples.iter().map(|s| s.1).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite pressure sample".into()));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    Ok(-median)
}

/// Antipodally symmetric sample points (icosphere vertices) on a shell.
pub fn shell_points(radius: f64, level: u32) -> Vec<Vec3> {
    icosphere(level).0.into_iter().map(|v| v * radius).collect()
}

fn ray_name(d: &Vec3) -> String {
    format!("ray({},{},{})", d.x, d.y, d.z)
}

/// Samples `field` along each unit ray at the given radii and fits a power
/// law per ray.
pub fn decay_study<F>(quantity: &str, field: F, rays: &[Vec3], radii: &[f64]) -> Result<Vec<DecayFit>>
where
    F: Fn(&Vec3) -> Result<f64> + Sync,
{
    rays.iter()
        .map(|d| {
            let dir = d.normalize();
            let values = radii.par_iter().map(|&r| field(&(dir * r))).collect::<Result<Vec<_>>>()?;
            DecayFit::fit(quantity, &ray_name(d), radii, &values)
        })
        .collect()
}

/// Max/min ratio of `|u| (|y| s(y))` along a fitted ray: 1 when the samples
/// follow the envelope shape exactly.
pub fn envelope_ratio_spread(fit: &DecayFit, dir: &Vec3) -> f64 {
    let ratios: Vec<f64> = fit
        .radii
        .iter()
        .zip(&fit.values)
        .map(|(&r, &v)| {
            let y = dir.normalize() * r;
            v * r * wake_weight(&y)
        })
        .collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub radii: Vec<f64>,
    /// The `c0` shell sits at this multiple of the largest radius.
    pub c0_shell_factor: f64,
    /// Constant added to the reference pressure before `c0` is estimated.
    pub pressure_offset: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { radii: geometric_radii(4.0, 64.0, 9), c0_shell_factor: 2.0, pressure_offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayStudy {
    pub c0: f64,
    pub c0_shell_radius: f64,
    pub fits: Vec<DecayFit>,
    /// Envelope-ratio spread of each velocity fit, in the order of `fits`.
    pub envelope_spread: Vec<Option<f64>>,
    pub checks: Vec<Check>,
    pub status: Status,
}

/// Velocity downstream and transverse, and `|π + c0|` transverse, with
/// target exponents -1, -2 and -2.
pub fn reference_decay_study(r: &ReferenceSolution, opts: &DecayOptions) -> Result<DecayStudy> {
    let offset = opts.pressure_offset;
    let pressure = |x: &Vec3| r.pressure(x) + offset;
    let hi = opts.radii.iter().cloned().fold(0.0, f64::max);
    let shell_radius = opts.c0_shell_factor * hi;
    let shell: Vec<(Vec3, f64)> = shell_points(shell_radius, 2).into_iter().map(|x| (x, pressure(&x))).collect();
    let c0 = estimate_c0(&shell, r.params.r_inner)?;

    let speed = |x: &Vec3| -> Result<f64> { Ok(r.velocity(x)?.value.norm()) };
    let (down, side) = (Vec3::x(), Vec3::y());
    let mut fits = decay_study("velocity", speed, &[down, side], &opts.radii)?;
    let spread = vec![Some(envelope_ratio_spread(&fits[0], &down)), Some(envelope_ratio_spread(&fits[1], &side))];
    fits.extend(decay_study("pressure_plus_c0", |x| Ok((pressure(x) + c0).abs()), &[side], &opts.radii)?);

    let targets = [-1.0, -2.0, -2.0];
    let mut checks = Vec::new();
    for (fit, target) in fits.iter().zip(targets) {
        let name = format!("{}_{}_exponent", fit.quantity, fit.sampling);
        checks.push(Check::within(&name, fit.exponent, target - 0.25, target + 0.25));
        checks.push(Check::at_most(&format!("{}_{}_fit_residual", fit.quantity, fit.sampling), fit.residual, crate::fit::MAX_RELIABLE_RESIDUAL));
    }
    let mut envelope_spread = spread;
    envelope_spread.push(None);
    let status = Status::from_checks(&checks);
    Ok(DecayStudy { c0, c0_shell_radius: shell_radius, fits, envelope_spread, checks, status })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereWeightStudy {
    pub fits: Vec<DecayFit>,
    /// `B` of each fit, in order.
    pub exponents_b: Vec<f64>,
    pub checks: Vec<Check>,
    pub status: Status,
}

/// Growth of `∫_{∂B_R} s^{-B}` like `R^{2 - min(1, B)}` for `B ∈ {0.5, 2}` and
/// like `R ln(1 + R)` for `B = 1`.
pub fn sphere_weight_study(radii: &[f64]) -> Result<SphereWeightStudy> {
    let quad = SphereQuadrature { polar: 256, azimuth: 8, rel_tol: 1e-6 };
    let bs = vec![0.5, 2.0, 1.0];
    let fits = bs.iter().map(|&b| fa_scaling_fit(b, radii, quad)).collect::<Result<Vec<_>>>()?;
    let checks = fits
        .iter()
        .zip(&bs)
        .map(|(f, &b)| {
            let target = sphere_weight_exponent(b);
            Check::within(&format!("{}_exponent", f.quantity), f.exponent, target - 0.1, target + 0.1)
        })
        .collect::<Vec<_>>();
    let status = Status::from_checks(&checks);
    Ok(SphereWeightStudy { fits, exponents_b: bs, checks, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_shell(values: &[f64]) -> Vec<(Vec3, f64)> {
        shell_points(5.0, 1).into_iter().zip(values.iter().cycle()).map(|(x, v)| (x, *v)).collect()
    }

    #[test]
    fn constant_pressure() {
        assert_eq!(estimate_c0(&on_shell(&[5.0]), 1.0).unwrap(), -5.0);
    }

    #[test]
    fn antisymmetric_pressure_has_zero_median() {
        let s: Vec<(Vec3, f64)> = shell_points(6.0, 1).into_iter().map(|x| (x, x.x + 0.3 * x.y)).collect();
        assert!(estimate_c0(&s, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        assert!(estimate_c0(&on_shell(&[1.0])[..7], 1.0).is_err());
        let near: Vec<(Vec3, f64)> = shell_points(3.0, 1).into_iter().map(|x| (x, 0.0)).collect();
        assert!(estimate_c0(&near, 1.0).is_err());
    }

    #[test]
    fn power_law_rays() {
        let radii = geometric_radii(4.0, 64.0, 5);
        let fits = decay_study("model", |x| Ok(1.0 / (x.norm() * wake_weight(x))), &[Vec3::x(), Vec3::y()], &radii).unwrap();
        assert!((fits[0].exponent + 1.0).abs() < 1e-12);
        // Transverse: s = 1 + R, so the field is 1 / (R (1 + R)); compare with
        // the least-squares slope of its logarithm.
        let (lx, ly): (Vec<f64>, Vec<f64>) = radii.iter().map(|r| (r.ln(), -(r * (1.0 + r)).ln())).unzip();
        let (mx, my) = (lx.iter().sum::<f64>() / 5.0, ly.iter().sum::<f64>() / 5.0);
        let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((fits[1].exponent - slope).abs() < 1e-12);
        assert!(slope < -1.75);
        assert!((envelope_ratio_spread(&fits[1], &Vec3::y()) - 1.0).abs() < 1e-12);
    }
}
