//! Physical parameters, the anisotropic wake weight, decay envelopes and the
//! wake-weighted sphere integral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::DecayFit;
use crate::quadrature::gauss_legendre;
use crate::Vec3;

/// Translation speed `tau`, angular speed `rho` and obstacle radius. The
/// translation and rotation axis is always `e1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub tau: f64,
    pub rho: f64,
    pub r_inner: f64,
}

impl FlowParams {
    pub fn new(tau: f64, rho: f64, r_inner: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        if rho == 0.0 || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be nonzero, got {rho}")));
        }
        if !(r_inner > 0.0 && r_inner.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_inner must be positive, got {r_inner}")));
        }
        Ok(Self { tau, rho, r_inner })
    }

    pub fn axis(&self) -> Vec3 {
        Vec3::x()
    }
}

/// `s(y) = 1 + |y| - y1`: equal to 1 on the downstream axis and growing like
/// `2|y|` upstream.
pub fn wake_weight(y: &Vec3) -> f64 {
    1.0 + y.norm() - y.x
}

/// Optional logarithmic factor of an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogFactor {
    None,
    /// `ln(1 + |y|)`.
    LnOnePlus,
    /// `max(1, ln |y|)`, the borderline factor of the linear decay bounds.
    MaxOneLn,
}

/// `C · |y|^radial_power · s(y)^wake_power · log-factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub amplitude: f64,
    pub radial_power: f64,
    pub wake_power: f64,
    pub log: LogFactor,
}

impl DecayEnvelope {
    /// Velocity bound `C (|y| s(y))^{-1} l_{A,B}(y)` for forcing decaying like
    /// `|z|^{-A} s(z)^{-B}` with `A >= 2`, `A + min(1, B) >= 3`.
    pub fn velocity(amplitude: f64, a: f64, b: f64) -> Result<Self> {
        let log = borderline_log(a, b)?;
        Ok(Self { amplitude, radial_power: -1.0, wake_power: -1.0, log })
    }

    /// Gradient bound `C (|y| s(y))^{-3/2} s(y)^{max(0, 7/2 - A - B)} l_{A,B}(y)`.
    pub fn gradient(amplitude: f64, a: f64, b: f64) -> Result<Self> {
        let log = borderline_log(a, b)?;
        let extra = (3.5 - a - b).max(0.0);
        Ok(Self { amplitude, radial_power: -1.5, wake_power: -1.5 + extra, log })
    }

    /// Pressure bound `C |x|^{-2}`.
    pub fn pressure(amplitude: f64) -> Self {
        Self { amplitude, radial_power: -2.0, wake_power: 0.0, log: LogFactor::None }
    }

    /// Bound `C (|x| s(x))^{-1-k/2}` for derivatives of order `k` of solutions
    /// of the nonlinear problem.
    pub fn nonlinear(amplitude: f64, order: u32) -> Self {
        let p = -1.0 - f64::from(order) / 2.0;
        Self { amplitude, radial_power: p, wake_power: p, log: LogFactor::None }
    }

    pub fn eval(&self, y: &Vec3) -> Result<f64> {
        let r = y.norm();
        if r == 0.0 {
            return Err(Error::InvalidParameter("envelope undefined at the origin".into()));
        }
        let s = wake_weight(y);
        let log = match self.log {
            LogFactor::None => 1.0,
            LogFactor::LnOnePlus => (1.0 + r).ln(),
            LogFactor::MaxOneLn => r.ln().max(1.0),
        };
        Ok(self.amplitude * r.powf(self.radial_power) * s.powf(self.wake_power) * log)
    }
}

fn borderline_log(a: f64, b: f64) -> Result<LogFactor> {
    let sum = a + b.min(1.0);
    if a < 2.0 || sum < 3.0 {
        return Err(Error::InvalidParameter(format!(
            "decay exponents need A >= 2 and A + min(1, B) >= 3, got A={a}, B={b}"
        )));
    }
    Ok(if sum == 3.0 { LogFactor::MaxOneLn } else { LogFactor::None })
}

/// Tensor rule on a sphere: Gauss–Legendre in `cos(theta)` (pole on `e1`) and
/// the trapezoid rule in azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereQuadrature {
    pub polar: usize,
    pub azimuth: usize,
    /// Relative tolerance on the embedded error estimate (half polar order).
    pub rel_tol: f64,
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self { polar: 64, azimuth: 128, rel_tol: 1e-8 }
    }
}

impl SphereQuadrature {
    /// Points and weights on the sphere of radius `r`, with unit vectors in
    /// a frame whose pole is `e1`.
    pub fn points(&self, r: f64) -> Vec<(Vec3, f64)> {
        let (mu, wmu) = gauss_legendre(self.polar);
        let dphi = 2.0 * std::f64::consts::PI / self.azimuth as f64;
        let mut out = Vec::with_capacity(self.polar * self.azimuth);
        for (m, wm) in mu.iter().zip(&wmu) {
            let st = (1.0 - m * m).max(0.0).sqrt();
            for k in 0..self.azimuth {
                let phi = (k as f64 + 0.5) * dphi;
                let x = Vec3::new(r * m, r * st * phi.cos(), r * st * phi.sin());
                out.push((x, r * r * wm * dphi));
            }
        }
        out
    }
}

fn polar_rule_integral(r: f64, b: f64, n: usize) -> f64 {
    let (mu, w) = gauss_legendre(n);
    let s: f64 = mu
        .iter()
        .zip(&w)
        .map(|(m, wi)| wi * (1.0 + r - r * m).powf(-b))
        .sum();
    // The integrand does not depend on the azimuth, so the trapezoid sum is exact.
    2.0 * std::f64::consts::PI * r * r * s
}

/// `∫_{|x|=R} s(x)^{-B} do_x`.
pub fn sphere_weight_integral(r: f64, b: f64, quad: SphereQuadrature) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("sphere radius must be positive, got {r}")));
    }
    if quad.polar < 2 || quad.azimuth < 2 {
        return Err(Error::InvalidParameter("sphere quadrature order must be at least 2".into()));
    }
    let fine = polar_rule_integral(r, b, quad.polar);
    let coarse = polar_rule_integral(r, b, quad.polar / 2);
    let err = (fine - coarse).abs();
    if err > quad.rel_tol * fine.abs() {
        return Err(Error::QuadratureNotConverged { achieved: err, requested: quad.rel_tol * fine.abs() });
    }
    Ok(fine)
}

/// Fits `∫_{∂B_R} s^{-B}` against `R`; for `B = 1` the values are divided by
/// `ln(1 + R)` first.
pub fn fa_scaling_fit(b: f64, radii: &[f64], quad: SphereQuadrature) -> Result<DecayFit> {
    if radii.len() < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 radii, got {}", radii.len())));
    }
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Err(Error::DegenerateFit("all radii are equal".into()));
    }
    if hi < 10.0 * lo {
        return Err(Error::InvalidParameter(format!("radii must span a decade, got [{lo}, {hi}]")));
    }
    let values = radii
        .iter()
        .map(|&r| {
            let v = sphere_weight_integral(r, b, quad)?;
            Ok(if b == 1.0 { v / (1.0 + r).ln() } else { v })
        })
        .collect::<Result<Vec<_>>>()?;
    let name = if b == 1.0 { format!("sphere_weight_B{b}_over_ln") } else { format!("sphere_weight_B{b}") };
    DecayFit::fit(&name, "sphere", radii, &values)
}

/// Exponent `2 - min(1, B)` of the sphere integral.
pub fn sphere_weight_exponent(b: f64) -> f64 {
    2.0 - b.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wake_weight_examples() {
        assert_eq!(wake_weight(&Vec3::new(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(wake_weight(&Vec3::new(-1.0, 0.0, 0.0)), 3.0);
        assert_eq!(wake_weight(&Vec3::new(0.0, 3.0, 4.0)), 6.0);
    }

    #[test]
    fn flow_params_validation() {
        assert!(FlowParams::new(1.0, 0.5, 1.0).is_ok());
        assert!(FlowParams::new(0.0, 0.5, 1.0).is_err());
        assert!(FlowParams::new(1.0, 0.0, 1.0).is_err());
        assert!(FlowParams::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        let v = DecayEnvelope::velocity(1.0, 3.0, 1.0).unwrap();
        assert!((v.eval(&Vec3::new(2.0, 0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);

        let c = 7.0;
        let p = DecayEnvelope::pressure(c);
        assert!((p.eval(&Vec3::new(0.0, 4.0, 0.0)).unwrap() - c / 16.0).abs() < 1e-15);

        let g = DecayEnvelope::gradient(1.0, 2.5, 1.0).unwrap();
        let want = 6f64.powf(-1.5);
        assert!((g.eval(&Vec3::new(0.0, 0.0, 2.0)).unwrap() - want).abs() < 1e-15);

        assert!(v.eval(&Vec3::zeros()).is_err());
    }

    #[test]
    fn envelope_borderline_log_and_rejection() {
        let v = DecayEnvelope::velocity(1.0, 2.0, 1.0).unwrap();
        assert_eq!(v.log, LogFactor::MaxOneLn);
        assert!(DecayEnvelope::velocity(1.0, 2.0, 0.5).is_err());
        let y = Vec3::new(100.0, 0.0, 0.0);
        assert!((v.eval(&y).unwrap() - 100f64.ln() / 100.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_integral_area() {
        let v = sphere_weight_integral(2.0, 0.0, SphereQuadrature::default()).unwrap();
        assert!((v - 16.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn sphere_integral_matches_adaptive_polar_oracle() {
        let r = 10.0;
        let oracle = crate::quadrature::integrate_adaptive(
            |th: f64| [(1.0 + r - r * th.cos()).powf(-0.5) * th.sin()],
            &[0.0, 0.1, 0.5, std::f64::consts::PI],
            crate::quadrature::AdaptiveOptions { abs_tol: 0.0, rel_tol: 1e-13, max_panels: 10_000 },
        )
        .unwrap()
        .value[0]
            * 2.0
            * PI
            * r
            * r;
        let v = sphere_weight_integral(r, 0.5, SphereQuadrature::default()).unwrap();
        assert!(((v - oracle) / oracle).abs() < 1e-8, "{v} vs {oracle}");
    }

    #[test]
    fn sphere_integral_reports_nonconvergence() {
        let quad = SphereQuadrature { polar: 4, azimuth: 8, rel_tol: 1e-10 };
        assert!(matches!(
            sphere_weight_integral(64.0, 2.0, quad),
            Err(Error::QuadratureNotConverged { .. })
        ));
    }

    #[test]
    fn scaling_fit_exponents() {
        let radii = [8.0, 16.0, 32.0, 64.0, 128.0];
        let quad = SphereQuadrature { polar: 256, azimuth: 8, rel_tol: 1e-6 };
        for b in [0.5, 2.0, 1.0] {
            let fit = fa_scaling_fit(b, &radii, quad).unwrap();
            assert!(
                (fit.exponent - sphere_weight_exponent(b)).abs() < 0.1,
                "B={b}: exponent {}",
                fit.exponent
            );
        }
    }

    #[test]
    fn scaling_fit_rejects_bad_radii() {
        let quad = SphereQuadrature::default();
        assert!(fa_scaling_fit(2.0, &[8.0, 9.0, 10.0], quad).is_err());
        assert!(matches!(fa_scaling_fit(2.0, &[8.0; 4], quad), Err(Error::DegenerateFit(_))));
        assert!(fa_scaling_fit(2.0, &[8.0, 9.0, 10.0, 11.0], quad).is_err());
    }
}
