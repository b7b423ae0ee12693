//! Compactly supported bump densities and the Newtonian-type potentials
//! `N`, `S`, `P` over their support balls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;
use crate::Vec3;

/// Scalar bump `(1 - |y - c|² / a²)^power` on the ball `B_a(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub center: Vec3,
    pub radius: f64,
    pub power: u32,
}

impl BumpProfile {
    pub fn new(center: Vec3, radius: f64, power: u32) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("support radius must be positive, got {radius}")));
        }
        if power < 3 {
            return Err(Error::InvalidParameter(format!(
                "bump power must be at least 3 for a C² profile, got {power}"
            )));
        }
        Ok(Self { center, radius, power })
    }

    /// Profile as a function of the distance to the center.
    pub fn radial(&self, rho: f64) -> f64 {
        if rho >= self.radius {
            0.0
        } else {
            let s = rho / self.radius;
            (1.0 - s * s).powi(self.power as i32)
        }
    }

    pub fn value(&self, y: &Vec3) -> f64 {
        self.radial((y - self.center).norm())
    }

    /// `∫_{B_r(c)} h dy`.
    pub fn enclosed_mass(&self, r: f64) -> f64 {
        let top = r.min(self.radius);
        if top <= 0.0 {
            return 0.0;
        }
        // The integrand is a polynomial of degree 2 power + 2.
        let n = self.power as usize + 2;
        4.0 * PI
            * gauss_legendre_on(n, 0.0, top)
                .into_iter()
                .map(|(s, w)| w * s * s * self.radial(s))
                .sum::<f64>()
    }

    pub fn total_mass(&self) -> f64 {
        self.enclosed_mass(self.radius)
    }
}

/// Vector source `f(y) = amplitude · h(y)` with a bump profile `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceDensity {
    pub profile: BumpProfile,
    pub amplitude: Vec3,
}

impl SourceDensity {
    /// Checks that the closed support ball stays clear of the obstacle `B_{r_inner}`.
    pub fn new(center: Vec3, radius: f64, amplitude: Vec3, power: u32, r_inner: f64) -> Result<Self> {
        let profile = BumpProfile::new(center, radius, power)?;
        if center.norm() - radius <= r_inner {
            return Err(Error::InvalidParameter(format!(
                "support ball B({radius}) around {:?} meets the obstacle of radius {r_inner}",
                center.as_slice()
            )));
        }
        Ok(Self { profile, amplitude })
    }

    pub fn center(&self) -> Vec3 {
        self.profile.center
    }

    pub fn radius(&self) -> f64 {
        self.profile.radius
    }

    pub fn value(&self, y: &Vec3) -> Vec3 {
        self.amplitude * self.profile.value(y)
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        (x - self.profile.center).norm() < self.profile.radius
    }

    /// `P(f)(x)` in closed form (valid everywhere): the field of a radial
    /// mass distribution, dotted with the amplitude.
    pub fn pressure(&self, x: &Vec3) -> f64 {
        let d = x - self.profile.center;
        let r = d.norm();
        if r == 0.0 {
            return 0.0;
        }
        self.amplitude.dot(&d) * self.profile.enclosed_mass(r) / (4.0 * PI * r * r * r)
    }

    /// `∇P(f)(x)` in closed form.
    pub fn pressure_gradient(&self, x: &Vec3) -> Vec3 {
        let d = x - self.profile.center;
        let r = d.norm();
        if r == 0.0 {
            return self.amplitude * (self.profile.radial(0.0) / 3.0);
        }
        let m = self.profile.enclosed_mass(r);
        let dm = 4.0 * PI * r * r * self.profile.radial(r);
        let k = m / (4.0 * PI * r * r * r);
        let dk = dm / (4.0 * PI * r.powi(3)) - 3.0 * m / (4.0 * PI * r.powi(4));
        self.amplitude * k + d * (self.amplitude.dot(&d) * dk / r)
    }
}

/// Tensor rule on a ball: Gauss–Legendre in radius and polar cosine,
/// trapezoid in azimuth. Returns `(point, weight)`.
pub fn ball_rule(center: &Vec3, radius: f64, order: usize) -> Vec<(Vec3, f64)> {
    let radial = gauss_legendre_on(order, 0.0, radius);
    let polar = gauss_legendre_on(order, -1.0, 1.0);
    let naz = 2 * order;
    let dphi = 2.0 * PI / naz as f64;
    let mut out = Vec::with_capacity(order * order * naz);
    for &(r, wr) in &radial {
        for &(mu, wm) in &polar {
            let st = (1.0 - mu * mu).sqrt();
            for k in 0..naz {
                let phi = (k as f64 + 0.5) * dphi;
                let dir = Vec3::new(mu, st * phi.cos(), st * phi.sin());
                out.push((center + dir * r, wr * wm * dphi * r * r));
            }
        }
    }
    out
}

fn require_exterior(profile: &BumpProfile, x: &Vec3) -> Result<()> {
    if (x - profile.center).norm() <= profile.radius {
        return Err(Error::UnsupportedEvaluation(
            "potential quadrature inside the support ball is not supported".into(),
        ));
    }
    Ok(())
}

/// `N(h)(x) = -∫ h(y) / (4π|x-y|) dy` by volume quadrature, `x` outside the support.
pub fn potential_n(h: &BumpProfile, x: &Vec3, order: usize) -> Result<f64> {
    require_exterior(h, x)?;
    Ok(ball_rule(&h.center, h.radius, order)
        .into_iter()
        .map(|(y, w)| -w * h.value(&y) / (4.0 * PI * (x - y).norm()))
        .sum())
}

/// `S(h)(x) = ∫ (x-y) h(y) / (4π|x-y|³) dy`, `x` outside the support.
pub fn potential_s(h: &BumpProfile, x: &Vec3, order: usize) -> Result<Vec3> {
    require_exterior(h, x)?;
    let mut acc = Vec3::zeros();
    for (y, w) in ball_rule(&h.center, h.radius, order) {
        let d = x - y;
        let r = d.norm();
        acc += d * (w * h.value(&y) / (4.0 * PI * r * r * r));
    }
    Ok(acc)
}

/// `P(f)(x) = ∫ (x-y)·f(y) / (4π|x-y|³) dy`, `x` outside the support.
pub fn potential_p(f: &SourceDensity, x: &Vec3, order: usize) -> Result<f64> {
    Ok(potential_s(&f.profile, x, order)?.dot(&f.amplitude))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> BumpProfile {
        BumpProfile::new(Vec3::new(2.0, 0.5, -0.3), 0.7, 4).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(BumpProfile::new(Vec3::zeros(), 1.0, 2).is_err());
        assert!(BumpProfile::new(Vec3::zeros(), -1.0, 4).is_err());
        assert!(SourceDensity::new(Vec3::new(1.5, 0.0, 0.0), 0.6, Vec3::x(), 4, 1.0).is_err());
        assert!(SourceDensity::new(Vec3::new(2.0, 0.0, 0.0), 0.8, Vec3::x(), 4, 1.0).is_ok());
    }

    #[test]
    fn total_mass_closed_form() {
        // ∫ (1 - r²/a²)^4 dV = 4π a³ · 128 / 3465
        let b = bump();
        let want = 4.0 * PI * b.radius.powi(3) * 128.0 / 3465.0;
        assert!((b.total_mass() - want).abs() < 1e-14);
        let q: f64 = ball_rule(&b.center, b.radius, 12).iter().map(|(y, w)| w * b.value(y)).sum();
        assert!((q - want).abs() < 1e-13);
    }

    #[test]
    fn newton_shell_theorem() {
        let b = bump();
        let x = Vec3::new(0.0, 2.0, 1.0);
        let n = potential_n(&b, &x, 12).unwrap();
        let want = -b.total_mass() / (4.0 * PI * (x - b.center).norm());
        assert!((n - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn interior_quadrature_rejected() {
        let b = bump();
        assert!(matches!(potential_n(&b, &b.center, 8), Err(Error::UnsupportedEvaluation(_))));
    }

    #[test]
    fn gradient_of_n_is_s_and_s_is_solenoidal_outside() {
        let b = bump();
        let h = 1e-3;
        for x in [Vec3::new(0.0, 2.0, 1.0), Vec3::new(3.2, 0.5, -0.3), Vec3::new(3.0, -1.0, 0.4)] {
            let s = potential_s(&b, &x, 12).unwrap();
            let mut grad = Vec3::zeros();
            let mut div = 0.0;
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                grad[k] = (potential_n(&b, &(x + e), 12).unwrap() - potential_n(&b, &(x - e), 12).unwrap()) / (2.0 * h);
                div += (potential_s(&b, &(x + e), 12).unwrap()[k] - potential_s(&b, &(x - e), 12).unwrap()[k]) / (2.0 * h);
            }
            assert!((grad - s).norm() < 1e-6 * s.norm());
            assert!(div.abs() < 1e-6);
        }
    }

    #[test]
    fn pressure_closed_form_matches_quadrature() {
        let f = SourceDensity { profile: bump(), amplitude: Vec3::new(1.0, 0.5, -0.2) };
        for x in [Vec3::new(0.0, 2.0, 1.0), Vec3::new(4.0, 0.0, 0.0)] {
            let q = potential_p(&f, &x, 12).unwrap();
            assert!((q - f.pressure(&x)).abs() < 1e-12 * q.abs());
        }
    }

    #[test]
    fn pressure_gradient_matches_differences() {
        let f = SourceDensity { profile: bump(), amplitude: Vec3::new(1.0, 0.5, -0.2) };
        let h = 1e-5;
        for x in [Vec3::new(2.2, 0.4, 0.0), Vec3::new(0.5, 2.0, 1.0)] {
            let g = f.pressure_gradient(&x);
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                let fd = (f.pressure(&(x + e)) - f.pressure(&(x - e))) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7 * g.norm());
            }
        }
    }
}
