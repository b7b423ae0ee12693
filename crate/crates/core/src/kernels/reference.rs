//! Manufactured exterior solutions `u_ref = R(f)`, `π_ref = P(f)` for bump
//! sources.
//!
//! Because `f = a h(|y - c|)` with radial `h`, the volume potential collapses
//! to a single time integral
//! `R(f)(x) = ∫_0^∞ M(x - τt e1 - e^{-tΩ} c, t) e^{-tΩ} a dt`
//! of the smoothed tensor `M(·,t) = Λ(·,t) * h`, which has the same radial
//! structure as `Λ` with the heat kernel replaced by `G = K * h` and the
//! enclosed mass by `m(r) = ∫_0^r G s² ds`. Both are one-dimensional integrals
//! over spherical shells of `h`, each with closed-form kernels.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::basic::{kernel_argument, KernelSide};
use crate::kernels::fundamental::{dipole_tail_coefficient, fundamental_tensor_z};
use crate::kernels::potentials::{ball_rule, SourceDensity};
use crate::kernels::time_integral::{integrate_time, AsymptoticTail, KernelConfig, TimeSplit, GAUSSIAN_GAP};
use crate::params::FlowParams;
use crate::quadrature::{gauss_legendre_on, integrate_adaptive, AdaptiveOptions};
use crate::{Mat3, Vec3};

/// `(1 - e^{-z}) / z` and its derivative.
fn e1(z: f64) -> (f64, f64) {
    if z < 0.1 {
        let mut v = 0.0;
        let mut d = 0.0;
        let mut term = 1.0; // (-z)^k / (k+1)!
        for k in 0..12 {
            v += term;
            if k + 1 < 12 {
                let next = term * (-z) / (k as f64 + 2.0);
                // d/dz of (-z)^{k+1}/(k+2)! = -(k+1)(-z)^k/(k+2)!
                d += -(k as f64 + 1.0) * term / (k as f64 + 2.0);
                term = next;
            }
        }
        (v, d)
    } else {
        let em = (-z).exp();
        let v = -(-z).exp_m1() / z;
        (v, (em * (1.0 + z) - 1.0) / (z * z))
    }
}

/// Shell kernel: `K * δ_{|y|=ρ}` at distance `r`, and its `r`-derivative.
fn shell_density(r: f64, rho: f64, t: f64) -> (f64, f64) {
    let pref = rho * rho / (t * (4.0 * PI * t).sqrt());
    let g = (-(r - rho) * (r - rho) / (4.0 * t)).exp();
    let (e, de) = e1(r * rho / t);
    let v = pref * g * e;
    let d = pref * g * (-(r - rho) / (2.0 * t) * e + de * rho / t);
    (v, d)
}

/// `∫_0^r s² (K * δ_{|y|=ρ})(s) ds`.
fn shell_mass(r: f64, rho: f64, t: f64) -> f64 {
    let st = t.sqrt();
    if r < 0.05 * st {
        return gauss_legendre_on(6, 0.0, r)
            .into_iter()
            .map(|(s, w)| w * s * s * shell_density(s, rho, t).0)
            .sum();
    }
    let u = 0.5 / st;
    let sum = if rho > r {
        libm::erfc((rho - r) * u) - libm::erfc((rho + r) * u)
    } else {
        libm::erf((r - rho) * u) + libm::erf((r + rho) * u)
    };
    let em = (-(r - rho) * (r - rho) / (4.0 * t)).exp();
    let diff = em * (-r * rho / t).exp_m1();
    0.5 * rho * rho * sum + rho * (t / PI).sqrt() * diff
}

/// Radial coefficients `M = α I + β ŵŵᵀ` and their derivatives.
#[derive(Debug, Clone, Copy)]
struct SmoothedRadial {
    alpha: f64,
    beta: f64,
    dalpha: f64,
    dbeta: f64,
}

impl SmoothedRadial {
    fn dipole(m0: f64, r: f64) -> Self {
        let r3 = r * r * r;
        Self { alpha: -m0 / r3, beta: 3.0 * m0 / r3, dalpha: 3.0 * m0 / (r3 * r), dbeta: -9.0 * m0 / (r3 * r) }
    }

    fn apply(&self, w: &Vec3, v: &Vec3) -> Vec3 {
        let r = w.norm();
        if r == 0.0 {
            return v * self.alpha;
        }
        let z = w / r;
        v * self.alpha + z * (self.beta * z.dot(v))
    }

    /// `∂_l (M v)_j` as a matrix with rows `j`, columns `l`.
    fn gradient(&self, w: &Vec3, v: &Vec3) -> Mat3 {
        let r = w.norm();
        if r == 0.0 {
            return Mat3::zeros();
        }
        let z = w / r;
        let zv = z.dot(v);
        let b_r = self.beta / r;
        let mut g = (v * self.dalpha + z * (self.dbeta * zv)) * z.transpose();
        g += Mat3::identity() * (b_r * zv);
        g += z * v.transpose() * b_r;
        g -= z * z.transpose() * (2.0 * b_r * zv);
        g
    }
}

/// Manufactured exterior pair `(u_ref, π_ref) = (R(f), P(f))`.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub params: FlowParams,
    pub source: SourceDensity,
    pub config: KernelConfig,
    m0: f64,
}

/// Velocity value with an absolute error estimate.
#[derive(Debug, Clone, Copy)]
pub struct VelocityEstimate {
    pub value: Vec3,
    pub error: f64,
}

/// Velocity and its gradient `grad[(j, l)] = ∂_l u_j`.
#[derive(Debug, Clone, Copy)]
pub struct VelocityGradientEstimate {
    pub value: Vec3,
    pub gradient: Mat3,
    pub error: f64,
}

impl ReferenceSolution {
    pub fn new(params: FlowParams, source: SourceDensity, config: KernelConfig) -> Result<Self> {
        config.validate()?;
        let m0 = source.profile.total_mass() / (4.0 * PI);
        Ok(Self { params, source, config, m0 })
    }

    fn smoothed_radial(&self, r: f64, t: f64, with_gradient: bool) -> Result<SmoothedRadial> {
        let a = self.source.radius();
        let st = t.sqrt();
        let len = st.min(a);
        let profile = &self.source.profile;
        let mut breaks = vec![0.0];
        for b in [r - 6.0 * st, r, r + 6.0 * st] {
            if b > 0.0 && b < a {
                breaks.push(b);
            }
        }
        breaks.push(a);
        breaks.sort_by(f64::total_cmp);
        let small = r < 1e-300;
        let integrand = |rho: f64| -> [f64; 3] {
            let h = profile.radial(rho);
            let (g, dg) = shell_density(r, rho, t);
            let m_r3 = if small { g / 3.0 } else { shell_mass(r, rho, t) / (r * r * r) };
            [h * g, h * m_r3, if with_gradient { h * dg * len } else { 0.0 }]
        };
        let opts = AdaptiveOptions { abs_tol: 1e-300, rel_tol: 1e-3 * self.config.rel_tol, max_panels: 2000 };
        let est = integrate_adaptive(integrand, &breaks, opts)?;
        let [g, m_r3, dg] = est.value;
        let dg = dg / len;
        let alpha = g - m_r3;
        let beta = 3.0 * m_r3 - g;
        let (dalpha, dbeta) = if small { (dg, -dg) } else { (dg + beta / r, -3.0 * beta / r - dg) };
        Ok(SmoothedRadial { alpha, beta, dalpha, dbeta })
    }

    fn radial_at(&self, w: &Vec3, t: f64, with_gradient: bool) -> Result<SmoothedRadial> {
        let r = w.norm();
        let gap = r - self.source.radius();
        if gap > 0.0 && gap * gap >= GAUSSIAN_GAP * t {
            Ok(SmoothedRadial::dipole(self.m0, r))
        } else {
            self.smoothed_radial(r, t, with_gradient)
        }
    }

    fn integrate<const N: usize>(&self, x: &Vec3, with_gradient: bool) -> Result<([f64; N], f64)> {
        let p = &self.params;
        let c = self.source.center();
        let amp = self.source.amplitude;
        let failure = std::cell::Cell::new(None::<Error>);
        let pack = |rad: &SmoothedRadial, w: &Vec3, v: &Vec3| -> [f64; N] {
            let mut out = [0.0; N];
            let u = rad.apply(w, v);
            out[..3].copy_from_slice(u.as_slice());
            if with_gradient {
                let g = rad.gradient(w, v);
                for j in 0..3 {
                    for l in 0..3 {
                        out[3 + 3 * j + l] = g[(j, l)];
                    }
                }
            }
            out
        };
        let near = |t: f64| -> [f64; N] {
            let (w, q) = kernel_argument(p, KernelSide::Direct, x, &c, t);
            match self.radial_at(&w, t, with_gradient) {
                Ok(rad) => pack(&rad, &w, &(q * amp)),
                Err(e) => {
                    failure.set(Some(e));
                    [0.0; N]
                }
            }
        };
        let far = |t: f64| -> [f64; N] {
            let (w, q) = kernel_argument(p, KernelSide::Direct, x, &c, t);
            pack(&SmoothedRadial::dipole(self.m0, w.norm()), &w, &(q * amp))
        };
        let e = Vec3::x();
        let tail_coef = |n: u32, theta: f64| -> [f64; N] {
            let mut out = [0.0; N];
            let m = dipole_tail_coefficient(p, KernelSide::Direct, x, &c, n, theta) * amp * self.m0;
            out[..3].copy_from_slice(m.as_slice());
            if with_gradient && n == 4 {
                let q = crate::kernels::basic::rotation_angle(-theta);
                let v = q * amp;
                let scale = -self.m0 / p.tau.powi(4);
                for j in 0..3 {
                    for l in 0..3 {
                        let mut s = 0.0;
                        for k in 0..3 {
                            let t = 3.0 * (delta(j, l) * e[k] + e[j] * delta(k, l)) - 15.0 * e[j] * e[k] * e[l]
                                + 3.0 * delta(j, k) * e[l];
                            s += t * v[k];
                        }
                        out[3 + 3 * j + l] = scale * s;
                    }
                }
            }
            out
        };
        let extent = x.norm() + c.norm() + self.source.radius();
        let tail = AsymptoticTail {
            coef: tail_coef,
            orders: &[3, 4],
            bound: 30.0 * self.m0 * amp.norm() * extent.max(1.0).powi(2) / p.tau.powi(5),
        };
        let split = TimeSplit { tau: p.tau, rho: p.rho, extent };
        let res = integrate_time(&split, &self.config, near, far, &tail)?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok((res.value, res.error))
    }

    /// `u_ref(x)`.
    pub fn velocity(&self, x: &Vec3) -> Result<VelocityEstimate> {
        let (v, err) = self.integrate::<3>(x, false)?;
        Ok(VelocityEstimate { value: Vec3::new(v[0], v[1], v[2]), error: err })
    }

    /// `u_ref(x)` and `∇u_ref(x)`.
    pub fn velocity_gradient(&self, x: &Vec3) -> Result<VelocityGradientEstimate> {
        let (v, err) = self.integrate::<12>(x, true)?;
        Ok(VelocityGradientEstimate {
            value: Vec3::new(v[0], v[1], v[2]),
            gradient: Mat3::from_fn(|j, l| v[3 + 3 * j + l]),
            error: err,
        })
    }

    /// `π_ref(x) = P(f)(x)`.
    pub fn pressure(&self, x: &Vec3) -> f64 {
        self.source.pressure(x)
    }

    pub fn pressure_gradient(&self, x: &Vec3) -> Vec3 {
        self.source.pressure_gradient(x)
    }

    /// `R(f)(x)` by volume quadrature of `Z(x, ·) f` over the support ball;
    /// an independent route used for cross-checks (`x` outside the support).
    pub fn velocity_by_volume_quadrature(&self, x: &Vec3) -> Result<VelocityEstimate> {
        if self.source.contains(x) || (x - self.source.center()).norm() <= self.source.radius() {
            return Err(Error::UnsupportedEvaluation("volume quadrature needs x outside the support".into()));
        }
        let rule = ball_rule(&self.source.center(), self.source.radius(), self.config.volume_order);
        let parts: Vec<Result<(Vec3, f64)>> = rule
            .par_iter()
            .map(|(y, w)| {
                let z = fundamental_tensor_z(&self.params, x, y, &self.config)?;
                let f = self.source.value(y);
                Ok((z.value * f * *w, z.error * f.norm() * w))
            })
            .collect();
        let mut value = Vec3::zeros();
        let mut error = 0.0;
        for part in parts {
            let (v, e) = part?;
            value += v;
            error += e;
        }
        Ok(VelocityEstimate { value, error })
    }

    /// Parallel evaluation in input order.
    pub fn evaluate_batch(&self, points: &[Vec3]) -> Result<Vec<ReferenceSample>> {
        points
            .par_iter()
            .map(|x| {
                let u = self.velocity(x)?;
                Ok(ReferenceSample { point: *x, velocity: u.value, pressure: self.pressure(x), error: u.error })
            })
            .collect()
    }
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// One row of a batch evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceSample {
    pub point: Vec3,
    pub velocity: Vec3,
    pub pressure: f64,
    pub error: f64,
}

/// Reads `x,y,z` rows; blank lines and lines starting with `#` or a letter
/// (a header) are skipped.
pub fn read_points_csv<R: BufRead>(reader: R) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let vals: Vec<f64> = s
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        if vals.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 columns, got {}", i + 1, vals.len())));
        }
        out.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

/// Writes `x,y,z,u1,u2,u3,p,error` rows with a header.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[ReferenceSample]) -> Result<()> {
    writeln!(w, "x,y,z,u1,u2,u3,p,error")?;
    for s in samples {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.3e}",
            s.point.x, s.point.y, s.point.z, s.velocity.x, s.velocity.y, s.velocity.z, s.pressure, s.error
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ReferenceSolution {
        let p = FlowParams::new(1.0, 1.0, 1.0).unwrap();
        let f = SourceDensity::new(Vec3::new(2.0, 0.0, 0.0), 0.8, Vec3::new(1.0, 0.5, 0.0), 4, 1.0).unwrap();
        ReferenceSolution::new(p, f, KernelConfig::default()).unwrap()
    }

    #[test]
    fn shell_mass_is_integral_of_density() {
        for &(r, rho, t) in &[(0.3, 0.5, 0.01), (1.0, 0.2, 2.0), (0.01, 0.7, 0.3), (2.0, 0.8, 0.05)] {
            let want: f64 = gauss_legendre_on(40, 0.0, r)
                .into_iter()
                .map(|(s, w)| w * s * s * shell_density(s, rho, t).0)
                .sum();
            let got = shell_mass(r, rho, t);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1e-14), "{r} {rho} {t}: {got} vs {want}");
        }
    }

    #[test]
    fn shell_density_derivative() {
        let (r, rho, t) = (0.4, 0.6, 0.07);
        let h = 1e-6;
        let fd = (shell_density(r + h, rho, t).0 - shell_density(r - h, rho, t).0) / (2.0 * h);
        assert!((fd - shell_density(r, rho, t).1).abs() < 1e-7 * fd.abs());
    }

    #[test]
    fn smoothed_tensor_matches_convolution_far_from_support() {
        // Beyond the support and for small t, M reduces to the dipole.
        let r = reference();
        let rad = r.smoothed_radial(3.0, 0.01, true).unwrap();
        let dip = SmoothedRadial::dipole(r.m0, 3.0);
        assert!((rad.alpha - dip.alpha).abs() < 1e-12 * dip.alpha.abs());
        assert!((rad.beta - dip.beta).abs() < 1e-12 * dip.beta.abs());
        assert!((rad.dalpha - dip.dalpha).abs() < 1e-10 * dip.dalpha.abs());
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let r = reference();
        let x = Vec3::new(3.0, 1.0, 0.5);
        let g = r.velocity_gradient(&x).unwrap();
        let h = 1e-3;
        for l in 0..3 {
            let mut e = Vec3::zeros();
            e[l] = h;
            let fd = (r.velocity(&(x + e)).unwrap().value - r.velocity(&(x - e)).unwrap().value) / (2.0 * h);
            for j in 0..3 {
                assert!((fd[j] - g.gradient[(j, l)]).abs() < 1e-6 * g.gradient.norm(), "{j}{l}");
            }
        }
        assert!((g.value - r.velocity(&x).unwrap().value).norm() < 1e-9 * g.value.norm());
    }

    #[test]
    fn volume_quadrature_agrees() {
        let r = reference();
        let mut cfg = r.config;
        cfg.rel_tol = 1e-9;
        cfg.volume_order = 8;
        let r2 = ReferenceSolution::new(r.params, r.source, cfg).unwrap();
        let x = Vec3::new(0.0, 3.0, 0.5);
        let a = r.velocity(&x).unwrap().value;
        let b = r2.velocity_by_volume_quadrature(&x).unwrap().value;
        assert!((a - b).norm() < 1e-6 * a.norm(), "{a:?} vs {b:?}");
    }

    #[test]
    fn csv_round_trip() {
        let pts = read_points_csv("x,y,z\n1,2,3\n\n# c\n4.5,-1,0\n".as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(read_points_csv("1,2\n".as_bytes()).is_err());
        let samples = vec![ReferenceSample { point: pts[0], velocity: Vec3::x(), pressure: 0.5, error: 1e-9 }];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,z,u1,u2,u3,p,error\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
