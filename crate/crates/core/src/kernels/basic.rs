//! Heat kernel, the Oseen heat-kernel tensor, rotations about `e1` and the
//! time-dependent kernels built from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::FlowParams;
use crate::{Mat3, Vec3};

/// Below this value of `|z| / (2 sqrt(t))` the tensor uses power series.
const SERIES_THRESHOLD: f64 = 0.5;

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// `K(z,t) = (4 pi t)^{-3/2} exp(-|z|^2 / 4t)`.
pub fn heat_kernel(z: &Vec3, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok((4.0 * PI * t).powf(-1.5) * (-z.norm_squared() / (4.0 * t)).exp())
}

/// Radial coefficients of a tensor `alpha(r) I + beta(r) z zᵀ / r²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTensor {
    pub alpha: f64,
    pub beta: f64,
}

impl RadialTensor {
    pub fn matrix(&self, z: &Vec3) -> Mat3 {
        let r2 = z.norm_squared();
        let mut m = Mat3::identity() * self.alpha;
        if r2 > 0.0 && self.beta != 0.0 {
            m += z * z.transpose() * (self.beta / r2);
        }
        m
    }

    /// `M · v` without forming the matrix.
    pub fn apply(&self, z: &Vec3, v: &Vec3) -> Vec3 {
        let r2 = z.norm_squared();
        let mut out = v * self.alpha;
        if r2 > 0.0 && self.beta != 0.0 {
            out += z * (self.beta * z.dot(v) / r2);
        }
        out
    }
}

/// Series for `q(x) = h(x) / x^3` and `g(x) = 3 sqrt(pi) q / 4 - exp(-x^2)`, where
/// `h(x) = erf(x) - 2 x exp(-x^2) / sqrt(pi)`.
fn small_argument_series(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let mut q = 0.0;
    let mut g = 0.0;
    // p = x^{2n-2} / (n-1)!
    let mut p = 1.0;
    let mut sign = 1.0;
    for n in 1..60 {
        let nf = n as f64;
        let tq = sign * 2.0 * nf * p / (nf * (2.0 * nf + 1.0));
        q += tq;
        if n >= 2 {
            g += -sign * p * (2.0 * nf - 2.0) / (2.0 * nf + 1.0);
        }
        if p < 1e-18 * q.abs().max(1e-300) && n > 2 {
            break;
        }
        p *= x2 / nf;
        sign = -sign;
    }
    (q * 2.0 / PI.sqrt(), g)
}

/// Radial coefficients of the Oseen heat-kernel tensor
/// `Λ(z,t) = K δ + ∂∂ Φ`, `Φ = erf(|z|/(2 sqrt t)) / (4 pi |z|)`.
pub fn oseen_radial(r: f64, t: f64) -> RadialTensor {
    let c0 = 1.0 / (8.0 * PI.powf(1.5) * t.powf(1.5));
    let x = r / (2.0 * t.sqrt());
    let e = (-x * x).exp();
    let (q, g) = if x < SERIES_THRESHOLD {
        small_argument_series(x)
    } else {
        let h = libm::erf(x) - 2.0 * x * e / PI.sqrt();
        let q = h / (x * x * x);
        (q, 0.75 * PI.sqrt() * q - e)
    };
    // m / r^3 = c0 sqrt(pi) q / 4
    RadialTensor { alpha: c0 * (e - 0.25 * PI.sqrt() * q), beta: c0 * g }
}

/// `Λ(z,t)`.
pub fn oseen_tensor(z: &Vec3, t: f64) -> Result<Mat3> {
    check_time(t)?;
    Ok(oseen_radial(z.norm(), t).matrix(z))
}

/// `e^{tΩ}`: rotation about `e1` by the angle `rho t`.
pub fn rotation(t: f64, rho: f64) -> Mat3 {
    rotation_angle(rho * t)
}

pub(crate) fn rotation_angle(theta: f64) -> Mat3 {
    let (s, c) = theta.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Orientation of the time-dependent kernel: `Direct` for `Γ`, `Adjoint` for `Γ̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSide {
    Direct,
    Adjoint,
}

impl KernelSide {
    pub(crate) fn sign(self) -> f64 {
        match self {
            KernelSide::Direct => 1.0,
            KernelSide::Adjoint => -1.0,
        }
    }
}

/// Argument `x - s tau t e1 - R(-s t) y` and rotation `R(-s t)` with `s = ±1`.
pub(crate) fn kernel_argument(p: &FlowParams, side: KernelSide, x: &Vec3, y: &Vec3, t: f64) -> (Vec3, Mat3) {
    let s = side.sign();
    let q = rotation(-s * t, p.rho);
    let mut w = x - q * y;
    w.x -= s * p.tau * t;
    (w, q)
}

/// `Γ(x,y,t) = Λ(x - τ t e1 - e^{-tΩ} y, t) e^{-tΩ}` or its adjoint variant
/// `Γ̃(x,y,t) = Λ(x + τ t e1 - e^{tΩ} y, t) e^{tΩ}`.
pub fn gamma_kernel(p: &FlowParams, side: KernelSide, x: &Vec3, y: &Vec3, t: f64) -> Result<Mat3> {
    check_time(t)?;
    let (w, q) = kernel_argument(p, side, x, y, t);
    Ok(oseen_radial(w.norm(), t).matrix(&w) * q)
}
