//! The fundamental tensor `Z(x,y) = ∫_0^∞ Γ(x,y,t) dt` and its adjoint
//! variant `Z̃`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::basic::{kernel_argument, oseen_radial, rotation_angle, KernelSide};
use crate::kernels::time_integral::{integrate_time, AsymptoticTail, KernelConfig, TimeSplit, GAUSSIAN_GAP};
use crate::params::FlowParams;
use crate::{Mat3, Vec3};

/// Matrix value with an absolute error estimate (Frobenius norm).
#[derive(Debug, Clone, Copy)]
pub struct TensorEstimate {
    pub value: Mat3,
    pub error: f64,
}

/// `(3 ŵŵᵀ - I) / |w|³`, the far-field shape `∇∇(-1/|w|)`.
pub(crate) fn dipole(w: &Vec3) -> Mat3 {
    let r2 = w.norm_squared();
    let r = r2.sqrt();
    (w * w.transpose() * (3.0 / r2) - Mat3::identity()) / (r2 * r)
}

/// Order-3 and order-4 coefficients of the expansion of `H(w) R` for
/// `w = x - s τ t e1 - R y`, `R = R(-s t)`, with `H(w) = (3ŵŵᵀ - I)/|w|³`.
pub(crate) fn dipole_tail_coefficient(
    p: &FlowParams,
    side: KernelSide,
    x: &Vec3,
    y: &Vec3,
    n: u32,
    theta: f64,
) -> Mat3 {
    let s = side.sign();
    let q = rotation_angle(-s * theta);
    let e = Vec3::x();
    match n {
        3 => (e * e.transpose() * 3.0 - Mat3::identity()) * q / p.tau.powi(3),
        4 => {
            let d = x - q * y;
            let h1 = e * e.transpose() * (15.0 * d.x)
                - (e * d.transpose() + d * e.transpose() + Mat3::identity() * d.x) * 3.0;
            h1 * q * (s / p.tau.powi(4))
        }
        _ => Mat3::zeros(),
    }
}

/// Truncation-error coefficient of the two-term expansion: the error beyond
/// `T` is at most `dipole_tail_bound(..) / T^4`.
pub(crate) fn dipole_tail_bound(p: &FlowParams, extent: f64, strength: f64) -> f64 {
    15.0 * strength * extent.max(1.0).powi(2) / p.tau.powi(5)
}

fn flatten(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
    out
}

fn unflatten(v: &[f64; 9]) -> Mat3 {
    Mat3::from_fn(|i, j| v[3 * i + j])
}

/// `Z(x,y)` (`Direct`) or `Z̃(x,y)` (`Adjoint`).
pub fn fundamental_tensor(
    p: &FlowParams,
    side: KernelSide,
    x: &Vec3,
    y: &Vec3,
    cfg: &KernelConfig,
) -> Result<TensorEstimate> {
    cfg.validate()?;
    if (x - y).norm() == 0.0 {
        return Err(Error::InvalidParameter("fundamental tensor is singular at x = y".into()));
    }
    let m0 = 1.0 / (4.0 * PI);
    let integrand = |t: f64| -> [f64; 9] {
        let (w, q) = kernel_argument(p, side, x, y, t);
        let r = w.norm();
        if r * r >= GAUSSIAN_GAP * t {
            flatten(&(dipole(&w) * q * m0))
        } else {
            flatten(&(oseen_radial(r, t).matrix(&w) * q))
        }
    };
    let far = |t: f64| -> [f64; 9] {
        let (w, q) = kernel_argument(p, side, x, y, t);
        flatten(&(dipole(&w) * q * m0))
    };
    let extent = x.norm() + y.norm();
    let tail = AsymptoticTail {
        coef: |n: u32, theta: f64| flatten(&(dipole_tail_coefficient(p, side, x, y, n, theta) * m0)),
        orders: &[3, 4],
        bound: dipole_tail_bound(p, extent, m0 * 3f64.sqrt()),
    };
    let split = TimeSplit { tau: p.tau, rho: p.rho, extent };
    let res = integrate_time(&split, cfg, integrand, far, &tail)?;
    Ok(TensorEstimate { value: unflatten(&res.value), error: res.error })
}

/// `Z(x,y)`.
pub fn fundamental_tensor_z(p: &FlowParams, x: &Vec3, y: &Vec3, cfg: &KernelConfig) -> Result<TensorEstimate> {
    fundamental_tensor(p, KernelSide::Direct, x, y, cfg)
}

/// `Z̃(x,y)`.
pub fn fundamental_tensor_z_tilde(
    p: &FlowParams,
    x: &Vec3,
    y: &Vec3,
    cfg: &KernelConfig,
) -> Result<TensorEstimate> {
    fundamental_tensor(p, KernelSide::Adjoint, x, y, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_on;

    fn params() -> FlowParams {
        FlowParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn dipole_expansion_is_accurate_at_large_times() {
        let p = FlowParams::new(1.3, -0.7, 1.0).unwrap();
        let x = Vec3::new(0.5, 1.0, -2.0);
        let y = Vec3::new(-0.3, 0.4, 0.9);
        for side in [KernelSide::Direct, KernelSide::Adjoint] {
            let t = 400.0;
            let (w, q) = kernel_argument(&p, side, &x, &y, t);
            let exact = dipole(&w) * q;
            let approx = dipole_tail_coefficient(&p, side, &x, &y, 3, p.rho * t) / t.powi(3)
                + dipole_tail_coefficient(&p, side, &x, &y, 4, p.rho * t) / t.powi(4);
            let err = (exact - approx).norm();
            let bound = dipole_tail_bound(&p, x.norm() + y.norm(), 3f64.sqrt()) * 4.0 / t.powi(5);
            assert!(err < bound, "{side:?}: {err} vs {bound}");
            assert!(err < 1e-3 * exact.norm());
        }
    }

    #[test]
    fn z_matches_brute_force_time_integral() {
        // Oracle: plain Gauss–Legendre on a fine log-spaced grid up to a huge
        // time, plus the far-field remainder from the expansion.
        let p = params();
        let x = Vec3::new(1.5, -0.5, 0.7);
        let y = Vec3::new(0.2, 0.3, -0.4);
        let z = fundamental_tensor_z(&p, &x, &y, &KernelConfig::default()).unwrap();

        let mut acc = Mat3::zeros();
        let edges: Vec<f64> = (0..=2400).map(|i| 1e-4 * (1e8f64).powf(i as f64 / 2400.0)).collect();
        let mut a = 0.0;
        for &b in &edges {
            for (t, w) in gauss_legendre_on(12, a, b) {
                let (arg, q) = kernel_argument(&p, KernelSide::Direct, &x, &y, t);
                acc += oseen_radial(arg.norm(), t).matrix(&arg) * q * w;
            }
            a = b;
        }
        let err = (z.value - acc).norm();
        assert!(err < 1e-7 * z.value.norm(), "err {err}, |Z| {}", z.value.norm());
    }

    #[test]
    fn adjoint_identity() {
        let p = FlowParams::new(0.8, 1.4, 1.0).unwrap();
        let cfg = KernelConfig::default();
        let x = Vec3::new(1.0, 2.0, -0.5);
        let y = Vec3::new(-0.7, 0.1, 0.6);
        let a = Vec3::new(0.3, -1.0, 0.4);
        let b = Vec3::new(1.1, 0.2, -0.9);
        let z = fundamental_tensor_z(&p, &x, &y, &cfg).unwrap().value;
        let zt = fundamental_tensor_z_tilde(&p, &y, &x, &cfg).unwrap().value;
        let lhs = a.dot(&(z * b));
        let rhs = b.dot(&(zt * a));
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn tolerance_halving_within_error_estimate() {
        let p = params();
        let x = Vec3::new(0.0, 3.0, 0.0);
        let y = Vec3::new(0.1, 0.0, 0.2);
        let cfg = KernelConfig::default().with_rel_tol(1e-8);
        let coarse = fundamental_tensor_z(&p, &x, &y, &cfg).unwrap();
        let fine = fundamental_tensor_z(&p, &x, &y, &cfg.with_rel_tol(5e-9)).unwrap();
        assert!((coarse.value - fine.value).norm() <= coarse.error);
    }

    #[test]
    fn coincident_points_rejected() {
        let p = params();
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert!(fundamental_tensor_z(&p, &x, &x, &KernelConfig::default()).is_err());
    }
}
