//! Time integration `∫_0^∞ ... dt` shared by the fundamental tensor and the
//! smoothed reference fields.
//!
//! The range is split into three parts:
//! - `[0, T_cut]`: global adaptive Gauss–Kronrod, with `t = u²` on `[0, 1]`
//!   and panels no longer than half a rotation period beyond;
//! - `[T_cut, T_far]`: Gauss–Legendre panels of the far-field integrand, where
//!   the heat-kernel factors are below `e^{-40}`;
//! - `[T_far, ∞)`: the two leading terms of the large-`t` expansion, whose
//!   oscillating factors are integrated with exponential integrals.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_on, integrate_adaptive, AdaptiveOptions};

/// Tolerances and budgets for kernel time integrals and volume quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Radial/polar order of the volume rule on a support ball.
    pub volume_order: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-300, max_panels: 20_000, volume_order: 12 }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("kernel tolerances must be positive".into()));
        }
        if self.volume_order < 2 || self.max_panels < 2 {
            return Err(Error::InvalidParameter("quadrature orders must be at least 2".into()));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Integral value and an estimate of its absolute error.
#[derive(Debug, Clone, Copy)]
pub struct TimeIntegral<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
}

/// Exponents of `e^{-40}`: beyond the time where the gap exceeds `sqrt(160 t)`
/// Gaussian factors are negligible in double precision.
pub(crate) const GAUSSIAN_GAP: f64 = 160.0;

/// Smallest `T >= 1` such that `tau T - d >= sqrt(160 T)`.
pub(crate) fn cutoff_time(tau: f64, d: f64) -> f64 {
    let s = GAUSSIAN_GAP.sqrt();
    let q = (s + (s * s + 4.0 * tau * d).sqrt()) / (2.0 * tau);
    (q * q).max(1.0)
}

/// `E_n(z) = ∫_1^∞ e^{-zs} s^{-n} ds` for integer `n >= 1` and `Re z >= 0`, `z ≠ 0`.
pub(crate) fn expint_n(n: u32, z: Complex64) -> Complex64 {
    let nm1 = f64::from(n - 1);
    if z.norm() > 1.0 {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = Complex64::new(1e-30, 0.0);
        let mut b = z + f64::from(n);
        let mut c = Complex64::new(1.0, 0.0) / tiny;
        let mut d = Complex64::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 1..100_000 {
            let fi = i as f64;
            let an = -fi * (nm1 + fi);
            b += 2.0;
            d = Complex64::new(1.0, 0.0) / (d * an + b);
            c = b + c.inv() * an;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    } else {
        let euler = 0.577_215_664_901_532_9;
        let mut sum = if n == 1 { -z.ln() - euler } else { Complex64::new(1.0 / nm1, 0.0) };
        let mut fact = Complex64::new(1.0, 0.0);
        for i in 1..200 {
            let fi = i as f64;
            fact *= -z / fi;
            let del = if i as f64 != nm1 {
                -fact / (fi - nm1)
            } else {
                let psi = -euler + (1..n).map(|k| 1.0 / f64::from(k)).sum::<f64>();
                fact * (-z.ln() + psi)
            };
            sum += del;
            if del.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    }
}

/// `∫_T^∞ t^{-n} e^{i ω t} dt`.
pub(crate) fn oscillatory_power_tail(n: u32, omega: f64, t: f64) -> Complex64 {
    let scale = t.powi(1 - n as i32);
    if omega == 0.0 {
        return Complex64::new(scale / f64::from(n - 1), 0.0);
    }
    expint_n(n, Complex64::new(0.0, -omega * t)) * scale
}

/// Large-time expansion `Σ_n t^{-n} P_n(ρt)` where each `P_n` is a
/// trigonometric polynomial of degree at most 3 in the phase.
pub(crate) struct AsymptoticTail<F> {
    /// `coef(n, θ)`: coefficient of `t^{-n}` at phase `θ = ρ t`.
    pub coef: F,
    pub orders: &'static [u32],
    /// Truncation error of the expansion is at most `bound / T^4`.
    pub bound: f64,
}

const PHASES: usize = 8;

impl<F> AsymptoticTail<F> {
    fn integrate<const N: usize>(&self, rho: f64, t: f64) -> [f64; N]
    where
        F: Fn(u32, f64) -> [f64; N],
    {
        let mut out = [0.0; N];
        for &n in self.orders {
            let samples: Vec<[f64; N]> = (0..PHASES)
                .map(|j| (self.coef)(n, 2.0 * PI * j as f64 / PHASES as f64))
                .collect();
            for k in 0..=3usize {
                let j_k = oscillatory_power_tail(n, k as f64 * rho, t);
                for c in 0..N {
                    let mut ck = Complex64::new(0.0, 0.0);
                    for (j, s) in samples.iter().enumerate() {
                        let ang = -2.0 * PI * (k * j) as f64 / PHASES as f64;
                        ck += Complex64::from_polar(s[c], ang);
                    }
                    ck /= PHASES as f64;
                    let contrib = (ck * j_k).re;
                    out[c] += if k == 0 { contrib } else { 2.0 * contrib };
                }
            }
        }
        out
    }
}

/// Geometry of one time integral.
pub(crate) struct TimeSplit {
    pub tau: f64,
    pub rho: f64,
    /// Bound on `|x| + |y| + support radius`.
    pub extent: f64,
}

fn norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gauss–Legendre panels covering `[a, b]`, each no longer than
/// `min(t, π / |ρ|)` at its left end.
fn far_panels(a: f64, b: f64, rho: f64) -> Vec<(f64, f64)> {
    let half_period = PI / rho.abs();
    let mut out = Vec::new();
    let mut t = a;
    while t < b {
        let len = t.min(half_period).max(1e-3);
        let next = (t + len).min(b);
        out.push((t, next));
        t = next;
    }
    out
}

pub(crate) fn integrate_time<const N: usize, Near, Far, Tail>(
    split: &TimeSplit,
    cfg: &KernelConfig,
    near: Near,
    far: Far,
    tail: &AsymptoticTail<Tail>,
) -> Result<TimeIntegral<N>>
where
    Near: Fn(f64) -> [f64; N],
    Far: Fn(f64) -> [f64; N],
    Tail: Fn(u32, f64) -> [f64; N],
{
    let t_cut = cutoff_time(split.tau, split.extent);

    let mut breaks = vec![0.0, 0.25, 0.5, 1.0];
    breaks.extend(far_panels(1.0, t_cut, split.rho).into_iter().map(|(_, b)| b));
    let mapped = |u: f64| -> [f64; N] {
        if u <= 1.0 {
            let mut v = near(u * u);
            for x in v.iter_mut() {
                *x *= 2.0 * u;
            }
            v
        } else {
            near(u)
        }
    };
    let opts = AdaptiveOptions { abs_tol: cfg.abs_tol, rel_tol: cfg.rel_tol, max_panels: cfg.max_panels };
    let head = integrate_adaptive(mapped, &breaks, opts)?;

    let target = cfg.abs_tol.max(cfg.rel_tol * norm(&head.value));
    let mut t_far = t_cut.max((tail.bound / (0.1 * target)).powf(0.25));
    if !t_far.is_finite() {
        t_far = t_cut;
    }
    let panels = far_panels(t_cut, t_far, split.rho);
    if panels.len() > 1_000_000 {
        return Err(Error::QuadratureNotConverged {
            achieved: tail.bound / t_cut.powi(4),
            requested: target,
        });
    }

    let mut value = head.value;
    for (a, b) in panels {
        for (t, w) in gauss_legendre_on(16, a, b) {
            let f = far(t);
            for c in 0..N {
                value[c] += w * f[c];
            }
        }
    }
    let tail_value = tail.integrate::<N>(split.rho, t_far);
    for c in 0..N {
        value[c] += tail_value[c];
    }
    let error = head.error + tail.bound / t_far.powi(4) + 1e-14 * norm(&value);
    Ok(TimeIntegral { value, error })
}
