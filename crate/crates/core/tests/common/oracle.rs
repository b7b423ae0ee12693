//! Brute-force evaluation of the heat-kernel tensor from its convolution
//! definition
//!
//!   Λ_jk(z,t) = K(z,t) δ_jk + ∂_j ∂_k ∫ (4π|z-y|)^{-1} K(y,t) dy.
//!
//! Both derivatives are moved onto the Gaussian, and the integral is taken in
//! spherical coordinates `w = z - y` about the origin with the polar axis
//! along `z`. The `1/|w|` singularity cancels against the volume element.
//! In this frame `|z - w|` does not depend on the azimuth and the integrand
//! is a quadratic trigonometric polynomial in it, so an 8-point trapezoid
//! rule is exact there; radius and polar cosine use adaptive Gauss–Kronrod.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

type V3 = Vector3<f64>;

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const K_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel: (estimate, |Kronrod - Gauss|).
fn gk15<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for (i, &x) in GK_NODES.iter().enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[x, -x] };
        for &s in pts {
            let v = f(c + h * s);
            for m in 0..N {
                k[m] += K_WEIGHTS[i] * v[m];
                if i % 2 == 1 {
                    g[m] += G_WEIGHTS[i / 2] * v[m];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for m in 0..N {
        k[m] *= h;
        g[m] *= h;
        err = err.max((k[m] - g[m]).abs());
    }
    (k, err)
}

/// Adaptive bisection until every panel's error is below its share of `tol`.
pub fn integrate<const N: usize>(mut f: impl FnMut(f64) -> [f64; N], a: f64, b: f64, tol: f64) -> [f64; N] {
    let mut total = [0.0; N];
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(&mut f, lo, hi);
        if err <= tol * (hi - lo) / (b - a) || depth >= 40 {
            for m in 0..N {
                total[m] += v[m];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

fn heat(z: &V3, t: f64) -> f64 {
    (4.0 * PI * t).powf(-1.5) * (-z.norm_squared() / (4.0 * t)).exp()
}

/// Upper triangle of `∂_j ∂_k K(y,t) = K (y_j y_k / 4t² - δ_jk / 2t)`.
fn hessian_heat(y: &V3, t: f64) -> [f64; 6] {
    let k = heat(y, t);
    let a = 1.0 / (4.0 * t * t);
    let d = 1.0 / (2.0 * t);
    [
        k * (a * y.x * y.x - d),
        k * a * y.x * y.y,
        k * a * y.x * y.z,
        k * (a * y.y * y.y - d),
        k * a * y.y * y.z,
        k * (a * y.z * y.z - d),
    ]
}

/// Λ(z, t) by quadrature of the defining convolution.
pub fn lambda_by_convolution(z: &V3, t: f64) -> Matrix3<f64> {
    let zn = z.norm();
    let axis = if zn > 0.0 { z / zn } else { V3::z() };
    let helper = if axis.x.abs() < 0.9 { V3::x() } else { V3::y() };
    let e1 = axis.cross(&helper).normalize();
    let e2 = axis.cross(&e1);
    let st = t.sqrt();
    let r_max = zn + 20.0 * st;
    // Scale of the Hessian of K, times the volume of its support.
    let scale = (4.0 * PI * t).powf(-1.5) / t * st.powi(3);
    let tol = 1e-12 * scale;

    let azimuth: Vec<(f64, f64)> = (0..8).map(|i| (2.0 * PI * i as f64 / 8.0).sin_cos()).collect();
    let shell = |r: f64, mu: f64| -> [f64; 6] {
        let s = (1.0 - mu * mu).max(0.0).sqrt();
        let mut acc = [0.0; 6];
        for &(sp, cp) in &azimuth {
            let w = (e1 * cp + e2 * sp) * (r * s) + axis * (r * mu);
            let h = hessian_heat(&(z - w), t);
            for m in 0..6 {
                acc[m] += h[m];
            }
        }
        // E(w) r² dr dμ dφ = r / 4π dr dμ dφ, with dφ = 2π / 8 per node.
        let wgt = r / (4.0 * PI) * (2.0 * PI / 8.0);
        acc.map(|v| v * wgt)
    };
    let radial = |r: f64| -> [f64; 6] {
        // The Gaussian peaks near μ = 1 when r |z| / 2t is large; split there.
        let split = 1.0 - 8.0 * t / (r * zn).max(1e-300);
        let cuts: Vec<f64> = if split > -1.0 { vec![-1.0, split, 1.0] } else { vec![-1.0, 1.0] };
        let mut v = [0.0; 6];
        for c in cuts.windows(2) {
            let w = integrate(|mu| shell(r, mu), c[0], c[1], tol / r_max);
            for m in 0..6 {
                v[m] += w[m];
            }
        }
        v
    };
    let mut h = [0.0; 6];
    let mut lo = 0.0;
    // Break points around the shell |w| = |z| where the mass concentrates.
    let mut breaks: Vec<f64> = [zn - 6.0 * st, zn, zn + 6.0 * st].into_iter().filter(|&b| b > 0.0).collect();
    breaks.push(r_max);
    for hi in breaks {
        let v = integrate(radial, lo, hi, tol);
        for m in 0..6 {
            h[m] += v[m];
        }
        lo = hi;
    }
    let k = heat(z, t);
    Matrix3::new(h[0] + k, h[1], h[2], h[1], h[3] + k, h[4], h[2], h[4], h[5] + k)
}

/// Deterministic sample of `(z, t)` with `t` log-uniform in `[0.05, 3]` and
/// `|z| / (2 sqrt t)` uniform in `[0, 2.5]`, from a small LCG so that this
/// file does not depend on the library's sampling.
pub fn oracle_samples(n: usize, seed: u64) -> Vec<(V3, f64)> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|_| {
            let t = (0.05f64.ln() + next() * (3.0f64.ln() - 0.05f64.ln())).exp();
            let x = 2.5 * next();
            let dir = loop {
                let v = V3::new(2.0 * next() - 1.0, 2.0 * next() - 1.0, 2.0 * next() - 1.0);
                if v.norm() > 0.1 && v.norm() <= 1.0 {
                    break v.normalize();
                }
            };
            (dir * (2.0 * t.sqrt() * x), t)
        })
        .collect()
}

/// Frobenius relative error of `a` against the oracle `b`.
pub fn relative_error(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
