//! Quadrature rules: Gauss–Legendre, adaptive Gauss–Kronrod (7/15) for
//! vector-valued integrands, and collapsed-product rules on simplices.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    x.iter().zip(&w).map(|(xi, wi)| (c + h * xi, h * wi)).collect()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and budget for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { abs_tol: 0.0, rel_tol: 1e-10, max_panels: 20_000 }
    }
}

/// Integral value with an error estimate and evaluation count.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub evaluations: usize,
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn kronrod_panel<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> Panel<N> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let fc = f(c);
    for j in 0..N {
        k[j] = WGK[7] * fc[j];
        g[j] = WG[3] * fc[j];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for j in 0..N {
            let s = f1[j] + f2[j];
            k[j] += WGK[i] * s;
            if i % 2 == 1 {
                g[j] += WG[i / 2] * s;
            }
        }
    }
    let mut diff = [0.0; N];
    for j in 0..N {
        k[j] *= h;
        g[j] *= h;
        diff[j] = k[j] - g[j];
    }
    Panel { a, b, value: k, error: norm(&diff) }
}

/// Globally adaptive Gauss–Kronrod 7/15 quadrature over the panels defined by
/// consecutive `breakpoints`. The error estimate is the Euclidean norm of the
/// Kronrod–Gauss difference summed over panels.
pub fn integrate_adaptive<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> Result<Estimate<N>> {
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod_panel(&mut f, w[0], w[1]));
            evaluations += 15;
        }
    }
    loop {
        let mut total = [0.0; N];
        let mut err = 0.0;
        for p in heap.iter() {
            for j in 0..N {
                total[j] += p.value[j];
            }
            err += p.error;
        }
        let target = opts.abs_tol.max(opts.rel_tol * norm(&total));
        if err <= target {
            // Deterministic summation order independent of heap layout.
            let mut panels: Vec<&Panel<N>> = heap.iter().collect();
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            let mut value = [0.0; N];
            for p in panels {
                for j in 0..N {
                    value[j] += p.value[j];
                }
            }
            return Ok(Estimate { value, error: err, evaluations });
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::QuadratureNotConverged { achieved: err, requested: target });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureNotConverged { achieved: err, requested: target });
        }
        heap.push(kronrod_panel(&mut f, worst.a, mid));
        heap.push(kronrod_panel(&mut f, mid, worst.b));
        evaluations += 30;
    }
}

/// Quadrature point on a simplex in barycentric coordinates; weights sum to 1.
#[derive(Debug, Clone, Copy)]
pub struct SimplexPoint<const D: usize> {
    pub bary: [f64; D],
    pub weight: f64,
}

/// Collapsed-product (Duffy) rule on the reference tetrahedron with `n`
/// Gauss points per direction; exact for polynomials of degree `2n - 3`.
pub fn tet_rule(n: usize) -> Vec<SimplexPoint<4>> {
    let g = gauss_legendre_on(n, 0.0, 1.0);
    let mut pts = Vec::with_capacity(n * n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            for &(s, ws) in &g {
                let x = u;
                let y = v * (1.0 - u);
                let z = s * (1.0 - u) * (1.0 - v);
                let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                pts.push(SimplexPoint {
                    bary: [1.0 - x - y - z, x, y, z],
                    weight: 6.0 * wu * wv * ws * jac,
                });
            }
        }
    }
    pts
}

/// Collapsed-product rule on the reference triangle; exact for degree `2n - 2`.
pub fn triangle_rule(n: usize) -> Vec<SimplexPoint<3>> {
    let g = gauss_legendre_on(n, 0.0, 1.0);
    let mut pts = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            let x = u;
            let y = v * (1.0 - u);
            pts.push(SimplexPoint { bary: [1.0 - x - y, x, y], weight: 2.0 * wu * wv * (1.0 - u) });
        }
    }
    pts
}
