//! Saddle-point solve, Dirichlet lift, load vector and the artificial
//! boundary traction.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sparse::{dot, norm, Csr, SparseLu};
use super::{barycentric, p2_gradients, p2_values, pressure_dofs, tet_geometry, MixedSystem};
use crate::error::{Error, Result};
use crate::quadrature::{tet_rule, triangle_rule};
use crate::Vec3;

/// Linear solver for the block system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverMethod {
    /// Sparse LU of the full indefinite block matrix.
    Direct,
    /// GMRES with a block-triangular preconditioner built from the scalar
    /// convection–diffusion operator and the lumped pressure mass matrix.
    Iterative,
    /// Direct up to `direct_limit` unknowns, iterative above.
    Auto,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative residual bound on the full block system.
    pub tolerance: f64,
    pub method: SolverMethod,
    pub direct_limit: usize,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, method: SolverMethod::Auto, direct_limit: 60_000, restart: 120, max_iterations: 3000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    /// Total velocity `Ṽ + lift`.
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Relative residual `‖K x - r‖ / ‖r‖` of the eliminated block system.
    pub residual: f64,
    pub wall_time_s: f64,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub constrained_dofs: usize,
    pub pressure_pinned: bool,
    pub method: SolverMethod,
    /// Krylov iterations (0 for the direct solver).
    pub iterations: usize,
}

/// Nodal interpolant of `b` on the inner-sphere dofs, zero elsewhere.
pub fn dirichlet_lift<F>(sys: &MixedSystem, b: F) -> Result<Vec<f64>>
where
    F: Fn(&Vec3) -> Result<Vec3> + Sync,
{
    let mut lift = vec![0.0; sys.velocity_dofs()];
    let vals: Vec<Vec3> = sys.space.inner_nodes.par_iter().map(|&n| b(&sys.space.nodes[n])).collect::<Result<_>>()?;
    for (&n, v) in sys.space.inner_nodes.iter().zip(&vals) {
        lift[3 * n] = v.x;
        lift[3 * n + 1] = v.y;
        lift[3 * n + 2] = v.z;
    }
    Ok(lift)
}

/// `∫ f · φ` for every velocity dof.
pub fn load_vector<F>(sys: &MixedSystem, f: F) -> Vec<f64>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    let rule = tet_rule(6);
    let locals: Vec<[Vec3; 10]> = (0..sys.mesh.tets.len())
        .into_par_iter()
        .map(|t| {
            let pts = sys.mesh.tet_points(t);
            let (vol, _) = tet_geometry(&pts);
            let mut acc = [Vec3::zeros(); 10];
            for q in &rule {
                let l = q.bary;
                let x = pts[0] * l[0] + pts[1] * l[1] + pts[2] * l[2] + pts[3] * l[3];
                let fx = f(&x);
                if fx == Vec3::zeros() {
                    continue;
                }
                let phi = p2_values(&l);
                for a in 0..10 {
                    acc[a] += fx * (q.weight * vol * phi[a]);
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; sys.velocity_dofs()];
    for (t, acc) in locals.iter().enumerate() {
        for (a, v) in acc.iter().enumerate() {
            let n = sys.space.tet_nodes[t][a];
            for k in 0..3 {
                out[3 * n + k] += v[k];
            }
        }
    }
    out
}

pub fn solve<F>(sys: &MixedSystem, lift: &[f64], f: F) -> Result<SolveResult>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    solve_with(sys, lift, f, SolveOptions::default())
}

/// Block system with the inner Dirichlet dofs eliminated. Unknowns are the
/// free velocity dofs followed by all pressure dofs.
struct Eliminated {
    free: Vec<usize>,
    nf: usize,
    np: usize,
    matrix: Csr,
    rhs: Vec<f64>,
}

fn eliminate(sys: &MixedSystem, lift: &[f64], load: &[f64]) -> Eliminated {
    let nvel = sys.velocity_dofs();
    let mut fixed = vec![false; nvel];
    for &d in &sys.constrained {
        fixed[d] = true;
    }
    let mut free_index = vec![usize::MAX; nvel];
    let mut free = Vec::with_capacity(nvel);
    for d in 0..nvel {
        if !fixed[d] {
            free_index[d] = free.len();
            free.push(d);
        }
    }
    let nf = free.len();
    let np = sys.pressure_dofs();
    let mut entries = Vec::with_capacity(sys.a.nnz() + 2 * sys.b.nnz());
    let mut rhs = vec![0.0; nf + np];
    for (k, &d) in free.iter().enumerate() {
        rhs[k] = load[d] + sys.rhs_v[d];
        for (j, v) in sys.a.row(d) {
            if fixed[j] {
                rhs[k] -= v * lift[j];
            } else {
                entries.push((k, free_index[j], v));
            }
        }
    }
    for q in 0..np {
        for (j, v) in sys.b.row(q) {
            if fixed[j] {
                rhs[nf + q] -= v * lift[j];
            } else {
                entries.push((nf + q, free_index[j], v));
                entries.push((free_index[j], nf + q, v));
            }
        }
    }
    Eliminated { free, nf, np, matrix: Csr::from_triplets(nf + np, nf + np, entries), rhs }
}

/// Solves for `(Ṽ, P)` with the lift moved to the right-hand side. The
/// direct path tries a single pressure pin if the factorization is singular
/// or inaccurate.
pub fn solve_with<F>(sys: &MixedSystem, lift: &[f64], f: F, opts: SolveOptions) -> Result<SolveResult>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    let start = Instant::now();
    let nvel = sys.velocity_dofs();
    if lift.len() != nvel {
        return Err(Error::InvalidParameter(format!("lift has {} entries, expected {nvel}", lift.len())));
    }
    let load = load_vector(sys, f);
    let el = eliminate(sys, lift, &load);
    let n = el.nf + el.np;
    let method = match opts.method {
        SolverMethod::Auto if n <= opts.direct_limit => SolverMethod::Direct,
        SolverMethod::Auto => SolverMethod::Iterative,
        m => m,
    };
    let (x, residual, pinned, iterations) = match method {
        SolverMethod::Iterative => {
            let (x, res, it) = gmres(sys, &el, &opts)?;
            (x, res, false, it)
        }
        _ => {
            let (x, res, pinned) = direct(&el, &opts)?;
            (x, res, pinned, 0)
        }
    };

    let mut velocity = lift.to_vec();
    for (k, &d) in el.free.iter().enumerate() {
        velocity[d] = x[k];
    }
    Ok(SolveResult {
        velocity,
        pressure: x[el.nf..].to_vec(),
        residual,
        wall_time_s: start.elapsed().as_secs_f64(),
        velocity_dofs: nvel,
        pressure_dofs: el.np,
        constrained_dofs: sys.constrained.len(),
        pressure_pinned: pinned,
        method,
        iterations,
    })
}

fn direct(el: &Eliminated, opts: &SolveOptions) -> Result<(Vec<f64>, f64, bool)> {
    let entries: Vec<(usize, usize, f64)> = el.matrix.triplets().collect();
    let attempt = |entries: &[(usize, usize, f64)], rhs: &[f64]| -> Result<(Vec<f64>, f64)> {
        let n = rhs.len();
        let lu = SparseLu::factor(n, entries)?;
        let mut x = lu.solve(rhs);
        let mut res = relative_residual(n, entries, &x, rhs);
        // One step of iterative refinement.
        if res > 0.01 * opts.tolerance {
            let r = residual_vector(n, entries, &x, rhs);
            let dx = lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            res = relative_residual(n, entries, &x, rhs);
        }
        Ok((x, res))
    };
    match attempt(&entries, &el.rhs) {
        Ok((x, res)) if res <= opts.tolerance && x.iter().all(|v| v.is_finite()) => Ok((x, res, false)),
        first => {
            // Pin the first pressure dof to zero by replacing its row and column.
            let pin = el.nf;
            let mut pinned: Vec<(usize, usize, f64)> =
                entries.iter().copied().filter(|&(i, j, _)| i != pin && j != pin).collect();
            pinned.push((pin, pin, 1.0));
            let mut prhs = el.rhs.clone();
            prhs[pin] = 0.0;
            match attempt(&pinned, &prhs) {
                Ok((x, res)) if res <= opts.tolerance => Ok((x, res, true)),
                Ok((_, res)) => Err(Error::SolverResidual { residual: res, tolerance: opts.tolerance }),
                Err(e) => Err(first.err().unwrap_or(e)),
            }
        }
    }
}

/// Block upper-triangular preconditioner `[Â Bᵀ; 0 -Ŝ]` with `Â` the
/// component-wise scalar part of `A` (one LU factor shared by the three
/// components) and `Ŝ` the lumped pressure mass matrix.
struct BlockPreconditioner {
    scalar: SparseLu,
    nfn: usize,
    inv_mass: Vec<f64>,
}

impl BlockPreconditioner {
    fn new(sys: &MixedSystem, el: &Eliminated) -> Result<Self> {
        let nn = sys.space.n_nodes();
        let mut node_index = vec![usize::MAX; nn];
        let mut nfn = 0;
        let mut inner = sys.space.inner_nodes.iter().peekable();
        for (n, slot) in node_index.iter_mut().enumerate() {
            if inner.peek() == Some(&&n) {
                inner.next();
            } else {
                *slot = nfn;
                nfn += 1;
            }
        }
        debug_assert_eq!(3 * nfn, el.nf);
        let entries: Vec<(usize, usize, f64)> = sys
            .scalar_operator
            .triplets()
            .filter(|&(i, j, _)| node_index[i] != usize::MAX && node_index[j] != usize::MAX)
            .map(|(i, j, v)| (node_index[i], node_index[j], v))
            .collect();
        let scalar = SparseLu::factor(nfn, &entries)?;
        let inv_mass = (0..el.np).map(|q| 1.0 / sys.pressure_mass.row(q).map(|(_, v)| v).sum::<f64>()).collect();
        Ok(Self { scalar, nfn, inv_mass })
    }

    fn apply(&self, el: &Eliminated, r: &[f64]) -> Vec<f64> {
        let nf = el.nf;
        let mut z = vec![0.0; r.len()];
        for q in 0..el.np {
            z[nf + q] = -r[nf + q] * self.inv_mass[q];
        }
        // r_u - Bᵀ p, where the Bᵀ block sits in the velocity rows.
        let mut ru = r[..nf].to_vec();
        for (k, rk) in ru.iter_mut().enumerate() {
            for (j, v) in el.matrix.row(k) {
                if j >= nf {
                    *rk -= v * z[j];
                }
            }
        }
        let comps: Vec<Vec<f64>> = (0..3).map(|c| (0..self.nfn).map(|i| ru[3 * i + c]).collect()).collect();
        for (c, sol) in self.scalar.solve_many(&comps).iter().enumerate() {
            for (i, v) in sol.iter().enumerate() {
                z[3 * i + c] = *v;
            }
        }
        z
    }
}

/// Right-preconditioned restarted GMRES.
fn gmres(sys: &MixedSystem, el: &Eliminated, opts: &SolveOptions) -> Result<(Vec<f64>, f64, usize)> {
    let n = el.nf + el.np;
    let bnorm = norm(&el.rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let pre = BlockPreconditioner::new(sys, el)?;
    let m = opts.restart.max(1);
    let mut history = Vec::new();
    let mut total = 0;
    loop {
        let ax = el.matrix.matvec(&x);
        let r: Vec<f64> = el.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        history.push(beta / bnorm);
        if beta / bnorm <= opts.tolerance {
            return Ok((x, beta / bnorm, total));
        }
        if total >= opts.max_iterations {
            return Err(Error::NotConverged { iterations: total, residual: beta / bnorm, history });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < opts.max_iterations {
            let zk = pre.apply(el, &v[k]);
            let mut w = el.matrix.matvec(&zk);
            z.push(zk);
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() / bnorm <= 0.5 * opts.tolerance || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            for (xj, zj) in x.iter_mut().zip(zi) {
                *xj += yi * zj;
            }
        }
    }
}

fn residual_vector(n: usize, entries: &[(usize, usize, f64)], x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut r = rhs.to_vec();
    for &(i, j, v) in entries {
        r[i] -= v * x[j];
    }
    debug_assert_eq!(r.len(), n);
    r
}

fn relative_residual(n: usize, entries: &[(usize, usize, f64)], x: &[f64], rhs: &[f64]) -> f64 {
    let r = norm(&residual_vector(n, entries, x, rhs));
    let b = norm(rhs);
    if b > 0.0 {
        r / b
    } else {
        r
    }
}

/// `max_q |β_R(V, ψ_q)|`, relative to `max_q Σ_j |B_qj V_j|`.
pub fn mass_conservation_residual(sys: &MixedSystem, v: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for q in 0..sys.pressure_dofs() {
        let (s, a) = sys.b.row(q).fold((0.0, 0.0), |(s, a), (j, b)| (s + b * v[j], a + (b * v[j]).abs()));
        worst = worst.max(s.abs());
        scale = scale.max(a);
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Weak form of the traction condition: the rows of `A V + Bᵀ P - F` that
/// belong to outer-sphere nodes, i.e. `∫_{∂B_R} L_R(V, P) · g` for the
/// discrete test functions `g` of the outer sphere. Relative to the largest
/// row magnitude.
pub fn weak_traction_residual<F>(sys: &MixedSystem, sol: &SolveResult, f: F) -> f64
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    let load = load_vector(sys, f);
    let av = sys.a.matvec(&sol.velocity);
    let btp = sys.b.matvec_t(&sol.pressure);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &n in &sys.space.outer_nodes {
        for k in 0..3 {
            let d = 3 * n + k;
            let r = av[d] + btp[d] - load[d] - sys.rhs_v[d];
            worst = worst.max(r.abs());
            scale = scale.max(av[d].abs()).max(btp[d].abs()).max(load[d].abs());
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// `L_R(V, P)` on the outer sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TractionField {
    /// Value at each outer facet's centroid, in `outer_facets` order.
    pub facet_values: Vec<Vec3>,
    /// `‖L_R(V, P)‖₂` over the polyhedral outer surface.
    pub l2_norm: f64,
}

/// Evaluates `L_R(u, π)_k = Σ_j ∂_j u_k x_j / R - π x_k / R + (τ/2)(1 - x₁/R) u_k`
/// from element gradients of the owning tets.
pub fn artificial_traction(sys: &MixedSystem, v: &[f64], p: &[f64]) -> TractionField {
    let r = sys.mesh.r_outer;
    let tau = sys.params.tau;
    let rule = triangle_rule(4);
    let eval = |tet: usize, x: &Vec3| -> Vec3 {
        let pts = sys.mesh.tet_points(tet);
        let (_, g) = tet_geometry(&pts);
        let l = barycentric(&pts, x);
        let phi = p2_values(&l);
        let dphi = p2_gradients(&l, &g);
        let nodes = sys.space.tet_nodes[tet];
        let mut u = Vec3::zeros();
        // grad[k] = ∇u_k
        let mut grad = [Vec3::zeros(); 3];
        for a in 0..10 {
            for k in 0..3 {
                let c = v[3 * nodes[a] + k];
                u[k] += c * phi[a];
                grad[k] += dphi[a] * c;
            }
        }
        let pd = pressure_dofs(&sys.mesh, sys.pressure_space, tet);
        let pi: f64 = (0..4).map(|i| p[pd[i]] * l[i]).sum();
        let xr = x / r;
        Vec3::from_fn(|k, _| grad[k].dot(&xr) - pi * xr[k] + 0.5 * tau * (1.0 - xr.x) * u[k])
    };
    let mut facet_values = Vec::with_capacity(sys.outer_facets.len());
    let mut sq = 0.0;
    for f in &sys.outer_facets {
        let vtx = f.vertices.map(|i| sys.mesh.vertices[i]);
        let area = 0.5 * (vtx[1] - vtx[0]).cross(&(vtx[2] - vtx[0])).norm();
        facet_values.push(eval(f.tet, &((vtx[0] + vtx[1] + vtx[2]) / 3.0)));
        for q in &rule {
            let x = vtx[0] * q.bary[0] + vtx[1] * q.bary[1] + vtx[2] * q.bary[2];
            sq += q.weight * area * eval(f.tet, &x).norm_squared();
        }
    }
    TractionField { facet_values, l2_norm: sq.sqrt() }
}
