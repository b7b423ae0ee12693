//! Discrete inf-sup constant: the smallest generalized singular value of
//! `B` with respect to the `|·|^(R)` velocity norm on the test space and the
//! pressure mass norm, i.e. `sqrt(λ_min)` of `B N⁻¹ Bᵀ p = λ M p`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sparse::SparseLu;
use super::MixedSystem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfSupMethod {
    /// Dense Schur complement and symmetric eigensolve.
    Dense,
    /// Block inverse subspace iteration on the saddle-point factorization.
    Subspace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfSupEstimate {
    pub value: f64,
    pub method: InfSupMethod,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
}

/// Pressure dof count up to which the dense method is used by default.
pub const DENSE_LIMIT: usize = 1500;

pub fn discrete_infsup(sys: &MixedSystem) -> Result<InfSupEstimate> {
    let method = if sys.pressure_dofs() <= DENSE_LIMIT { InfSupMethod::Dense } else { InfSupMethod::Subspace };
    discrete_infsup_with(sys, method)
}

struct Blocks {
    nf: usize,
    norm: Vec<(usize, usize, f64)>,
    /// `(pressure row, free column, value)`
    b: Vec<(usize, usize, f64)>,
}

fn blocks(sys: &MixedSystem) -> Blocks {
    let nvel = sys.velocity_dofs();
    let mut fixed = vec![false; nvel];
    for &d in &sys.constrained {
        fixed[d] = true;
    }
    let mut idx = vec![usize::MAX; nvel];
    let mut nf = 0;
    for d in 0..nvel {
        if !fixed[d] {
            idx[d] = nf;
            nf += 1;
        }
    }
    let half_tau = 0.5 * sys.params.tau;
    let mut norm = Vec::new();
    for (i, j, v) in sys.stiffness.triplets() {
        for c in 0..3 {
            let (a, b) = (3 * i + c, 3 * j + c);
            if !fixed[a] && !fixed[b] {
                norm.push((idx[a], idx[b], v));
            }
        }
    }
    for (i, j, v) in sys.boundary_mass.triplets() {
        for c in 0..3 {
            let (a, b) = (3 * i + c, 3 * j + c);
            if !fixed[a] && !fixed[b] {
                norm.push((idx[a], idx[b], half_tau * v));
            }
        }
    }
    let b = sys.b.triplets().filter(|&(_, j, _)| !fixed[j]).map(|(q, j, v)| (q, idx[j], v)).collect();
    Blocks { nf, norm, b }
}

fn dense_pressure_mass(sys: &MixedSystem) -> DMatrix<f64> {
    let np = sys.pressure_dofs();
    let mut m = DMatrix::zeros(np, np);
    for (i, j, v) in sys.pressure_mass.triplets() {
        m[(i, j)] += v;
    }
    m
}

/// Smallest eigenvalue of the symmetric pencil `(s, m)` with `m` SPD.
fn smallest_generalized(s: DMatrix<f64>, m: DMatrix<f64>) -> Result<f64> {
    let chol = m.cholesky().ok_or_else(|| Error::Eigen("pressure mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let li = l.clone().try_inverse().ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let c = &li * s * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let lam = eig
        .eigenvalues
        .iter()
        .copied()
        .min_by(|a, b| a.total_cmp(b))
        .ok_or_else(|| Error::Eigen("empty pencil".into()))?;
    if !lam.is_finite() {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(lam)
}

pub fn discrete_infsup_with(sys: &MixedSystem, method: InfSupMethod) -> Result<InfSupEstimate> {
    let bl = blocks(sys);
    let np = sys.pressure_dofs();
    let value = match method {
        InfSupMethod::Dense => dense(sys, &bl)?,
        InfSupMethod::Subspace => subspace(sys, &bl)?,
    };
    Ok(InfSupEstimate { value, method, velocity_dofs: bl.nf, pressure_dofs: np })
}

fn dense(sys: &MixedSystem, bl: &Blocks) -> Result<f64> {
    let np = sys.pressure_dofs();
    let nf = bl.nf;
    let lu = SparseLu::factor(nf, &bl.norm)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); np];
    for &(q, j, v) in &bl.b {
        rows[q].push((j, v));
    }
    let mut s = DMatrix::<f64>::zeros(np, np);
    const CHUNK: usize = 64;
    for start in (0..np).step_by(CHUNK) {
        let end = (start + CHUNK).min(np);
        let rhs: Vec<Vec<f64>> = (start..end)
            .map(|q| {
                let mut col = vec![0.0; nf];
                for &(j, v) in &rows[q] {
                    col[j] += v;
                }
                col
            })
            .collect();
        let x = lu.solve_many(&rhs);
        for (c, xc) in x.iter().enumerate() {
            for (q, row) in rows.iter().enumerate() {
                s[(q, start + c)] = row.iter().map(|&(j, v)| v * xc[j]).sum();
            }
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let lam = smallest_generalized(s, dense_pressure_mass(sys))?;
    Ok(lam.max(0.0).sqrt())
}

fn subspace(sys: &MixedSystem, bl: &Blocks) -> Result<f64> {
    let np = sys.pressure_dofs();
    let nf = bl.nf;
    let mut entries = bl.norm.clone();
    for &(q, j, v) in &bl.b {
        entries.push((nf + q, j, v));
        entries.push((j, nf + q, v));
    }
    let lu = SparseLu::factor(nf + np, &entries)?;
    let mass = &sys.pressure_mass;
    let k = 8.min(np);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1f5_u64);
    let mut x: Vec<Vec<f64>> = (0..k).map(|_| (0..np).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    let mut last = f64::INFINITY;
    for _ in 0..500 {
        // Y = S⁻¹ M X through the saddle system [N Bᵀ; B 0][u; p] = [0; -M x].
        let mx: Vec<Vec<f64>> = x.iter().map(|xi| mass.matvec(xi)).collect();
        let rhs: Vec<Vec<f64>> = mx
            .iter()
            .map(|m| {
                let mut r = vec![0.0; nf + np];
                for (q, v) in m.iter().enumerate() {
                    r[nf + q] = -v;
                }
                r
            })
            .collect();
        let y: Vec<Vec<f64>> = lu.solve_many(&rhs).into_iter().map(|s| s[nf..].to_vec()).collect();
        // Rayleigh–Ritz: Yᵀ S Y = Yᵀ M X, Yᵀ M Y.
        let my: Vec<Vec<f64>> = y.iter().map(|yi| mass.matvec(yi)).collect();
        let sp = DMatrix::from_fn(k, k, |i, j| 0.5 * (super::sparse::dot(&y[i], &mx[j]) + super::sparse::dot(&y[j], &mx[i])));
        let mp = DMatrix::from_fn(k, k, |i, j| 0.5 * (super::sparse::dot(&y[i], &my[j]) + super::sparse::dot(&y[j], &my[i])));
        let chol = mp.clone().cholesky().ok_or_else(|| Error::Eigen("subspace lost rank".into()))?;
        let li = chol.l().try_inverse().ok_or_else(|| Error::Eigen("subspace lost rank".into()))?;
        let c = &li * sp * li.transpose();
        let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let coeffs = li.transpose() * &eig.eigenvectors;
        x = order
            .iter()
            .map(|&col| {
                let mut v = vec![0.0; np];
                for (i, yi) in y.iter().enumerate() {
                    let c = coeffs[(i, col)];
                    for (vq, yq) in v.iter_mut().zip(yi) {
                        *vq += c * yq;
                    }
                }
                v
            })
            .collect();
        let lam = eig.eigenvalues[order[0]];
        if (lam - last).abs() <= 1e-10 * lam.abs() {
            return Ok(lam.max(0.0).sqrt());
        }
        last = lam;
    }
    Err(Error::Eigen(format!("subspace iteration did not converge (last estimate {last:.3e})")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, assemble_with, PressureSpace, SurfaceNormal};
    use crate::mesh::build_shell_mesh;
    use crate::params::FlowParams;

    fn params() -> FlowParams {
        FlowParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn taylor_hood_is_stable_on_coarse_shell() {
        let m = build_shell_mesh(1.0, 2.0, 1, 2, 1.0).unwrap();
        let sys = assemble(&m, &params()).unwrap();
        let est = discrete_infsup(&sys).unwrap();
        assert_eq!(est.method, InfSupMethod::Dense);
        assert!(est.value > 0.05, "{}", est.value);
    }

    #[test]
    fn subspace_iteration_matches_dense() {
        let m = build_shell_mesh(1.0, 2.5, 1, 3, 1.2).unwrap();
        let sys = assemble(&m, &params()).unwrap();
        let d = discrete_infsup_with(&sys, InfSupMethod::Dense).unwrap().value;
        let s = discrete_infsup_with(&sys, InfSupMethod::Subspace).unwrap().value;
        assert!((d - s).abs() < 1e-6 * d, "{d} vs {s}");
    }

    #[test]
    fn discontinuous_pressure_collapses() {
        let mut vals = Vec::new();
        for level in [0u32, 1] {
            let m = build_shell_mesh(1.0, 2.0, level, 1, 1.0).unwrap();
            let sys = assemble_with(&m, &params(), PressureSpace::Discontinuous, SurfaceNormal::Exact).unwrap();
            vals.push(discrete_infsup_with(&sys, InfSupMethod::Dense).unwrap().value);
        }
        let m = build_shell_mesh(1.0, 2.0, 1, 1, 1.0).unwrap();
        let th = discrete_infsup(&assemble(&m, &params()).unwrap()).unwrap().value;
        assert!(vals[1] < 1e-6 * th, "{vals:?} vs {th}");
    }
}
