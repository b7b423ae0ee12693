//! Minimal compressed-row storage used for assembled operators, plus the
//! bridge to the sparse LU factorization.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::{lu, LuError, SupernodalThreshold};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Sums duplicates. The result depends only on the multiset of entries
    /// in the given order, so assembly stays reproducible.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len() / 4);
        let mut values: Vec<f64> = Vec::with_capacity(t.len() / 4);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            debug_assert!(i < nrows && j < ncols);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `selfᵀ x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `yᵀ · self · x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.nrows).map(|i| y[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }
}

/// Sparse LU of a square matrix given as triplets.
pub struct SparseLu {
    n: usize,
    symbolic: lu::SymbolicLu<usize>,
    numeric: lu::NumericLu<usize, f64>,
}

impl SparseLu {
    pub fn factor(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        Self::factor_with(n, entries, SupernodalThreshold::AUTO)
    }

    fn factor_with(n: usize, entries: &[(usize, usize, f64)], threshold: SupernodalThreshold) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::InvalidParameter(format!("sparse matrix construction: {e:?}")))?;
        drop(t);
        let params = lu::LuSymbolicParams { supernodal_flop_ratio_threshold: threshold, ..Default::default() };
        let symbolic = lu::factorize_symbolic_lu(m.symbolic(), params).map_err(|e| Error::Eigen(format!("symbolic factorization failed: {e:?}")))?;
        let mut numeric = lu::NumericLu::new();
        let par = Par::Seq;
        let mut mem = MemBuffer::try_new(symbolic.factorize_numeric_lu_scratch::<f64>(par, Default::default()))
            .map_err(|_| Error::Eigen("out of memory for factorization workspace".into()))?;
        symbolic
            .factorize_numeric_lu(&mut numeric, m.as_ref(), par, MemStack::new(&mut mem), Default::default())
            .map_err(|e| match e {
                LuError::SymbolicSingular { index } => Error::SingularFactorization { pivot: index },
                LuError::Generic(g) => Error::Eigen(format!("factorization failed: {g:?}")),
            })?;
        Ok(Self { n, symbolic, numeric })
    }

    fn solve_mat(&self, b: &mut Mat<f64>) {
        // SAFETY: `numeric` was produced by `symbolic.factorize_numeric_lu`
        // for the matrix this symbolic structure was computed from.
        let lu = unsafe { lu::LuRef::new_unchecked(&self.symbolic, &self.numeric) };
        let par = Par::Seq;
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(b.ncols(), par));
        lu.solve_in_place_with_conj(Conj::No, b.as_mut(), par, MemStack::new(&mut mem));
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.solve_mat(&mut b);
        (0..self.n).map(|i| b[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides stored column by column.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = rhs.len();
        let mut b = Mat::<f64>::from_fn(self.n, k, |i, j| rhs[j][i]);
        self.solve_mat(&mut b);
        (0..k).map(|j| (0..self.n).map(|i| b[(i, j)]).collect()).collect()
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
