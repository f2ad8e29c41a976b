//! Sparse storage, factorization wrappers and small vector helpers.
//!
//! Real symmetric building blocks (mass, stiffness, trace coupling) are kept
//! in a plain CSR format; complex saddle-point systems are handed to faer's
//! sparse LU, which also provides the adjoint and transpose solves needed by
//! the spectral estimators.

use faer::linalg::solvers::Solve;
use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::error::SolveError;
use crate::C64;

/// Compressed sparse row matrix with real entries.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds a CSR matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut row_counts = vec![0usize; nrows];
        let mut i = 0;
        while i < entries.len() {
            let (r, c, _) = entries[i];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            let mut v = 0.0;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            indices.push(c);
            values.push(v);
            row_counts[r] += 1;
        }
        let mut indptr = vec![0usize; nrows + 1];
        for r in 0..nrows {
            indptr[r + 1] = indptr[r] + row_counts[r];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Iterates over all stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn matvec_c(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        for r in 0..self.nrows {
            let mut acc = C64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                acc += x[c] * v;
            }
            y[r] = acc;
        }
        y
    }

    /// Transposed product `A^T x` without forming the transpose.
    pub fn matvec_transpose_c(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                y[c] += x[r] * v;
            }
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                y[c] += x[r] * v;
            }
        }
        y
    }

    /// Real quadratic form `x^T A x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.matvec(x))
            .map(|(&xi, yi)| xi * yi)
            .sum()
    }

    /// Hermitian form `Re(x^H A x)` for a real symmetric matrix.
    pub fn hermitian_form(&self, x: &[C64]) -> f64 {
        x.iter()
            .zip(self.matvec_c(x))
            .map(|(xi, yi)| (xi.conj() * yi).re)
            .sum()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut col_sums = vec![0.0; self.ncols];
        for (_, c, v) in self.iter() {
            col_sums[c] += v.abs();
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute deviation from symmetry; zero for exactly
    /// symmetric assembly.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut max = 0.0f64;
        for (r, c, v) in self.iter() {
            let mut vt = 0.0;
            for (cc, vv) in self.row(c) {
                if cc == r {
                    vt = vv;
                    break;
                }
            }
            max = max.max((v - vt).abs());
        }
        max
    }

    /// Exactly symmetric copy `(A + A^T) / 2`; requires a square matrix.
    pub fn symmetrized(&self) -> Csr {
        assert_eq!(self.nrows, self.ncols);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * self.nnz());
        for (r, c, v) in self.iter() {
            triplets.push((r, c, 0.5 * v));
            triplets.push((c, r, 0.5 * v));
        }
        Csr::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }
}

fn csc_matvec(mat: &SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let r = mat.as_ref();
    let (col_ptr, row_idx, val) = (r.col_ptr(), r.row_idx(), r.val());
    let mut y = vec![0.0; r.nrows()];
    for j in 0..r.ncols() {
        let xj = x[j];
        for k in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[k]] += val[k] * xj;
        }
    }
    y
}

fn csc_matvec_c(mat: &SparseColMat<usize, c64>, x: &[C64], adjoint: bool) -> Vec<C64> {
    let r = mat.as_ref();
    let (col_ptr, row_idx, val) = (r.col_ptr(), r.row_idx(), r.val());
    let mut y = vec![C64::new(0.0, 0.0); if adjoint { r.ncols() } else { r.nrows() }];
    for j in 0..r.ncols() {
        if adjoint {
            let mut acc = C64::new(0.0, 0.0);
            for k in col_ptr[j]..col_ptr[j + 1] {
                acc += val[k].conj() * x[row_idx[k]];
            }
            y[j] = acc;
        } else {
            let xj = x[j];
            for k in col_ptr[j]..col_ptr[j + 1] {
                y[row_idx[k]] += val[k] * xj;
            }
        }
    }
    y
}

/// Sparse LU factorization of a real square matrix, with complex
/// right-hand-side support via separate real and imaginary solves.
/// Every solve runs one pass of iterative refinement against the stored
/// matrix, which matters for the ill-scaled saddle systems.
pub struct RealLu {
    n: usize,
    mat: SparseColMat<usize, f64>,
    lu: Lu<usize, f64>,
}

impl RealLu {
    pub fn from_triplets(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<Self, SolveError> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
            .map_err(|e| SolveError::Factorization(format!("sparse build: {e:?}")))?;
        let symbolic = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| SolveError::Factorization(format!("symbolic LU: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| SolveError::Factorization(format!("numeric LU: {e:?}")))?;
        Ok(RealLu { n, mat, lu })
    }

    pub fn from_csr(csr: &Csr) -> Result<Self, SolveError> {
        assert_eq!(csr.nrows, csr.ncols);
        let triplets: Vec<Triplet<usize, usize, f64>> = csr
            .iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        Self::from_triplets(csr.nrows, &triplets)
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = self.raw_solve(b);
        let ax = csc_matvec(&self.mat, &x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.raw_solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        x
    }

    pub fn solve_c(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let re: Vec<f64> = b.iter().map(|v| v.re).collect();
        let im: Vec<f64> = b.iter().map(|v| v.im).collect();
        let xr = self.solve(&re);
        let xi = self.solve(&im);
        xr.into_iter()
            .zip(xi)
            .map(|(a, b)| C64::new(a, b))
            .collect()
    }
}

/// Sparse LU factorization of a complex square matrix, with one pass of
/// iterative refinement per solve.
pub struct ComplexLu {
    n: usize,
    mat: SparseColMat<usize, c64>,
    lu: Lu<usize, c64>,
    norm1: f64,
}

impl ComplexLu {
    pub fn from_triplets(n: usize, triplets: &[Triplet<usize, usize, c64>]) -> Result<Self, SolveError> {
        let mut col_sums = vec![0.0f64; n];
        for t in triplets {
            col_sums[t.col] += t.val.norm();
        }
        let norm1 = col_sums.into_iter().fold(0.0, f64::max);
        let mat = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, triplets)
            .map_err(|e| SolveError::Factorization(format!("sparse build: {e:?}")))?;
        let symbolic = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| SolveError::Factorization(format!("symbolic LU: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| SolveError::Factorization(format!("numeric LU: {e:?}")))?;
        Ok(ComplexLu { n, mat, lu, norm1 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 1-norm of the factored matrix, accumulated from the triplets.
    pub fn matrix_norm1(&self) -> f64 {
        self.norm1
    }

    fn to_mat(&self, b: &[C64]) -> Mat<c64> {
        assert_eq!(b.len(), self.n);
        Mat::<c64>::from_fn(self.n, 1, |i, _| b[i])
    }

    fn raw_solve(&self, b: &[C64], adjoint: bool) -> Vec<C64> {
        let mut rhs = self.to_mat(b);
        if adjoint {
            self.lu.solve_adjoint_in_place(rhs.as_mut());
        } else {
            self.lu.solve_in_place(rhs.as_mut());
        }
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    fn refined_solve(&self, b: &[C64], adjoint: bool) -> Vec<C64> {
        let mut x = self.raw_solve(b, adjoint);
        let ax = csc_matvec_c(&self.mat, &x, adjoint);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.raw_solve(&r, adjoint);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        x
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        self.refined_solve(b, false)
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        self.refined_solve(b, true)
    }

    /// Hager-style estimate of the 1-norm condition number.
    pub fn condest(&self) -> f64 {
        let n = self.n;
        let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0f64;
        for _ in 0..5 {
            let y = self.solve(&x);
            let y_norm: f64 = y.iter().map(|v| v.norm()).sum();
            est = est.max(y_norm);
            let xi: Vec<C64> = y
                .iter()
                .map(|v| {
                    let a = v.norm();
                    if a > 0.0 {
                        v / a
                    } else {
                        C64::new(1.0, 0.0)
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= zx + 1e-14 * zx.abs() {
                break;
            }
            x = vec![C64::new(0.0, 0.0); n];
            x[j] = C64::new(1.0, 0.0);
        }
        self.norm1 * est
    }
}

/// Euclidean norm of a complex vector.
pub fn cnorm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Inner product `x^H y` (conjugate-linear in the first argument).
pub fn cdot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_from_triplets_sums_duplicates() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 5.0), (0, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        let y = a.matvec(&[1.0, 1.0]);
        assert_eq!(y, vec![2.0, 5.0]);
    }

    #[test]
    fn csr_transpose_matvec_matches_dense() {
        let a = Csr::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let x = vec![C64::new(1.0, 1.0), C64::new(-2.0, 0.5)];
        let y = a.matvec_transpose_c(&x);
        assert_eq!(y[0], x[0]);
        assert_eq!(y[1], x[1] * 3.0);
        assert_eq!(y[2], x[0] * 2.0);
    }

    #[test]
    fn real_lu_solves_complex_rhs() {
        let trips = vec![
            Triplet::new(0, 0, 4.0),
            Triplet::new(0, 1, 1.0),
            Triplet::new(1, 0, 1.0),
            Triplet::new(1, 1, 3.0),
        ];
        let lu = RealLu::from_triplets(2, &trips).unwrap();
        let b = vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0)];
        let x = lu.solve_c(&b);
        let r0 = x[0] * 4.0 + x[1] * 1.0 - b[0];
        let r1 = x[0] * 1.0 + x[1] * 3.0 - b[1];
        assert!(r0.norm() < 1e-14 && r1.norm() < 1e-14);
    }

    #[test]
    fn complex_lu_adjoint_solve() {
        let a01 = c64::new(0.0, 2.0);
        let trips = vec![
            Triplet::new(0, 0, c64::new(3.0, 1.0)),
            Triplet::new(0, 1, a01),
            Triplet::new(1, 1, c64::new(1.0, -1.0)),
        ];
        let lu = ComplexLu::from_triplets(2, &trips).unwrap();
        let b = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let x = lu.solve_adjoint(&b);
        // Check A^H x = b.
        let r0 = C64::new(3.0, -1.0) * x[0] - b[0];
        let r1 = C64::new(0.0, -2.0) * x[0] + C64::new(1.0, 1.0) * x[1] - b[1];
        assert!(r0.norm() < 1e-14 && r1.norm() < 1e-14);
        assert!(lu.condest() >= 1.0);
    }
}
