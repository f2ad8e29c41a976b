//! Exact Fourier analysis of the periodic boundary scalar space.
//!
//! Each entry of the forward matrix is the integral of a quadratic shape
//! function against `exp(-i omega s)` over its edge, evaluated in closed
//! form, so the transform is free of sampling and aliasing errors. Sobolev
//! norms of fractional order come from weighting the resulting coefficients.

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Fourier transform and fractional Sobolev Gram matrices for the boundary
/// scalar space on a curve of length `L`.
pub struct BoundaryFourier {
    pub length: f64,
    /// Highest resolved mode; coefficients cover `k = -n_modes ..= n_modes`.
    pub n_modes: usize,
    forward: DMatrix<C64>,
    gram_half: DMatrix<f64>,
}

/// Moments `m_j = int_0^1 t^j exp(-i z t) dt` for `j = 0, 1, 2`.
///
/// The closed form is used away from zero; a rapidly converging Taylor
/// series avoids cancellation for small `|z|`.
pub fn oscillatory_moments(z: f64) -> [C64; 3] {
    if z.abs() < 0.5 {
        let miz = C64::new(0.0, -z);
        let mut m = [C64::new(0.0, 0.0); 3];
        for (j, mj) in m.iter_mut().enumerate() {
            let mut term = C64::new(1.0, 0.0);
            let mut sum = term / (j + 1) as f64;
            for n in 1..40 {
                term *= miz / n as f64;
                let add = term / (n + j + 1) as f64;
                sum += add;
                if add.norm() < 1e-20 {
                    break;
                }
            }
            *mj = sum;
        }
        m
    } else {
        let iz = C64::new(0.0, z);
        let e = C64::from_polar(1.0, -z);
        let m0 = (C64::new(1.0, 0.0) - e) / iz;
        let m1 = (m0 - e) / iz;
        let m2 = (m1 * 2.0 - e) / iz;
        [m0, m1, m2]
    }
}

/// Integrals of the three quadratic line shapes against `exp(-i z t)`.
fn shape_moments(z: f64) -> [C64; 3] {
    let [m0, m1, m2] = oscillatory_moments(z);
    [
        m0 - m1 * 3.0 + m2 * 2.0,
        (m1 - m2) * 4.0,
        m2 * 2.0 - m1,
    ]
}

impl BoundaryFourier {
    /// `edges` lists `(s_start, length)` per boundary edge in scalar-space
    /// order; scalar dofs `2e, 2e+1, 2e+2 (mod n)` are the start vertex,
    /// midpoint and end vertex of edge `e`.
    pub(super) fn new(length: f64, edges: &[(f64, f64)], n_bs: usize) -> Self {
        let n_modes = (2 * n_bs).max(32);
        let n_rows = 2 * n_modes + 1;
        let mut forward = DMatrix::<C64>::zeros(n_rows, n_bs);
        let sqrt_len = length.sqrt();
        for (row, k) in (-(n_modes as i64)..=n_modes as i64).enumerate() {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / length;
            for (e, &(s_start, edge_len)) in edges.iter().enumerate() {
                let coeffs = shape_moments(omega * edge_len);
                let factor = C64::from_polar(1.0, -omega * s_start) * (edge_len / sqrt_len);
                let cols = [2 * e, 2 * e + 1, (2 * e + 2) % n_bs];
                for (a, &col) in cols.iter().enumerate() {
                    forward[(row, col)] += factor * coeffs[a];
                }
            }
        }
        let gram_half = gram_from_forward(&forward, length, n_modes, 0.5);
        BoundaryFourier {
            length,
            n_modes,
            forward,
            gram_half,
        }
    }

    pub fn n_coefficients(&self) -> usize {
        2 * self.n_modes + 1
    }

    /// Fourier coefficients of a boundary scalar, indexed by
    /// `k = -n_modes ..= n_modes`.
    pub fn transform(&self, g: &[C64]) -> Vec<C64> {
        assert_eq!(g.len(), self.forward.ncols());
        let gv = DVector::from_column_slice(g);
        let c = &self.forward * gv;
        c.iter().copied().collect()
    }

    /// Sobolev weight `(1 + (2 pi k / L)^2)^order`.
    pub fn mode_weight(&self, k: i64, order: f64) -> f64 {
        let xi = 2.0 * std::f64::consts::PI * k as f64 / self.length;
        (1.0 + xi * xi).powf(order)
    }

    /// Fractional Sobolev norm of order `order` from weighted coefficients.
    pub fn sobolev_norm(&self, g: &[C64], order: f64) -> f64 {
        let coeffs = self.transform(g);
        let mut acc = 0.0;
        for (row, k) in (-(self.n_modes as i64)..=self.n_modes as i64).enumerate() {
            acc += self.mode_weight(k, order) * coeffs[row].norm_sqr();
        }
        acc.sqrt()
    }

    /// Dense symmetric Gram matrix of the order-`order` inner product on
    /// the boundary scalar space.
    pub fn gram(&self, order: f64) -> DMatrix<f64> {
        gram_from_forward(&self.forward, self.length, self.n_modes, order)
    }

    /// Precomputed Gram of order one half, the trace-space inner product.
    pub fn gram_half(&self) -> &DMatrix<f64> {
        &self.gram_half
    }
}

fn gram_from_forward(
    forward: &DMatrix<C64>,
    length: f64,
    n_modes: usize,
    order: f64,
) -> DMatrix<f64> {
    let mut weighted = forward.clone();
    for (row, k) in (-(n_modes as i64)..=n_modes as i64).enumerate() {
        let xi = 2.0 * std::f64::consts::PI * k as f64 / length;
        let w = (1.0 + xi * xi).powf(order);
        for col in 0..weighted.ncols() {
            weighted[(row, col)] *= w;
        }
    }
    let gram_c = forward.adjoint() * weighted;
    // Real by conjugate mode pairing; symmetrize to scrub roundoff.
    let n = gram_c.nrows();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (gram_c[(i, j)].re + gram_c[(j, i)].re);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    gram
}
