//! Discrete Leray projection onto solenoidal velocity fields.

use faer::sparse::Triplet;

use super::OperatorBundle;
use crate::error::SolveError;
use crate::linalg::{cnorm, RealLu};
use crate::C64;

/// Factorized saddle system
/// `[M, -B^T, 0; -B, 0, w; 0, w^T, 0]`
/// used for the Leray projection and for recovering strong accelerations.
/// The multiplier row pins the pressure mean to zero.
pub struct LeraySolver {
    n_u: usize,
    n_p: usize,
    lu: RealLu,
}

/// Solution of one saddle solve: solenoidal velocity, zero-mean pressure
/// and the mean multiplier.
pub struct SaddleSolution {
    pub velocity: Vec<C64>,
    pub pressure: Vec<C64>,
    pub multiplier: C64,
}

impl LeraySolver {
    pub fn new(bundle: &OperatorBundle) -> Result<Self, SolveError> {
        let n_u = bundle.velocity.n_dofs;
        let n_p = bundle.n_pressure;
        let n = n_u + n_p + 1;
        let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
        for (r, c, v) in bundle.mass.iter() {
            trips.push(Triplet::new(r, c, v));
        }
        for (q, u, v) in bundle.divergence.iter() {
            trips.push(Triplet::new(u, n_u + q, -v));
            trips.push(Triplet::new(n_u + q, u, -v));
        }
        for (q, &w) in bundle.pressure_mean.iter().enumerate() {
            trips.push(Triplet::new(n_u + q, n_u + n_p, w));
            trips.push(Triplet::new(n_u + n_p, n_u + q, w));
        }
        let lu = RealLu::from_triplets(n, &trips)?;
        Ok(LeraySolver { n_u, n_p, lu })
    }

    /// Solves the saddle system with a given momentum dual vector.
    pub fn solve_dual(&self, momentum: &[C64]) -> Result<SaddleSolution, SolveError> {
        if momentum.len() != self.n_u {
            return Err(SolveError::DimensionMismatch {
                what: "momentum dual vector",
                expected: self.n_u,
                got: momentum.len(),
            });
        }
        let mut rhs = vec![C64::new(0.0, 0.0); self.n_u + self.n_p + 1];
        rhs[..self.n_u].copy_from_slice(momentum);
        let sol = self.lu.solve_c(&rhs);
        if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SolveError::NonFinite("leray saddle solution"));
        }
        Ok(SaddleSolution {
            velocity: sol[..self.n_u].to_vec(),
            pressure: sol[self.n_u..self.n_u + self.n_p].to_vec(),
            multiplier: sol[self.n_u + self.n_p],
        })
    }

    /// Leray projection of a velocity coefficient vector: the closest
    /// discretely solenoidal field in the L2 sense.
    ///
    /// The bordered system enforces `B u = lambda w`, where the slack
    /// `lambda` absorbs the isoparametric flux defect of the curved
    /// boundary; the genuine constraint residual is `B u - lambda w`.
    pub fn project(&self, bundle: &OperatorBundle, f: &[C64]) -> Result<Vec<C64>, SolveError> {
        let momentum = bundle.mass.matvec_c(f);
        let sol = self.solve_dual(&momentum)?;
        let div = bundle.divergence.matvec_c(&sol.velocity);
        let slack: Vec<C64> = div
            .iter()
            .zip(&bundle.pressure_mean)
            .map(|(d, &w)| d - sol.multiplier * w)
            .collect();
        let scale = cnorm(f).max(1e-300);
        let rel = cnorm(&slack) / scale;
        if rel > 1e-9 {
            return Err(SolveError::ResidualCheck {
                residual: rel,
                limit: 1e-9,
            });
        }
        Ok(sol.velocity)
    }
}
