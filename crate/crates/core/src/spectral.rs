//! Sector sweeps, resolvent-norm estimation and Korn thresholds.
//!
//! Operator norms are measured in a Hilbertized version of the data space:
//! `||(f, g)||^2 = ||f||_{L2}^2 + ||g||_{H^{1/2}}^2`, which is equivalent to
//! the sum norm within a factor `sqrt(2)` and admits explicit adjoints for
//! power iteration. The dense oracle uses the same geometry, so the two
//! estimates are directly comparable.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{SolveError, SpectralError};
use crate::linalg::RealLu;
use crate::resolvent::{ResolventOperator, CONDEST_FLAG};
use crate::spaces::{BoundaryScalar, OperatorBundle};
use crate::C64;

/// Inner-product machinery of the Hilbertized data space.
pub struct X0Geometry {
    n_u: usize,
    n_b: usize,
    mass_lu: RealLu,
    s_half: DMatrix<f64>,
    s_half_chol: Cholesky<f64, Dyn>,
}

impl X0Geometry {
    pub fn new(bundle: &OperatorBundle) -> Result<Self, SolveError> {
        let s_half = bundle.fourier.gram_half().clone();
        let s_half_chol = Cholesky::new(s_half.clone())
            .ok_or(SolveError::Factorization("H^{1/2} Gram not SPD".into()))?;
        Ok(X0Geometry {
            n_u: bundle.n_velocity_dofs(),
            n_b: bundle.boundary_mass.nrows,
            mass_lu: RealLu::from_csr(&bundle.mass)?,
            s_half,
            s_half_chol,
        })
    }

    pub fn len(&self) -> usize {
        self.n_u + self.n_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn split<'z>(&self, z: &'z [C64]) -> (&'z [C64], &'z [C64]) {
        (&z[..self.n_u], &z[self.n_u..])
    }

    fn s_half_matvec(&self, g: &[C64]) -> Vec<C64> {
        let n = self.n_b;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, gj) in g.iter().enumerate() {
                acc += gj * self.s_half[(i, j)];
            }
            *o = acc;
        }
        out
    }

    fn s_half_solve(&self, b: &[C64]) -> Vec<C64> {
        let re = DVector::from_iterator(self.n_b, b.iter().map(|v| v.re));
        let im = DVector::from_iterator(self.n_b, b.iter().map(|v| v.im));
        let xr = self.s_half_chol.solve(&re);
        let xi = self.s_half_chol.solve(&im);
        (0..self.n_b).map(|i| C64::new(xr[i], xi[i])).collect()
    }

    /// Applies the block Gram matrix `X = diag(M, S_half)`.
    fn weight(&self, bundle: &OperatorBundle, z: &[C64]) -> Vec<C64> {
        let (f, g) = self.split(z);
        let mut out = bundle.mass.matvec_c(f);
        out.extend(self.s_half_matvec(g));
        out
    }

    /// Applies `X^{-1}`.
    fn unweight(&self, z: &[C64]) -> Vec<C64> {
        let (f, g) = self.split(z);
        let mut out = self.mass_lu.solve_c(f);
        out.extend(self.s_half_solve(g));
        out
    }

    /// Hilbertized data-space inner product `<z, w>_X`.
    fn inner(&self, bundle: &OperatorBundle, z: &[C64], w: &[C64]) -> C64 {
        let xz = self.weight(bundle, z);
        w.iter().zip(&xz).map(|(wi, xi)| wi.conj() * xi).sum()
    }

    pub fn norm(&self, bundle: &OperatorBundle, z: &[C64]) -> f64 {
        self.inner(bundle, z, z).re.max(0.0).sqrt()
    }
}

/// Applies the solution operator `T: (f, g) -> (u, u_b)` through one
/// factorized resolvent.
fn apply_t(op: &ResolventOperator, bundle: &OperatorBundle, geo: &X0Geometry, z: &[C64]) -> Vec<C64> {
    let (f, g) = geo.split(z);
    let rhs = op.rhs_from_data(
        f,
        &BoundaryScalar {
            values: g.to_vec(),
        },
    );
    let x = op.solve_padded(&rhs);
    let u = &x[..op.n_velocity()];
    let trace = bundle.tangential_trace(u);
    let mut out = u.to_vec();
    out.extend(trace.values);
    out
}

/// Applies the X-adjoint `T^*`.
fn apply_t_adjoint(
    op: &ResolventOperator,
    bundle: &OperatorBundle,
    geo: &X0Geometry,
    w: &[C64],
) -> Vec<C64> {
    let xw = geo.weight(bundle, w);
    let (wu, wb) = geo.split(&xw);
    // P^H lifts the state-space dual into the padded saddle space.
    let mut rhs = wu.to_vec();
    let scattered = bundle.trace_scatter(wb);
    for (r, s) in rhs.iter_mut().zip(&scattered) {
        *r += s;
    }
    rhs.resize(op.n_velocity() + op.n_pressure() + 1, C64::new(0.0, 0.0));
    let y = op.solve_padded_adjoint(&rhs);
    let yu = &y[..op.n_velocity()];
    // R^H maps back into data space: [M y_u ; beta M_b T y_u].
    let mut out = bundle.mass.matvec_c(yu);
    let trace = bundle.tangential_trace(yu);
    let tb = bundle.boundary_mass.matvec_c(&trace.values);
    out.extend(tb.iter().map(|v| v * bundle.beta));
    geo.unweight(&out)
}

/// Lower-bound estimate of the data-to-solution operator norm at the
/// factorized `lambda`, by power iteration on `T^* T` refined over
/// `n_probes` deterministic random starts. Nondecreasing in `n_probes`.
pub fn resolvent_norm_estimate(
    op: &ResolventOperator,
    bundle: &OperatorBundle,
    geo: &X0Geometry,
    n_probes: usize,
) -> Result<f64, SpectralError> {
    let n = geo.len();
    let mut best = 0.0f64;
    for probe in 0..n_probes.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + probe as u64);
        let mut z: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut nz = geo.norm(bundle, &z);
        if nz <= 0.0 {
            continue;
        }
        for v in z.iter_mut() {
            *v /= nz;
        }
        let mut sigma2 = 0.0f64;
        for _ in 0..60 {
            let tz = apply_t(op, bundle, geo, &z);
            let mut gz = apply_t_adjoint(op, bundle, geo, &tz);
            // Rayleigh quotient of T^*T at the current unit vector.
            let quot = geo.inner(bundle, &gz, &z).re.max(0.0);
            nz = geo.norm(bundle, &gz);
            if !nz.is_finite() || nz <= 0.0 {
                break;
            }
            for v in gz.iter_mut() {
                *v /= nz;
            }
            z = gz;
            if (quot - sigma2).abs() <= 1e-9 * quot.max(1e-300) {
                sigma2 = quot;
                break;
            }
            sigma2 = quot;
        }
        if !sigma2.is_finite() {
            return Err(SpectralError::NoConvergence {
                iterations: 60,
                residual: f64::NAN,
            });
        }
        best = best.max(sigma2.sqrt());
    }
    Ok(best)
}

/// Unknown-count cap for dense oracles.
pub const DENSE_CAP: usize = 2600;

/// Exact operator norm of the data-to-solution map in the Hilbertized
/// geometry via a dense SVD; intended as a coarse-mesh oracle.
pub fn dense_resolvent_norm(
    op: &ResolventOperator,
    bundle: &OperatorBundle,
    geo: &X0Geometry,
) -> Result<f64, SpectralError> {
    let n = geo.len();
    if n > DENSE_CAP {
        return Err(SpectralError::TooLargeForDense {
            size: n,
            cap: DENSE_CAP,
        });
    }
    let mut t = DMatrix::<C64>::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        let col = apply_t(op, bundle, geo, &e);
        for i in 0..n {
            t[(i, j)] = col[i];
        }
        e[j] = C64::new(0.0, 0.0);
    }

    // Build X = diag(M, S_half) densely and its Cholesky factor L.
    let mut x = DMatrix::<f64>::zeros(n, n);
    for (r, c, v) in bundle.mass.iter() {
        x[(r, c)] += v;
    }
    let nu = bundle.n_velocity_dofs();
    for i in 0..geo.n_b {
        for j in 0..geo.n_b {
            x[(nu + i, nu + j)] = geo.s_half[(i, j)];
        }
    }
    let chol = Cholesky::new(x).ok_or(SolveError::Factorization("X Gram not SPD".into()))?;
    let l = chol.l();
    let lc = l.map(|v| C64::new(v, 0.0));

    // sigma_max(L^T T L^{-T}) equals the X-operator norm of T.
    let tt = t.transpose();
    let solved = lc
        .clone()
        .solve_lower_triangular(&tt)
        .ok_or(SolveError::Factorization("triangular solve failed".into()))?;
    let b = lc.transpose() * solved.transpose();
    let svd = b.svd(false, false);
    Ok(svd.singular_values.iter().cloned().fold(0.0, f64::max))
}

/// One sweep record; `ratio = |lambda - omega| * estimate`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub re: f64,
    pub im: f64,
    pub distance: f64,
    pub estimate: f64,
    pub ratio: f64,
    pub flagged: bool,
    pub note: Option<String>,
}

/// Sector sweep summary.
#[derive(Debug, Clone, Serialize)]
pub struct SectorReport {
    pub theta: f64,
    pub omega: f64,
    pub c_sector: f64,
    pub records: Vec<SweepRecord>,
}

/// Checks membership in the open sector `S_{theta, omega}`.
pub fn in_sector(lambda: C64, theta: f64, omega: f64) -> bool {
    let shifted = lambda - C64::new(omega, 0.0);
    shifted.norm() > 0.0 && shifted.arg().abs() < theta
}

/// Sweeps the resolvent over `grid`, estimating `||(lambda - A)^{-1}||`
/// at every point. Grid points must lie in the sector; solver failures at
/// individual points are recorded and skipped in the envelope.
pub fn sector_sweep(
    bundle: &OperatorBundle,
    theta: f64,
    omega: f64,
    grid: &[C64],
    n_probes: usize,
) -> Result<SectorReport, SpectralError> {
    for &lambda in grid {
        if !in_sector(lambda, theta, omega) {
            return Err(SpectralError::OutsideSector {
                re: lambda.re,
                im: lambda.im,
            });
        }
    }
    let geo = X0Geometry::new(bundle).map_err(SpectralError::Solve)?;
    let records: Vec<SweepRecord> = grid
        .par_iter()
        .map(|&lambda| {
            let distance = (lambda - C64::new(omega, 0.0)).norm();
            match ResolventOperator::new(bundle, lambda) {
                Ok(op) => match resolvent_norm_estimate(&op, bundle, &geo, n_probes) {
                    Ok(estimate) => SweepRecord {
                        re: lambda.re,
                        im: lambda.im,
                        distance,
                        estimate,
                        ratio: distance * estimate,
                        flagged: op.condest() >= CONDEST_FLAG,
                        note: None,
                    },
                    Err(e) => SweepRecord {
                        re: lambda.re,
                        im: lambda.im,
                        distance,
                        estimate: f64::NAN,
                        ratio: f64::NAN,
                        flagged: true,
                        note: Some(e.to_string()),
                    },
                },
                Err(e) => SweepRecord {
                    re: lambda.re,
                    im: lambda.im,
                    distance,
                    estimate: f64::NAN,
                    ratio: f64::NAN,
                    flagged: true,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();
    let c_sector = records
        .iter()
        .filter(|r| r.ratio.is_finite())
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    Ok(SectorReport {
        theta,
        omega,
        c_sector,
        records,
    })
}

/// Standard log-spaced sweep grid: rays `arg(lambda - omega)` in
/// `{0, +-pi/4, +-pi/2}` and moduli spanning `[1e-1, 1e4]`.
pub fn standard_grid(omega: f64, per_ray: usize) -> Vec<C64> {
    let rays = [0.0, PI_4, -PI_4, PI_2_SAFE, -PI_2_SAFE];
    let mut grid = Vec::with_capacity(rays.len() * per_ray);
    for &angle in &rays {
        for k in 0..per_ray {
            let t = k as f64 / (per_ray - 1).max(1) as f64;
            let modulus = 10f64.powf(-1.0 + 5.0 * t);
            grid.push(C64::new(omega, 0.0) + C64::from_polar(modulus, angle));
        }
    }
    grid
}

const PI_4: f64 = std::f64::consts::FRAC_PI_4;
// Slightly inside the half-plane so the vertical rays remain classifiable.
const PI_2_SAFE: f64 = std::f64::consts::FRAC_PI_2 - 1e-9;

/// Korn-type quotients and the slip threshold `alpha0 = -2 q2`.
#[derive(Debug, Clone, Serialize)]
pub struct KornReport {
    pub domain: String,
    pub h: f64,
    pub n_dofs: usize,
    /// `min u^T K u / u^T G u`: energy vs full H^1 Gram.
    pub q1: f64,
    /// `min u^T K u / (T u)^T M_b (T u)`: energy vs boundary trace mass.
    pub q2: f64,
    pub alpha0: f64,
    pub iterations: usize,
}

fn rayleigh(k_num: f64, denom: f64) -> f64 {
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        (k_num / denom).max(0.0)
    }
}

/// Smallest generalized eigenvalue of the pencil `(K, B)` by inverse
/// iteration on `(K + mu B)^{-1} B`. Directions in the kernel of `B`
/// (infinite pencil eigenvalues) are annihilated automatically, which
/// realizes the kernel deflation the quotient needs.
fn smallest_pencil_eigenvalue(
    stiffness: &crate::linalg::Csr,
    rhs_form: &crate::linalg::Csr,
    max_iter: usize,
) -> Result<(f64, usize), SpectralError> {
    let n = stiffness.nrows;
    let shift = 1e-8 * stiffness.norm1() / rhs_form.norm1().max(1e-300);
    let shifted = {
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in stiffness.iter() {
            trips.push((r, c, v));
        }
        for (r, c, v) in rhs_form.iter() {
            trips.push((r, c, shift * v));
        }
        crate::linalg::Csr::from_triplets(n, n, &trips)
    };
    let lu = RealLu::from_csr(&shifted).map_err(SpectralError::Solve)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut q_prev = f64::INFINITY;
    for it in 0..max_iter {
        let bx = rhs_form.matvec(&x);
        let y = lu.solve(&bx);
        let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale <= 0.0 || !scale.is_finite() {
            return Err(SpectralError::NoConvergence {
                iterations: it,
                residual: scale,
            });
        }
        x = y.into_iter().map(|v| v / scale).collect();
        let num = stiffness.quadratic(&x);
        let den = rhs_form.quadratic(&x);
        let q = rayleigh(num, den);
        if (q - q_prev).abs() <= 1e-10 * q.max(1e-30) {
            return Ok((q, it + 1));
        }
        q_prev = q;
    }
    Ok((q_prev, max_iter))
}

/// Computes the Korn quotients by shifted inverse iteration.
pub fn korn_constants(bundle: &OperatorBundle) -> Result<KornReport, SpectralError> {
    let (q1, it1) = smallest_pencil_eigenvalue(&bundle.stiffness, &bundle.h1_gram, 400)?;
    let (q2, it2) =
        smallest_pencil_eigenvalue(&bundle.stiffness, &bundle.boundary_coupling, 400)?;
    Ok(KornReport {
        domain: bundle.mesh.spec.id(),
        h: bundle.mesh.h,
        n_dofs: bundle.n_velocity_dofs(),
        q1,
        q2,
        alpha0: -2.0 * q2,
        iterations: it1.max(it2),
    })
}

/// Dense oracle for the Korn quotients; `q2` uses the boundary Schur
/// complement of the stiffness form against the boundary mass.
pub fn dense_korn(bundle: &OperatorBundle) -> Result<(f64, f64), SpectralError> {
    let n = bundle.n_velocity_dofs();
    if n > DENSE_CAP {
        return Err(SpectralError::TooLargeForDense {
            size: n,
            cap: DENSE_CAP,
        });
    }
    let k = bundle.stiffness.to_dense();
    let g = bundle.h1_gram.to_dense();
    let gch = Cholesky::new(g).ok_or(SolveError::Factorization("H1 Gram not SPD".into()))?;
    let l = gch.l();
    let mut w = l.clone().solve_lower_triangular(&k).unwrap();
    w = l.clone().solve_lower_triangular(&w.transpose()).unwrap();
    let q1 = w
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);

    // Schur complement of K onto the boundary trace dofs.
    let nb = bundle.trace_dofs.len();
    let boundary: std::collections::BTreeSet<usize> = bundle.trace_dofs.iter().copied().collect();
    let interior: Vec<usize> = (0..n).filter(|d| !boundary.contains(d)).collect();
    let pos_of = |d: usize| bundle.trace_dofs.iter().position(|&t| t == d).unwrap();
    let ni = interior.len();
    let mut kii = DMatrix::<f64>::zeros(ni, ni);
    let mut kib = DMatrix::<f64>::zeros(ni, nb);
    let mut kbb = DMatrix::<f64>::zeros(nb, nb);
    let int_pos: std::collections::BTreeMap<usize, usize> = interior
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, i))
        .collect();
    // K is exactly symmetric; the (boundary, interior) block is kib^T and
    // needs no separate accumulation.
    for (r, c, v) in bundle.stiffness.iter() {
        match (int_pos.get(&r), int_pos.get(&c)) {
            (Some(&i), Some(&j)) => kii[(i, j)] += v,
            (Some(&i), None) => kib[(i, pos_of(c))] += v,
            (None, Some(_)) => {}
            (None, None) => kbb[(pos_of(r), pos_of(c))] += v,
        }
    }
    let kii_ch =
        Cholesky::new(kii).ok_or(SolveError::Factorization("interior stiffness not SPD".into()))?;
    let solved = kii_ch.solve(&kib);
    let schur = kbb - kib.transpose() * solved;

    let mut mb = DMatrix::<f64>::zeros(nb, nb);
    for (r, c, v) in bundle.boundary_mass.iter() {
        mb[(r, c)] += v;
    }
    let mch = Cholesky::new(mb).ok_or(SolveError::Factorization("boundary mass not SPD".into()))?;
    let lb = mch.l();
    let mut wb = lb.clone().solve_lower_triangular(&schur).unwrap();
    wb = lb.clone().solve_lower_triangular(&wb.transpose()).unwrap();
    let q2 = wb
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    Ok((q1, q2))
}
