//! Resolvent solves for the dynamic slip problem.
//!
//! For a complex parameter `lambda` the discrete weak form reads
//!
//! `lambda (u, phi) + (2Du, D phi) + (beta lambda + alpha) (u_b, phi_b)
//!   - (pi, div phi) = (f, phi) + beta (h, phi_b)`
//!
//! together with the divergence constraint and the zero pressure mean.
//! One sparse complex factorization per `lambda` serves any number of
//! right-hand sides, which the sweep and time-stepping layers rely on.

use faer::sparse::Triplet;

use crate::error::SolveError;
use crate::geometry::isoparametric_jacobian;
use crate::linalg::{cnorm, ComplexLu, RealLu};
use crate::quadrature::{p2_line, p2_shapes};
use crate::spaces::{x0_norm, BoundaryScalar, LeraySolver, OperatorBundle, State};
use crate::C64;

/// Solvability regimes of the resolvent problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `beta Re lambda >= max(1, -4 alpha)`.
    LargeReal,
    /// `alpha > 0`, `Re lambda >= 0`, `lambda != 0`.
    PositiveAlpha,
    /// `alpha in (alpha0, 0]` on a non-axisymmetric domain,
    /// `Re lambda >= 0`, `lambda != 0`.
    NegativeAlpha,
}

/// Outcome of classifying a resolvent parameter.
#[derive(Debug, Clone, Copy)]
pub struct RegimeCheck {
    pub regime: Option<Regime>,
    /// Sector vertex `omega = max(1, -4 alpha) / beta`.
    pub omega: f64,
}

/// Classifies `lambda` against the three solvability regimes. The third
/// regime needs a Korn threshold `alpha0`; when none is supplied the
/// negative-alpha regime is never claimed.
pub fn classify_lambda(
    alpha: f64,
    beta: f64,
    lambda: C64,
    axisymmetric: bool,
    alpha0: Option<f64>,
) -> RegimeCheck {
    let omega = 1.0f64.max(-4.0 * alpha) / beta;
    let nonzero = lambda.norm() > 0.0;
    let regime = if beta * lambda.re >= 1.0f64.max(-4.0 * alpha) {
        Some(Regime::LargeReal)
    } else if alpha > 0.0 && lambda.re >= 0.0 && nonzero {
        Some(Regime::PositiveAlpha)
    } else if alpha <= 0.0 && lambda.re >= 0.0 && nonzero && !axisymmetric {
        match alpha0 {
            Some(a0) if alpha > a0 => Some(Regime::NegativeAlpha),
            _ => None,
        }
    } else {
        None
    };
    RegimeCheck { regime, omega }
}

/// Per-solve diagnostics attached to a [`ResolventSolution`].
#[derive(Debug, Clone, Copy)]
pub struct SolveDiagnostics {
    pub u_l2: f64,
    pub ub_l2: f64,
    pub ub_h_half: f64,
    pub pressure_h1: f64,
    /// Relative residual of the full saddle system.
    pub residual: f64,
    /// 1-norm condition estimate of the factored matrix.
    pub condest: f64,
    /// Whether `lambda` sits in a proven solvability regime.
    pub regime: Option<Regime>,
    /// Set when the parameter is outside every regime or the system is
    /// close to singular; the solve itself still completed.
    pub flagged: bool,
}

/// Discrete solution of the resolvent system at one `lambda`.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub lambda: C64,
    pub u: Vec<C64>,
    pub u_b: BoundaryScalar,
    /// Zero-mean pressure in the P1 space.
    pub pressure: Vec<C64>,
    pub multiplier: C64,
    pub diagnostics: SolveDiagnostics,
}

/// Condition estimate above which a solve is flagged as near-singular.
pub const CONDEST_FLAG: f64 = 1e13;

const RESIDUAL_LIMIT: f64 = 1e-10;

/// Factorized resolvent saddle matrix for one complex `lambda`.
pub struct ResolventOperator<'a> {
    bundle: &'a OperatorBundle,
    pub lambda: C64,
    n_u: usize,
    n_p: usize,
    lu: ComplexLu,
    condest: f64,
    regime: Option<Regime>,
}

impl<'a> ResolventOperator<'a> {
    /// Builds and factors the saddle matrix
    /// `[K + lambda M + (beta lambda + alpha) R, -B^T, 0; -B, 0, w; 0, w^T, 0]`.
    pub fn new(bundle: &'a OperatorBundle, lambda: C64) -> Result<Self, SolveError> {
        Self::with_regime(bundle, lambda, None)
    }

    /// Same as [`ResolventOperator::new`] with a Korn threshold made
    /// available to the regime classification.
    pub fn with_regime(
        bundle: &'a OperatorBundle,
        lambda: C64,
        alpha0: Option<f64>,
    ) -> Result<Self, SolveError> {
        let n_u = bundle.n_velocity_dofs();
        let n_p = bundle.n_pressure;
        let n = n_u + n_p + 1;
        let slip = bundle.beta * lambda + bundle.alpha;

        let nnz = bundle.stiffness.nnz()
            + bundle.mass.nnz()
            + bundle.boundary_coupling.nnz()
            + 2 * bundle.divergence.nnz()
            + 2 * n_p;
        let mut trips: Vec<Triplet<usize, usize, C64>> = Vec::with_capacity(nnz);
        for (r, c, v) in bundle.stiffness.iter() {
            trips.push(Triplet::new(r, c, C64::new(v, 0.0)));
        }
        for (r, c, v) in bundle.mass.iter() {
            trips.push(Triplet::new(r, c, lambda * v));
        }
        for (r, c, v) in bundle.boundary_coupling.iter() {
            trips.push(Triplet::new(r, c, slip * v));
        }
        for (q, u, v) in bundle.divergence.iter() {
            trips.push(Triplet::new(u, n_u + q, C64::new(-v, 0.0)));
            trips.push(Triplet::new(n_u + q, u, C64::new(-v, 0.0)));
        }
        for (q, &w) in bundle.pressure_mean.iter().enumerate() {
            trips.push(Triplet::new(n_u + q, n_u + n_p, C64::new(w, 0.0)));
            trips.push(Triplet::new(n_u + n_p, n_u + q, C64::new(w, 0.0)));
        }
        let lu = ComplexLu::from_triplets(n, &trips)?;
        let condest = lu.condest();
        let regime = classify_lambda(
            bundle.alpha,
            bundle.beta,
            lambda,
            bundle.mesh.spec.is_axisymmetric(),
            alpha0,
        )
        .regime;
        Ok(ResolventOperator {
            bundle,
            lambda,
            n_u,
            n_p,
            lu,
            condest,
            regime,
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.n_u
    }

    pub fn n_pressure(&self) -> usize {
        self.n_p
    }

    pub fn condest(&self) -> f64 {
        self.condest
    }

    pub fn regime(&self) -> Option<Regime> {
        self.regime
    }

    /// Right-hand side of the saddle system for data `(f, h)`:
    /// `[M f + beta T^T M_b h; 0; 0]`.
    pub fn rhs_from_data(&self, f: &[C64], h: &BoundaryScalar) -> Vec<C64> {
        let mut rhs = self.bundle.mass.matvec_c(f);
        let hb = self.bundle.boundary_mass.matvec_c(&h.values);
        let scattered = self.bundle.trace_scatter(&hb);
        for (r, s) in rhs.iter_mut().zip(&scattered) {
            *r += self.bundle.beta * s;
        }
        rhs.resize(self.n_u + self.n_p + 1, C64::new(0.0, 0.0));
        rhs
    }

    /// Forward solve on the full padded system.
    pub fn solve_padded(&self, rhs: &[C64]) -> Vec<C64> {
        self.lu.solve(rhs)
    }

    /// Adjoint solve on the full padded system.
    pub fn solve_padded_adjoint(&self, rhs: &[C64]) -> Vec<C64> {
        self.lu.solve_adjoint(rhs)
    }

    /// Residual of the full saddle system relative to data and solution size.
    fn system_residual(&self, x: &[C64], rhs: &[C64]) -> f64 {
        let b = self.bundle;
        let (u, p) = (&x[..self.n_u], &x[self.n_u..self.n_u + self.n_p]);
        let mult = x[self.n_u + self.n_p];
        let slip = b.beta * self.lambda + b.alpha;

        let ku = b.stiffness.matvec_c(u);
        let mu = b.mass.matvec_c(u);
        let ru = b.boundary_coupling.matvec_c(u);
        let btp = b.divergence.matvec_transpose_c(p);
        let bu = b.divergence.matvec_c(u);

        let mut r2 = 0.0f64;
        for i in 0..self.n_u {
            let ri = ku[i] + self.lambda * mu[i] + slip * ru[i] - btp[i] - rhs[i];
            r2 += ri.norm_sqr();
        }
        for q in 0..self.n_p {
            let ri = -bu[q] + mult * b.pressure_mean[q] - rhs[self.n_u + q];
            r2 += ri.norm_sqr();
        }
        let mean: C64 = b
            .pressure_mean
            .iter()
            .zip(p)
            .map(|(&w, pi)| pi * w)
            .sum::<C64>()
            - rhs[self.n_u + self.n_p];
        r2 += mean.norm_sqr();

        let scale = cnorm(rhs) + self.lu.matrix_norm1() * cnorm(x);
        r2.sqrt() / scale.max(1e-300)
    }

    /// Solves the resolvent system for data `(f, h)`.
    pub fn solve(&self, f: &[C64], h: &BoundaryScalar) -> Result<ResolventSolution, SolveError> {
        if f.len() != self.n_u {
            return Err(SolveError::DimensionMismatch {
                what: "interior forcing",
                expected: self.n_u,
                got: f.len(),
            });
        }
        if h.values.len() != self.bundle.boundary_mass.nrows {
            return Err(SolveError::DimensionMismatch {
                what: "boundary forcing",
                expected: self.bundle.boundary_mass.nrows,
                got: h.values.len(),
            });
        }
        let rhs = self.rhs_from_data(f, h);
        let x = self.lu.solve(&rhs);
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SolveError::NonFinite("resolvent solution"));
        }
        let residual = self.system_residual(&x, &rhs);
        if residual > RESIDUAL_LIMIT {
            return Err(SolveError::NearSingular {
                re: self.lambda.re,
                im: self.lambda.im,
                condest: self.condest,
                residual,
            });
        }

        let u = x[..self.n_u].to_vec();
        let pressure = x[self.n_u..self.n_u + self.n_p].to_vec();
        let multiplier = x[self.n_u + self.n_p];
        let u_b = self.bundle.tangential_trace(&u);

        let b = self.bundle;
        let diagnostics = SolveDiagnostics {
            u_l2: b.mass.hermitian_form(&u).max(0.0).sqrt(),
            ub_l2: b.boundary_mass.hermitian_form(&u_b.values).max(0.0).sqrt(),
            ub_h_half: b.fourier.sobolev_norm(&u_b.values, 0.5),
            pressure_h1: (b.pressure_mass.hermitian_form(&pressure)
                + b.pressure_stiffness.hermitian_form(&pressure))
            .max(0.0)
            .sqrt(),
            residual,
            condest: self.condest,
            regime: self.regime,
            flagged: self.regime.is_none() || self.condest >= CONDEST_FLAG,
        };
        Ok(ResolventSolution {
            lambda: self.lambda,
            u,
            u_b,
            pressure,
            multiplier,
            diagnostics,
        })
    }
}

/// Value of the sesquilinear resolvent form on the diagonal:
/// `B(U, U) = lambda ||u||^2 + 2 ||Du||^2 + (beta lambda + alpha) ||u_b||^2`.
pub fn form_b(bundle: &OperatorBundle, lambda: C64, state: &State) -> C64 {
    let m = bundle.mass.hermitian_form(&state.velocity);
    let k = bundle.stiffness.hermitian_form(&state.velocity);
    let r = bundle.boundary_mass.hermitian_form(&state.boundary.values);
    lambda * m + k + (bundle.beta * lambda + bundle.alpha) * r
}

/// L2 projection onto the boundary scalar space of the elementwise
/// tangential stress `(2 Du . nu)_tau` of a discrete velocity.
pub fn boundary_flux_projection(
    bundle: &OperatorBundle,
    u: &[C64],
) -> Result<Vec<C64>, SolveError> {
    let mesh = &bundle.mesh;
    let vs = &bundle.velocity;
    let n_bs = bundle.boundary_mass.nrows;
    let nodal = vs.nodal_values(u);
    let reference = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    let mut dual = vec![C64::new(0.0, 0.0); n_bs];
    for (e, edge) in mesh.boundary_edges.iter().enumerate() {
        let t = edge.triangle;
        let verts = &mesh.triangles[t];
        let local = |g: usize| verts.iter().position(|&v| v == g).expect("edge vertex");
        let (la, lb) = (local(edge.vertices[0]), local(edge.vertices[1]));
        let coords = mesh.element_geometry(t);
        let nodes = &vs.tri_nodes[t];
        let len = edge.s_end - edge.s_start;
        let cols = [2 * e, 2 * e + 1, (2 * e + 2) % n_bs];

        for q in &edge.quad {
            let xi = reference[la][0] + q.xi * (reference[lb][0] - reference[la][0]);
            let eta = reference[la][1] + q.xi * (reference[lb][1] - reference[la][1]);
            let (_, grads) = p2_shapes(xi, eta);
            let (jac, det) = isoparametric_jacobian(&coords, &grads);
            let inv_det = 1.0 / det;
            // grad u as a 2x2 complex matrix, [component][direction].
            let mut g = [[C64::new(0.0, 0.0); 2]; 2];
            for (a, &node) in nodes.iter().enumerate() {
                let px = (jac[1][1] * grads[a][0] - jac[1][0] * grads[a][1]) * inv_det;
                let py = (-jac[0][1] * grads[a][0] + jac[0][0] * grads[a][1]) * inv_det;
                for c in 0..2 {
                    g[c][0] += nodal[node][c] * px;
                    g[c][1] += nodal[node][c] * py;
                }
            }
            // (2 Du . nu)_tau = tau . (grad u + grad u^T) . nu.
            let (nu, tau) = (q.normal, q.tangent);
            let mut flux = C64::new(0.0, 0.0);
            for c in 0..2 {
                for d in 0..2 {
                    flux += (g[c][d] + g[d][c]) * (tau[c] * nu[d]);
                }
            }
            let (shapes, _) = p2_line(q.xi);
            for (a, &col) in cols.iter().enumerate() {
                dual[col] += flux * (len * q.weight * shapes[a]);
            }
        }
    }

    let mb = RealLu::from_csr(&bundle.boundary_mass)?;
    Ok(mb.solve_c(&dual))
}

fn stokes_projection_of_flux(
    bundle: &OperatorBundle,
    leray: &LeraySolver,
    u: &[C64],
    flux_dual: &[C64],
) -> Result<Vec<C64>, SolveError> {
    let ku = bundle.stiffness.matvec_c(u);
    let scattered = bundle.trace_scatter(flux_dual);
    let momentum: Vec<C64> = ku
        .iter()
        .zip(&scattered)
        .map(|(k, s)| s - k)
        .collect();
    Ok(leray.solve_dual(&momentum)?.velocity)
}

/// Discrete operator application `A u = (P div(2Du), -(1/beta)[(2Du.nu)_tau
/// + alpha u_b])` with the elementwise stress projected onto the boundary
/// scalar space. The result is a general (untied) state.
pub fn apply_a(
    bundle: &OperatorBundle,
    leray: &LeraySolver,
    u: &[C64],
) -> Result<State, SolveError> {
    let xi = boundary_flux_projection(bundle, u)?;
    let dual = bundle.boundary_mass.matvec_c(&xi);
    let interior = stokes_projection_of_flux(bundle, leray, u, &dual)?;
    let trace = bundle.tangential_trace(u);
    let boundary: Vec<C64> = xi
        .iter()
        .zip(&trace.values)
        .map(|(x, t)| -(x + bundle.alpha * t) / bundle.beta)
        .collect();
    Ok(State::general(interior, BoundaryScalar { values: boundary }))
}

/// Operator application for a resolvent solution, using the variational
/// stress `xi = beta h - (beta lambda + alpha) u_b` implied by the boundary
/// equation instead of elementwise gradients. For discretely solenoidal
/// data this realizes `A U = lambda U - F` exactly.
pub fn apply_a_weak(
    bundle: &OperatorBundle,
    leray: &LeraySolver,
    sol: &ResolventSolution,
    h: &BoundaryScalar,
) -> Result<State, SolveError> {
    let slip = bundle.beta * sol.lambda + bundle.alpha;
    let xi: Vec<C64> = h
        .values
        .iter()
        .zip(&sol.u_b.values)
        .map(|(hv, ub)| bundle.beta * hv - slip * ub)
        .collect();
    let dual = bundle.boundary_mass.matvec_c(&xi);
    let interior = stokes_projection_of_flux(bundle, leray, &sol.u, &dual)?;
    let boundary: Vec<C64> = xi
        .iter()
        .zip(&sol.u_b.values)
        .map(|(x, t)| -(x + bundle.alpha * t) / bundle.beta)
        .collect();
    Ok(State::general(interior, BoundaryScalar { values: boundary }))
}

/// A priori quotient `|lambda| (||u|| + beta ||u_b||) / (||f|| + beta ||h||)`
/// with boundary norms in `L2(bdry)`.
pub fn apriori_ratio(
    bundle: &OperatorBundle,
    sol: &ResolventSolution,
    f: &[C64],
    h: &BoundaryScalar,
) -> Result<f64, SolveError> {
    let f_l2 = bundle.mass.hermitian_form(f).max(0.0).sqrt();
    let h_l2 = bundle.boundary_mass.hermitian_form(&h.values).max(0.0).sqrt();
    let denom = f_l2 + bundle.beta * h_l2;
    if denom <= 0.0 {
        return Err(SolveError::ZeroData("apriori ratio of zero data"));
    }
    let num = sol.lambda.norm() * (sol.diagnostics.u_l2 + bundle.beta * sol.diagnostics.ub_l2);
    Ok(num / denom)
}

/// Elliptic regularity quotient
/// `(||u_b||_{H^{3/2}} + ||u|| + ||P div(2Du)|| + ||pi||_{H^1}) / ||F||_{X0}`,
/// the `H^2` term replaced by the computable operator surrogate.
pub fn elliptic_regularity_ratio(
    bundle: &OperatorBundle,
    leray: &LeraySolver,
    sol: &ResolventSolution,
    f: &[C64],
    h: &BoundaryScalar,
) -> Result<f64, SolveError> {
    let denom = x0_norm(bundle, f, h);
    if denom <= 0.0 {
        return Err(SolveError::ZeroData("elliptic ratio of zero data"));
    }
    let au = apply_a(bundle, leray, &sol.u)?;
    let au_l2 = bundle.mass.hermitian_form(&au.velocity).max(0.0).sqrt();
    let ub_h32 = bundle.fourier.sobolev_norm(&sol.u_b.values, 1.5);
    let num = ub_h32 + sol.diagnostics.u_l2 + au_l2 + sol.diagnostics.pressure_h1;
    Ok(num / denom)
}
