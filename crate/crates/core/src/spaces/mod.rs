//! Function spaces, degrees of freedom and operator assembly.
//!
//! Velocities live in an isoparametric P2 space with the impermeability
//! constraint `u . n = 0` built into the degrees of freedom: interior nodes
//! carry two Cartesian components, boundary nodes carry a single tangential
//! coefficient in the exact boundary frame. Pressures are P1 with the zero
//! mean enforced by a multiplier. Boundary traces are piecewise quadratic
//! and periodic in arclength.

mod assembly;
mod fourier;
mod leray;
mod norms;

pub use fourier::BoundaryFourier;
pub use leray::LeraySolver;
pub use norms::{h_norm, x0_norm, z_norm};

use crate::error::AssemblyError;
use crate::geometry::Mesh;
use crate::linalg::Csr;
use crate::C64;

/// Degrees of freedom attached to one P2 node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeDofs {
    Interior { x: usize, y: usize },
    Boundary { tangential: usize },
}

/// Boundary node in counterclockwise arclength order with its exact frame.
#[derive(Debug, Clone)]
pub struct BoundaryNode {
    pub node: usize,
    pub s: f64,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

/// Constrained P2 velocity space.
#[derive(Debug, Clone)]
pub struct VelocitySpace {
    /// Coordinates of all P2 nodes (vertices, then edge nodes).
    pub node_coords: Vec<[f64; 2]>,
    /// Global P2 node ids per triangle, in reference order.
    pub tri_nodes: Vec<[usize; 6]>,
    pub node_dofs: Vec<NodeDofs>,
    /// Boundary nodes in scalar-space order: vertex and midpoint of each
    /// boundary edge, counterclockwise from arclength zero.
    pub boundary_nodes: Vec<BoundaryNode>,
    pub n_dofs: usize,
}

impl VelocitySpace {
    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_boundary_nodes(&self) -> usize {
        self.boundary_nodes.len()
    }

    /// Interpolates a smooth tangential field given in Cartesian components.
    /// Boundary nodes project onto the stored tangent direction.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<C64> {
        let mut u = vec![C64::new(0.0, 0.0); self.n_dofs];
        let mut frames: Vec<Option<[f64; 2]>> = vec![None; self.n_nodes()];
        for b in &self.boundary_nodes {
            frames[b.node] = Some(b.tangent);
        }
        for (node, &dofs) in self.node_dofs.iter().enumerate() {
            let value = f(self.node_coords[node]);
            match dofs {
                NodeDofs::Interior { x, y } => {
                    u[x] = C64::new(value[0], 0.0);
                    u[y] = C64::new(value[1], 0.0);
                }
                NodeDofs::Boundary { tangential } => {
                    let tau = frames[node].expect("boundary node without frame");
                    u[tangential] = C64::new(value[0] * tau[0] + value[1] * tau[1], 0.0);
                }
            }
        }
        u
    }

    /// Expands constrained coefficients to Cartesian nodal values.
    pub fn nodal_values(&self, u: &[C64]) -> Vec<[C64; 2]> {
        assert_eq!(u.len(), self.n_dofs);
        let mut frames: Vec<Option<[f64; 2]>> = vec![None; self.n_nodes()];
        for b in &self.boundary_nodes {
            frames[b.node] = Some(b.tangent);
        }
        self.node_dofs
            .iter()
            .enumerate()
            .map(|(node, &dofs)| match dofs {
                NodeDofs::Interior { x, y } => [u[x], u[y]],
                NodeDofs::Boundary { tangential } => {
                    let tau = frames[node].expect("boundary node without frame");
                    [u[tangential] * tau[0], u[tangential] * tau[1]]
                }
            })
            .collect()
    }
}

/// Tangential boundary scalar in the periodic quadratic space; the
/// coefficient order matches [`VelocitySpace::boundary_nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScalar {
    pub values: Vec<C64>,
}

impl BoundaryScalar {
    pub fn zeros(n: usize) -> Self {
        BoundaryScalar {
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_real(values: &[f64]) -> Self {
        BoundaryScalar {
            values: values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Velocity state with its boundary trace channel. `tied` marks states whose
/// boundary component is exactly the tangential trace of the velocity.
#[derive(Debug, Clone)]
pub struct State {
    pub velocity: Vec<C64>,
    pub boundary: BoundaryScalar,
    pub tied: bool,
}

impl State {
    /// State with the boundary channel tied to the velocity trace.
    pub fn tied(bundle: &OperatorBundle, velocity: Vec<C64>) -> Self {
        let boundary = bundle.tangential_trace(&velocity);
        State {
            velocity,
            boundary,
            tied: true,
        }
    }

    /// State with an independent boundary channel.
    pub fn general(velocity: Vec<C64>, boundary: BoundaryScalar) -> Self {
        State {
            velocity,
            boundary,
            tied: false,
        }
    }

    pub fn zeros(bundle: &OperatorBundle) -> Self {
        State {
            velocity: vec![C64::new(0.0, 0.0); bundle.velocity.n_dofs],
            boundary: BoundaryScalar::zeros(bundle.velocity.n_boundary_nodes()),
            tied: true,
        }
    }
}

/// Assembled operators for one mesh and one parameter pair `(alpha, beta)`.
///
/// All matrices are real; complex systems are formed per spectral parameter
/// from these blocks. The bundle is immutable after assembly and can be
/// shared across threads.
pub struct OperatorBundle {
    pub alpha: f64,
    pub beta: f64,
    pub mesh: Mesh,
    pub velocity: VelocitySpace,
    pub n_pressure: usize,
    /// Vector L2 mass on constrained velocity dofs.
    pub mass: Csr,
    /// `2 int Du : Dv`.
    pub stiffness: Csr,
    /// Full H1 Gram `int (u.v + grad u : grad v)`.
    pub h1_gram: Csr,
    /// Divergence coupling, rows are pressure test functions: `int q div u`.
    pub divergence: Csr,
    pub pressure_mass: Csr,
    pub pressure_stiffness: Csr,
    /// Integrals of the pressure basis functions (zero-mean functional).
    pub pressure_mean: Vec<f64>,
    /// Periodic quadratic mass in arclength on the boundary scalar space.
    pub boundary_mass: Csr,
    /// Scalar-space index to tangential velocity dof.
    pub trace_dofs: Vec<usize>,
    /// `R = T^T M_b T` scattered onto velocity dofs.
    pub boundary_coupling: Csr,
    pub fourier: BoundaryFourier,
    pub area: f64,
}

impl OperatorBundle {
    /// Assembles all operators on `mesh` for slip parameters `(alpha, beta)`.
    /// Requires `beta > 0`.
    pub fn assemble(mesh: &Mesh, alpha: f64, beta: f64) -> Result<OperatorBundle, AssemblyError> {
        if !(beta > 0.0 && beta.is_finite() && alpha.is_finite()) {
            return Err(AssemblyError::InvariantViolation(format!(
                "slip parameters must be finite with beta > 0, got alpha = {alpha}, beta = {beta}"
            )));
        }
        assembly::assemble_bundle(mesh, alpha, beta)
    }

    pub fn n_velocity_dofs(&self) -> usize {
        self.velocity.n_dofs
    }

    /// Tangential trace of a velocity coefficient vector, as a boundary
    /// scalar. Exact selection, no interpolation error.
    pub fn tangential_trace(&self, u: &[C64]) -> BoundaryScalar {
        assert_eq!(u.len(), self.velocity.n_dofs);
        BoundaryScalar {
            values: self.trace_dofs.iter().map(|&d| u[d]).collect(),
        }
    }

    /// Adjoint of the trace selection: scatters a boundary dual vector into
    /// the velocity dual space.
    pub fn trace_scatter(&self, g: &[C64]) -> Vec<C64> {
        assert_eq!(g.len(), self.trace_dofs.len());
        let mut out = vec![C64::new(0.0, 0.0); self.velocity.n_dofs];
        for (i, &d) in self.trace_dofs.iter().enumerate() {
            out[d] += g[i];
        }
        out
    }

    /// Removes the weighted mean from a pressure vector so the zero-mean
    /// functional annihilates it.
    pub fn remove_pressure_mean(&self, p: &mut [C64]) {
        let total: C64 = p
            .iter()
            .zip(&self.pressure_mean)
            .map(|(&pi, &wi)| pi * wi)
            .sum();
        let mean = total / self.area;
        for pi in p.iter_mut() {
            *pi -= mean;
        }
    }

    /// Value of the zero-mean functional on a pressure vector.
    pub fn pressure_mean_value(&self, p: &[C64]) -> C64 {
        p.iter()
            .zip(&self.pressure_mean)
            .map(|(&pi, &wi)| pi * wi)
            .sum()
    }
}
