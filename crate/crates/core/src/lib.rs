//! Finite element laboratory for the evolutionary Stokes problem with a
//! dynamic slip boundary condition on smooth star-shaped planar domains.
//!
//! The crate discretizes the velocity/pressure pair with isoparametric
//! Taylor-Hood elements (curved P2 velocities, P1 pressures) under an exact
//! nodal impermeability constraint, equips the boundary trace with a periodic
//! quadratic space in arclength, and builds the resolvent, spectral and
//! evolution machinery needed to measure the quantitative structure of the
//! problem: coercivity and a priori ratios, sector bounds for the resolvent,
//! Korn-type thresholds, semigroup decay and discrete maximal regularity.

pub mod error;
pub mod evolution;
pub mod geometry;
pub mod linalg;
pub mod quadrature;
pub mod report;
pub mod resolvent;
pub mod spaces;
pub mod spectral;

pub use error::{AssemblyError, EvolutionError, GeometryError, SolveError, SpectralError};
pub use evolution::{EvolutionTrace, InterpMethod, TimeGrid};
pub use geometry::{BoundaryParam, DomainSpec, Mesh};
pub use report::{ConvergenceLevel, ConvergenceTable};
pub use resolvent::{ResolventOperator, ResolventSolution};
pub use spaces::{BoundaryScalar, OperatorBundle, State};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
