//! Discrete realizations of the problem norms.

use super::{BoundaryScalar, OperatorBundle, State};
use crate::C64;

/// Pivot space norm: `(||u||_{L2}^2 + beta ||u_b||_{L2(bdry)}^2)^{1/2}`.
pub fn h_norm(bundle: &OperatorBundle, state: &State) -> f64 {
    let interior = bundle.mass.hermitian_form(&state.velocity);
    let boundary = bundle.boundary_mass.hermitian_form(&state.boundary.values);
    (interior + bundle.beta * boundary).max(0.0).sqrt()
}

/// Data space norm: `||f||_{L2} + ||g||_{H^{1/2}(bdry)}`, a sum of the two
/// channel norms.
pub fn x0_norm(bundle: &OperatorBundle, f: &[C64], g: &BoundaryScalar) -> f64 {
    let interior = bundle.mass.hermitian_form(f).max(0.0).sqrt();
    let boundary = bundle.fourier.sobolev_norm(&g.values, 0.5);
    interior + boundary
}

/// Energy seminorm squared root: `(2 ||Du||^2 + ||u_b||_{L2(bdry)}^2)^{1/2}`.
pub fn z_norm(bundle: &OperatorBundle, state: &State) -> f64 {
    let grad = bundle.stiffness.hermitian_form(&state.velocity);
    let boundary = bundle.boundary_mass.hermitian_form(&state.boundary.values);
    (grad + boundary).max(0.0).sqrt()
}
