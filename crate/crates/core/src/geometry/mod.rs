//! Analytic domain descriptions and curved triangulations.
//!
//! Domains are smooth and star-shaped with respect to the origin, described
//! by a closed counterclockwise parametrization `t -> x(t)` on `[0, 2*pi)`.
//! [`BoundaryParam`] reparametrizes the curve by exact arclength and carries
//! the outward frame and curvature; [`Mesh`] is an isoparametric
//! triangulation whose boundary vertices and midpoints lie on the exact
//! curve and remember their arclength coordinate.

mod boundary;
mod mesh;

pub use boundary::{BoundaryParam, BoundarySample};
pub use mesh::{
    isoparametric_jacobian, BoundaryEdgeInfo, BoundaryVertexInfo, EdgeQuadPoint, Mesh,
};

use crate::error::GeometryError;

/// Shape of the computational domain.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// Star-shaped radius graph `r(t) = r0 + sum_k (c_k cos((k+1) t) + s_k sin((k+1) t))`.
    Fourier {
        r0: f64,
        cos_amps: Vec<f64>,
        sin_amps: Vec<f64>,
    },
}

/// Validated description of a smooth star-shaped domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
}

impl DomainSpec {
    pub fn disk(radius: f64) -> Result<Self, GeometryError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidDomain(format!(
                "disk radius must be positive and finite, got {radius}"
            )));
        }
        Ok(DomainSpec {
            kind: DomainKind::Disk { radius },
        })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self, GeometryError> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(GeometryError::InvalidDomain(format!(
                "ellipse semi-axes must be positive and finite, got a = {a}, b = {b}"
            )));
        }
        Ok(DomainSpec {
            kind: DomainKind::Ellipse { a, b },
        })
    }

    /// Fourier-perturbed disk; the total perturbation must stay below
    /// `0.9 * r0` so the radius stays positive and the domain star-shaped.
    pub fn fourier(r0: f64, cos_amps: Vec<f64>, sin_amps: Vec<f64>) -> Result<Self, GeometryError> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(GeometryError::InvalidDomain(format!(
                "base radius must be positive and finite, got {r0}"
            )));
        }
        let total: f64 = cos_amps
            .iter()
            .chain(sin_amps.iter())
            .map(|a| a.abs())
            .sum();
        if !total.is_finite() {
            return Err(GeometryError::InvalidDomain(
                "fourier amplitudes must be finite".into(),
            ));
        }
        if total >= 0.9 * r0 {
            return Err(GeometryError::InvalidDomain(format!(
                "fourier amplitude sum {total} too large for base radius {r0}; need sum < 0.9 * r0"
            )));
        }
        Ok(DomainSpec {
            kind: DomainKind::Fourier {
                r0,
                cos_amps,
                sin_amps,
            },
        })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    /// True when the domain is a disk up to floating-point tolerance.
    pub fn is_axisymmetric(&self) -> bool {
        match &self.kind {
            DomainKind::Disk { .. } => true,
            DomainKind::Ellipse { a, b } => (a - b).abs() <= 1e-14 * a.max(*b),
            DomainKind::Fourier { r0, cos_amps, sin_amps } => cos_amps
                .iter()
                .chain(sin_amps.iter())
                .all(|amp| amp.abs() <= 1e-14 * r0),
        }
    }

    /// Short identifier used in reports and cache file names.
    pub fn id(&self) -> String {
        match &self.kind {
            DomainKind::Disk { radius } => format!("disk_{radius}"),
            DomainKind::Ellipse { a, b } => format!("ellipse_{a}_{b}"),
            DomainKind::Fourier { r0, cos_amps, sin_amps } => {
                let mut id = format!("fourier_{r0}");
                for amp in cos_amps.iter().chain(sin_amps.iter()) {
                    id.push_str(&format!("_{amp}"));
                }
                id
            }
        }
    }

    fn radius_terms(&self, t: f64) -> (f64, f64, f64) {
        match &self.kind {
            DomainKind::Disk { radius } => (*radius, 0.0, 0.0),
            DomainKind::Ellipse { .. } => unreachable!("ellipse is not a radius graph"),
            DomainKind::Fourier { r0, cos_amps, sin_amps } => {
                let mut r = *r0;
                let mut dr = 0.0;
                let mut ddr = 0.0;
                for (i, &c) in cos_amps.iter().enumerate() {
                    let k = (i + 1) as f64;
                    r += c * (k * t).cos();
                    dr -= c * k * (k * t).sin();
                    ddr -= c * k * k * (k * t).cos();
                }
                for (i, &s) in sin_amps.iter().enumerate() {
                    let k = (i + 1) as f64;
                    r += s * (k * t).sin();
                    dr += s * k * (k * t).cos();
                    ddr -= s * k * k * (k * t).sin();
                }
                (r, dr, ddr)
            }
        }
    }

    /// Boundary point at parameter `t`.
    pub fn point(&self, t: f64) -> [f64; 2] {
        match &self.kind {
            DomainKind::Ellipse { a, b } => [a * t.cos(), b * t.sin()],
            _ => {
                let (r, _, _) = self.radius_terms(t);
                [r * t.cos(), r * t.sin()]
            }
        }
    }

    /// First derivative `x'(t)`.
    pub fn velocity(&self, t: f64) -> [f64; 2] {
        match &self.kind {
            DomainKind::Ellipse { a, b } => [-a * t.sin(), b * t.cos()],
            _ => {
                let (r, dr, _) = self.radius_terms(t);
                let (ct, st) = (t.cos(), t.sin());
                [dr * ct - r * st, dr * st + r * ct]
            }
        }
    }

    /// Second derivative `x''(t)`.
    pub fn acceleration(&self, t: f64) -> [f64; 2] {
        match &self.kind {
            DomainKind::Ellipse { a, b } => [-a * t.cos(), -b * t.sin()],
            _ => {
                let (r, dr, ddr) = self.radius_terms(t);
                let (ct, st) = (t.cos(), t.sin());
                // x'' = (r'' - r) e_r + 2 r' e_theta
                [
                    (ddr - r) * ct - 2.0 * dr * st,
                    (ddr - r) * st + 2.0 * dr * ct,
                ]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_domains() {
        assert!(DomainSpec::disk(-1.0).is_err());
        assert!(DomainSpec::disk(0.0).is_err());
        assert!(DomainSpec::disk(f64::NAN).is_err());
        assert!(DomainSpec::ellipse(1.0, -2.0).is_err());
        assert!(DomainSpec::fourier(1.0, vec![0.95], vec![]).is_err());
        assert!(DomainSpec::fourier(-1.0, vec![], vec![]).is_err());
    }

    #[test]
    fn axisymmetry_detection() {
        assert!(DomainSpec::disk(2.0).unwrap().is_axisymmetric());
        assert!(DomainSpec::ellipse(1.0, 1.0).unwrap().is_axisymmetric());
        assert!(!DomainSpec::ellipse(2.0, 1.0).unwrap().is_axisymmetric());
        assert!(DomainSpec::fourier(1.0, vec![0.0], vec![]).unwrap().is_axisymmetric());
        assert!(!DomainSpec::fourier(1.0, vec![0.1], vec![]).unwrap().is_axisymmetric());
    }

    #[test]
    fn fourier_with_zero_amplitudes_matches_disk() {
        let disk = DomainSpec::disk(1.5).unwrap();
        let four = DomainSpec::fourier(1.5, vec![0.0, 0.0], vec![0.0]).unwrap();
        for i in 0..17 {
            let t = i as f64 * 0.37;
            for c in 0..2 {
                assert!((disk.point(t)[c] - four.point(t)[c]).abs() < 1e-15);
                assert!((disk.velocity(t)[c] - four.velocity(t)[c]).abs() < 1e-15);
                assert!((disk.acceleration(t)[c] - four.acceleration(t)[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = DomainSpec::fourier(1.0, vec![0.1, 0.05], vec![0.02]).unwrap();
        let eps = 1e-6;
        for i in 0..7 {
            let t = 0.3 + i as f64;
            for c in 0..2 {
                let fd_v = (spec.point(t + eps)[c] - spec.point(t - eps)[c]) / (2.0 * eps);
                let fd_a = (spec.velocity(t + eps)[c] - spec.velocity(t - eps)[c]) / (2.0 * eps);
                assert!((fd_v - spec.velocity(t)[c]).abs() < 1e-8);
                assert!((fd_a - spec.acceleration(t)[c]).abs() < 1e-8);
            }
        }
    }
}
