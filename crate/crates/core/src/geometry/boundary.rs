//! Arclength parametrization of the domain boundary.

use super::DomainSpec;
use crate::error::GeometryError;
use crate::quadrature::gauss_legendre;

const N_DENSE: usize = 4096;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Pointwise boundary data at arclength `s`: position, unit tangent along
/// the counterclockwise orientation, outward unit normal, and curvature
/// (positive on convex boundaries).
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub s: f64,
    pub position: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub curvature: f64,
}

/// Exact arclength machinery for a [`DomainSpec`] boundary.
///
/// A dense cumulative arclength table over the analytic parameter `t` backs
/// a Newton inversion `s -> t`, so positions and frames can be queried at
/// arbitrary arclength with near machine precision.
#[derive(Debug, Clone)]
pub struct BoundaryParam {
    spec: DomainSpec,
    length: f64,
    t_grid: Vec<f64>,
    s_grid: Vec<f64>,
    gauss: (Vec<f64>, Vec<f64>),
    samples: Vec<BoundarySample>,
}

impl BoundaryParam {
    pub fn new(spec: &DomainSpec, n_samples: usize) -> Result<Self, GeometryError> {
        if n_samples < 16 {
            return Err(GeometryError::TooFewSamples(n_samples));
        }
        let gauss = gauss_legendre(5);
        let mut t_grid = Vec::with_capacity(N_DENSE + 1);
        let mut s_grid = Vec::with_capacity(N_DENSE + 1);
        let mut acc = 0.0;
        t_grid.push(0.0);
        s_grid.push(0.0);
        for i in 0..N_DENSE {
            let t0 = TWO_PI * i as f64 / N_DENSE as f64;
            let t1 = TWO_PI * (i + 1) as f64 / N_DENSE as f64;
            acc += panel_arclength(spec, &gauss, t0, t1);
            t_grid.push(t1);
            s_grid.push(acc);
        }
        let mut bp = BoundaryParam {
            spec: spec.clone(),
            length: acc,
            t_grid,
            s_grid,
            gauss,
            samples: Vec::new(),
        };
        bp.samples = (0..n_samples)
            .map(|i| bp.eval(bp.length * i as f64 / n_samples as f64))
            .collect();
        Ok(bp)
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// Total boundary length.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn samples(&self) -> &[BoundarySample] {
        &self.samples
    }

    fn speed(&self, t: f64) -> f64 {
        let v = self.spec.velocity(t);
        v[0].hypot(v[1])
    }

    /// Arclength from parameter 0 to `t` in `[0, 2*pi]`.
    fn arclength_to(&self, t: f64) -> f64 {
        let idx = ((t / TWO_PI) * N_DENSE as f64).floor().clamp(0.0, (N_DENSE - 1) as f64) as usize;
        let t0 = self.t_grid[idx];
        self.s_grid[idx] + panel_arclength(&self.spec, &self.gauss, t0, t)
    }

    /// Inverts the arclength map; `s` is taken modulo the total length.
    pub fn t_of_s(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.length);
        let idx = self.s_grid.partition_point(|&v| v <= s).saturating_sub(1);
        let idx = idx.min(N_DENSE - 1);
        let (t0, t1) = (self.t_grid[idx], self.t_grid[idx + 1]);
        let (s0, s1) = (self.s_grid[idx], self.s_grid[idx + 1]);
        let mut t = t0 + (t1 - t0) * (s - s0) / (s1 - s0);
        for _ in 0..12 {
            let f = self.arclength_to(t) - s;
            let df = self.speed(t);
            let dt = f / df;
            t -= dt;
            if dt.abs() < 1e-15 * TWO_PI {
                break;
            }
        }
        t.rem_euclid(TWO_PI)
    }

    /// Boundary data at arclength `s`.
    pub fn eval(&self, s: f64) -> BoundarySample {
        let t = self.t_of_s(s);
        let position = self.spec.point(t);
        let v = self.spec.velocity(t);
        let a = self.spec.acceleration(t);
        let speed = v[0].hypot(v[1]);
        let tangent = [v[0] / speed, v[1] / speed];
        let normal = [tangent[1], -tangent[0]];
        let curvature = (v[0] * a[1] - v[1] * a[0]) / (speed * speed * speed);
        BoundarySample {
            s: s.rem_euclid(self.length),
            position,
            tangent,
            normal,
            curvature,
        }
    }

    /// Total curvature `int kappa ds`; equals `2*pi` for a simple closed curve.
    pub fn total_curvature(&self) -> f64 {
        let (x, w) = &self.gauss;
        let mut acc = 0.0;
        for i in 0..N_DENSE {
            let t0 = self.t_grid[i];
            let t1 = self.t_grid[i + 1];
            for (&xi, &wi) in x.iter().zip(w) {
                let t = t0 + (t1 - t0) * xi;
                let v = self.spec.velocity(t);
                let a = self.spec.acceleration(t);
                let speed2 = v[0] * v[0] + v[1] * v[1];
                // kappa * |x'| = cross(x', x'') / |x'|^2
                acc += wi * (t1 - t0) * (v[0] * a[1] - v[1] * a[0]) / speed2;
            }
        }
        acc
    }
}

fn panel_arclength(spec: &DomainSpec, gauss: &(Vec<f64>, Vec<f64>), t0: f64, t1: f64) -> f64 {
    let (x, w) = gauss;
    let mut acc = 0.0;
    for (&xi, &wi) in x.iter().zip(w) {
        let t = t0 + (t1 - t0) * xi;
        let v = spec.velocity(t);
        acc += wi * v[0].hypot(v[1]);
    }
    acc * (t1 - t0)
}
