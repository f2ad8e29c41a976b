//! Quadrature rules and reference-element shape functions.
//!
//! The triangle rule is a conical product of Gauss-Legendre rules, so all
//! nodes and weights are computed to machine precision instead of being
//! transcribed from tables.

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1]; reverse order so nodes increase.
        nodes[n - 1 - k] = 0.5 * (x + 1.0);
        weights[n - 1 - k] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature point on the reference triangle `{xi >= 0, eta >= 0, xi + eta <= 1}`.
#[derive(Debug, Clone, Copy)]
pub struct TrianglePoint {
    pub xi: f64,
    pub eta: f64,
    pub weight: f64,
}

/// Conical-product triangle rule from an `n`-point Gauss-Legendre rule,
/// exact for total degree `2n - 2`.
pub fn triangle_rule(n: usize) -> Vec<TrianglePoint> {
    let (u, wu) = gauss_legendre(n);
    let (v, wv) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            points.push(TrianglePoint {
                xi: u[i],
                eta: v[j] * (1.0 - u[i]),
                weight: wu[i] * wv[j] * (1.0 - u[i]),
            });
        }
    }
    points
}

/// P2 shape function values and reference gradients at `(xi, eta)`.
///
/// Node order: vertices `v0 v1 v2`, then edge midpoints `m01 m12 m20`.
pub fn p2_shapes(xi: f64, eta: f64) -> ([f64; 6], [[f64; 2]; 6]) {
    let l0 = 1.0 - xi - eta;
    let l1 = xi;
    let l2 = eta;
    let values = [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ];
    let d0 = [-1.0, -1.0];
    let d1 = [1.0, 0.0];
    let d2 = [0.0, 1.0];
    let mut grads = [[0.0; 2]; 6];
    for c in 0..2 {
        grads[0][c] = (4.0 * l0 - 1.0) * d0[c];
        grads[1][c] = (4.0 * l1 - 1.0) * d1[c];
        grads[2][c] = (4.0 * l2 - 1.0) * d2[c];
        grads[3][c] = 4.0 * (l1 * d0[c] + l0 * d1[c]);
        grads[4][c] = 4.0 * (l2 * d1[c] + l1 * d2[c]);
        grads[5][c] = 4.0 * (l0 * d2[c] + l2 * d0[c]);
    }
    (values, grads)
}

/// P1 shape function values at `(xi, eta)`; gradients are the constant
/// barycentric gradients `(-1,-1), (1,0), (0,1)`.
pub fn p1_shapes(xi: f64, eta: f64) -> [f64; 3] {
    [1.0 - xi - eta, xi, eta]
}

pub const P1_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Quadratic line shapes on `[0, 1]` with nodes at `0, 1/2, 1`,
/// returned as `(values, derivatives)`.
pub fn p2_line(t: f64) -> ([f64; 3], [f64; 3]) {
    let values = [
        (1.0 - t) * (1.0 - 2.0 * t),
        4.0 * t * (1.0 - t),
        t * (2.0 * t - 1.0),
    ];
    let derivs = [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0];
    (values, derivs)
}

/// Exact mass matrix of the quadratic line shapes on a unit interval.
pub const P2_LINE_MASS: [[f64; 3]; 3] = [
    [2.0 / 15.0, 1.0 / 15.0, -1.0 / 30.0],
    [1.0 / 15.0, 8.0 / 15.0, 1.0 / 15.0],
    [-1.0 / 30.0, 1.0 / 15.0, 2.0 / 15.0],
];
