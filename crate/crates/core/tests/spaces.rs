//! Oracle tests for the assembled operator bundle.
//!
//! The reference values are closed forms for rigid rotations and tangential
//! linear fields on the disk and the ellipse, plus exact Fourier identities
//! for the boundary scalar space.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use stokeslip::spaces::{h_norm, x0_norm, z_norm, LeraySolver};
use stokeslip::{BoundaryScalar, DomainSpec, Mesh, OperatorBundle, State};

fn build(spec: DomainSpec, h: f64, alpha: f64, beta: f64) -> OperatorBundle {
    let mesh = Mesh::generate(&spec, h).expect("mesh");
    OperatorBundle::assemble(&mesh, alpha, beta).expect("assembly")
}

fn disk_bundle() -> &'static OperatorBundle {
    static CELL: OnceLock<OperatorBundle> = OnceLock::new();
    CELL.get_or_init(|| build(DomainSpec::disk(1.0).unwrap(), 0.1, 0.7, 0.8))
}

fn ellipse_bundle() -> &'static OperatorBundle {
    static CELL: OnceLock<OperatorBundle> = OnceLock::new();
    CELL.get_or_init(|| build(DomainSpec::ellipse(2.0, 1.0).unwrap(), 0.15, -0.2, 1.5))
}

fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-300)
}

fn inf_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn dimension_formula() {
    for bundle in [disk_bundle(), ellipse_bundle()] {
        let vs = &bundle.velocity;
        let nb = vs.n_boundary_nodes();
        let interior = vs.n_nodes() - nb;
        assert_eq!(vs.n_dofs, 2 * interior + nb);
        assert_eq!(bundle.n_pressure, bundle.mesh.vertices.len());
        assert_eq!(nb, 2 * bundle.mesh.boundary_edges.len());
        assert_eq!(bundle.trace_dofs.len(), nb);
    }
}

#[test]
fn matrices_exactly_symmetric() {
    let bundle = disk_bundle();
    assert_eq!(bundle.mass.max_asymmetry(), 0.0);
    assert_eq!(bundle.stiffness.max_asymmetry(), 0.0);
    assert_eq!(bundle.h1_gram.max_asymmetry(), 0.0);
    assert_eq!(bundle.pressure_mass.max_asymmetry(), 0.0);
    assert_eq!(bundle.pressure_stiffness.max_asymmetry(), 0.0);
    assert_eq!(bundle.boundary_mass.max_asymmetry(), 0.0);
    assert_eq!(bundle.boundary_coupling.max_asymmetry(), 0.0);
}

#[test]
fn mass_operators_integrate_constants() {
    for (bundle, area, length) in [
        (disk_bundle(), PI, 2.0 * PI),
        (ellipse_bundle(), 2.0 * PI, 9.688448220547675),
    ] {
        let ones_p = vec![C64::new(1.0, 0.0); bundle.n_pressure];
        assert!(rel_err(bundle.pressure_mass.hermitian_form(&ones_p), bundle.area) < 1e-13);
        let mean_total: f64 = bundle.pressure_mean.iter().sum();
        assert!(rel_err(mean_total, bundle.area) < 1e-13);
        // The quadrature area itself tracks the true area closely.
        assert!(rel_err(bundle.area, area) < 1e-4);

        let nb = bundle.boundary_mass.nrows;
        let ones_b = vec![C64::new(1.0, 0.0); nb];
        assert!(rel_err(bundle.boundary_mass.hermitian_form(&ones_b), length) < 1e-11);
    }
}

#[test]
fn small_bundle_matrices_are_positive() {
    let bundle = build(DomainSpec::disk(1.0).unwrap(), 0.45, 0.0, 1.0);
    for (name, m, strict) in [
        ("mass", &bundle.mass, true),
        ("h1", &bundle.h1_gram, true),
        ("stiffness", &bundle.stiffness, false),
        ("pressure mass", &bundle.pressure_mass, true),
        ("boundary mass", &bundle.boundary_mass, true),
    ] {
        let dense = m.to_dense();
        let eig = dense.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.iter().cloned().fold(0.0f64, f64::max);
        if strict {
            assert!(min > 0.0, "{name}: min eigenvalue {min}");
        } else {
            assert!(min > -1e-12 * max, "{name}: min eigenvalue {min}");
        }
    }
}

#[test]
fn disk_rotation_closed_forms() {
    let bundle = disk_bundle();
    let u = bundle.velocity.interpolate(|p| [-p[1], p[0]]);

    // L2 norm squared over the unit disk: pi / 2.
    let mass_form = bundle.mass.hermitian_form(&u);
    assert!(
        rel_err(mass_form, PI / 2.0) < 2e-5,
        "mass form {mass_form}"
    );

    // The tangential trace of the rotation is identically one.
    let trace = bundle.tangential_trace(&u);
    for v in &trace.values {
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    // Boundary L2 norm squared: the circumference.
    let trace_form = bundle.boundary_mass.hermitian_form(&trace.values);
    assert!(rel_err(trace_form, 2.0 * PI) < 1e-11);

    // Pivot norm with beta-weighted boundary part.
    let state = State::tied(bundle, u.clone());
    let h2 = h_norm(bundle, &state).powi(2);
    assert!(rel_err(h2, PI / 2.0 + bundle.beta * 2.0 * PI) < 2e-5);

    // A rigid rotation has vanishing symmetric gradient.
    let stiff_form = bundle.stiffness.hermitian_form(&u);
    let h1_form = bundle.h1_gram.hermitian_form(&u);
    assert!(stiff_form.abs() < 1e-10 * h1_form);
    let z2 = z_norm(bundle, &state).powi(2);
    assert!(rel_err(z2, 2.0 * PI) < 1e-9);

    // And it is discretely divergence free.
    let div = bundle.divergence.matvec_c(&u);
    assert!(inf_norm(&div) < 1e-12);
}

#[test]
fn ellipse_tangential_linear_field() {
    let bundle = ellipse_bundle();
    let (a, b) = (2.0, 1.0);
    let v = bundle
        .velocity
        .interpolate(|p| [-(a / b) * p[1], (b / a) * p[0]]);

    // Divergence free and tangent to the boundary, hence exactly represented.
    let div = bundle.divergence.matvec_c(&v);
    assert!(inf_norm(&div) < 1e-11);

    // 2 int |Dv|^2 with Dv = [[0, c], [c, 0]], c = (b/a - a/b) / 2.
    let c = 0.5 * (b / a - a / b);
    let exact = 4.0 * c * c * PI * a * b;
    let stiff_form = bundle.stiffness.hermitian_form(&v);
    assert!(
        rel_err(stiff_form, exact) < 1e-4,
        "stiffness form {stiff_form} vs {exact}"
    );
}

#[test]
fn interior_bubble_has_zero_trace() {
    let bundle = disk_bundle();
    let u = bundle.velocity.interpolate(|p| {
        let r2 = p[0] * p[0] + p[1] * p[1];
        [(1.0 - r2) * 1.0, (1.0 - r2) * 2.0]
    });
    let trace = bundle.tangential_trace(&u);
    assert!(inf_norm(&trace.values) < 1e-12);
    assert!(bundle.mass.hermitian_form(&u) > 0.1);
}

#[test]
fn boundary_parseval_identity() {
    let bundle = disk_bundle();
    let g: Vec<f64> = bundle
        .velocity
        .boundary_nodes
        .iter()
        .map(|bn| (2.0 * bn.s).cos() + 0.3 * (5.0 * bn.s).sin())
        .collect();
    let gs = BoundaryScalar::from_real(&g);
    let quad = bundle.boundary_mass.hermitian_form(&gs.values);
    let fourier = bundle.fourier.sobolev_norm(&gs.values, 0.0).powi(2);
    assert!(
        rel_err(fourier, quad) < 1e-6,
        "Parseval mismatch: {fourier} vs {quad}"
    );
}

#[test]
fn fractional_norm_closed_forms() {
    let bundle = disk_bundle();
    let length = bundle.fourier.length;
    assert!(rel_err(length, 2.0 * PI) < 1e-10);

    // Constant boundary data: ||c||_{H^s} = |c| sqrt(L) for every order.
    let c = 1.75;
    let nb = bundle.boundary_mass.nrows;
    let constant = BoundaryScalar::from_real(&vec![c; nb]);
    for order in [0.0, 0.5, 1.5] {
        let norm = bundle.fourier.sobolev_norm(&constant.values, order);
        assert!(rel_err(norm, c * length.sqrt()) < 1e-10);
    }

    // Pure mode k = 3 on the unit circle: norm^2 = L (1 + k^2)^s.
    let k = 3.0;
    let g: Vec<f64> = bundle
        .velocity
        .boundary_nodes
        .iter()
        .map(|bn| (k * bn.s).cos())
        .collect();
    let gs = BoundaryScalar::from_real(&g);
    let exact = 0.5 * length * (1.0 + k * k).sqrt();
    let norm2 = bundle.fourier.sobolev_norm(&gs.values, 0.5).powi(2);
    assert!(rel_err(norm2, exact) < 2e-3, "norm2 {norm2} vs {exact}");

    // Order monotonicity.
    let n0 = bundle.fourier.sobolev_norm(&gs.values, 0.0);
    let n1 = bundle.fourier.sobolev_norm(&gs.values, 0.5);
    let n2 = bundle.fourier.sobolev_norm(&gs.values, 1.5);
    assert!(n0 <= n1 && n1 <= n2);
}

#[test]
fn leray_projection_behaviour() {
    let bundle = ellipse_bundle();
    let solver = LeraySolver::new(bundle).expect("factorization");

    // Idempotency.
    let f = bundle
        .velocity
        .interpolate(|p| [p[0] * p[1], p[1] - 0.3 * p[0] * p[0]]);
    let pf = solver.project(bundle, &f).expect("project");
    let ppf = solver.project(bundle, &pf).expect("project twice");
    let diff: Vec<C64> = pf.iter().zip(&ppf).map(|(x, y)| x - y).collect();
    let scale = bundle.mass.hermitian_form(&pf).sqrt();
    assert!(bundle.mass.hermitian_form(&diff).sqrt() < 1e-9 * scale);

    // A discretely solenoidal tangential field is a fixed point.
    let v = bundle
        .velocity
        .interpolate(|p| [-2.0 * p[1], 0.5 * p[0]]);
    let pv = solver.project(bundle, &v).expect("project rotation");
    let diff: Vec<C64> = v.iter().zip(&pv).map(|(x, y)| x - y).collect();
    let vscale = bundle.mass.hermitian_form(&v).sqrt();
    assert!(bundle.mass.hermitian_form(&diff).sqrt() < 1e-9 * vscale);
}

#[test]
fn leray_suppresses_gradient_fields() {
    // grad phi with zero normal derivative at the boundary of the unit disk,
    // so the constrained interpolant stays consistent.
    let grad = |p: [f64; 2]| {
        let r2 = p[0] * p[0] + p[1] * p[1];
        [2.0 * (1.0 - r2) * p[0], 2.0 * (1.0 - r2) * p[1]]
    };
    let mut ratios = Vec::new();
    for h in [0.2, 0.1] {
        let bundle = build(DomainSpec::disk(1.0).unwrap(), h, 0.0, 1.0);
        let solver = LeraySolver::new(&bundle).expect("factorization");
        let f = bundle.velocity.interpolate(grad);
        let pf = solver.project(&bundle, &f).expect("project");
        let ratio = bundle.mass.hermitian_form(&pf).sqrt()
            / bundle.mass.hermitian_form(&f).sqrt();
        ratios.push(ratio);
    }
    assert!(ratios[0] < 0.15, "coarse ratio {}", ratios[0]);
    assert!(ratios[1] < 0.7 * ratios[0], "ratios {ratios:?}");
}

#[test]
fn assembly_independent_of_slip_parameters() {
    let spec = DomainSpec::disk(1.0).unwrap();
    let mesh = Mesh::generate(&spec, 0.35).expect("mesh");
    let b1 = OperatorBundle::assemble(&mesh, 0.3, 1.0).expect("assembly");
    let b2 = OperatorBundle::assemble(&mesh, -2.0, 5.0).expect("assembly");
    assert_eq!(b1.mass.values, b2.mass.values);
    assert_eq!(b1.stiffness.values, b2.stiffness.values);
    assert_eq!(b1.boundary_mass.values, b2.boundary_mass.values);
    assert_eq!(b1.divergence.values, b2.divergence.values);
    assert_eq!(b1.alpha, 0.3);
    assert_eq!(b2.beta, 5.0);
}

mod x0_norm_properties {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_bundle() -> &'static OperatorBundle {
        static CELL: OnceLock<OperatorBundle> = OnceLock::new();
        CELL.get_or_init(|| build(DomainSpec::disk(1.0).unwrap(), 0.4, 0.0, 1.0))
    }

    fn random_data(seed: u64) -> (Vec<C64>, BoundaryScalar) {
        let bundle = small_bundle();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = (0..bundle.n_velocity_dofs())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let g = (0..bundle.boundary_mass.nrows)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        (f, BoundaryScalar { values: g })
    }

    proptest! {
        #[test]
        fn homogeneous_of_degree_one(seed in 0u64..256, scale in -4.0f64..4.0) {
            let bundle = small_bundle();
            let (f, g) = random_data(seed);
            let base = x0_norm(bundle, &f, &g);
            let sf: Vec<C64> = f.iter().map(|v| v * scale).collect();
            let sg = BoundaryScalar {
                values: g.values.iter().map(|v| v * scale).collect(),
            };
            let scaled = x0_norm(bundle, &sf, &sg);
            prop_assert!((scaled - scale.abs() * base).abs() <= 1e-10 * (1.0 + base));
        }

        #[test]
        fn triangle_inequality(sa in 0u64..128, sb in 128u64..256) {
            let bundle = small_bundle();
            let (fa, ga) = random_data(sa);
            let (fb, gb) = random_data(sb);
            let fs: Vec<C64> = fa.iter().zip(&fb).map(|(x, y)| x + y).collect();
            let gs = BoundaryScalar {
                values: ga.values.iter().zip(&gb.values).map(|(x, y)| x + y).collect(),
            };
            let lhs = x0_norm(bundle, &fs, &gs);
            let rhs = x0_norm(bundle, &fa, &ga) + x0_norm(bundle, &fb, &gb);
            prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs));
        }

        #[test]
        fn zero_only_at_zero(seed in 0u64..256) {
            let bundle = small_bundle();
            let (f, g) = random_data(seed);
            prop_assert!(x0_norm(bundle, &f, &g) > 0.0);
            let zf = vec![C64::new(0.0, 0.0); f.len()];
            let zg = BoundaryScalar::zeros(g.len());
            prop_assert!(x0_norm(bundle, &zf, &zg) == 0.0);
        }
    }
}
