//! Spectral-module tests: power iteration against a dense oracle, sweep
//! plumbing, and Korn quotients with closed-form upper bounds.

use num_complex::Complex64 as C64;
use stokeslip::spectral::{
    dense_korn, dense_resolvent_norm, in_sector, korn_constants, resolvent_norm_estimate,
    sector_sweep, standard_grid, X0Geometry,
};
use stokeslip::{DomainSpec, Mesh, OperatorBundle, ResolventOperator};

fn build(spec: DomainSpec, h: f64, alpha: f64, beta: f64) -> OperatorBundle {
    let mesh = Mesh::generate(&spec, h).expect("mesh");
    OperatorBundle::assemble(&mesh, alpha, beta).expect("assembly")
}

#[test]
fn power_iteration_matches_dense_oracle() {
    let bundle = build(DomainSpec::disk(1.0).unwrap(), 0.35, 1.0, 1.0);
    let geo = X0Geometry::new(&bundle).expect("geometry");
    for lambda in [C64::new(1.0, 2.0), C64::new(50.0, 0.0), C64::new(2.0, -30.0)] {
        let op = ResolventOperator::new(&bundle, lambda).expect("factorization");
        let power = resolvent_norm_estimate(&op, &bundle, &geo, 3).expect("power");
        let dense = dense_resolvent_norm(&op, &bundle, &geo).expect("dense");
        assert!(
            (power - dense).abs() <= 0.05 * dense,
            "lambda {lambda}: power {power} vs dense {dense}"
        );
        // Power iteration can only approach the true norm from below.
        assert!(power <= dense * (1.0 + 1e-8));
    }
}

#[test]
fn estimate_is_monotone_in_probes() {
    let bundle = build(DomainSpec::disk(1.0).unwrap(), 0.35, 1.0, 1.0);
    let geo = X0Geometry::new(&bundle).expect("geometry");
    let op = ResolventOperator::new(&bundle, C64::new(1.0, 1.0)).expect("factorization");
    let e1 = resolvent_norm_estimate(&op, &bundle, &geo, 1).expect("1 probe");
    let e3 = resolvent_norm_estimate(&op, &bundle, &geo, 3).expect("3 probes");
    let e6 = resolvent_norm_estimate(&op, &bundle, &geo, 6).expect("6 probes");
    assert!(e1 <= e3 && e3 <= e6);
    assert!(e1 > 0.0);
}

#[test]
fn sweep_handles_grids_and_rejects_outside_points() {
    let bundle = build(DomainSpec::disk(1.0).unwrap(), 0.35, 1.0, 1.0);
    let omega = 1.0;
    let theta = 0.55 * std::f64::consts::PI;

    let empty = sector_sweep(&bundle, theta, omega, &[], 1).expect("empty sweep");
    assert!(empty.records.is_empty());
    assert_eq!(empty.c_sector, 0.0);

    let bad = [C64::new(omega - 5.0, 0.0)];
    assert!(sector_sweep(&bundle, 0.5 * std::f64::consts::PI, omega, &bad, 1).is_err());

    let grid = standard_grid(omega, 4);
    for &l in &grid {
        assert!(in_sector(l, theta, omega));
    }
    let report = sector_sweep(&bundle, theta, omega, &grid, 2).expect("sweep");
    assert_eq!(report.records.len(), grid.len());
    assert!(report.c_sector.is_finite() && report.c_sector > 0.0);
    for r in &report.records {
        assert!(r.ratio.is_finite(), "record {r:?}");
        assert!(!r.flagged, "record {r:?}");
        assert!(r.estimate >= 0.0);
    }
}

#[test]
fn korn_quotients_on_the_disk_vanish() {
    // The rigid rotation lies in the constrained space of the disk, has
    // Du = 0 exactly, and nonzero trace: both quotients collapse.
    let bundle = build(DomainSpec::disk(1.0).unwrap(), 0.3, 0.0, 1.0);
    let report = korn_constants(&bundle).expect("korn");
    assert!(report.q1 < 1e-10, "q1 = {}", report.q1);
    assert!(report.q2 < 1e-8, "q2 = {}", report.q2);
    assert!(report.alpha0.abs() < 2e-8);
    assert_eq!(report.alpha0, -2.0 * report.q2);

    let (dq1, dq2) = dense_korn(&bundle).expect("dense oracle");
    assert!(dq1 < 1e-10 && dq2 < 1e-8, "dense ({dq1}, {dq2})");
}

#[test]
fn korn_quotients_on_the_ellipse_match_dense_oracle() {
    let bundle = build(DomainSpec::ellipse(2.0, 1.0).unwrap(), 0.3, 0.0, 1.0);
    let report = korn_constants(&bundle).expect("korn");
    let (dq1, dq2) = dense_korn(&bundle).expect("dense oracle");
    assert!(
        (report.q1 - dq1).abs() <= 1e-6 * dq1.max(1e-12),
        "q1 {} vs dense {dq1}",
        report.q1
    );
    assert!(
        (report.q2 - dq2).abs() <= 1e-6 * dq2.max(1e-12),
        "q2 {} vs dense {dq2}",
        report.q2
    );
    assert!(report.q1 > 0.0 && report.q2 > 0.0);
    assert!(report.alpha0 < 0.0);

    // Frozen values at this resolution; the h -> 0 limits are
    // q1 = 0.19078, q2 = 0.27450.
    assert!((report.q1 - 0.19262).abs() < 2e-3, "q1 = {}", report.q1);
    assert!((report.q2 - 0.27654).abs() < 2e-3, "q2 = {}", report.q2);

    // The tangential linear field gives explicit Rayleigh upper bounds.
    let v = bundle
        .velocity
        .interpolate(|p| [-2.0 * p[1], 0.5 * p[0]]);
    let k = bundle.stiffness.hermitian_form(&v);
    let g = bundle.h1_gram.hermitian_form(&v);
    let r = bundle.boundary_coupling.hermitian_form(&v);
    assert!(report.q1 <= k / g + 1e-10);
    assert!(report.q2 <= k / r + 1e-10);
}
