//! Closed-form references computed independently of the library.

use std::f64::consts::PI;

use infinitas::density::{estimate, DensityTarget};
use infinitas::geometry::{integrate_sigma, sublevel_volume_radial, trace_curve};
use infinitas::rabier::{fiber_rabier, graph_jacobian, nu_of_graph_projection, LinearMap};
use infinitas::topology::{euler_global, stable_link, AlgebraicSet, SetKind};
use infinitas::{parse_polynomial, FamilySpec, Polynomial, RadiusSchedule};

fn plane(expr: &str) -> Polynomial {
    parse_polynomial(expr, &["x1".into(), "x2".into()]).unwrap()
}

/// Positive root `a` of `a² + a⁴ = R²`: where the parabola leaves `B_R`.
fn parabola_exit(r: f64) -> f64 {
    ((-1.0 + (1.0 + 4.0 * r * r).sqrt()) / 2.0).sqrt()
}

#[test]
fn parabola_turning_matches_tangent_angles() {
    // total curvature of a plane arc is the swing of its tangent: the two
    // exit tangents have slopes ±2a
    let f = plane("x2 - x1^2");
    for r in [2.0, 8.0, 32.0] {
        let mesh = trace_curve(&f, r, 0.01).unwrap();
        let got = integrate_sigma(&mesh, 1).unwrap();
        let want = -2.0 * (2.0 * parabola_exit(r)).atan();
        assert!((got - want).abs() < 2e-3, "R = {r}: {got} vs {want}");
        // arc length ∫√(1+4t²) dt over [-a, a]
        let a = parabola_exit(r);
        let len = a * (1.0 + 4.0 * a * a).sqrt() + (2.0 * a).asinh() / 2.0;
        assert!(
            (mesh.measure() - len).abs() < 1e-3 * len,
            "R = {r}: {} vs {len}",
            mesh.measure()
        );
    }
}

#[test]
fn hyperbola_branches_each_turn_a_right_angle() {
    let f = plane("x1*x2 - 1");
    let r = 64.0;
    let mesh = trace_curve(&f, r, 0.01).unwrap();
    assert_eq!(mesh.components.len(), 2);
    // exit point (t, 1/t) with t² + 1/t² = R²; tangent slope -1/t²
    let t = ((r * r + (r.powi(4) - 4.0).sqrt()) / 2.0).sqrt();
    let swing = 2.0 * (PI / 2.0 - 2.0 * (1.0 / (t * t)).atan());
    let got = integrate_sigma(&mesh, 1).unwrap().abs();
    assert!((got - swing).abs() < 2e-3, "{got} vs {swing}");
}

#[test]
fn quadrant_and_disk_volumes() {
    // {x1·x2 ≤ 0} is two quadrants
    let v = sublevel_volume_radial(&plane("x1*x2"), 10.0, 4096).unwrap();
    assert!((v - 50.0 * PI).abs() < 1e-6 * v, "{v}");
    let d = sublevel_volume_radial(&plane("x1^2 + x2^2 - 1"), 5.0, 4096).unwrap();
    assert!((d - PI).abs() < 1e-5, "{d}");
    // below the parabola: πR² minus the cap above it, ∫(√(R²-t²) - t²) over [-a, a]
    let r = 4.0;
    let a = parabola_exit(r);
    let cap = a * (r * r - a * a).sqrt() + r * r * (a / r).asin() - 2.0 * a.powi(3) / 3.0;
    let v = sublevel_volume_radial(&plane("x2 - x1^2"), r, 8192).unwrap();
    assert!((v - (PI * r * r - cap)).abs() < 1e-3, "{v} vs {}", PI * r * r - cap);
}

#[test]
fn frozen_density_values() {
    // Θ of the region below a parabola tends to the full ball
    let spec = FamilySpec::single(2, "x2 - x1^2").unwrap();
    let theta = estimate(&spec, &[0.0], DensityTarget::Theta, &RadiusSchedule::default()).unwrap();
    assert!((theta.value - 1.0).abs() < 0.01, "{theta:?}");
    // a hyperbola has four ends, each contributing R to the length
    let spec = FamilySpec::single(2, "x1^2 - x2^2 - 0.25").unwrap();
    let k0 = estimate(
        &spec,
        &[0.0],
        DensityTarget::parse("kappa:0").unwrap(),
        &RadiusSchedule::default(),
    )
    .unwrap();
    assert!((k0.value - 4.0).abs() < 0.04, "{k0:?}");
}

#[test]
fn euler_characteristics_of_nested_circles() {
    let two = plane("(x1^2 + x2^2 - 1)*(x1^2 + x2^2 - 4)");
    let e = euler_global(&AlgebraicSet::fiber(two.clone()), 4.0, 64, None).unwrap();
    assert_eq!(e.chi, 0);
    assert!(!e.hint_used);
    // the product is negative only between the circles
    let s = euler_global(&AlgebraicSet::sublevel(two), 4.0, 64, None).unwrap();
    assert_eq!(s.chi, 0);
    let disk = euler_global(&AlgebraicSet::sublevel(plane("x1^2 + x2^2 - 1")), 4.0, 64, None).unwrap();
    assert_eq!(disk.chi, 1);
}

#[test]
fn links_of_line_pairs() {
    let sched = RadiusSchedule::default();
    let cross = AlgebraicSet::fiber(plane("x1^2 - x2^2"));
    assert_eq!(stable_link(&cross, &sched).unwrap().stable_chi, Some(4));
    let strip = AlgebraicSet {
        poly: plane("x2^2 - 1"),
        kind: SetKind::Sublevel,
    };
    assert_eq!(stable_link(&strip, &sched).unwrap().stable_chi, Some(2));
}

#[test]
fn fiber_rabier_is_the_graph_projection_number() {
    let spec = FamilySpec::map_graph(2, &["x1 + x1^2*x2"]).unwrap();
    for x in [[0.3, -0.7], [1.5, 2.0], [-2.0, 0.1], [0.01, 40.0]] {
        let a = LinearMap::new(graph_jacobian(&spec, &x).unwrap()).unwrap();
        let w = spec.embed(&x);
        let got = fiber_rabier(&spec, &w).unwrap();
        assert!((got - nu_of_graph_projection(&a)).abs() < 1e-8, "{x:?}");
        // closed form for one row: |∇G| / √(1 + |∇G|²)
        let g = [1.0 + 2.0 * x[0] * x[1], x[0] * x[0]];
        let n = g[0].hypot(g[1]);
        assert!((got - n / (1.0 + n * n).sqrt()).abs() < 1e-12);
    }
}
