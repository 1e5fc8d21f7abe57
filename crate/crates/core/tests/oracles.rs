//! Cross-checks between independent routes to the same quantity.

use std::f64::consts::PI;

use phasestat_core::geodesic::{radial_action, renormalized_rotation};
use phasestat_core::profile::{
    build_family_profile, build_linear_model, FamilyParameters, GridSpec, ProfileCoefficient, RadialProfile,
};
use phasestat_core::radial::{solve_phase_shift, ExactOptions};
use phasestat_core::semiclassics::{leading_phase, reduced_phase, PhaseFunction};

const RHO: ProfileCoefficient = ProfileCoefficient::Rational { rho: 0.5 };

#[test]
fn flat_family_member_is_the_linear_model() {
    // β = 0 makes F constant, and F = t gives back a = r/√(t² + r²)
    for t in [0.5, 1.0, 2.0] {
        let fam = build_family_profile(FamilyParameters::new(-0.5 * t, 0.0), RHO, GridSpec::default()).unwrap();
        let lin = build_linear_model(t).unwrap();
        for r in [1e-3, 0.1, 1.0, 7.5, 300.0, 5000.0] {
            assert!((fam.a(r) - lin.a(r)).abs() < 1e-10, "t = {t}, r = {r}");
            assert!((fam.w(r) - lin.w(r)).abs() < 1e-8 * lin.w(r), "t = {t}, r = {r}");
        }
        for x in [0.2, 0.5, 0.8] {
            let psi = leading_phase(&fam, x, 1e-12).unwrap();
            assert!((psi + 0.5 * t * x).abs() < 1e-9, "t = {t}, x = {x}: ψ = {psi}");
        }
    }
}

#[test]
fn profile_quadrature_matches_shape_transform() {
    let params = FamilyParameters::new(-0.45, 0.08);
    let p = build_family_profile(params, RHO, GridSpec::default()).unwrap();
    let model = PhaseFunction::Family { params, coefficient: RHO };
    for x in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let quad = leading_phase(&p, x, 1e-12).unwrap();
        let closed = model.psi(x).unwrap();
        assert!((quad - closed).abs() < 1e-9, "x = {x}: {quad} vs {closed}");
    }
}

#[test]
fn linear_rotation_and_action() {
    for t in [0.5, 1.0, 2.0] {
        let p = build_linear_model(t).unwrap();
        for x in [0.15, 0.5, 0.85] {
            let theta = renormalized_rotation(&p, x, 1e-12).unwrap();
            assert!((theta - PI * t).abs() < 1e-9, "t = {t}, x = {x}: {theta}");
        }
        let (b1, b2) = (3.0, 1.2);
        assert!((radial_action(&p, b1, b2, 1e-12).unwrap() + 0.5 * t * b2).abs() < 1e-9);
    }
}

#[test]
fn reduced_phase_reproduces_leading_phase() {
    // ψ(x) = (1/π) κ φ(x/κ), κ = √(1 − x²)
    let lin = build_linear_model(1.0).unwrap();
    assert!((reduced_phase(&lin, 1.0, 1e-12).unwrap() + 0.5 * PI).abs() < 1e-9);
    let p = build_family_profile(FamilyParameters::new(-0.5, 0.1), RHO, GridSpec::default()).unwrap();
    for x in [0.2f64, 0.5, 0.8] {
        let kappa = (1.0 - x * x).sqrt();
        let via_phi = kappa * reduced_phase(&p, x / kappa, 1e-12).unwrap() / PI;
        assert!((via_phi - leading_phase(&p, x, 1e-12).unwrap()).abs() < 1e-9, "x = {x}");
    }
}

#[test]
fn exact_phase_shift_has_second_order_remainder() {
    // h·δ − ψ − h/4 is O(h²): halving h divides it by about 4
    let p = build_linear_model(1.0).unwrap();
    let opts = ExactOptions::default();
    for x in [0.2, 0.5, 0.8] {
        let remainder = |lambda: f64| {
            let h = 1.0 / lambda;
            let r = solve_phase_shift(&p, x, h, &opts).unwrap();
            assert!((r.reflection_modulus - 1.0).abs() < 1e-6);
            assert!(r.flux_defect < 1e-6);
            assert!(r.est_error < 1e-6);
            h * r.delta - (-0.5 * x) - 0.25 * h
        };
        let ratio = remainder(100.0) / remainder(200.0);
        assert!((3.0..5.0).contains(&ratio), "x = {x}: ratio {ratio}");
    }
}
