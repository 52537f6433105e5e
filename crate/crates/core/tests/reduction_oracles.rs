//! Cross-checks of the reduced families against closed forms and against direct
//! two- and three-dimensional discretizations.

use approx::assert_abs_diff_eq;
use magspec_core::assembly::{assemble, Character, Convention};
use magspec_core::closedform;
use magspec_core::eigensolve::{dense_lowest, solve_effective_1d, BoundaryCondition};
use magspec_core::geometry::{make_grid, Geometry, GeometryKind, ScalarPotential};
use magspec_core::reduction::{
    build_family, build_family_with, kepler_operator, maass_strip_oracle, minimize_over_momenta,
    sol_monopole_reduction, sol_monopole_unfolded, FamilyName, SolverSettings, StripWindow,
};

#[test]
fn maass_two_dimensional_oracle() {
    let family = minimize_over_momenta(&build_family("maass", &[2.0]).unwrap()).unwrap().value;
    let strip = maass_strip_oracle(2.0, 8, 0.04, 4.0).unwrap().lowest(1, 1e-8).unwrap().lowest();
    assert_abs_diff_eq!(family, 1.0, epsilon = 5e-3);
    assert_abs_diff_eq!(strip, family, epsilon = 5e-3);
}

#[test]
fn sphere_bundle_sweep() {
    let s = SolverSettings::default();
    for b in [0.0, 0.5, 0.875, 0.95, 1.5, 2.25, 3.0] {
        let r = minimize_over_momenta(&build_family_with(FamilyName::SphereBundleH, &[b], s.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, closedform::sphere_bundle_h_lambda0(b), epsilon = 5e-3);
        assert!(r.certificate.unwrap().bound > r.value);
    }
}

#[test]
fn sl2_sweep() {
    let s = SolverSettings::default();
    for b in [0.0, 0.6, 1.0, 1.5, 2.5] {
        let r = minimize_over_momenta(&build_family_with(FamilyName::Sl2Universal, &[b], s.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, closedform::sl2_universal_lambda0(b), epsilon = 5e-3);
    }
}

#[test]
fn nil_numeric_inner_sweep() {
    for b in [0.2, 0.5, 1.0, 3.0] {
        let r = minimize_over_momenta(&build_family("nil", &[b]).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, closedform::nil_universal_lambda0(b), epsilon = 5e-3);
    }
}

#[test]
fn sol_generic_fields() {
    let r = minimize_over_momenta(&build_family("sol", &[0.6, 0.8]).unwrap()).unwrap();
    assert!(r.value >= 0.5 * (1.0 - 0.25) - 5e-3);
    let member = closedform::sol_facts(0.6, 0.8).member_point.unwrap();
    assert!(r.samples.iter().any(|s| (s.value - member).abs() <= 5e-3));
    let small = minimize_over_momenta(&build_family("sol", &[0.4, 0.3]).unwrap()).unwrap();
    assert_abs_diff_eq!(small.value, 0.125, epsilon = 5e-3);
}

#[test]
fn sol_three_dimensional_normalization() {
    let family = minimize_over_momenta(&build_family("sol", &[0.0, 0.0]).unwrap()).unwrap().value;
    // Periods e^{12} keep the x and y link weights of order one across z ∈ [−12, 12].
    let l = 12f64.exp();
    let geom = Geometry::build(GeometryKind::SolCover { x: [0.0, l], y: [0.0, l], z: [-12.0, 12.0] })
        .unwrap()
        .with_periodic_axis(0)
        .unwrap()
        .with_periodic_axis(1)
        .unwrap();
    let grid = make_grid(&geom, &[4, 4, 120]).unwrap();
    let alpha = magspec_core::geometry::VectorPotential::zeros(&grid);
    let op = assemble(&grid, &alpha, &ScalarPotential::zeros(&grid), &Character::trivial(3), Convention::Half).unwrap();
    let direct = dense_lowest(&op.matrix, 1).unwrap().lowest();
    assert_abs_diff_eq!(family, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(direct, family, epsilon = 1e-2);
}

#[test]
fn kepler_levels() {
    let s = SolverSettings::default();
    for b in [0.0, 0.1] {
        for m in 1..=3i64 {
            let r = solve_effective_1d(&kepler_operator(b, m, 0.0, &s), 3).unwrap();
            for n in 0..3u64 {
                let exact = closedform::kepler(b, m, n).unwrap();
                let rel = (r.eigenvalues[n as usize] - exact).abs() / exact.abs();
                assert!(rel <= 1e-3, "m={m} n={n} B={b}: {} vs {exact}", r.eigenvalues[n as usize]);
            }
        }
    }
    let bohr = solve_effective_1d(&kepler_operator(0.0, 0, 0.0, &s), 1).unwrap().lowest();
    assert_abs_diff_eq!(bohr, -2.0, epsilon = 1e-2);
}

#[test]
fn kepler_boundary_sensitivity() {
    let s = SolverSettings::default();
    // A lattice wall condition `u = 0` at `r = shift · h`, applied to every mode alike.
    let shifted = |m: i64, shift: f64| {
        let mut eff = kepler_operator(0.0, m, shift, &s);
        eff.left_bc = BoundaryCondition::Dirichlet;
        eff.extrapolate = true;
        solve_effective_1d(&eff, 1).unwrap().lowest()
    };
    let d0 = (shifted(0, 1.0) - shifted(0, 0.5)).abs();
    let d1 = (shifted(1, 1.0) - shifted(1, 0.5)).abs();
    eprintln!("sensitivity m=0 {d0:e}, m=1 {d1:e}");
    assert!(d0 > 1e-3);
    assert!(d1 <= 1e-6);
}

#[test]
fn monopole_translation_invariance() {
    let w = StripWindow { x: [-8.0, 8.0], z: [-1.0, 0.5], nodes: [160, 30] };
    let a = sol_monopole_unfolded(1.0, 0.0, &w).unwrap().lowest(1, 1e-9).unwrap().lowest();
    let b = sol_monopole_unfolded(1.0, 1.0, &w).unwrap().lowest(1, 1e-9).unwrap().lowest();
    assert_abs_diff_eq!(a, b, epsilon = 1e-6);
}

#[test]
fn monopole_free_case_approaches_zero() {
    let lowest = |x: f64, z: [f64; 2], nz: usize| {
        let w = StripWindow { x: [-x, x], z, nodes: [40, nz] };
        sol_monopole_reduction(0.0, 0.0, &w).unwrap().lowest(1, 1e-8).unwrap().lowest()
    };
    let mid = lowest(100.0, [-16.0, 5.0], 105);
    let wide = lowest(300.0, [-24.0, 6.0], 150);
    assert!(wide < mid);
    assert!((0.0..0.01).contains(&wide), "{wide}");
}
