//! Randomized checks of the critical value on the two-torus.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use magspec_core::geometry::{differential, make_grid, Geometry, GeometryKind, Grid, ScalarPotential, VectorPotential};
use magspec_core::mane::{critical_value, verify_lambda0_le_c};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus(n: usize) -> Grid {
    make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0, 1.0] }).unwrap(), &[n, n]).unwrap()
}

/// Low-mode trigonometric field with random coefficients.
fn smooth(rng: &mut ChaCha8Rng, amplitude: f64) -> impl Fn(&[f64]) -> f64 {
    let c: Vec<[f64; 4]> = (0..3).map(|_| [0; 4].map(|_| rng.random_range(-amplitude..amplitude))).collect();
    move |x: &[f64]| {
        c.iter()
            .enumerate()
            .map(|(m, k)| {
                let (s, t) = (2.0 * PI * m as f64 * x[0], 2.0 * PI * x[1]);
                k[0] * s.cos() + k[1] * (s + t).sin() + k[2] * t.cos() * (m as f64) + k[3]
            })
            .sum()
    }
}

fn random_fields(rng: &mut ChaCha8Rng, g: &Grid) -> (VectorPotential, ScalarPotential) {
    let ax = smooth(rng, 1.0);
    let ay = smooth(rng, 1.0);
    let v = smooth(rng, 0.5);
    let alpha = g.sample_form(|x, k| if k == 0 { ax(x) } else { ay(x) });
    (alpha, ScalarPotential::new(g.sample(v)))
}

#[test]
fn ground_state_energy_never_exceeds_critical_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = torus(16);
    for _ in 0..10 {
        let (alpha, v) = random_fields(&mut rng, &g);
        let report = verify_lambda0_le_c(&g, &alpha, &v).unwrap();
        assert!(report.lambda0 <= report.c + report.tolerance);
    }
}

#[test]
fn gauge_invariance_of_critical_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = torus(16);
    let (alpha, v) = random_fields(&mut rng, &g);
    let f0 = smooth(&mut rng, 0.3);
    let shifted = alpha.add(&differential(&g, &g.sample(f0)));
    let a = critical_value(&g, &alpha, &v, 1e-5).unwrap();
    let b = critical_value(&g, &shifted, &v, 1e-5).unwrap();
    assert_abs_diff_eq!(a.value, b.value, epsilon = 2e-5);
    assert!(a.lower_bound <= a.value + 1e-12);
}
