//! Acceptance criteria as executable checks. Each criterion returns a report with one entry
//! per quantitative claim; solver errors become failed entries rather than panics.

use std::f64::consts::PI;
use std::time::Instant;

use magspec_core::assembly::{assemble, gauge_shift, Character, Convention};
use magspec_core::bloch::{character_union, direct_cover_oracle, unroll};
use magspec_core::closedform;
use magspec_core::eigensolve::{dense_lowest, lowest_eigenvalues, solve_effective_1d, BoundaryCondition};
use magspec_core::error::{Error, Result};
use magspec_core::geometry::{
    differential, hodge_decompose_torus, make_grid, model_potential_torus, GaugeFunction, Geometry, GeometryKind, Grid,
    ScalarPotential, VectorPotential,
};
use magspec_core::mane::{critical_value, strict_critical_value, verify_lambda0_le_c};
use magspec_core::reduction::{
    abelian_cover_groundstate, build_family_with, kepler_operator, maass_strip_oracle, minimize_over_momenta,
    nil_abelian_branch_min, FamilyName, InnerMode, SolverSettings,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Criterion numbers in order.
pub const ALL: [u32; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

/// Seeds of the randomized property suites when none is given.
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// `|measured − target| ≤ tol`, `measured ≤ target + tol` or `measured ≥ target − tol`.
    pub relation: &'static str,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn close(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = (measured - target).abs() <= tolerance;
        Self { name: name.into(), relation: "abs_diff_le", measured, target, tolerance, pass, error: None }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = measured <= target + tolerance;
        Self { name: name.into(), relation: "le", measured, target, tolerance, pass, error: None }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = measured >= target - tolerance;
        Self { name: name.into(), relation: "ge", measured, target, tolerance, pass, error: None }
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self {
            name: name.into(),
            relation: "error",
            measured: f64::NAN,
            target: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn title(id: u32) -> &'static str {
    match id {
        1 => "Landau level on a truncated plane",
        2 => "circle flux law and flux periodicity",
        3 => "Maass ground state from the reduced family and the strip oracle",
        4 => "sphere bundle curve and its local minimum",
        5 => "Nil universal and abelian covers",
        6 => "Sol ground states and membership",
        7 => "Kepler levels, Bohr level and boundary sensitivity",
        8 => "Mañé minimax, strict value, covers and scaling",
        9 => "ground state energy below the critical value",
        10 => "second derivative of the ground state energy",
        11 => "property suites",
        _ => "unknown criterion",
    }
}

/// Run one criterion. Property suites use `seeds`.
pub fn run(id: u32, seeds: &[u64]) -> CriterionReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    match id {
        1 => landau(&mut checks),
        2 => circle_flux(&mut checks),
        3 => maass(&mut checks),
        4 => sphere_bundle(&mut checks),
        5 => nil(&mut checks),
        6 => sol(&mut checks),
        7 => kepler(&mut checks),
        8 => mane_minimax(&mut checks),
        9 => lambda_below_c(&mut checks, seeds.first().copied().unwrap_or(9)),
        10 => second_derivative(&mut checks),
        11 => properties(&mut checks, seeds),
        _ => checks.push(Check::failed("criterion", &Error::InvalidArgument(format!("no criterion {id}")))),
    }
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    CriterionReport { id, title: title(id), checks, pass, seconds: start.elapsed().as_secs_f64() }
}

/// Push the checks produced by `f`, or one failed entry if it errors.
fn guarded(checks: &mut Vec<Check>, name: &str, f: impl FnOnce(&mut Vec<Check>) -> Result<()>) {
    let mut local = Vec::new();
    match f(&mut local) {
        Ok(()) => checks.extend(local),
        Err(e) => {
            checks.extend(local);
            checks.push(Check::failed(name, &e));
        }
    }
}

fn torus(lengths: &[f64], nodes: &[usize]) -> Result<Grid> {
    make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: lengths.to_vec() })?, nodes)
}

fn lowest(grid: &Grid, alpha: &VectorPotential, v: &ScalarPotential, k: usize) -> Result<Vec<f64>> {
    let op = assemble(grid, alpha, v, &Character::trivial(grid.dim()), Convention::Half)?;
    Ok(dense_lowest(&op.matrix, k)?.eigenvalues)
}

fn landau(checks: &mut Vec<Check>) {
    guarded(checks, "landau_lambda0", |c| {
        let geom = Geometry::build(GeometryKind::PlaneTruncated { half_widths: vec![8.0, 8.0] })?;
        let grid = make_grid(&geom, &[256, 256])?;
        let alpha = model_potential_torus(&[1.0], &grid)?;
        let op = assemble(&grid, &alpha, &ScalarPotential::zeros(&grid), &Character::trivial(2), Convention::Half)?;
        let r = lowest_eigenvalues(&op.matrix, 3, 1e-4)?;
        c.push(Check::close("relative_error", (r.lowest() - 0.5).abs() / 0.5, 0.0, 0.02));
        Ok(())
    });
}

fn circle_flux(checks: &mut Vec<Check>) {
    guarded(checks, "circle", |c| {
        let g = torus(&[1.0], &[256])?;
        let zero = ScalarPotential::zeros(&g);
        let at = |a: f64| -> Result<f64> { Ok(lowest(&g, &VectorPotential::constant(&g, &[2.0 * PI * a]), &zero, 1)?[0]) };
        for a in [0.0, 0.2, 0.5, 0.8, 1.3] {
            let l = at(a)?;
            let dist = a - a.round();
            c.push(Check::close(format!("lambda0(a={a})"), l, 2.0 * PI * PI * dist * dist, 1e-3));
            c.push(Check::close(format!("periodicity(a={a})"), at(a + 1.0)? - l, 0.0, 1e-9));
        }
        Ok(())
    });
}

fn maass(checks: &mut Vec<Check>) {
    let s = SolverSettings::default();
    let mut family_at_two = None;
    for b in [0.3, 1.0, 2.0] {
        guarded(checks, &format!("family(B={b})"), |c| {
            let r = minimize_over_momenta(&build_family_with(FamilyName::Maass, &[b], s.clone())?)?;
            c.push(Check::close(format!("family(B={b})"), r.value, closedform::maass(b).lambda0, 5e-3));
            if b == 2.0 {
                family_at_two = Some(r.value);
            }
            Ok(())
        });
    }
    guarded(checks, "strip(B=2)", |c| {
        let strip = maass_strip_oracle(2.0, 8, 0.04, 4.0)?.lowest(1, 1e-8)?.lowest();
        let family = family_at_two.unwrap_or(f64::NAN);
        c.push(Check::close("strip_vs_family(B=2)", strip, family, 5e-3));
        Ok(())
    });
}

/// Numeric sphere bundle curve on `B = k/64`, `k = 0..=192`.
pub fn sphere_bundle_curve() -> Result<(Vec<f64>, Vec<f64>)> {
    let s = SolverSettings::default();
    let bs: Vec<f64> = (0..=192).map(|k| k as f64 / 64.0).collect();
    let values = bs
        .par_iter()
        .map(|&b| Ok(minimize_over_momenta(&build_family_with(FamilyName::SphereBundleH, &[b], s.clone())?)?.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok((bs, values))
}

/// Interior indices where the sampled curve has a strict local minimum.
pub fn local_minima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] < y[i - 1] && y[i] <= y[i + 1]).collect()
}

/// Interior indices where the sampled curve has a strict local maximum.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1]).collect()
}

fn sphere_bundle(checks: &mut Vec<Check>) {
    guarded(checks, "sweep", |c| {
        let (bs, values) = sphere_bundle_curve()?;
        let err = bs
            .iter()
            .zip(&values)
            .map(|(&b, v)| (v - closedform::sphere_bundle_h_lambda0(b)).abs())
            .fold(0.0, f64::max);
        c.push(Check::at_most("sweep_max_error", err, 0.0, 5e-3));
        // The claimed minimum: closest detected local minimum to 7/8 and its value.
        let minima = local_minima(&values);
        let nearest = minima.iter().copied().min_by(|&i, &j| (bs[i] - 0.875).abs().total_cmp(&(bs[j] - 0.875).abs()));
        let (at, value) = nearest.map_or((f64::NAN, f64::NAN), |i| (bs[i], values[i]));
        c.push(Check::close("local_minimum_location", at, 0.875, 1.0 / 64.0));
        c.push(Check::close("local_minimum_value", value, 65.0 / 128.0, 5e-3));
        // What the curve does at 7/8 instead.
        let kink = local_maxima(&values).into_iter().find(|&i| (bs[i] - 0.875).abs() <= 1.0 / 64.0);
        let (at, value) = kink.map_or((f64::NAN, f64::NAN), |i| (bs[i], values[i]));
        c.push(Check::close("local_maximum_location", at, 0.875, 1.0 / 64.0));
        c.push(Check::close("local_maximum_value", value, 65.0 / 128.0, 5e-3));
        Ok(())
    });
}

fn nil(checks: &mut Vec<Check>) {
    let mut s = SolverSettings::default();
    s.inner = InnerMode::ClosedForm;
    for b in [0.2, 0.5, 1.0, 3.0] {
        guarded(checks, &format!("universal(B={b})"), |c| {
            let r = minimize_over_momenta(&build_family_with(FamilyName::Nil, &[b], s.clone())?)?;
            c.push(Check::close(format!("universal(B={b})"), r.value, closedform::nil_universal_lambda0(b), 1e-6));
            Ok(())
        });
    }
    for b in [0.0, 1.0, 3.0, 3.2, 7.5, 12.0, 18.8, 25.0] {
        guarded(checks, &format!("abelian(B={b})"), |c| {
            let fam = build_family_with(FamilyName::NilAbelian, &[b], s.clone())?;
            let r = abelian_cover_groundstate(&fam, 5)?;
            c.push(Check::close(format!("abelian(B={b})"), r.value, nil_abelian_branch_min(b, 5), 1e-12));
            Ok(())
        });
    }
}

fn sol(checks: &mut Vec<Check>) {
    let s = SolverSettings::default();
    let family = |bx: f64, by: f64| minimize_over_momenta(&build_family_with(FamilyName::Sol, &[bx, by], s.clone())?);
    guarded(checks, "sol(1,0)", |c| {
        let r = family(1.0, 0.0)?;
        c.push(Check::close("lambda0(1,0)", r.value, 0.375, 5e-3));
        let at_min = r.samples.iter().find(|m| m.params == r.argmin).map_or(f64::NAN, |m| m.amplitude);
        c.push(Check::at_most("wall_amplitude_at_argmin(1,0)", at_min, 0.0, 1e-8));
        Ok(())
    });
    guarded(checks, "sol(0.6,0.8)", |c| {
        let r = family(0.6, 0.8)?;
        c.push(Check::at_least("lambda0(0.6,0.8)", r.value, 0.5 * (1.0 - 0.25), 5e-3));
        let member = 0.5 * (0.6 + 0.64 - 0.25);
        let nearest = r.samples.iter().map(|m| (m.value - member).abs()).fold(f64::INFINITY, f64::min);
        c.push(Check::at_most("membership(0.6,0.8)", nearest, 0.0, 5e-3));
        Ok(())
    });
    guarded(checks, "sol(0.4,0.3)", |c| {
        c.push(Check::close("lambda0(0.4,0.3)", family(0.4, 0.3)?.value, 0.125, 5e-3));
        Ok(())
    });
}

fn kepler(checks: &mut Vec<Check>) {
    let s = SolverSettings::default();
    guarded(checks, "levels", |c| {
        for b in [0.0, 0.1] {
            for m in 1..=3i64 {
                let r = solve_effective_1d(&kepler_operator(b, m, 0.0, &s), 3)?;
                for n in 0..3u64 {
                    let exact = closedform::kepler(b, m, n)?;
                    let rel = (r.eigenvalues[n as usize] - exact).abs() / exact.abs();
                    c.push(Check::at_most(format!("relative_error(B={b},m={m},n={n})"), rel, 0.0, 1e-3));
                }
            }
        }
        let bohr = solve_effective_1d(&kepler_operator(0.0, 0, 0.0, &s), 1)?.lowest();
        c.push(Check::close("bohr_level", bohr, -2.0, 1e-2));
        Ok(())
    });
    guarded(checks, "sensitivity", |c| {
        let shifted = |m: i64, shift: f64| -> Result<f64> {
            let mut eff = kepler_operator(0.0, m, shift, &s);
            eff.left_bc = BoundaryCondition::Dirichlet;
            eff.extrapolate = true;
            Ok(solve_effective_1d(&eff, 1)?.lowest())
        };
        c.push(Check::at_least("sensitivity(m=0)", (shifted(0, 1.0)? - shifted(0, 0.5)?).abs(), 1e-3, 0.0));
        c.push(Check::at_most("sensitivity(m=1)", (shifted(1, 1.0)? - shifted(1, 0.5)?).abs(), 1e-6, 0.0));
        Ok(())
    });
}

fn mane_minimax(checks: &mut Vec<Check>) {
    guarded(checks, "mane", |c| {
        let g = torus(&[1.0], &[256])?;
        let alpha = g.sample_form(|x, _| 0.7 + (2.0 * PI * x[0]).sin());
        let v = ScalarPotential::zeros(&g);
        let base = critical_value(&g, &alpha, &v, 1e-4)?;
        c.push(Check::close("c", base.value, 0.245, 1e-3));
        c.push(Check::at_most("gap", base.gap, 0.0, 1e-3));
        let strict = strict_critical_value(&g, &alpha, &v, &[vec![1.0]], 1e-4)?;
        c.push(Check::close("strict_c0", strict.value, 0.0, 1e-3));
        for n in [2usize, 3] {
            let (cover, a, w) = unroll(&g, &alpha, &v, &[n])?;
            let lifted = critical_value(&cover, &a, &w, 1e-4)?;
            c.push(Check::close(format!("cover(folds={n})"), lifted.value, base.value, 2e-3));
        }
        for b in [0.5, 2.0] {
            let scaled = critical_value(&g, &alpha.scaled(b), &v, 1e-4)?;
            c.push(Check::close(format!("scaling(B={b})"), scaled.value, b * b * base.value, 1e-3 * (1.0 + b * b)));
        }
        Ok(())
    });
}

/// Low-mode trigonometric field with random coefficients on the unit torus.
fn smooth_field(rng: &mut ChaCha8Rng, amplitude: f64) -> impl Fn(&[f64]) -> f64 {
    let c: Vec<[f64; 4]> = (0..3).map(|_| [0; 4].map(|_| rng.random_range(-amplitude..amplitude))).collect();
    move |x: &[f64]| {
        let y = x.get(1).copied().unwrap_or(0.0);
        c.iter()
            .enumerate()
            .map(|(m, k)| {
                let (s, t) = (2.0 * PI * m as f64 * x[0], 2.0 * PI * y);
                k[0] * s.cos() + k[1] * (s + t).sin() + k[2] * t.cos() * m as f64 + k[3]
            })
            .sum()
    }
}

fn random_form(rng: &mut ChaCha8Rng, g: &Grid, amplitude: f64) -> VectorPotential {
    let parts: Vec<_> = (0..g.dim()).map(|_| smooth_field(rng, amplitude)).collect();
    g.sample_form(|x, k| parts[k](x))
}

fn lambda_below_c(checks: &mut Vec<Check>, seed: u64) {
    guarded(checks, "randomized", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = torus(&[1.0, 1.0], &[16, 16])?;
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..10 {
            let alpha = random_form(&mut rng, &g, 1.0);
            let v = ScalarPotential::new(g.sample(smooth_field(&mut rng, 0.5)));
            match verify_lambda0_le_c(&g, &alpha, &v) {
                Ok(r) => worst = worst.max(r.lambda0 - r.c - r.tolerance),
                Err(Error::ViolationFound { lambda0, c, tol }) => {
                    violations += 1;
                    worst = worst.max(lambda0 - c - tol);
                }
                Err(e) => return Err(e),
            }
        }
        c.push(Check::at_most("violations", violations as f64, 0.0, 0.0));
        c.push(Check::at_most("worst_excess", worst, 0.0, 0.0));
        Ok(())
    });
}

fn second_derivative(checks: &mut Vec<Check>) {
    guarded(checks, "second_difference", |c| {
        let g = torus(&[1.0, 1.0], &[24, 24])?;
        let f = g.sample(|x| 0.3 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let alpha = VectorPotential::constant(&g, &[0.8, 0.0]).add(&differential(&g, &f));
        let v = ScalarPotential::zeros(&g);
        let split = hodge_decompose_torus(&g, &alpha, &[])?;
        let target = (split.norms[0].powi(2) + split.norms[1].powi(2) + split.norms[2].powi(2)) / g.volume();
        let hb = 0.05;
        let l = |b: f64| -> Result<f64> { Ok(lowest(&g, &alpha.scaled(b), &v, 1)?[0]) };
        let second = (l(hb)? - 2.0 * l(0.0)? + l(-hb)?) / (hb * hb);
        c.push(Check::at_most("relative_error", (second - target).abs() / target, 0.0, 2e-2));
        let mcv = critical_value(&g, &alpha, &v, 1e-6)?;
        c.push(Check::at_most("twice_critical_value", (2.0 * mcv.value - target).abs() / target, 0.0, 2e-2));
        Ok(())
    });
}

/// Maximum over the seeds of the six property measurements.
fn properties(checks: &mut Vec<Check>, seeds: &[u64]) {
    type Suite = fn(&mut ChaCha8Rng) -> Result<f64>;
    let suites: [(&str, Suite, f64, bool); 6] = [
        ("hermiticity", prop_hermitian, 1e-12, true),
        ("gauge_invariance", prop_gauge, 1e-8, true),
        ("diamagnetic", prop_diamagnetic, 1e-9, false),
        ("midpoint_concavity", prop_concavity, 1e-8, false),
        ("cover_oracle", prop_cover, 1e-9, true),
        ("hodge_identities", prop_hodge, 1e-10, true),
    ];
    for (name, suite, tol, upper) in suites {
        guarded(checks, name, |c| {
            let mut worst = if upper { 0.0 } else { f64::INFINITY };
            for &seed in seeds {
                let m = suite(&mut ChaCha8Rng::seed_from_u64(seed))?;
                worst = if upper { worst.max(m) } else { worst.min(m) };
            }
            c.push(if upper { Check::at_most(name, worst, 0.0, tol) } else { Check::at_least(name, worst, 0.0, tol) });
            Ok(())
        });
    }
}

/// Grids of several chart types with random fields.
fn sample_problems(rng: &mut ChaCha8Rng) -> Result<Vec<(Grid, VectorPotential, ScalarPotential)>> {
    let grids = vec![
        torus(&[1.0, 1.0], &[10, 9])?,
        make_grid(
            &Geometry::build(GeometryKind::HalfPlaneHyperbolic { x: [0.0, 1.0], y: [0.5, 3.0] })?.with_periodic_axis(0)?,
            &[8, 12],
        )?,
        make_grid(&Geometry::build(GeometryKind::PlaneTruncated { half_widths: vec![2.0, 2.0] })?, &[10, 10])?,
        make_grid(&Geometry::build(GeometryKind::SolCover { x: [0.0, 1.0], y: [0.0, 1.0], z: [-1.0, 1.0] })?, &[5, 5, 6])?,
    ];
    Ok(grids
        .into_iter()
        .map(|g| {
            let alpha = random_form(rng, &g, 1.0);
            let v = ScalarPotential::new(g.sample(smooth_field(rng, 0.5)));
            (g, alpha, v)
        })
        .collect())
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Relative failure of `⟨u, Hv⟩ = conj⟨v, Hu⟩` for random vectors.
fn prop_hermitian(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (g, alpha, v) in sample_problems(rng)? {
        let op = assemble(&g, &alpha, &v, &Character::trivial(g.dim()), Convention::Half)?;
        let (u, w) = (random_vector(rng, g.len()), random_vector(rng, g.len()));
        let ip = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
        let lhs = ip(&u, &op.matrix.apply(&w));
        let rhs = ip(&w, &op.matrix.apply(&u)).conj();
        let scale = op.matrix.max_abs() * ip(&u, &u).re.sqrt() * ip(&w, &w).re.sqrt();
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

fn prop_gauge(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (g, alpha, v) in sample_problems(rng)? {
        let f = GaugeFunction { values: g.sample(smooth_field(rng, 2.0)) };
        let a = lowest(&g, &alpha, &v, 4)?;
        let b = lowest(&g, &gauge_shift(&g, &alpha, &f), &v, 4)?;
        worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// Smallest `λ₀(α, V) − λ₀(0, V)`.
fn prop_diamagnetic(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for (g, alpha, v) in sample_problems(rng)? {
        let with = lowest(&g, &alpha, &v, 1)?[0];
        let without = lowest(&g, &VectorPotential::zeros(&g), &v, 1)?[0];
        worst = worst.min(with - without);
    }
    Ok(worst)
}

/// Smallest midpoint excess of `μ₀(B) = λ₀(Bα, V) − ½B²|α|²` for constant `α` on the torus.
fn prop_concavity(rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = torus(&[1.0, 1.0], &[12, 12])?;
    let mut worst = f64::INFINITY;
    for _ in 0..3 {
        let dir = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let alpha = VectorPotential::constant(&g, &dir);
        let v = ScalarPotential::new(g.sample(smooth_field(rng, 2.0)));
        let norm2 = dir[0] * dir[0] + dir[1] * dir[1];
        let mu = |b: f64| -> Result<f64> { Ok(lowest(&g, &alpha.scaled(b), &v, 1)?[0] - 0.5 * b * b * norm2) };
        for _ in 0..3 {
            let (b1, b2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            worst = worst.min(mu(0.5 * (b1 + b2))? - 0.5 * (mu(b1)? + mu(b2)?));
        }
    }
    Ok(worst)
}

/// Largest difference between the unrolled spectrum and the union over characters.
fn prop_cover(rng: &mut ChaCha8Rng) -> Result<f64> {
    let plain = torus(&[1.0, 1.0], &[6, 5])?;
    let magnetic = make_grid(&Geometry::magnetic_torus(vec![1.0, 1.0], &[2.0 * PI])?, &[6, 6])?;
    let mut worst: f64 = 0.0;
    for g in [plain, magnetic] {
        let background = if g.geometry.identifications.iter().any(|id| !id.phase.is_empty()) {
            model_potential_torus(&[2.0 * PI], &g)?
        } else {
            VectorPotential::zeros(&g)
        };
        let alpha = background.add(&random_form(rng, &g, 1.0));
        let v = ScalarPotential::new(g.sample(smooth_field(rng, 0.5)));
        let folds = [rng.random_range(1..=3usize), rng.random_range(1..=3usize)];
        let union = character_union(&g, &alpha, &v, &folds)?;
        let direct = direct_cover_oracle(&g, &alpha, &v, &folds)?.eigenvalues;
        if union.len() != direct.len() {
            return Err(Error::ShapeMismatch(format!("{} character eigenvalues vs {}", union.len(), direct.len())));
        }
        worst = union.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// Largest violation of the four-way split identities.
fn prop_hodge(rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = torus(&[1.0, 1.5], &[16, 12])?;
    let alpha = random_form(rng, &g, 1.0);
    let kernel = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let s = hodge_decompose_torus(&g, &alpha, &[kernel])?;
    let w = g.weights();
    let parts = [&s.harmonic_in_cover_kernel, &s.harmonic_orthogonal, &s.coexact, &s.exact];
    let sum = parts.iter().fold(VectorPotential::zeros(&g), |acc, p| acc.add(p));
    let mut worst = sum.sub(&alpha).values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let exact = differential(&g, &s.primitive.values);
    worst = exact.sub(&s.exact).values.iter().map(|x| x.abs()).fold(worst, f64::max);
    let norm = alpha.inner(&alpha, &w);
    for i in 0..4 {
        for j in i + 1..4 {
            worst = worst.max(parts[i].inner(parts[j], &w).abs() / norm);
        }
    }
    // The coexact part is orthogonal to every constant form and to every exact form.
    for k in 0..g.dim() {
        let mut e = vec![0.0; g.dim()];
        e[k] = 1.0;
        worst = worst.max(s.coexact.inner(&VectorPotential::constant(&g, &e), &w).abs() / norm.sqrt());
    }
    let probe = differential(&g, &g.sample(smooth_field(rng, 1.0)));
    worst = worst.max(s.coexact.inner(&probe, &w).abs() / (norm * probe.inner(&probe, &w)).sqrt());
    Ok(worst)
}
