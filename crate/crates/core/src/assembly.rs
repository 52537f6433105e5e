//! Discrete magnetic Schrödinger operators in divergence form.
//!
//! The quadratic form is built from Peierls link differences
//! `G⁺_k u(i) = (e^{i h_k α_k(i)} u(i + e_k) − u(i)) / (i h_k)`, so conjugation by a nodal
//! phase `e^{if}` maps the operator for `α` exactly to the one for `α + df`. Diagonal metric
//! terms sit on links with node weights averaged along the link; off-diagonal terms use the
//! average over the four forward/backward orientation pairs, which keeps the form positive.
//! The stored matrix is `W^{-1/2} Q W^{-1/2} + V` with `W` the node measure.

use std::f64::consts::PI;
use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{differential, Boundary, GaugeFunction, Grid, Neighbor, ScalarPotential, VectorPotential};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `½ d_α* d_α + V`.
    Half,
    /// Twice the half convention.
    Double,
}

impl Convention {
    /// Factor converting a value in this convention to the half convention.
    pub fn to_half(self) -> f64 {
        match self {
            Convention::Half => 1.0,
            Convention::Double => 0.5,
        }
    }
}

/// Bloch character: one angle per chart axis, zero on Dirichlet axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub angles: Vec<f64>,
}

impl Character {
    pub fn trivial(dim: usize) -> Self {
        Self { angles: vec![0.0; dim] }
    }

    pub fn new(grid: &Grid, angles: &[f64]) -> Result<Self> {
        if angles.len() != grid.dim() {
            return Err(Error::ShapeMismatch(format!("{} character angles for dimension {}", angles.len(), grid.dim())));
        }
        let mut reduced = Vec::with_capacity(angles.len());
        for (k, &t) in angles.iter().enumerate() {
            if grid.boundary[k] == Boundary::Dirichlet && t != 0.0 {
                return Err(Error::ShapeMismatch(format!("character angle on non-periodic axis {k}")));
            }
            reduced.push(t.rem_euclid(2.0 * PI));
        }
        Ok(Self { angles: reduced })
    }

    /// Harmonic form `Σ_k θ_k / L_k dx^k`.
    pub fn representative_form(&self, grid: &Grid) -> VectorPotential {
        let c: Vec<f64> = (0..grid.dim())
            .map(|k| match grid.geometry.identification(k) {
                Some(id) => self.angles[k] / id.period,
                None => 0.0,
            })
            .collect();
        VectorPotential::constant(grid, &c)
    }
}

#[derive(Clone, Debug)]
pub struct AssembledOperator {
    pub matrix: CsrMatrix,
    pub weights: Vec<f64>,
    pub convention: Convention,
    pub character: Character,
    pub nodes: Vec<usize>,
    pub min_v: f64,
    /// Lower-bound slack of the Rayleigh quotient below `min V` (zero: the kinetic form is positive).
    pub slack: f64,
}

impl AssembledOperator {
    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    /// Euclidean Rayleigh quotient in the symmetrically scaled basis.
    pub fn rayleigh_quotient(&self, u: &[Complex64]) -> f64 {
        let hu = self.matrix.apply(u);
        let num: Complex64 = u.iter().zip(&hu).map(|(a, b)| a.conj() * b).sum();
        num.re / u.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    pub fn write_matrix_market(&self, w: impl io::Write) -> io::Result<()> {
        self.matrix.write_matrix_market(w)
    }
}

/// Forward neighbour on axis `k` of node `i` and the full link phase (Peierls term, character
/// and identification phase).
fn forward_link(grid: &Grid, alpha: &VectorPotential, chi: &Character, i: usize, k: usize) -> (Neighbor, f64) {
    let nb = grid.neighbor(i, k, true);
    let mut phase = grid.h[k] * alpha.get(i, k);
    if let Neighbor::Wrap(j) = nb {
        phase += chi.angles[k];
        if let Some(id) = grid.geometry.identification(k) {
            if !id.phase.is_empty() {
                phase += id.phase_at(&grid.coords(j));
            }
        }
    }
    (nb, phase)
}

type Stencil = Vec<(usize, Complex64)>;

/// `i h_k G^±_k u(i)` as a sparse row.
fn link_row(grid: &Grid, alpha: &VectorPotential, chi: &Character, i: usize, k: usize, forward: bool) -> Stencil {
    let inv_h = 1.0 / grid.h[k];
    if forward {
        let (nb, phase) = forward_link(grid, alpha, chi, i, k);
        let mut row = vec![(i, Complex64::new(-inv_h, 0.0))];
        if let Neighbor::Interior(j) | Neighbor::Wrap(j) = nb {
            row.push((j, Complex64::from_polar(inv_h, phase)));
        }
        row
    } else {
        let mut row = vec![(i, Complex64::new(inv_h, 0.0))];
        if let Neighbor::Interior(j) | Neighbor::Wrap(j) = grid.neighbor(i, k, false) {
            let (_, phase) = forward_link(grid, alpha, chi, j, k);
            row.push((j, -Complex64::from_polar(inv_h, -phase)));
        }
        row
    }
}

/// Add `c · (r† s + s† r)` (or `c · r† r` when `same`) to the triplet list.
fn add_outer(t: &mut Vec<(usize, usize, Complex64)>, c: f64, r: &Stencil, s: &Stencil, same: bool) {
    for &(a, ra) in r {
        for &(b, sb) in s {
            t.push((a, b, c * ra.conj() * sb));
            if !same {
                t.push((b, a, c * sb.conj() * ra));
            }
        }
    }
}

pub fn assemble(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    character: &Character,
    convention: Convention,
) -> Result<AssembledOperator> {
    let n = grid.len();
    let d = grid.dim();
    if alpha.dim != d || alpha.values.len() != n * d || v.values.len() != n || character.angles.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "grid has {n} nodes in dimension {d}; α has {} values, V has {}, character has {} angles",
            alpha.values.len(),
            v.values.len(),
            character.angles.len()
        )));
    }
    if !alpha.is_finite() || v.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::ShapeMismatch("non-finite potential values".into()));
    }
    let cell = grid.cell_volume();
    let coords = grid.all_coords();
    // a[i] = g^{jk} √|g| Π h at node i.
    let a: Vec<Vec<f64>> = coords
        .iter()
        .map(|x| {
            let s = grid.geometry.volume_density(x) * cell;
            grid.geometry.metric_inverse(x).into_iter().map(|g| g * s).collect()
        })
        .collect();
    let weights: Vec<f64> = coords.iter().map(|x| grid.geometry.volume_density(x) * cell).collect();

    let mut t = Vec::with_capacity(n * (4 * d + 8 * d * d));
    for i in 0..n {
        for k in 0..d {
            let row = link_row(grid, alpha, character, i, k, true);
            let w = match grid.neighbor(i, k, true) {
                Neighbor::Interior(j) | Neighbor::Wrap(j) => 0.5 * (a[i][k * d + k] + a[j][k * d + k]),
                Neighbor::Outside => a[i][k * d + k],
            };
            add_outer(&mut t, 0.5 * w, &row, &row, true);
            if grid.neighbor(i, k, false) == Neighbor::Outside {
                let inv_h2 = 1.0 / (grid.h[k] * grid.h[k]);
                t.push((i, i, Complex64::new(0.5 * a[i][k * d + k] * inv_h2, 0.0)));
            }
        }
        for j in 0..d {
            for k in j + 1..d {
                let ajk = a[i][j * d + k];
                if ajk == 0.0 {
                    continue;
                }
                for sj in [true, false] {
                    let rj = link_row(grid, alpha, character, i, j, sj);
                    for sk in [true, false] {
                        let rk = link_row(grid, alpha, character, i, k, sk);
                        add_outer(&mut t, 0.5 * 0.25 * ajk, &rj, &rk, false);
                    }
                }
            }
        }
    }
    let inv_sqrt_w: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    for tr in t.iter_mut() {
        tr.2 *= inv_sqrt_w[tr.0] * inv_sqrt_w[tr.1];
    }
    t.extend(v.values.iter().enumerate().map(|(i, &x)| (i, i, Complex64::new(x, 0.0))));
    let mut matrix = CsrMatrix::from_triplets(n, t);
    let dev = matrix.hermitian_deviation();
    if dev > 1e-12 * matrix.max_abs().max(1.0) {
        return Err(Error::NonHermitianAssembly(dev));
    }
    matrix.hermitize();
    if convention == Convention::Double {
        matrix.scale(2.0);
    }
    Ok(AssembledOperator {
        matrix,
        weights,
        convention,
        character: character.clone(),
        nodes: grid.nodes.clone(),
        min_v: v.min,
        slack: 0.0,
    })
}

/// `α + df` with the same link stencil used by the operator.
pub fn gauge_shift(grid: &Grid, alpha: &VectorPotential, f: &GaugeFunction) -> VectorPotential {
    alpha.add(&differential(grid, &f.values))
}

/// Lattice shift by whole grid cells together with its phase function.
#[derive(Clone, Debug)]
pub struct MagneticTranslation {
    pub shift: Vec<i64>,
    pub phase_function: GaugeFunction,
}

impl MagneticTranslation {
    /// `f_γ(x) = Σ_j λ_j a_{2j−1} x_{2j}` with `a` the physical shift; `f_γ` vanishes at the chart origin.
    pub fn new(grid: &Grid, lambdas: &[f64], shift: &[i64]) -> Result<Self> {
        if shift.len() != grid.dim() {
            return Err(Error::ShapeMismatch("shift length differs from grid dimension".into()));
        }
        crate::geometry::check_pairs(lambdas.len(), grid.dim())?;
        for (k, &s) in shift.iter().enumerate() {
            if s != 0 && grid.boundary[k] != Boundary::Periodic {
                return Err(Error::NonLatticeShift(format!("axis {k} is not periodic")));
            }
        }
        let a: Vec<f64> = shift.iter().zip(&grid.h).map(|(&s, &h)| s as f64 * h).collect();
        for (j, &lam) in lambdas.iter().enumerate() {
            let (p, q) = (2 * j, 2 * j + 1);
            let periods = [grid.geometry.bounds[p][1] - grid.geometry.bounds[p][0], grid.geometry.bounds[q][1] - grid.geometry.bounds[q][0]];
            for ph in [lam * a[p] * periods[1], lam * a[q] * periods[0]] {
                let turns = ph / (2.0 * PI);
                if (turns - turns.round()).abs() > 1e-9 {
                    return Err(Error::NonLatticeShift(format!(
                        "shift {shift:?} does not commute with the identifications (phase {turns} turns)"
                    )));
                }
            }
        }
        let f = grid.sample(|x| lambdas.iter().enumerate().map(|(j, lam)| lam * a[2 * j] * x[2 * j + 1]).sum());
        Ok(Self { shift: shift.to_vec(), phase_function: GaugeFunction { values: f } })
    }
}

/// `(T u)(x) = e^{i f_γ(x)} u(x + a)`, reading `u` on the cover through the identification phases.
pub fn apply_magnetic_translation(u: &[Complex64], grid: &Grid, lambdas: &[f64], shift: &[i64]) -> Result<Vec<Complex64>> {
    if u.len() != grid.len() {
        return Err(Error::ShapeMismatch("vector length differs from grid size".into()));
    }
    let t = MagneticTranslation::new(grid, lambdas, shift)?;
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let m = grid.multi_index(i);
        let mut src = m.clone();
        let mut phase = t.phase_function.values[i];
        let mut cover: Vec<f64> = grid.coords(i);
        for k in 0..grid.dim() {
            cover[k] += shift[k] as f64 * grid.h[k];
        }
        for k in 0..grid.dim() {
            let n = grid.nodes[k] as i64;
            let target = m[k] as i64 + shift[k];
            let wraps = target.div_euclid(n);
            src[k] = target.rem_euclid(n) as usize;
            if let Some(id) = grid.geometry.identification(k) {
                if wraps != 0 && !id.phase.is_empty() {
                    // u(y + w L e_k) = e^{i w ψ(y)} u(y); ψ does not involve axis k.
                    phase += wraps as f64 * id.phase_at(&cover);
                }
            }
        }
        *o = Complex64::from_polar(1.0, phase) * u[grid.index(&src)];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_grid, model_potential_torus, Geometry, GeometryKind};

    fn circle(n: usize) -> Grid {
        make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0] }).unwrap(), &[n]).unwrap()
    }

    fn lowest(op: &AssembledOperator) -> f64 {
        let m = op.matrix.to_dense();
        m.self_adjoint_eigen(faer::Side::Lower).unwrap().S().column_vector()[0].re
    }

    #[test]
    fn circle_flux_law() {
        let g = circle(128);
        for a in [0.0, 0.2, 0.5] {
            let al = VectorPotential::constant(&g, &[2.0 * PI * a]);
            let op = assemble(&g, &al, &ScalarPotential::zeros(&g), &Character::trivial(1), Convention::Half).unwrap();
            let want = 2.0 * PI * PI * (a - a.round()).powi(2);
            assert!((lowest(&op) - want).abs() < 1e-3, "a={a}");
        }
    }

    #[test]
    fn character_equals_harmonic_shift() {
        let g = circle(32);
        let al = g.sample_form(|x, _| (2.0 * PI * x[0]).sin());
        let v = ScalarPotential::new(g.sample(|x| (2.0 * PI * x[0]).cos()));
        let chi = Character::new(&g, &[1.1]).unwrap();
        let a = assemble(&g, &al, &v, &chi, Convention::Half).unwrap();
        let b = assemble(&g, &al.add(&chi.representative_form(&g)), &v, &Character::trivial(1), Convention::Half).unwrap();
        assert!((lowest(&a) - lowest(&b)).abs() < 1e-10);
        let line: f64 = chi.representative_form(&g).values.iter().map(|c| c * g.h[0]).sum();
        assert!((line - 1.1).abs() < 1e-12);
    }

    #[test]
    fn double_convention_doubles() {
        let g = circle(16);
        let z = VectorPotential::zeros(&g);
        let v = ScalarPotential::new(g.sample(|x| x[0]));
        let h = assemble(&g, &z, &v, &Character::trivial(1), Convention::Half).unwrap();
        let d = assemble(&g, &z, &v, &Character::trivial(1), Convention::Double).unwrap();
        for (a, b) in h.matrix.vals.iter().zip(&d.matrix.vals) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn shape_errors() {
        let g = circle(16);
        let bad = ScalarPotential::new(vec![0.0; 3]);
        assert!(matches!(
            assemble(&g, &VectorPotential::zeros(&g), &bad, &Character::trivial(1), Convention::Half),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn magnetic_translation_commutes() {
        let l = (16.0 * PI).sqrt();
        let geo = Geometry::magnetic_torus(vec![l, l], &[1.0]).unwrap();
        let g = make_grid(&geo, &[8, 8]).unwrap();
        let al = model_potential_torus(&[1.0], &g).unwrap();
        let op = assemble(&g, &al, &ScalarPotential::zeros(&g), &Character::trivial(2), Convention::Half).unwrap();
        let u: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        for shift in [[1, 0], [0, 1], [3, -2]] {
            let tu = apply_magnetic_translation(&u, &g, &[1.0], &shift).unwrap();
            let lhs = op.matrix.apply(&tu);
            let rhs = apply_magnetic_translation(&op.matrix.apply(&u), &g, &[1.0], &shift).unwrap();
            let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{shift:?}: {err}");
        }
        assert_eq!(apply_magnetic_translation(&u, &g, &[1.0], &[0, 0]).unwrap(), u);
        // Half a flux quantum per column is not a lattice shift.
        let geo2 = Geometry::magnetic_torus(vec![l, l], &[1.0]).unwrap();
        let g2 = make_grid(&geo2, &[16, 16]).unwrap();
        assert!(matches!(apply_magnetic_translation(&vec![Complex64::new(0.0, 0.0); 256], &g2, &[1.0], &[1, 0]), Err(Error::NonLatticeShift(_))));
    }

    #[test]
    fn plain_shift_without_field() {
        let g = make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0, 1.0] }).unwrap(), &[4, 4]).unwrap();
        let u: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let tu = apply_magnetic_translation(&u, &g, &[0.0], &[1, 0]).unwrap();
        assert_eq!(tu[0], u[1]);
        assert_eq!(tu[3], u[0]);
    }
}
