//! Bloch–Floquet analysis over abelian covers of a periodic grid: twisted spectra on a set of
//! characters, merged band intervals, cover ground states, and a direct unrolled-cover check.
//!
//! A character with angles `θ_k` multiplies the wrap link of axis `k` by `e^{iθ_k}`, which is
//! the same as adding the harmonic form `Σ θ_k / L_k dx^k` to the potential. The `n`-fold
//! cover along an axis sees exactly the characters `θ = 2πj/n`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, Character, Convention};
use crate::eigensolve::{dense_spectrum, lowest_eigenvalues, SpectrumResult, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::geometry::{make_grid, Boundary, GeometryKind, Grid, Neighbor, ScalarPotential, VectorPotential};

/// Residual tolerance of the per-character eigensolves.
const CHARACTER_TOL: f64 = 1e-10;

/// Fold count of a cover along one periodic axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fold {
    Finite(u32),
    /// The full circle of characters (the universal cover along this axis).
    Full,
}

/// Fold counts, one per periodic axis in axis order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub folds: Vec<Fold>,
}

impl CoverSpec {
    pub fn new(folds: Vec<Fold>) -> Result<Self> {
        if folds.contains(&Fold::Finite(0)) {
            return Err(Error::InvalidArgument("fold counts must be at least 1".into()));
        }
        Ok(Self { folds })
    }

    pub fn full(axes: usize) -> Self {
        Self { folds: vec![Fold::Full; axes] }
    }

    pub fn finite(folds: &[u32]) -> Result<Self> {
        Self::new(folds.iter().map(|&n| Fold::Finite(n)).collect())
    }

    fn angles(&self, axis: usize, samples: usize) -> Vec<f64> {
        let n = match self.folds[axis] {
            Fold::Finite(n) => n as usize,
            Fold::Full => samples,
        };
        (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandStructure {
    pub characters: Vec<Character>,
    /// Sorted lowest-`k` eigenvalues per character.
    pub table: Vec<Vec<f64>>,
    /// Disjoint closed intervals in increasing order.
    pub bands: Vec<[f64; 2]>,
    pub cover: CoverSpec,
    pub lambda0: f64,
    pub argmin: Character,
    /// Largest change of a tabulated eigenvalue between neighbouring samples on a full axis;
    /// band edges and gaps are resolved only to this accuracy.
    pub resolution: f64,
}

fn check_periodic(grid: &Grid, cover: &CoverSpec) -> Result<()> {
    if grid.boundary.iter().any(|b| *b != Boundary::Periodic) {
        return Err(Error::InvalidArgument("Bloch analysis needs every axis periodic".into()));
    }
    if cover.folds.len() != grid.dim() {
        return Err(Error::ShapeMismatch(format!("{} fold counts for {} periodic axes", cover.folds.len(), grid.dim())));
    }
    Ok(())
}

/// Lowest `k` eigenvalues of the operator twisted by the character with the given angles.
pub fn twisted_spectrum(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    angles: &[f64],
    k: usize,
) -> Result<SpectrumResult> {
    let chi = Character::new(grid, angles)?;
    let op = assemble(grid, alpha, v, &chi, Convention::Half)?;
    lowest_eigenvalues(&op.matrix, k, CHARACTER_TOL)
}

/// Index tuples of the character sample grid, first axis fastest.
fn sample_grid(axes: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let total: usize = axes.iter().map(Vec::len).product();
    (0..total)
        .map(|mut flat| {
            axes.iter()
                .map(|ax| {
                    let i = flat % ax.len();
                    flat /= ax.len();
                    i
                })
                .collect()
        })
        .collect()
}

fn merge(mut intervals: Vec<[f64; 2]>, gap: f64) -> Vec<[f64; 2]> {
    intervals.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut out: Vec<[f64; 2]> = vec![];
    for iv in intervals {
        match out.last_mut() {
            Some(last) if iv[0] - last[1] <= gap => last[1] = last[1].max(iv[1]),
            _ => out.push(iv),
        }
    }
    out
}

/// Twisted spectra over the characters of a cover, merged into bands.
///
/// On finite folds the characters are exactly the roots of unity. On full axes they are
/// `samples_per_axis` uniform angles and each eigenvalue index sweeps an interval.
pub fn band_structure(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    cover: &CoverSpec,
    samples_per_axis: usize,
    k: usize,
) -> Result<BandStructure> {
    check_periodic(grid, cover)?;
    if samples_per_axis == 0 || k == 0 {
        return Err(Error::InvalidArgument("need at least one sample and one eigenvalue".into()));
    }
    let axes: Vec<Vec<f64>> = (0..grid.dim()).map(|a| cover.angles(a, samples_per_axis)).collect();
    let index = sample_grid(&axes);
    let mut characters = Vec::with_capacity(index.len());
    let mut table = Vec::with_capacity(index.len());
    for idx in &index {
        let angles: Vec<f64> = idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
        let r = twisted_spectrum(grid, alpha, v, &angles, k)?;
        characters.push(Character::new(grid, &angles)?);
        table.push(r.eigenvalues);
    }
    let k = table.iter().map(Vec::len).min().unwrap_or(0);

    // Samples that agree on every finite axis share a band for each eigenvalue index.
    let full: Vec<usize> = (0..grid.dim()).filter(|&a| cover.folds[a] == Fold::Full).collect();
    let key = |idx: &[usize]| -> Vec<usize> {
        idx.iter().enumerate().map(|(a, &i)| if full.contains(&a) { 0 } else { i }).collect()
    };
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = vec![];
    for (s, idx) in index.iter().enumerate() {
        let kk = key(idx);
        match groups.iter_mut().find(|(g, _)| *g == kk) {
            Some((_, members)) => members.push(s),
            None => groups.push((kk, vec![s])),
        }
    }
    let mut intervals = vec![];
    for (_, members) in &groups {
        for j in 0..k {
            let lo = members.iter().map(|&s| table[s][j]).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|&s| table[s][j]).fold(f64::NEG_INFINITY, f64::max);
            intervals.push([lo, hi]);
        }
    }
    let mut resolution = 0.0f64;
    for &a in &full {
        let n = axes[a].len();
        for (s, idx) in index.iter().enumerate() {
            let mut next = idx.clone();
            next[a] = (idx[a] + 1) % n;
            let t = index.iter().position(|x| *x == next).expect("sample grid is complete");
            for j in 0..k {
                resolution = resolution.max((table[s][j] - table[t][j]).abs());
            }
        }
    }
    let scale = table.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let bands = merge(intervals, resolution.max(1e-9 * scale));
    let (best, lambda0) = table
        .iter()
        .enumerate()
        .map(|(s, row)| (s, row[0]))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    Ok(BandStructure {
        argmin: characters[best].clone(),
        characters,
        table,
        bands,
        cover: cover.clone(),
        lambda0,
        resolution,
    })
}

/// Ground state over a cover with the minimizing character angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterMinimum {
    pub value: f64,
    pub angles: Vec<f64>,
}

/// `min_χ λ₀(χ)` over the characters of the cover. Full axes are sampled uniformly and then
/// refined by golden-section search between the neighbours of the best sample.
pub fn cover_groundstate_via_characters(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    cover: &CoverSpec,
    samples_per_axis: usize,
) -> Result<CharacterMinimum> {
    let bands = band_structure(grid, alpha, v, cover, samples_per_axis, 1)?;
    let mut best = CharacterMinimum { value: bands.lambda0, angles: bands.argmin.angles.clone() };
    let ground = |angles: &[f64]| -> Result<f64> { Ok(twisted_spectrum(grid, alpha, v, angles, 1)?.lowest()) };
    let step = 2.0 * PI / samples_per_axis as f64;
    for _round in 0..2 {
        for a in 0..grid.dim() {
            if cover.folds[a] != Fold::Full {
                continue;
            }
            let centre = best.angles[a];
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let (mut lo, mut hi) = (centre - step, centre + step);
            let at = |t: f64, base: &[f64]| {
                let mut q = base.to_vec();
                q[a] = t;
                q
            };
            let base = best.angles.clone();
            let mut c = hi - g * (hi - lo);
            let mut d = lo + g * (hi - lo);
            let (mut fc, mut fd) = (ground(&at(c, &base))?, ground(&at(d, &base))?);
            while hi - lo > 1e-7 {
                if fc <= fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - g * (hi - lo);
                    fc = ground(&at(c, &base))?;
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + g * (hi - lo);
                    fd = ground(&at(d, &base))?;
                }
            }
            let (t, f) = if fc <= fd { (c, fc) } else { (d, fd) };
            if f < best.value {
                best = CharacterMinimum { value: f, angles: at(t.rem_euclid(2.0 * PI), &base) };
            }
        }
    }
    Ok(best)
}

/// Spectrum of the cover unrolled explicitly, `folds[k]` copies along axis `k`.
pub fn direct_cover_oracle(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    folds: &[usize],
) -> Result<SpectrumResult> {
    if folds.iter().any(|&n| n > 4) {
        return Err(Error::InvalidArgument("direct cover folds must lie in 1..=4 for every axis".into()));
    }
    let size = grid.len() * folds.iter().product::<usize>();
    if size > DENSE_LIMIT {
        return Err(Error::TooLarge { size, limit: DENSE_LIMIT });
    }
    let (cover, lifted, pot) = unroll(grid, alpha, v, folds)?;
    let op = assemble(&cover, &lifted, &pot, &Character::trivial(grid.dim()), Convention::Half)?;
    dense_spectrum(&op.matrix)
}

/// Lift of `(α, V)` to the cover with `folds[k]` copies along axis `k`.
///
/// Copies are joined through the base identifications: a base wrap link becomes an interior
/// link into the next copy carrying the same phase, and only the last copy wraps around.
pub fn unroll(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    folds: &[usize],
) -> Result<(Grid, VectorPotential, ScalarPotential)> {
    if folds.len() != grid.dim() || folds.contains(&0) {
        return Err(Error::InvalidArgument("need a positive fold count for every axis".into()));
    }
    if grid.boundary.iter().zip(folds).any(|(b, &n)| n > 1 && *b != Boundary::Periodic) {
        return Err(Error::InvalidArgument("only periodic axes can be unrolled".into()));
    }
    let mut geom = grid.geometry.clone();
    for (a, &n) in folds.iter().enumerate() {
        if n == 1 {
            continue;
        }
        let span = geom.bounds[a][1] - geom.bounds[a][0];
        geom.bounds[a][1] = geom.bounds[a][0] + n as f64 * span;
        for id in geom.identifications.iter_mut().filter(|id| id.axis == a) {
            id.period *= n as f64;
        }
        if let GeometryKind::TorusFlat { lengths } = &mut geom.kind {
            lengths[a] *= n as f64;
        }
    }
    let nodes: Vec<usize> = grid.nodes.iter().zip(folds).map(|(m, n)| m * n).collect();
    let cover = make_grid(&geom, &nodes)?;
    let d = grid.dim();
    let base_of = |ci: usize| -> usize {
        let m: Vec<usize> = cover.multi_index(ci).iter().zip(&grid.nodes).map(|(i, n)| i % n).collect();
        grid.index(&m)
    };
    let mut lifted = VectorPotential::zeros(&cover);
    let mut pot = Vec::with_capacity(cover.len());
    for ci in 0..cover.len() {
        let bi = base_of(ci);
        pot.push(v.values[bi]);
        for k in 0..d {
            let mut a = alpha.get(bi, k);
            let internal_seam = matches!(cover.neighbor(ci, k, true), Neighbor::Interior(_));
            if let (Neighbor::Wrap(bj), true) = (grid.neighbor(bi, k, true), internal_seam) {
                if let Some(id) = grid.geometry.identification(k) {
                    a += id.phase_at(&grid.coords(bj)) / grid.h[k];
                }
            }
            lifted.values[ci * d + k] = a;
        }
    }
    Ok((cover, lifted, ScalarPotential::new(pot)))
}

/// Multiset union of the full twisted spectra over the `n`-th-root characters.
pub fn character_union(grid: &Grid, alpha: &VectorPotential, v: &ScalarPotential, folds: &[usize]) -> Result<Vec<f64>> {
    let cover = CoverSpec::finite(&folds.iter().map(|&n| n as u32).collect::<Vec<_>>())?;
    check_periodic(grid, &cover)?;
    let axes: Vec<Vec<f64>> = (0..grid.dim()).map(|a| cover.angles(a, 1)).collect();
    let mut all = vec![];
    for idx in sample_grid(&axes) {
        let angles: Vec<f64> = idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
        let chi = Character::new(grid, &angles)?;
        let op = assemble(grid, alpha, v, &chi, Convention::Half)?;
        all.extend(dense_spectrum(&op.matrix)?.eigenvalues);
    }
    all.sort_by(f64::total_cmp);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Geometry, GeometryKind};
    use approx::assert_abs_diff_eq;

    fn circle(n: usize) -> Grid {
        make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0] }).unwrap(), &[n]).unwrap()
    }

    fn flux(g: &Grid, a: f64) -> VectorPotential {
        VectorPotential::constant(g, &[2.0 * PI * a])
    }

    #[test]
    fn full_circle_cover_has_zero_ground_state() {
        let g = circle(64);
        let z = ScalarPotential::zeros(&g);
        let b = band_structure(&g, &flux(&g, 0.4), &z, &CoverSpec::full(1), 64, 2).unwrap();
        assert!(b.bands[0][0].abs() <= b.resolution);
        // The lowest eigenvalue sweeps [0, 2π²/4] up to the discretization; free bands touch.
        let top = b.table.iter().map(|row| row[0]).fold(0.0, f64::max);
        assert!((top - 2.0 * PI * PI * 0.25).abs() <= b.resolution + 5e-3);
        assert_eq!(b.bands.len(), 1);
        let m = cover_groundstate_via_characters(&g, &flux(&g, 0.4), &z, &CoverSpec::full(1), 64).unwrap();
        assert!(m.value.abs() < 1e-9);
    }

    #[test]
    fn finite_cover_characters() {
        let g = circle(64);
        let z = ScalarPotential::zeros(&g);
        let third = cover_groundstate_via_characters(&g, &flux(&g, 1.0 / 3.0), &z, &CoverSpec::finite(&[3]).unwrap(), 1)
            .unwrap();
        assert!(third.value.abs() < 1e-12);
        assert_abs_diff_eq!(third.angles[0], 4.0 * PI / 3.0, epsilon = 1e-12);
        let two = cover_groundstate_via_characters(&g, &flux(&g, 0.4), &z, &CoverSpec::finite(&[2]).unwrap(), 1).unwrap();
        // The stencil gives (4/h²) sin²(πa h) per unit of ½|ξ|².
        let h = 1.0 / 64.0;
        let exact = 2.0 * (PI * 0.1 * h).sin().powi(2) / (h * h);
        assert_abs_diff_eq!(two.value, exact, epsilon = 1e-9);
        assert_abs_diff_eq!(two.value, 2.0 * PI * PI * 0.01, epsilon = 1e-4);
    }

    #[test]
    fn trivial_cover_gives_points() {
        let g = circle(16);
        let b = band_structure(&g, &VectorPotential::zeros(&g), &ScalarPotential::zeros(&g), &CoverSpec::finite(&[1]).unwrap(), 8, 3)
            .unwrap();
        assert_eq!(b.characters.len(), 1);
        assert!(b.bands.iter().all(|iv| iv[1] - iv[0] < 1e-9));
    }

    #[test]
    fn harmonic_shift_on_two_torus() {
        let geom = Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0, 1.0] }).unwrap();
        let g = make_grid(&geom, &[12, 12]).unwrap();
        let al = VectorPotential::constant(&g, &[2.0 * PI * 0.3, 0.0]);
        let m = cover_groundstate_via_characters(&g, &al, &ScalarPotential::zeros(&g), &CoverSpec::full(2), 20).unwrap();
        assert!(m.value.abs() < 1e-9, "{}", m.value);
    }

    #[test]
    fn unrolled_circle_matches_characters() {
        let g = circle(16);
        let al = g.sample_form(|x, _| 2.0 * PI / 3.0 + 0.4 * (2.0 * PI * x[0]).sin());
        let v = ScalarPotential::new(g.sample(|x| (2.0 * PI * x[0]).cos()));
        for n in [1usize, 3] {
            let direct = direct_cover_oracle(&g, &al, &v, &[n]).unwrap().eigenvalues;
            let union = character_union(&g, &al, &v, &[n]).unwrap();
            assert_eq!(direct.len(), union.len());
            for (a, b) in direct.iter().zip(&union) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn unrolled_two_torus_with_potential() {
        let geom = Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0, 1.0] }).unwrap();
        let g = make_grid(&geom, &[8, 6]).unwrap();
        let v = ScalarPotential::new(g.sample(|x| (2.0 * PI * x[0]).cos()));
        let z = VectorPotential::zeros(&g);
        let direct = direct_cover_oracle(&g, &z, &v, &[2, 1]).unwrap().eigenvalues;
        let union = character_union(&g, &z, &v, &[2, 1]).unwrap();
        for (a, b) in direct.iter().zip(&union) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn magnetic_torus_unrolls_with_seam_phases() {
        let l = (4.0 * PI).sqrt();
        let geom = Geometry::magnetic_torus(vec![l, l], &[1.0]).unwrap();
        let g = make_grid(&geom, &[6, 6]).unwrap();
        let al = crate::geometry::model_potential_torus(&[1.0], &g).unwrap();
        let v = ScalarPotential::zeros(&g);
        let direct = direct_cover_oracle(&g, &al, &v, &[2, 1]).unwrap().eigenvalues;
        let union = character_union(&g, &al, &v, &[2, 1]).unwrap();
        for (a, b) in direct.iter().zip(&union) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn no_diamagnetic_effect_iff_flux_condition() {
        let g = circle(32);
        let v = ScalarPotential::new(g.sample(|x| 0.5 * (2.0 * PI * x[0]).cos()));
        let plain = twisted_spectrum(&g, &VectorPotential::zeros(&g), &v, &[0.0], 1).unwrap().lowest();
        for (a, n, equal) in [(0.5, 2u32, true), (1.0 / 3.0, 3, true), (0.4, 2, false), (0.25, 3, false)] {
            let c = cover_groundstate_via_characters(&g, &flux(&g, a), &v, &CoverSpec::finite(&[n]).unwrap(), 1).unwrap();
            assert_eq!((c.value - plain).abs() < 1e-9, equal, "a={a} n={n}");
        }
    }

    #[test]
    fn ground_band_is_convex_at_minimum() {
        let g = circle(32);
        let v = ScalarPotential::new(g.sample(|x| (2.0 * PI * x[0]).cos()));
        let al = g.sample_form(|x, _| 0.1 * (2.0 * PI * x[0]).sin());
        let f = |t: f64| twisted_spectrum(&g, &al, &v, &[t], 1).unwrap().lowest();
        let d = 0.05;
        assert!(f(d) + f(-d) - 2.0 * f(0.0) > 0.0);
        assert_abs_diff_eq!(f(2.0 * PI + 0.3), f(0.3), epsilon = 1e-10);
    }
}
