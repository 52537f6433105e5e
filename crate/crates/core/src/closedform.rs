//! Analytic spectra of the model operators, each kept in the normalization of its source
//! result. Conversions between conventions are explicit calls.

use serde::{Deserialize, Serialize};

use crate::assembly::Convention;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEigenvalue {
    pub value: f64,
    pub k: u64,
    /// Angular or Fourier mode, zero when not applicable.
    pub m: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Source {
    Landau { lambdas: Vec<f64>, rank_deficient: bool },
    Maass { b: f64 },
    SphereBundleH { b: f64 },
    NilUniversal { b: f64 },
    NilAbelian { b: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSpectrum {
    pub source: Source,
    pub continuum_threshold: Option<f64>,
    pub lambda0: f64,
    pub normalization: Convention,
    /// Factor applied to every value relative to the source normalization.
    pub scale: f64,
    pub validity: String,
}

impl ClosedFormSpectrum {
    fn new(source: Source, continuum_threshold: Option<f64>, normalization: Convention, validity: &str) -> Self {
        let mut s = Self { source, continuum_threshold, lambda0: 0.0, normalization, scale: 1.0, validity: validity.into() };
        let cap = continuum_threshold.unwrap_or(f64::INFINITY);
        let inf_points = s.points_below(if cap.is_finite() { cap } else { s.point_floor() + 1.0 }).first().map(|p| p.value);
        s.lambda0 = match (continuum_threshold, inf_points) {
            (Some(t), Some(p)) => t.min(p),
            (Some(t), None) => t,
            (None, Some(p)) => p,
            (None, None) => f64::INFINITY,
        };
        s
    }

    /// A value no larger than the lowest point eigenvalue (used to size the first enumeration).
    fn point_floor(&self) -> f64 {
        match &self.source {
            Source::Landau { lambdas, .. } => lambdas.iter().map(|l| l.abs()).sum(),
            _ => 0.0,
        }
    }

    /// Point eigenvalues not exceeding `cap`, sorted ascending.
    pub fn points_below(&self, cap: f64) -> Vec<PointEigenvalue> {
        let raw_cap = cap / self.scale;
        let mut pts = match &self.source {
            Source::Landau { lambdas, rank_deficient } => {
                if *rank_deficient || lambdas.is_empty() {
                    vec![]
                } else {
                    landau_points(lambdas, raw_cap)
                }
            }
            Source::Maass { b } => maass_points(*b, raw_cap),
            Source::SphereBundleH { b } => {
                let mmax = (2.0 * raw_cap.max(0.0) + b.abs() + 2.0).ceil() as i64;
                let mut v = vec![];
                for m in (-mmax..=mmax).filter(|&m| m != 0) {
                    let am = m.unsigned_abs();
                    for k in 0..am {
                        let kf = k as f64;
                        let val = 0.5 * ((b + m as f64).powi(2) + (2.0 * kf + 1.0) * am as f64 - kf * (kf + 1.0));
                        if val <= raw_cap {
                            v.push(PointEigenvalue { value: val, k, m });
                        }
                    }
                }
                v
            }
            Source::NilUniversal { .. } => vec![],
            Source::NilAbelian { b } => {
                let two_pi = 2.0 * std::f64::consts::PI;
                let mmax = ((raw_cap.max(0.0) * 2.0).sqrt() + b.abs()) / two_pi + 2.0;
                let mut v = vec![];
                for m in (-(mmax as i64)..=mmax as i64).filter(|&m| m != 0) {
                    let am = m.unsigned_abs() as f64;
                    for k in 0.. {
                        let val = 0.5 * ((b + two_pi * m as f64).powi(2) + two_pi * (2 * k + 1) as f64 * am);
                        if val > raw_cap {
                            break;
                        }
                        v.push(PointEigenvalue { value: val, k, m });
                    }
                }
                v
            }
        };
        pts.iter_mut().for_each(|p| p.value *= self.scale);
        pts.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.m.abs().cmp(&b.m.abs())));
        pts
    }

    /// Re-express in another convention.
    pub fn to_convention(&self, target: Convention) -> Self {
        let factor = self.normalization.to_half() / target.to_half();
        let mut s = self.clone();
        s.scale *= factor;
        s.lambda0 *= factor;
        s.continuum_threshold = s.continuum_threshold.map(|t| t * factor);
        s.normalization = target;
        s
    }
}

fn landau_points(lambdas: &[f64], cap: f64) -> Vec<PointEigenvalue> {
    let abs: Vec<f64> = lambdas.iter().map(|l| l.abs()).collect();
    let base: f64 = abs.iter().sum();
    let mut out = vec![];
    // Enumerate multi-indices (k_1, ..., k_r) with Σ |λ_j| (2 k_j + 1) ≤ cap.
    fn rec(abs: &[f64], j: usize, acc: f64, ktot: u64, cap: f64, out: &mut Vec<PointEigenvalue>) {
        if j == abs.len() {
            out.push(PointEigenvalue { value: acc, k: ktot, m: 0 });
            return;
        }
        let mut k = 0;
        while acc + 2.0 * k as f64 * abs[j] <= cap + 1e-12 {
            rec(abs, j + 1, acc + 2.0 * k as f64 * abs[j], ktot + k, cap, out);
            k += 1;
        }
    }
    if base <= cap + 1e-12 {
        rec(&abs, 0, base, 0, cap, &mut out);
    }
    out
}

fn maass_points(b: f64, cap: f64) -> Vec<PointEigenvalue> {
    let ab = b.abs();
    (0u64..)
        .take_while(|&k| (k as f64) < ab - 0.5)
        .map(|k| {
            let kf = k as f64;
            PointEigenvalue { value: 0.5 * ((2.0 * kf + 1.0) * ab - kf * (kf + 1.0)), k, m: 0 }
        })
        .filter(|p| p.value <= cap)
        .collect()
}

/// Constant-field Landau spectrum in the unit-coefficient normalization.
pub fn landau(lambdas: &[f64], rank_deficient: bool) -> Result<ClosedFormSpectrum> {
    if lambdas.iter().any(|&l| l == 0.0 || !l.is_finite()) {
        return Err(Error::InvalidArgument("Landau parameters must be non-zero".into()));
    }
    let tr: f64 = lambdas.iter().map(|l| l.abs()).sum();
    let threshold = if rank_deficient || lambdas.is_empty() { Some(tr) } else { None };
    Ok(ClosedFormSpectrum::new(
        Source::Landau { lambdas: lambdas.to_vec(), rank_deficient },
        threshold,
        Convention::Double,
        "all λ_j ≠ 0",
    ))
}

/// Maass Laplacian on the hyperbolic plane with potential `B dx / y`.
pub fn maass(b: f64) -> ClosedFormSpectrum {
    ClosedFormSpectrum::new(Source::Maass { b }, Some(0.5 * (b * b + 0.25)), Convention::Half, "all B")
}

/// Sphere bundle of the hyperbolic plane. The continuum threshold is the bottom of the union
/// of the Fourier-mode thresholds `½((B + m)² + m² + ¼)`.
pub fn sphere_bundle_h(b: f64) -> ClosedFormSpectrum {
    let m0 = (-b / 2.0).floor() as i64;
    let thr = (m0 - 1..=m0 + 2)
        .map(|m| 0.5 * ((b + m as f64).powi(2) + (m * m) as f64 + 0.25))
        .fold(f64::INFINITY, f64::min);
    ClosedFormSpectrum::new(Source::SphereBundleH { b }, Some(thr), Convention::Half, "all B")
}

/// Piecewise ground state energy of the sphere bundle of the hyperbolic plane.
pub fn sphere_bundle_h_lambda0(b: f64) -> f64 {
    let ab = b.abs();
    if ab <= 7.0 / 8.0 {
        0.5 * (ab * ab + 0.25)
    } else if ab <= 1.0 {
        0.5 * (1.0 + (1.0 - ab).powi(2))
    } else {
        let fl = ab.floor();
        0.5 * (fl + (ab - fl).powi(2))
    }
}

/// Ground state energy on the universal cover of `SL(2, ℝ)`.
pub fn sl2_universal_lambda0(b: f64) -> f64 {
    let ab = b.abs();
    if ab <= 1.0 {
        0.5 * (0.5 * ab * ab + 0.25)
    } else {
        0.5 * (ab - 0.25)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NilWhich {
    Universal,
    Abelian,
}

pub fn nil_universal_lambda0(b: f64) -> f64 {
    let ab = b.abs();
    if ab <= 0.5 {
        0.5 * ab * ab
    } else {
        0.5 * (ab - 0.25)
    }
}

pub fn nil(b: f64, which: NilWhich) -> ClosedFormSpectrum {
    match which {
        NilWhich::Universal => {
            ClosedFormSpectrum::new(Source::NilUniversal { b }, Some(nil_universal_lambda0(b)), Convention::Half, "all B")
        }
        NilWhich::Abelian => ClosedFormSpectrum::new(Source::NilAbelian { b }, Some(0.5 * b * b), Convention::Half, "all B"),
    }
}

/// Structured spectral claims for Sol with field `B_x e^{−z} dx + B_y e^{z} dy`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolFacts {
    pub b_norm: f64,
    /// The spectrum is contained in `[½|B|², ∞)`.
    pub spectrum_superset_low: f64,
    /// For `|B| ≤ ½` the spectrum equals `[½|B|², ∞)`.
    pub exact_if_b_le_half: bool,
    /// `λ₀ ≥ ½(|B| − ¼)` when `|B| > ½`.
    pub lambda0_lower: Option<f64>,
    /// `λ₀ = ½(|B| − ¼)` when additionally `B_y = 0`.
    pub lambda0_exact_when_by0: Option<f64>,
    /// `½(|B_x| + B_y² − ¼)` lies in the spectrum when `|B_x| > ½`.
    pub member_point: Option<f64>,
    /// `λ₀` whenever one of the claims pins it down.
    pub lambda0: Option<f64>,
}

pub fn sol_facts(bx: f64, by: f64) -> SolFacts {
    let b = bx.hypot(by);
    let exact = b <= 0.5;
    let lower = (b > 0.5).then(|| 0.5 * (b - 0.25));
    let exact_by0 = (b > 0.5 && by == 0.0).then(|| 0.5 * (b - 0.25));
    SolFacts {
        b_norm: b,
        spectrum_superset_low: 0.5 * b * b,
        exact_if_b_le_half: exact,
        lambda0_lower: lower,
        lambda0_exact_when_by0: exact_by0,
        member_point: (bx.abs() > 0.5).then(|| 0.5 * (bx.abs() + by * by - 0.25)),
        lambda0: if exact { Some(0.5 * b * b) } else { exact_by0 },
    }
}

/// Kepler eigenvalue in angular mode `m ≠ 0` with magnetic shift `B m`.
pub fn kepler(b: f64, m: i64, n: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidQuantumNumber("m = 0 has no essentially self-adjoint radial operator".into()));
    }
    let q = n as f64 + m.unsigned_abs() as f64 + 0.5;
    Ok(-1.0 / (2.0 * q * q) + b * m as f64)
}

/// Essential spectrum threshold `B m` of the Kepler mode `m`.
pub fn kepler_threshold(b: f64, m: i64) -> f64 {
    b * m as f64
}

/// Bohr levels of the Friedrichs extension in mode `m = 0`.
pub fn bohr(n: u64) -> f64 {
    let q = n as f64 + 0.5;
    -1.0 / (2.0 * q * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn values(s: &ClosedFormSpectrum, cap: f64) -> Vec<f64> {
        s.points_below(cap).iter().map(|p| p.value).collect()
    }

    #[test]
    fn landau_examples() {
        let s = landau(&[1.0], false).unwrap();
        assert_eq!(values(&s, 7.0), vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!(s.lambda0, 1.0);
        let r = landau(&[1.0], true).unwrap();
        assert_eq!(r.continuum_threshold, Some(1.0));
        assert!(values(&r, 10.0).is_empty());
        let free = landau(&[], false).unwrap();
        assert_eq!((free.lambda0, free.continuum_threshold), (0.0, Some(0.0)));
        let half = s.to_convention(Convention::Half);
        assert_eq!(half.lambda0, 0.5);
        assert_eq!(values(&half, 1.6), vec![0.5, 1.5]);
        assert_eq!(half.to_convention(Convention::Double), s);
        assert_eq!(values(&landau(&[1.0, -2.0], false).unwrap(), 7.0), vec![3.0, 5.0, 7.0, 7.0]);
    }

    #[test]
    fn maass_examples() {
        let s = maass(1.0);
        assert_eq!(values(&s, 10.0), vec![0.5]);
        assert_eq!((s.continuum_threshold, s.lambda0), (Some(0.625), 0.5));
        let s = maass(0.3);
        assert!(values(&s, 10.0).is_empty());
        assert_abs_diff_eq!(s.lambda0, 0.17, epsilon = 1e-15);
        let s = maass(2.0);
        assert_eq!(values(&s, 10.0), vec![1.0, 2.0]);
        assert_eq!(s.continuum_threshold, Some(2.125));
    }

    #[test]
    fn sphere_bundle_examples() {
        assert_abs_diff_eq!(sphere_bundle_h_lambda0(0.5), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sphere_bundle_h_lambda0(2.5), 1.125, epsilon = 1e-15);
        assert_abs_diff_eq!(sphere_bundle_h_lambda0(7.0 / 8.0), 65.0 / 128.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sl2_universal_lambda0(2.0), 0.875, epsilon = 1e-15);
        // B = 2.5: modes m = −1 and m = −2 give thresholds 1.75 and 2.25.
        assert_abs_diff_eq!(sphere_bundle_h(2.5).continuum_threshold.unwrap(), 1.75, epsilon = 1e-15);
    }

    #[test]
    fn nil_examples() {
        assert_eq!(nil(1.0, NilWhich::Universal).lambda0, 0.375);
        assert_abs_diff_eq!(nil(0.4, NilWhich::Universal).lambda0, 0.08, epsilon = 1e-15);
        let pi = std::f64::consts::PI;
        let p = nil(0.0, NilWhich::Abelian).points_below(23.0);
        assert!(p.iter().any(|q| q.m == 1 && q.k == 0 && (q.value - (2.0 * pi * pi + pi)).abs() < 1e-12));
        assert_eq!(nil(0.0, NilWhich::Abelian).lambda0, 0.0);
    }

    #[test]
    fn sol_examples() {
        let f = sol_facts(0.4, 0.3);
        assert!(f.exact_if_b_le_half);
        assert_abs_diff_eq!(f.lambda0.unwrap(), 0.125, epsilon = 1e-15);
        assert_eq!(sol_facts(1.0, 0.0).lambda0, Some(0.375));
        assert_abs_diff_eq!(sol_facts(1.0, 0.5).member_point.unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sol_facts(0.6, 0.8).member_point.unwrap(), 0.495, epsilon = 1e-15);
    }

    #[test]
    fn kepler_examples() {
        assert_abs_diff_eq!(kepler(0.0, 1, 0).unwrap(), -2.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(kepler(0.1, 1, 0).unwrap(), -2.0 / 9.0 + 0.1, epsilon = 1e-15);
        assert_eq!(bohr(0), -2.0);
        assert!(matches!(kepler(0.0, 0, 0), Err(Error::InvalidQuantumNumber(_))));
    }

    #[test]
    fn sphere_bundle_bracket_for_large_field() {
        for i in 0..200 {
            let b = 1.0 + i as f64 * 0.05;
            let l = sphere_bundle_h_lambda0(b);
            assert!(0.5 * (b - 0.25) <= l + 1e-15 && l <= 0.5 * b + 1e-15);
        }
    }

    proptest! {
        #[test]
        fn lambda0_is_min_of_threshold_and_points(b in -6.0f64..6.0) {
            for s in [maass(b), sphere_bundle_h(b), nil(b, NilWhich::Abelian), nil(b, NilWhich::Universal)] {
                let t = s.continuum_threshold.unwrap();
                let p = s.points_below(t + 1.0).first().map_or(f64::INFINITY, |p| p.value);
                prop_assert!((s.lambda0 - t.min(p)).abs() <= 1e-12);
            }
            prop_assert!((sphere_bundle_h(b).lambda0 - sphere_bundle_h_lambda0(b)).abs() <= 1e-12);
        }

        #[test]
        fn sign_flip_symmetry(b in -6.0f64..6.0) {
            prop_assert_eq!(maass(b).lambda0, maass(-b).lambda0);
            prop_assert!((sphere_bundle_h(b).lambda0 - sphere_bundle_h(-b).lambda0).abs() < 1e-12);
            prop_assert_eq!(sl2_universal_lambda0(b), sl2_universal_lambda0(-b));
            prop_assert_eq!(nil_universal_lambda0(b), nil_universal_lambda0(-b));
            prop_assert!((nil(b, NilWhich::Abelian).lambda0 - nil(-b, NilWhich::Abelian).lambda0).abs() < 1e-12);
            prop_assert_eq!(sol_facts(b, 0.3), sol_facts(-b, -0.3));
            let mut up: Vec<f64> = (1..4).flat_map(|m| [kepler(b, m, 0).unwrap(), kepler(b, -m, 0).unwrap()]).collect();
            let mut down: Vec<f64> = (1..4).flat_map(|m| [kepler(-b, m, 0).unwrap(), kepler(-b, -m, 0).unwrap()]).collect();
            up.sort_by(f64::total_cmp);
            down.sort_by(f64::total_cmp);
            prop_assert_eq!(up, down);
        }

        #[test]
        fn maass_points_respect_quantum_range(b in -6.0f64..6.0) {
            for p in maass(b).points_below(100.0) {
                prop_assert!((p.k as f64) < b.abs() - 0.5);
            }
        }
    }
}
