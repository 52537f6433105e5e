//! Separation of variables on the model geometries: families of one-dimensional operators
//! indexed by partial Fourier momenta, and minimization of their ground states over the
//! momenta.
//!
//! Member values are in the half convention of the full operator. A scalar member operator is
//! `−mass · u″ + V u` on a truncated interval. Ends where `V` grows are truncated with a
//! certified wall amplitude. Ends where `V` tends to a constant are open: that constant is the
//! member's continuum threshold, and the open length grows until a bound state below it is
//! certified.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, Character, Convention};
use crate::closedform;
use crate::eigensolve::{
    lowest_eigenvalues, solve_effective_1d, BoundaryCondition, Effective1D, SpectrumResult, DECAY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::geometry::{make_grid, Geometry, GeometryKind, Grid, ScalarPotential, VectorPotential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    TorusLandau,
    Maass,
    SphereBundleH,
    Sl2Universal,
    Nil,
    /// The Nil family on the maximal abelian cover, with integer momenta.
    NilAbelian,
    Sol,
    KeplerRadial,
    SolMonopole,
}

impl FamilyName {
    pub const ALL: [FamilyName; 9] = [
        FamilyName::TorusLandau,
        FamilyName::Maass,
        FamilyName::SphereBundleH,
        FamilyName::Sl2Universal,
        FamilyName::Nil,
        FamilyName::NilAbelian,
        FamilyName::Sol,
        FamilyName::KeplerRadial,
        FamilyName::SolMonopole,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyName::TorusLandau => "torus_landau",
            FamilyName::Maass => "maass",
            FamilyName::SphereBundleH => "sphere_bundle_h",
            FamilyName::Sl2Universal => "sl2_universal",
            FamilyName::Nil => "nil",
            FamilyName::NilAbelian => "nil_abelian",
            FamilyName::Sol => "sol",
            FamilyName::KeplerRadial => "kepler_radial",
            FamilyName::SolMonopole => "sol_monopole",
        }
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamDomain {
    Integer,
    Continuous,
}

/// How member values relate to the ground state `S` of the scalar member operator:
/// `value = scale · (S + additive) + momentum term`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub convention: Convention,
    pub scale: f64,
    pub additive: f64,
    pub note: String,
}

/// Source of the inner eigenvalue for families whose members contain a harmonic oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMode {
    Numeric,
    ClosedForm,
}

#[derive(Clone, Debug)]
pub struct SolverSettings {
    /// Grid spacing of the 1D solves (in units of the oscillator length for oscillators).
    pub h: f64,
    /// Initial length of an open end, measured from the potential well.
    pub open_length: f64,
    pub max_open_length: f64,
    /// A member whose eigenvalue lies this close to its threshold counts as threshold-valued.
    pub binding_tol: f64,
    /// Relative width at which golden-section refinement stops.
    pub param_tol: f64,
    /// Enumeration edge for integer families; `⌈|B|⌉ + 3` when absent.
    pub range: Option<i64>,
    pub inner: InnerMode,
    /// Outer radius of the Kepler truncation.
    pub kepler_radius: f64,
    /// Maass ground states keyed by `|B|`, shared between families built from the same settings.
    maass_cache: Arc<Mutex<HashMap<u64, f64>>>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            h: 0.01,
            open_length: 60.0,
            max_open_length: 4000.0,
            binding_tol: 1e-6,
            param_tol: 1e-6,
            range: None,
            inner: InnerMode::Numeric,
            kepler_radius: 250.0,
            maass_cache: Arc::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReducedFamily {
    pub name: FamilyName,
    pub fields: Vec<f64>,
    pub domain: Vec<ParamDomain>,
    pub normalization: Normalization,
    pub settings: SolverSettings,
}

/// Build a family with default solver settings.
pub fn build_family(name: &str, b: &[f64]) -> Result<ReducedFamily> {
    build_family_with(name.parse()?, b, SolverSettings::default())
}

pub fn build_family_with(name: FamilyName, b: &[f64], settings: SolverSettings) -> Result<ReducedFamily> {
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("field strengths must be finite".into()));
    }
    let expect = |n: usize| -> Result<()> {
        if b.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{name} takes {n} field value(s), got {}", b.len())))
        }
    };
    let norm = |scale: f64, additive: f64, note: &str| Normalization {
        convention: Convention::Half,
        scale,
        additive,
        note: note.into(),
    };
    use ParamDomain::*;
    let (domain, normalization) = match name {
        FamilyName::TorusLandau => {
            if b.is_empty() {
                return Err(Error::InvalidArgument("torus_landau needs at least one λ".into()));
            }
            (vec![Continuous; b.len()], norm(1.0, 0.0, "sum over pairs of −½u″ + ½(ξ + λx)²u"))
        }
        FamilyName::Maass => {
            expect(1)?;
            (vec![Continuous], norm(1.0, 0.0, "−½u″ + ½(ξe^z + B)²u + u/8 in z = ln y"))
        }
        FamilyName::SphereBundleH => {
            expect(1)?;
            (vec![Integer], norm(1.0, 0.0, "Maass ground state at field m plus ½(m + B)²"))
        }
        FamilyName::Sl2Universal => {
            expect(1)?;
            (vec![Continuous], norm(1.0, 0.0, "Maass ground state at field ξ plus ½(ξ + B)²"))
        }
        FamilyName::Nil | FamilyName::NilAbelian => {
            expect(1)?;
            let d = if name == FamilyName::Nil { Continuous } else { Integer };
            (vec![d], norm(1.0, 0.0, "oscillator ½(−u″ + (2πξx)²u) plus ½(2πξ + B)²"))
        }
        FamilyName::Sol => {
            expect(2)?;
            let b2 = b[0] * b[0] + b[1] * b[1];
            (
                vec![Continuous, Continuous],
                norm(0.5, b2, "S = −u″ + ξx²e^{2z} + 2Bxξx e^z + ξy²e^{−2z} + 2Byξy e^{−z}; value ½(S + |B|²)"),
            )
        }
        FamilyName::KeplerRadial => {
            expect(1)?;
            (vec![Integer], norm(1.0, 0.0, "−½u″ + ((m² − ¼)/(2r²) − 1/r + Bm)u"))
        }
        FamilyName::SolMonopole => {
            expect(1)?;
            (vec![Continuous], norm(1.0, -0.125, "half-plane operator with V = ½B²x²/y², shifted by −1/8"))
        }
    };
    Ok(ReducedFamily { name, fields: b.to_vec(), domain, normalization, settings })
}

/// The operator of a single family member.
#[derive(Clone, Debug)]
pub enum MemberOperator {
    /// The potential never drops below its limit at the open end, so the ground value is that limit.
    Threshold(f64),
    Scalar(ScalarMember),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenEnd {
    Closed,
    Left(f64),
    Right(f64),
}

#[derive(Clone, Debug)]
pub struct ScalarMember {
    /// Growing ends carry the decay condition; an open end is plain Dirichlet.
    pub eff: Effective1D,
    pub open: OpenEnd,
    /// Location of the well; the open length is measured from here.
    pub anchor: f64,
    /// Infimum of the potential.
    pub floor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarValue {
    /// Ground state, clipped to the threshold of an open end.
    pub s: f64,
    pub threshold: f64,
    pub bound_state: bool,
    pub certified: bool,
    /// Relative amplitude at the open wall (zero without an open end).
    pub amplitude: f64,
}

/// Ground state of a member operator. The open end is lengthened until a bound state is
/// certified or the maximum open length is reached.
pub fn solve_member(op: &MemberOperator, settings: &SolverSettings) -> Result<ScalarValue> {
    let m = match op {
        MemberOperator::Threshold(t) => {
            return Ok(ScalarValue { s: *t, threshold: *t, bound_state: false, certified: true, amplitude: 0.0 })
        }
        MemberOperator::Scalar(m) => m,
    };
    let mut eff = m.eff.clone();
    loop {
        let r = solve_effective_1d(&eff, 1)?;
        let lam = r.eigenvalues[0];
        let amps = r.wall_amplitudes.unwrap_or([0.0, 0.0]);
        let (thr, amp, len) = match m.open {
            OpenEnd::Closed => {
                return Ok(ScalarValue {
                    s: lam,
                    threshold: f64::INFINITY,
                    bound_state: true,
                    certified: true,
                    amplitude: 0.0,
                })
            }
            OpenEnd::Left(t) => (t, amps[0], m.anchor - eff.left),
            OpenEnd::Right(t) => (t, amps[1], eff.right - m.anchor),
        };
        if lam >= thr - settings.binding_tol {
            return Ok(ScalarValue { s: lam.min(thr), threshold: thr, bound_state: lam < thr, certified: true, amplitude: amp });
        }
        if amp <= DECAY_TOLERANCE || len >= settings.max_open_length {
            return Ok(ScalarValue {
                s: lam,
                threshold: thr,
                bound_state: true,
                certified: amp <= DECAY_TOLERANCE,
                amplitude: amp,
            });
        }
        let kappa = ((thr - lam) / eff.mass).sqrt();
        let next = (2.0 * len).max(20.0 / kappa + 5.0).min(settings.max_open_length);
        match m.open {
            OpenEnd::Left(_) => eff.left = m.anchor - next,
            _ => eff.right = m.anchor + next,
        }
    }
}

/// One evaluated family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberValue {
    pub params: Vec<f64>,
    pub value: f64,
    pub threshold: f64,
    pub bound_state: bool,
    pub certified: bool,
    pub amplitude: f64,
    /// Infimum of the member potential in the same units as `value`.
    pub potential_floor: f64,
}

/// Oscillator `−½u″ + ½(ξ + λx)²u`, or its threshold `½ξ²` when `λ = 0`.
fn landau_pair(lam: f64, xi: f64, s: &SolverSettings) -> MemberOperator {
    if lam == 0.0 {
        return MemberOperator::Threshold(0.5 * xi * xi);
    }
    let len = 1.0 / lam.abs().sqrt();
    let c = -xi / lam;
    let eff = Effective1D::new(c - 12.0 * len, c + 12.0 * len, s.h * len, 0.5, move |x| 0.5 * (xi + lam * x).powi(2))
        .with_bcs(BoundaryCondition::Decay, BoundaryCondition::Decay);
    MemberOperator::Scalar(ScalarMember { eff, open: OpenEnd::Closed, anchor: c, floor: 0.0 })
}

/// `−½u″ + ½(ξe^z + B)²u + u/8`.
fn maass_operator(b: f64, xi: f64, s: &SolverSettings) -> MemberOperator {
    let thr = 0.5 * b * b + 0.125;
    if xi == 0.0 || xi * b >= 0.0 {
        return MemberOperator::Threshold(thr);
    }
    let zw = (b.abs() / xi.abs()).ln();
    let zr = ((20.0 + 2.0 * b.abs()) / xi.abs()).ln() + 1.0;
    let eff = Effective1D::new(zw - s.open_length, zr, s.h, 0.5, move |z| 0.5 * (xi * z.exp() + b).powi(2) + 0.125)
        .with_bcs(BoundaryCondition::Dirichlet, BoundaryCondition::Decay);
    MemberOperator::Scalar(ScalarMember { eff, open: OpenEnd::Left(thr), anchor: zw, floor: 0.125 })
}

/// `−u″ + (ξx²e^{2z} + 2Bxξx e^z + ξy²e^{−2z} + 2Byξy e^{−z})u`.
fn sol_operator(bx: f64, by: f64, xx: f64, xy: f64, s: &SolverSettings) -> MemberOperator {
    let v = move |z: f64| {
        let (ep, em) = (z.exp(), (-z).exp());
        xx * xx * ep * ep + 2.0 * bx * xx * ep + xy * xy * em * em + 2.0 * by * xy * em
    };
    let wall_right = |b: f64, x: f64| ((20.0 + 2.0 * b.abs()) / x.abs()).ln() + 1.0;
    match (xx == 0.0, xy == 0.0) {
        (true, true) => MemberOperator::Threshold(0.0),
        (false, true) => {
            if bx * xx >= 0.0 {
                return MemberOperator::Threshold(0.0);
            }
            let zw = (bx.abs() / xx.abs()).ln();
            let eff = Effective1D::new(zw - s.open_length, wall_right(bx, xx), s.h, 1.0, v)
                .with_bcs(BoundaryCondition::Dirichlet, BoundaryCondition::Decay);
            MemberOperator::Scalar(ScalarMember { eff, open: OpenEnd::Left(0.0), anchor: zw, floor: -bx * bx })
        }
        (true, false) => {
            if by * xy >= 0.0 {
                return MemberOperator::Threshold(0.0);
            }
            let zw = -(by.abs() / xy.abs()).ln();
            let eff = Effective1D::new(-wall_right(by, xy), zw + s.open_length, s.h, 1.0, v)
                .with_bcs(BoundaryCondition::Decay, BoundaryCondition::Dirichlet);
            MemberOperator::Scalar(ScalarMember { eff, open: OpenEnd::Right(0.0), anchor: zw, floor: -by * by })
        }
        (false, false) => {
            let mid = 0.5 * (xy / xx).abs().ln();
            let lo = (-wall_right(by, xy)).min(mid - 3.0);
            let hi = wall_right(bx, xx).max(mid + 3.0);
            let eff = Effective1D::new(lo, hi, s.h, 1.0, v).with_bcs(BoundaryCondition::Decay, BoundaryCondition::Decay);
            MemberOperator::Scalar(ScalarMember { eff, open: OpenEnd::Closed, anchor: mid, floor: -bx * bx - by * by })
        }
    }
}

/// Radial Kepler operator `−½u″ + ((m² − ¼)/(2r²) − 1/r + Bm)u` on `(left_shift · h, R)`.
///
/// Mode `m = 0` uses the Friedrichs condition; other modes use Dirichlet with extrapolation.
pub fn kepler_operator(b: f64, m: i64, left_shift: f64, s: &SolverSettings) -> Effective1D {
    let mf = m as f64;
    let c = 0.5 * (mf * mf - 0.25);
    let shift = b * mf;
    let mut eff = Effective1D::new(0.0, s.kepler_radius, s.h, 0.5, move |r| c / (r * r) - 1.0 / r + shift);
    eff.left_shift = left_shift;
    eff.right_bc = BoundaryCondition::Decay;
    if m == 0 {
        eff.left_bc = BoundaryCondition::FriedrichsKepler;
    } else {
        eff.extrapolate = true;
    }
    eff
}

impl ReducedFamily {
    fn b(&self) -> f64 {
        self.fields[0]
    }

    fn check_params(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.domain.len() {
            return Err(Error::InvalidArgument(format!(
                "{} takes {} momentum parameter(s), got {}",
                self.name,
                self.domain.len(),
                p.len()
            )));
        }
        for (x, d) in p.iter().zip(&self.domain) {
            if !x.is_finite() || (*d == ParamDomain::Integer && x.fract() != 0.0) {
                return Err(Error::InvalidArgument(format!("momentum {x} outside the {d:?} domain")));
            }
        }
        Ok(())
    }

    /// The scalar operator of a member, for families whose members are a single 1D operator.
    pub fn member_operator(&self, p: &[f64]) -> Result<MemberOperator> {
        self.check_params(p)?;
        let s = &self.settings;
        Ok(match self.name {
            FamilyName::Maass => maass_operator(self.b(), p[0], s),
            FamilyName::Sol => sol_operator(self.fields[0], self.fields[1], p[0], p[1], s),
            FamilyName::Nil | FamilyName::NilAbelian => landau_pair(2.0 * PI * p[0], 0.0, s),
            FamilyName::KeplerRadial => {
                let eff = kepler_operator(self.b(), p[0] as i64, 0.0, s);
                MemberOperator::Scalar(ScalarMember { eff, open: OpenEnd::Closed, anchor: 0.0, floor: f64::NEG_INFINITY })
            }
            FamilyName::TorusLandau if p.len() == 1 => landau_pair(self.fields[0], p[0], s),
            _ => {
                return Err(Error::InvalidArgument(format!("{} members are not a single scalar operator", self.name)))
            }
        })
    }

    /// Lowest `k` eigenvalues of a single-operator member, in the family's value units.
    pub fn member_spectrum(&self, p: &[f64], k: usize) -> Result<SpectrumResult> {
        let op = self.member_operator(p)?;
        let (scale, additive, extra) = self.value_map(p);
        let mut r = match op {
            MemberOperator::Threshold(t) => SpectrumResult {
                eigenvalues: vec![t],
                residual_norms: vec![0.0],
                converged: vec![true],
                method: crate::eigensolve::Method::Fd1d,
                boundary_amplitude: None,
                wall_amplitudes: None,
                eigenvectors: vec![],
            },
            MemberOperator::Scalar(m) => solve_effective_1d(&m.eff, k)?,
        };
        r.eigenvalues.iter_mut().for_each(|v| *v = scale * (*v + additive) + extra);
        Ok(r)
    }

    /// `(scale, additive, momentum term)` mapping a scalar ground state to a member value.
    fn value_map(&self, p: &[f64]) -> (f64, f64, f64) {
        match self.name {
            FamilyName::Sol => (0.5, self.normalization.additive, 0.0),
            FamilyName::Nil | FamilyName::NilAbelian => (1.0, 0.0, 0.5 * (2.0 * PI * p[0] + self.b()).powi(2)),
            _ => (1.0, 0.0, 0.0),
        }
    }

    /// Ground state of the Maass family at field `b`, minimized over its momentum.
    fn maass_ground(&self, b: f64) -> Result<f64> {
        let key = b.abs().to_bits();
        if let Some(v) = self.settings.maass_cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let fam = build_family_with(FamilyName::Maass, &[b.abs()], self.settings.clone())?;
        let v = minimize_over_momenta(&fam)?.value;
        self.settings.maass_cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    /// Ground value of the member at momenta `p`.
    pub fn member(&self, p: &[f64]) -> Result<MemberValue> {
        self.check_params(p)?;
        let s = &self.settings;
        let simple = |sv: ScalarValue, floor: f64, scale: f64, additive: f64, extra: f64| MemberValue {
            params: p.to_vec(),
            value: scale * (sv.s + additive) + extra,
            threshold: scale * (sv.threshold + additive) + extra,
            bound_state: sv.bound_state,
            certified: sv.certified,
            amplitude: sv.amplitude,
            potential_floor: scale * (floor + additive) + extra,
        };
        match self.name {
            FamilyName::TorusLandau => {
                let mut total = 0.0;
                let mut continuum = false;
                for (&lam, &xi) in self.fields.iter().zip(p) {
                    let op = landau_pair(lam, xi, s);
                    continuum |= matches!(op, MemberOperator::Threshold(_));
                    total += solve_member(&op, s)?.s;
                }
                Ok(MemberValue {
                    params: p.to_vec(),
                    value: total,
                    threshold: if continuum { total } else { f64::INFINITY },
                    bound_state: !continuum,
                    certified: true,
                    amplitude: 0.0,
                    potential_floor: 0.0,
                })
            }
            FamilyName::Maass | FamilyName::Sol => {
                let op = self.member_operator(p)?;
                let floor = match &op {
                    MemberOperator::Scalar(m) => m.floor,
                    MemberOperator::Threshold(t) => *t,
                };
                let (scale, additive, extra) = self.value_map(p);
                Ok(simple(solve_member(&op, s)?, floor, scale, additive, extra))
            }
            FamilyName::Nil | FamilyName::NilAbelian => {
                let t = 2.0 * PI * p[0];
                let extra = 0.5 * (t + self.b()).powi(2);
                let sv = if t == 0.0 {
                    ScalarValue { s: 0.0, threshold: 0.0, bound_state: false, certified: true, amplitude: 0.0 }
                } else if s.inner == InnerMode::ClosedForm {
                    ScalarValue { s: 0.5 * t.abs(), threshold: f64::INFINITY, bound_state: true, certified: true, amplitude: 0.0 }
                } else {
                    solve_member(&landau_pair(t, 0.0, s), s)?
                };
                Ok(simple(sv, 0.0, 1.0, 0.0, extra))
            }
            FamilyName::SphereBundleH | FamilyName::Sl2Universal => {
                let inner = self.maass_ground(p[0])?;
                let thr = 0.5 * (p[0] * p[0] + 0.25);
                let extra = 0.5 * (p[0] + self.b()).powi(2);
                Ok(MemberValue {
                    params: p.to_vec(),
                    value: inner + extra,
                    threshold: thr + extra,
                    bound_state: inner < thr,
                    certified: true,
                    amplitude: 0.0,
                    potential_floor: 0.125 + extra,
                })
            }
            FamilyName::KeplerRadial => {
                let r = solve_effective_1d(&kepler_operator(self.b(), p[0] as i64, 0.0, s), 1)?;
                Ok(MemberValue {
                    params: p.to_vec(),
                    value: r.eigenvalues[0],
                    threshold: self.b() * p[0],
                    bound_state: true,
                    certified: true,
                    amplitude: r.boundary_amplitude.unwrap_or(0.0),
                    potential_floor: f64::NEG_INFINITY,
                })
            }
            FamilyName::SolMonopole => Err(Error::InvalidArgument(
                "sol_monopole reduces to a two-dimensional operator; use sol_monopole_reduction".into(),
            )),
        }
    }

    /// Coarse scan points for continuous parameter `axis`, ascending.
    fn scan_points(&self, axis: usize) -> Vec<f64> {
        let geometric = |lo: i32, hi: i32| {
            let mut v: Vec<f64> = (lo..=hi).map(|t| (t as f64).exp()).collect();
            let neg: Vec<f64> = v.iter().rev().map(|x| -x).collect();
            let mut out = neg;
            out.push(0.0);
            out.append(&mut v);
            out
        };
        let linear = |half: f64, step: f64| {
            let n = (half / step).ceil() as i64;
            (-n..=n).map(|i| i as f64 * step).collect::<Vec<f64>>()
        };
        match self.name {
            // The shift z ↦ z + ln|ξ| maps member ξ onto member sign(ξ).
            FamilyName::Maass => vec![-1.0, 0.0, 1.0],
            FamilyName::Sol => geometric(-4, 3),
            FamilyName::Sl2Universal => {
                let mut v: Vec<f64> = linear(self.b().abs() + 2.0, 0.125);
                v.push(-self.b());
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
            FamilyName::Nil => linear(self.b().abs() + 1.0, 1.0 / 16.0).into_iter().map(|t| t / (2.0 * PI)).collect(),
            FamilyName::TorusLandau => {
                let _ = axis;
                vec![-1.0, 0.0, 1.0]
            }
            _ => vec![0.0],
        }
    }

    /// Lower bound for members with `|m| > edge`, for integer families.
    fn tail_bound(&self, edge: i64) -> f64 {
        let b = self.b().abs();
        let next = (edge + 1) as f64;
        match self.name {
            FamilyName::SphereBundleH => 0.125 + 0.5 * (next - b).max(0.0).powi(2),
            FamilyName::NilAbelian => 0.5 * (2.0 * PI * next - b).max(0.0).powi(2),
            FamilyName::KeplerRadial if self.b() == 0.0 => -0.5 / (next + 0.5).powi(2),
            _ => f64::NEG_INFINITY,
        }
    }

    fn default_edge(&self) -> i64 {
        self.settings.range.unwrap_or(self.b().abs().ceil() as i64 + 3)
    }

    /// Closed-form ground state of the full operator, when one is known.
    pub fn reference(&self) -> Option<f64> {
        let b = self.fields.first().copied().unwrap_or(0.0);
        match self.name {
            FamilyName::TorusLandau => {
                (!self.fields.contains(&0.0)).then(|| 0.5 * self.fields.iter().map(|l| l.abs()).sum::<f64>())
            }
            FamilyName::Maass => Some(closedform::maass(b).lambda0),
            FamilyName::SphereBundleH => Some(closedform::sphere_bundle_h_lambda0(b)),
            FamilyName::Sl2Universal => Some(closedform::sl2_universal_lambda0(b)),
            FamilyName::Nil => Some(closedform::nil_universal_lambda0(b)),
            FamilyName::NilAbelian => Some(nil_abelian_branch_min(b, self.default_edge().max(5))),
            FamilyName::Sol => closedform::sol_facts(self.fields[0], self.fields[1]).lambda0,
            FamilyName::KeplerRadial => (b == 0.0).then(|| closedform::bohr(0)),
            FamilyName::SolMonopole => None,
        }
    }
}

/// `min(½B², min_{0<|m|≤edge} ½((B + 2πm)² + 2π|m|))`.
pub fn nil_abelian_branch_min(b: f64, edge: i64) -> f64 {
    (1..=edge)
        .flat_map(|m| [m, -m])
        .map(|m| 0.5 * ((b + 2.0 * PI * m as f64).powi(2) + 2.0 * PI * m.abs() as f64))
        .fold(0.5 * b * b, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub edge: i64,
    /// Lower bound on every member with `|m| > edge`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverGroundState {
    pub family: FamilyName,
    pub fields: Vec<f64>,
    pub value: f64,
    pub argmin: Vec<f64>,
    pub reference: Option<f64>,
    pub certificate: Option<TailCertificate>,
    pub bound_state: bool,
    pub potential_floor: f64,
    #[serde(skip)]
    pub samples: Vec<MemberValue>,
}

impl CoverGroundState {
    /// Numeric value next to the analytic reference.
    pub fn bracket(&self) -> (f64, Option<f64>) {
        (self.value, self.reference)
    }
}

/// Ordering used for the deterministic reduction: by value, ties to smaller momenta.
fn better(a: &MemberValue, b: &MemberValue) -> bool {
    let na: f64 = a.params.iter().map(|x| x.abs()).sum();
    let nb: f64 = b.params.iter().map(|x| x.abs()).sum();
    a.value < b.value - 1e-12 || ((a.value - b.value).abs() <= 1e-12 && na < nb)
}

fn finish(fam: &ReducedFamily, best: MemberValue, samples: Vec<MemberValue>, certificate: Option<TailCertificate>) -> Result<CoverGroundState> {
    if !best.certified {
        return Err(Error::BoundaryAmplitudeTooLarge { amplitude: best.amplitude, side: "open" });
    }
    Ok(CoverGroundState {
        family: fam.name,
        fields: fam.fields.clone(),
        value: best.value,
        argmin: best.params.clone(),
        reference: fam.reference(),
        certificate,
        bound_state: best.bound_state,
        potential_floor: best.potential_floor,
        samples,
    })
}

/// Minimum over the integers `|m| ≤ edge` of an integer family, with the tail bound beyond.
pub fn abelian_cover_groundstate(fam: &ReducedFamily, edge: i64) -> Result<CoverGroundState> {
    if fam.domain != [ParamDomain::Integer] {
        return Err(Error::InvalidArgument(format!("{} is not an integer family", fam.name)));
    }
    let mut samples = Vec::with_capacity(2 * edge as usize + 1);
    for m in -edge..=edge {
        samples.push(fam.member(&[m as f64])?);
    }
    let best = samples.iter().fold(samples[0].clone(), |acc, s| if better(s, &acc) { s.clone() } else { acc });
    let cert = TailCertificate { edge, bound: fam.tail_bound(edge) };
    finish(fam, best, samples, Some(cert))
}

fn golden(lo: f64, hi: f64, tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<()> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(())
}

/// Infimum of the member ground values over all momenta.
///
/// Integer families are enumerated up to the default edge and fail when the tail bound does
/// not exceed the minimum. Continuous families get a scan followed by golden-section
/// refinement along each parameter between the neighbours of the best scan point.
pub fn minimize_over_momenta(fam: &ReducedFamily) -> Result<CoverGroundState> {
    if fam.name == FamilyName::SolMonopole {
        return Err(Error::InvalidArgument("sol_monopole is minimized by a two-dimensional solve".into()));
    }
    if fam.domain == [ParamDomain::Integer] {
        let res = abelian_cover_groundstate(fam, fam.default_edge())?;
        let cert = res.certificate.expect("integer families carry a certificate");
        if cert.bound <= res.value {
            return Err(Error::ScanRangeExhausted { edge: cert.edge, bound: cert.bound, minimum: res.value });
        }
        return Ok(res);
    }
    let p = fam.domain.len();
    let axes: Vec<Vec<f64>> = (0..p).map(|a| fam.scan_points(a)).collect();
    let mut samples = vec![];
    let total: usize = axes.iter().map(Vec::len).product();
    for flat in 0..total {
        let mut rem = flat;
        let params: Vec<f64> = axes
            .iter()
            .map(|ax| {
                let v = ax[rem % ax.len()];
                rem /= ax.len();
                v
            })
            .collect();
        samples.push(fam.member(&params)?);
    }
    let mut best = samples[0].clone();
    for s in &samples {
        if better(s, &best) {
            best = s.clone();
        }
    }
    let rounds = if fam.name == FamilyName::Maass { 0 } else { 2 };
    for _round in 0..rounds {
        for (a, ax) in axes.iter().enumerate() {
            let pos = ax
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - best.params[a]).abs().total_cmp(&(y.1 - best.params[a]).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if ax.len() < 2 {
                continue;
            }
            let step_lo = if pos > 0 { ax[pos] - ax[pos - 1] } else { ax[1] - ax[0] };
            let step_hi = if pos + 1 < ax.len() { ax[pos + 1] - ax[pos] } else { ax[pos] - ax[pos - 1] };
            let (lo, hi) = (ax[pos] - step_lo, ax[pos] + step_hi);
            let base = best.params.clone();
            let mut local = best.clone();
            golden(lo, hi, fam.settings.param_tol * (hi - lo), |t| {
                let mut q = base.clone();
                q[a] = t;
                let mv = fam.member(&q)?;
                let v = mv.value;
                if better(&mv, &local) {
                    local = mv.clone();
                }
                samples.push(mv);
                Ok(v)
            })?;
            best = local;
        }
    }
    finish(fam, best, samples, None)
}

/// Truncation window of the half-plane strip used by the Sol monopole reduction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripWindow {
    pub x: [f64; 2],
    /// Range of `z = ln y`.
    pub z: [f64; 2],
    pub nodes: [usize; 2],
}

impl Default for StripWindow {
    fn default() -> Self {
        Self { x: [-12.0, 12.0], z: [-1.0, 0.5], nodes: [240, 30] }
    }
}

/// A half-plane operator `½Δ_α + V` plus a constant.
#[derive(Clone, Debug)]
pub struct PlaneProblem {
    pub grid: Grid,
    pub alpha: VectorPotential,
    pub potential: ScalarPotential,
    pub character: Character,
    pub additive: f64,
}

impl PlaneProblem {
    pub fn lowest(&self, k: usize, tol: f64) -> Result<SpectrumResult> {
        let op = assemble(&self.grid, &self.alpha, &self.potential, &self.character, Convention::Half)?;
        let mut r = lowest_eigenvalues(&op.matrix, k, tol)?;
        r.eigenvalues.iter_mut().for_each(|v| *v += self.additive);
        Ok(r)
    }
}

fn strip_grid(window: &StripWindow) -> Result<Grid> {
    let geom = Geometry::build(GeometryKind::HalfPlaneHyperbolic {
        x: window.x,
        y: [window.z[0].exp(), window.z[1].exp()],
    })?;
    make_grid(&geom, &window.nodes)
}

/// Half-plane operator `½Δ + V_B − 1/8` with `V_B = ½B²x²/y²`. For `B ≠ 0` the momentum
/// `ξ_t` is removed by translating `x`; for `B = 0` the potential is `½ξ_t²/y²`.
pub fn sol_monopole_reduction(b: f64, xi_t: f64, window: &StripWindow) -> Result<PlaneProblem> {
    if b != 0.0 {
        sol_monopole_unfolded(b, 0.0, window)
    } else {
        sol_monopole_unfolded(0.0, xi_t, window)
    }
}

/// The same operator before the translation: `V = ½(ξ_t + Bx)²/y²`.
pub fn sol_monopole_unfolded(b: f64, xi_t: f64, window: &StripWindow) -> Result<PlaneProblem> {
    if !(b.is_finite() && xi_t.is_finite()) {
        return Err(Error::InvalidArgument("monopole parameters must be finite".into()));
    }
    let grid = strip_grid(window)?;
    let potential = ScalarPotential::new(grid.sample(|x| 0.5 * (xi_t + b * x[0]).powi(2) * (-2.0 * x[1]).exp()));
    Ok(PlaneProblem {
        alpha: VectorPotential::zeros(&grid),
        potential,
        character: Character::trivial(2),
        additive: -0.125,
        grid,
    })
}

/// Two-dimensional check of the Maass family: the strip `x ∈ [0, 1)` with Bloch angle `θ` and
/// field `B dx / y`, truncated to `z ∈ [z_w − below, z_w + 1.5]` around the well `z_w` of the
/// `x`-momentum `θ`.
pub fn maass_strip_oracle(b: f64, nx: usize, hz: f64, below: f64) -> Result<PlaneProblem> {
    if b == 0.0 {
        return Err(Error::InvalidArgument("the strip oracle needs a non-zero field".into()));
    }
    let theta = -0.25 * b.signum();
    let zw = (b.abs() / theta.abs()).ln();
    let z = [zw - below, zw + 1.5];
    let nz = ((z[1] - z[0]) / hz).round() as usize;
    let geom = Geometry::build(GeometryKind::HalfPlaneHyperbolic { x: [0.0, 1.0], y: [z[0].exp(), z[1].exp()] })?
        .with_periodic_axis(0)?;
    let grid = make_grid(&geom, &[nx, nz])?;
    let alpha = grid.sample_form(|x, k| if k == 0 { b * (-x[1]).exp() } else { 0.0 });
    let character = Character::new(&grid, &[theta, 0.0])?;
    Ok(PlaneProblem { potential: ScalarPotential::zeros(&grid), alpha, character, additive: 0.0, grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn family_names_round_trip() {
        for n in FamilyName::ALL {
            assert_eq!(n.as_str().parse::<FamilyName>().unwrap(), n);
        }
        assert!(matches!(build_family("hyperbolic", &[1.0]), Err(Error::UnknownFamily(_))));
        assert!(matches!(build_family("sol", &[1.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn torus_landau_oscillator_ladder() {
        let fam = build_family("torus_landau", &[1.0]).unwrap();
        let r = fam.member_spectrum(&[0.3], 3).unwrap();
        for (k, v) in r.eigenvalues.iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.5 * (2 * k + 1) as f64, epsilon = 1e-4);
        }
    }

    #[test]
    fn nil_member_value() {
        let fam = build_family("nil", &[0.0]).unwrap();
        let v = fam.member(&[1.0]).unwrap().value;
        assert_abs_diff_eq!(v, 2.0 * PI * PI + PI, epsilon = 1e-3);
    }

    #[test]
    fn sol_member_potential() {
        let fam = build_family("sol", &[1.0, 0.0]).unwrap();
        let MemberOperator::Scalar(m) = fam.member_operator(&[-0.7, 0.0]).unwrap() else { panic!() };
        for z in [-2.0f64, 0.0, 1.5] {
            let x: f64 = -0.7;
            let expect = x * x * (2.0 * z as f64).exp() + 2.0 * x * (z as f64).exp();
            assert_abs_diff_eq!((m.eff.potential)(z), expect, epsilon = 1e-12);
        }
        assert_eq!(m.eff.mass, 1.0);
    }

    #[test]
    fn nil_universal_closed_inner() {
        let mut s = SolverSettings::default();
        s.inner = InnerMode::ClosedForm;
        for (b, expect, xi) in [(1.0, 0.375, Some(0.5 / (2.0 * PI))), (0.4, 0.08, None)] {
            let r = minimize_over_momenta(&build_family_with(FamilyName::Nil, &[b], s.clone()).unwrap()).unwrap();
            assert_abs_diff_eq!(r.value, expect, epsilon = 1e-9);
            if let Some(xi) = xi {
                assert_abs_diff_eq!(r.argmin[0].abs(), xi, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn nil_abelian_enumeration() {
        let fam = build_family("nil_abelian", &[PI]).unwrap();
        let r = minimize_over_momenta(&fam).unwrap();
        assert_abs_diff_eq!(r.value, nil_abelian_branch_min(PI, 3), epsilon = 1e-4);
        assert!(r.certificate.unwrap().bound > r.value);
        let zero = minimize_over_momenta(&build_family("nil_abelian", &[0.0]).unwrap()).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn maass_family_minimum() {
        for (b, expect) in [(0.3, 0.17), (1.0, 0.5)] {
            let r = minimize_over_momenta(&build_family("maass", &[b]).unwrap()).unwrap();
            assert_abs_diff_eq!(r.value, expect, epsilon = 5e-3);
            assert!(r.value >= r.potential_floor);
        }
    }

    #[test]
    fn sol_exact_case() {
        let r = minimize_over_momenta(&build_family("sol", &[1.0, 0.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, 0.375, epsilon = 5e-3);
        assert!(r.bound_state);
    }

    #[test]
    fn kepler_needs_certified_tail() {
        let fam = build_family("kepler_radial", &[0.1]).unwrap();
        assert!(matches!(minimize_over_momenta(&fam), Err(Error::ScanRangeExhausted { .. })));
    }

    #[test]
    fn monopole_fold_drops_momentum() {
        let w = StripWindow { x: [-3.0, 3.0], z: [-0.5, 0.5], nodes: [12, 8] };
        let a = sol_monopole_reduction(1.0, 0.0, &w).unwrap();
        let b = sol_monopole_reduction(1.0, 1.0, &w).unwrap();
        assert_eq!(a.potential.values, b.potential.values);
        let x = a.grid.coords(5);
        assert_abs_diff_eq!(a.potential.values[5], 0.5 * x[0] * x[0] / x[1].exp().powi(2), epsilon = 1e-12);
    }
}
