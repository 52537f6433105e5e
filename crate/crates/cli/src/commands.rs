//! Subcommands. Each returns the JSON document printed on stdout.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use magspec_core::assembly::{assemble, Character, Convention};
use magspec_core::bloch::{band_structure, CoverSpec, Fold};
use magspec_core::closedform;
use magspec_core::eigensolve::{lowest_eigenvalues, solve_effective_1d};
use magspec_core::geometry::{make_grid, model_potential_torus, Geometry, GeometryKind, Grid, ScalarPotential, VectorPotential};
use magspec_core::mane::{critical_value, mane_reference, strict_critical_value};
use magspec_core::reduction::{build_family_with, kepler_operator, minimize_over_momenta, FamilyName, SolverSettings};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::output::{write_csv, CurveData};
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "magspec", version, about = "Spectra of magnetic Schrödinger operators and Mañé critical values")]
pub struct Cli {
    /// JSON object whose keys are flag names of the chosen command; it is read before the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest eigenvalues of a discretized operator or of a reduced family.
    Spectrum(SpectrumArgs),
    /// Band structure over the characters of a cover.
    Bands(BandsArgs),
    /// Ground state energy against the field strength, as CSV and SVG.
    Curve(CurveArgs),
    /// Mañé's critical value on a flat torus.
    Mane(ManeArgs),
    /// Closed-form spectra and reference critical values.
    Reference(ReferenceArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeomArg {
    Circle,
    Torus,
    Plane,
    MagneticTorus,
    Kepler,
    Maass,
    SphereBundleH,
    Sl2Universal,
    Nil,
    NilAbelian,
    Sol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Half,
    Double,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Nodes per axis.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// `zero`, `const:c` (c dx), `flux:a` (2πa dx), `C+sin` ((C + sin 2πx) dx) or `landau:λ`.
    #[arg(long, default_value = "zero")]
    pub alpha: String,
    /// `zero`, `const:v`, `cos:a` (a cos 2πx) or `harmonic:ω` (½ω²|x|²).
    #[arg(long, default_value = "zero")]
    pub potential: String,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, value_enum)]
    pub geom: GeomArg,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Half width of the truncated plane box.
    #[arg(long, default_value_t = 8.0)]
    pub half_width: f64,
    /// Constant field of the magnetic torus (a multiple of 2π on the unit torus).
    #[arg(long, default_value_t = 2.0 * PI)]
    pub lambda: f64,
    #[arg(long = "B", default_value_t = 0.0)]
    pub b: f64,
    #[arg(long = "Bx")]
    pub bx: Option<f64>,
    #[arg(long = "By")]
    pub by: Option<f64>,
    /// Angular momentum of the Kepler mode.
    #[arg(long, default_value_t = 1)]
    pub m: i64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Half)]
    pub convention: ConventionArg,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the assembled matrix in matrix-market format.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    #[arg(long, value_enum, default_value_t = GeomArg::Circle)]
    pub geom: GeomArg,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Constant flux `2πa dx` added to α.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Fold count per periodic axis (`3`, `3,2`) or `full`.
    #[arg(long, default_value = "1")]
    pub cover: String,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long, default_value = "0")]
    pub from: String,
    #[arg(long, default_value = "3")]
    pub to: String,
    /// Step, possibly a fraction such as `1/64`.
    #[arg(long, default_value = "1/64")]
    pub step: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ManeArgs {
    #[arg(long, value_enum, default_value_t = GeomArg::Circle)]
    pub geom: GeomArg,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Minimize over all constant harmonic shifts as well.
    #[arg(long)]
    pub strict: bool,
    /// Write the certificate gauge function as CSV.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long = "B", default_value_t = 0.0)]
    pub b: f64,
    #[arg(long = "By", default_value_t = 0.0)]
    pub by: f64,
    #[arg(long, default_value_t = 1)]
    pub m: i64,
    #[arg(long, default_value_t = 0)]
    pub level: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `all`, `operators`, `closedform`, `mane`, `properties` or a comma list of criterion numbers.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_number(s: &str) -> Result<f64> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| config(format!("not a number: `{s}`")));
    match s.split_once('/') {
        Some((a, b)) => Ok(parse(a)? / parse(b)?),
        None => parse(s),
    }
}

fn grid_for(geom: GeomArg, n: usize, half_width: f64, lambda: f64) -> Result<Grid> {
    let g = match geom {
        GeomArg::Circle => Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0] })?,
        GeomArg::Torus => Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0, 1.0] })?,
        GeomArg::Plane => Geometry::build(GeometryKind::PlaneTruncated { half_widths: vec![half_width; 2] })?,
        GeomArg::MagneticTorus => Geometry::magnetic_torus(vec![1.0, 1.0], &[lambda])?,
        other => return Err(config(format!("{other:?} is not a grid geometry"))),
    };
    let nodes = vec![n; g.dim];
    Ok(make_grid(&g, &nodes)?)
}

pub fn parse_alpha(spec: &str, grid: &Grid) -> Result<VectorPotential> {
    let d = grid.dim();
    let first = |c: f64| {
        let mut v = vec![0.0; d];
        v[0] = c;
        v
    };
    if spec == "zero" {
        return Ok(VectorPotential::zeros(grid));
    }
    if let Some(c) = spec.strip_prefix("const:") {
        return Ok(VectorPotential::constant(grid, &first(parse_number(c)?)));
    }
    if let Some(a) = spec.strip_prefix("flux:") {
        return Ok(VectorPotential::constant(grid, &first(2.0 * PI * parse_number(a)?)));
    }
    if let Some(l) = spec.strip_prefix("landau:") {
        return Ok(model_potential_torus(&[parse_number(l)?], grid)?);
    }
    if let Some(c) = spec.strip_suffix("+sin") {
        let c = parse_number(c)?;
        return Ok(grid.sample_form(|x, k| if k == 0 { c + (2.0 * PI * x[0]).sin() } else { 0.0 }));
    }
    Err(config(format!("unknown α specification `{spec}`")))
}

pub fn parse_potential(spec: &str, grid: &Grid) -> Result<ScalarPotential> {
    if spec == "zero" {
        return Ok(ScalarPotential::zeros(grid));
    }
    if let Some(v) = spec.strip_prefix("const:") {
        return Ok(ScalarPotential::new(vec![parse_number(v)?; grid.len()]));
    }
    if let Some(a) = spec.strip_prefix("cos:") {
        let a = parse_number(a)?;
        return Ok(ScalarPotential::new(grid.sample(|x| a * (2.0 * PI * x[0]).cos())));
    }
    if let Some(w) = spec.strip_prefix("harmonic:") {
        let w = parse_number(w)?;
        return Ok(ScalarPotential::new(grid.sample(|x| 0.5 * w * w * x.iter().map(|t| t * t).sum::<f64>())));
    }
    Err(config(format!("unknown potential specification `{spec}`")))
}

fn family_of(geom: GeomArg) -> Option<FamilyName> {
    Some(match geom {
        GeomArg::Maass => FamilyName::Maass,
        GeomArg::SphereBundleH => FamilyName::SphereBundleH,
        GeomArg::Sl2Universal => FamilyName::Sl2Universal,
        GeomArg::Nil => FamilyName::Nil,
        GeomArg::NilAbelian => FamilyName::NilAbelian,
        GeomArg::Sol => FamilyName::Sol,
        _ => return None,
    })
}

#[derive(Serialize)]
struct SpectrumOut {
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    method: String,
    convention: Convention,
    #[serde(skip_serializing_if = "Option::is_none")]
    argmin: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
}

fn spectrum(a: &SpectrumArgs) -> Result<Value> {
    if a.k == 0 {
        return Err(config("k must be positive"));
    }
    let convention = match a.convention {
        ConventionArg::Half => Convention::Half,
        ConventionArg::Double => Convention::Double,
    };
    let factor = if convention == Convention::Double { 2.0 } else { 1.0 };
    let settings = SolverSettings::default();
    let out = if a.geom == GeomArg::Kepler {
        let r = solve_effective_1d(&kepler_operator(a.b, a.m, 0.0, &settings), a.k)?;
        SpectrumOut {
            eigenvalues: r.eigenvalues.iter().map(|x| factor * x).collect(),
            residuals: r.residual_norms,
            method: "fd1d".into(),
            convention,
            argmin: None,
            reference: closedform::kepler(a.b, a.m, 0).ok().map(|x| factor * x),
        }
    } else if let Some(name) = family_of(a.geom) {
        let fields = if name == FamilyName::Sol { vec![a.bx.unwrap_or(a.b), a.by.unwrap_or(0.0)] } else { vec![a.b] };
        let fam = build_family_with(name, &fields, settings)?;
        let r = minimize_over_momenta(&fam)?;
        SpectrumOut {
            eigenvalues: vec![factor * r.value],
            residuals: vec![],
            method: "reduced_family".into(),
            convention,
            argmin: Some(r.argmin),
            reference: r.reference.map(|x| factor * x),
        }
    } else {
        let grid = grid_for(a.geom, a.field.n, a.half_width, a.lambda)?;
        let alpha = parse_alpha(&a.field.alpha, &grid)?;
        let v = parse_potential(&a.field.potential, &grid)?;
        let op = assemble(&grid, &alpha, &v, &Character::trivial(grid.dim()), convention)?;
        if let Some(path) = &a.dump_matrix {
            op.write_matrix_market(BufWriter::new(File::create(path)?))?;
        }
        let r = lowest_eigenvalues(&op.matrix, a.k, a.tol)?;
        SpectrumOut {
            eigenvalues: r.eigenvalues,
            residuals: r.residual_norms,
            method: serde_json::to_value(r.method).ok().and_then(|m| m.as_str().map(String::from)).unwrap_or_default(),
            convention,
            argmin: None,
            reference: None,
        }
    };
    if let Some(path) = &a.csv {
        let rows: Vec<Vec<f64>> = out.eigenvalues.iter().enumerate().map(|(i, &e)| vec![i as f64, e]).collect();
        write_csv(path, &["index", "eigenvalue"], &rows)?;
    }
    Ok(serde_json::to_value(out).expect("spectrum output serializes"))
}

fn bands(a: &BandsArgs) -> Result<Value> {
    let grid = grid_for(a.geom, a.field.n, 8.0, 2.0 * PI)?;
    let flux = VectorPotential::constant(&grid, &{
        let mut v = vec![0.0; grid.dim()];
        v[0] = 2.0 * PI * a.a;
        v
    });
    let alpha = parse_alpha(&a.field.alpha, &grid)?.add(&flux);
    let v = parse_potential(&a.field.potential, &grid)?;
    let cover = if a.cover == "full" {
        CoverSpec::full(grid.dim())
    } else {
        let folds = a
            .cover
            .split(',')
            .map(|t| t.trim().parse::<u32>().map(Fold::Finite).map_err(|_| config(format!("bad cover `{}`", a.cover))))
            .collect::<Result<Vec<_>>>()?;
        let mut folds = folds;
        folds.resize(grid.dim(), Fold::Finite(1));
        CoverSpec::new(folds)?
    };
    let b = band_structure(&grid, &alpha, &v, &cover, a.samples, a.k)?;
    Ok(json!({
        "lambda0": b.lambda0,
        "bands": b.bands,
        "resolution": b.resolution,
        "argmin_angles": b.argmin.angles,
        "characters": b.characters.len(),
    }))
}

/// Sample the ground state energy of a family over a field range.
pub fn curve_data(family: FamilyName, bs: &[f64]) -> Result<CurveData> {
    let settings = SolverSettings::default();
    let rows = bs
        .par_iter()
        .map(|&b| {
            let fam = build_family_with(family, &[b], settings.clone())?;
            let r = minimize_over_momenta(&fam)?;
            let (branches, threshold) = spectrum_lines(family, b);
            Ok((r.value, r.reference.unwrap_or(f64::NAN), branches, threshold))
        })
        .collect::<std::result::Result<Vec<_>, magspec_core::error::Error>>()?;
    let mut data = CurveData { b: bs.to_vec(), ..CurveData::default() };
    for (num, cf, br, thr) in rows {
        data.lambda0_numeric.push(num);
        data.lambda0_closed_form.push(cf);
        data.branches.push(br);
        data.thresholds.push(thr);
    }
    Ok(data)
}

/// Closed-form point eigenvalues below the continuum and the continuum threshold.
fn spectrum_lines(family: FamilyName, b: f64) -> (Vec<f64>, Option<f64>) {
    let from = |s: closedform::ClosedFormSpectrum| {
        let cap = s.continuum_threshold.unwrap_or(s.lambda0 + 1.0);
        (s.points_below(cap).into_iter().take(4).map(|p| p.value).collect(), s.continuum_threshold)
    };
    match family {
        FamilyName::Maass => from(closedform::maass(b)),
        FamilyName::SphereBundleH => from(closedform::sphere_bundle_h(b)),
        FamilyName::NilAbelian => {
            let lines = (-2i64..=2).map(|m| 0.5 * ((b + 2.0 * PI * m as f64).powi(2) + 2.0 * PI * m.abs() as f64)).collect();
            (lines, None)
        }
        _ => (vec![], None),
    }
}

fn curve(a: &CurveArgs) -> Result<Value> {
    let family: FamilyName = a.family.parse()?;
    if !matches!(
        family,
        FamilyName::Maass | FamilyName::SphereBundleH | FamilyName::Sl2Universal | FamilyName::Nil | FamilyName::NilAbelian
    ) {
        return Err(config(format!("curves are drawn for one-field families, not {family}")));
    }
    let (from, to, step) = (parse_number(&a.from)?, parse_number(&a.to)?, parse_number(&a.step)?);
    if !(step > 0.0) || to < from {
        return Err(config("need from ≤ to and a positive step"));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize;
    let bs: Vec<f64> = (0..=count).map(|i| from + i as f64 * step).collect();
    let data = curve_data(family, &bs)?;
    if let Some(path) = &a.out {
        data.write_csv(path)?;
    }
    if let Some(path) = &a.svg {
        std::fs::write(path, data.to_svg(&format!("{family}: ground state energy")))?;
    }
    let minima: Vec<f64> = verify::local_minima(&data.lambda0_numeric).into_iter().map(|i| bs[i]).collect();
    let maxima: Vec<f64> = verify::local_maxima(&data.lambda0_numeric).into_iter().map(|i| bs[i]).collect();
    Ok(json!({
        "family": family,
        "samples": bs.len(),
        "max_abs_error": data.max_abs_error(),
        "local_minima": minima,
        "local_maxima": maxima,
    }))
}

fn mane(a: &ManeArgs) -> Result<Value> {
    let grid = grid_for(a.geom, a.field.n, 8.0, 2.0 * PI)?;
    let alpha = parse_alpha(&a.field.alpha, &grid)?;
    let v = parse_potential(&a.field.potential, &grid)?;
    let r = critical_value(&grid, &alpha, &v, a.tol)?;
    if let Some(path) = &a.certificate {
        let rows: Vec<Vec<f64>> =
            (0..grid.len()).map(|i| grid.coords(i).into_iter().chain([r.certificate_f.values[i]]).collect()).collect();
        let mut header: Vec<String> = (0..grid.dim()).map(|k| format!("x{}", k + 1)).collect();
        header.push("f".into());
        write_csv(path, &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?;
    }
    let mut out = json!({ "value": r.value, "lower_bound": r.lower_bound, "gap": r.gap, "iterations": r.iterations });
    if a.strict {
        let basis: Vec<Vec<f64>> = (0..grid.dim())
            .map(|k| {
                let mut e = vec![0.0; grid.dim()];
                e[k] = 1.0;
                e
            })
            .collect();
        let s = strict_critical_value(&grid, &alpha, &v, &basis, a.tol)?;
        out["strict"] = json!({ "value": s.value, "argmin": s.argmin, "gap": s.at_argmin.gap });
    }
    Ok(out)
}

fn reference(a: &ReferenceArgs) -> Result<Value> {
    let cf = |s: closedform::ClosedFormSpectrum| {
        let cap = s.continuum_threshold.unwrap_or(s.lambda0 + 10.0);
        let points: Vec<f64> = s.points_below(cap).into_iter().map(|p| p.value).collect();
        json!({ "lambda0": s.lambda0, "points": points, "threshold": s.continuum_threshold, "convention": s.normalization })
    };
    let b = a.b;
    let mut out = match a.family.as_str() {
        "maass" | "hyperbolic" => cf(closedform::maass(b)),
        "sphere_bundle_h" => cf(closedform::sphere_bundle_h(b)),
        "nil" => cf(closedform::nil(b, closedform::NilWhich::Universal)),
        "nil_abelian" => json!({ "lambda0": magspec_core::reduction::nil_abelian_branch_min(b, 5) }),
        "sl2_universal" => json!({ "lambda0": closedform::sl2_universal_lambda0(b) }),
        "sol" => serde_json::to_value(closedform::sol_facts(b, a.by)).expect("sol facts serialize"),
        "landau" | "torus_landau" => cf(closedform::landau(&[b], false)?),
        "kepler" | "kepler_radial" => json!({
            "level": closedform::kepler(b, a.m, a.level)?,
            "threshold": closedform::kepler_threshold(b, a.m),
        }),
        other => return Err(CliError::Solver(magspec_core::error::Error::UnknownFamily(other.to_string()))),
    };
    if let Ok(c) = mane_reference(a.family.as_str(), b) {
        out["mane_critical_value"] = if c.is_finite() { json!(c) } else { json!("infinity") };
    }
    Ok(out)
}

/// Criterion numbers selected by a suite name.
pub fn suite_ids(suite: &str) -> Result<Vec<u32>> {
    Ok(match suite {
        "all" => verify::ALL.to_vec(),
        "operators" => vec![1, 2],
        "closedform" => vec![3, 4, 5, 6, 7],
        "mane" => vec![8, 9, 10],
        "properties" => vec![11],
        list => list
            .split(',')
            .map(|t| match t.trim().parse::<u32>() {
                Ok(id) if verify::ALL.contains(&id) => Ok(id),
                _ => Err(config(format!("unknown suite or criterion `{t}`"))),
            })
            .collect::<Result<Vec<_>>>()?,
    })
}

fn verify_cmd(a: &VerifyArgs) -> Result<Value> {
    let ids = suite_ids(&a.suite)?;
    let seeds: Vec<u64> = a.seed.map_or(verify::DEFAULT_SEEDS.to_vec(), |s| vec![s]);
    let reports: Vec<verify::CriterionReport> = ids.iter().map(|&id| verify::run(id, &seeds)).collect();
    let failed = reports.iter().filter(|r| !r.pass).count();
    let doc = serde_json::to_value(&reports).expect("reports serialize");
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&doc).expect("json"))?;
    }
    if failed > 0 {
        return Err(CliError::VerifyFailed { failed, report: doc });
    }
    Ok(doc)
}

pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Spectrum(a) => spectrum(a),
        Command::Bands(a) => bands(a),
        Command::Curve(a) => curve(a),
        Command::Mane(a) => mane(a),
        Command::Reference(a) => reference(a),
        Command::Verify(a) => verify_cmd(a),
    }
}
