//! Model geometries as single coordinate charts, structured grids over them,
//! nodal fields, and the discrete Hodge decomposition on flat tori.
//!
//! Chart conventions:
//! * hyperbolic half-plane and the sphere bundle use `z = ln y` in place of `y`;
//! * the sphere bundle chart is `(x, z, φ)` with `φ` periodic of period `2π`;
//! * Nil uses `(x, y, z)` with left-invariant coframe `dx, dy, dz − x dy`;
//! * Sol uses `(x, y, z)` with metric `e^{2z}dx² + e^{−2z}dy² + dz²`;
//! * the punctured plane uses polar `(r, φ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which cover of a Nil manifold the chart represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NilCover {
    Universal,
    /// Quotient by the center lattice: the `z` axis is identified.
    MaximalAbelian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryKind {
    TorusFlat { lengths: Vec<f64> },
    PlaneTruncated { half_widths: Vec<f64> },
    HalfPlaneHyperbolic { x: [f64; 2], y: [f64; 2] },
    SphereBundleH { x: [f64; 2], y: [f64; 2] },
    NilCover { which: NilCover, x: [f64; 2], y: [f64; 2], z: [f64; 2] },
    SolCover { x: [f64; 2], y: [f64; 2], z: [f64; 2] },
    PuncturedPlaneRadial { r: [f64; 2] },
}

/// Identification of the two ends of a chart axis.
///
/// A section `u` on the cover satisfies `u(x + period·e_axis) = e^{i Σ_l phase[l] x_l} u(x)`.
/// An empty `phase` means plain periodicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub axis: usize,
    pub period: f64,
    pub phase: Vec<f64>,
}

impl Identification {
    pub fn phase_at(&self, x: &[f64]) -> f64 {
        self.phase.iter().zip(x).map(|(c, xl)| c * xl).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub kind: GeometryKind,
    pub dim: usize,
    /// Chart bounds per axis (in chart coordinates, so `ln y` on hyperbolic charts).
    pub bounds: Vec<[f64; 2]>,
    pub identifications: Vec<Identification>,
}

fn interval(name: &str, b: [f64; 2]) -> Result<[f64; 2]> {
    if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
        return Err(Error::DegenerateChart(format!("{name} interval [{}, {}] is empty", b[0], b[1])));
    }
    Ok(b)
}

fn positive_interval(name: &str, b: [f64; 2]) -> Result<[f64; 2]> {
    let b = interval(name, b)?;
    if b[0] <= 0.0 {
        return Err(Error::DegenerateChart(format!("{name}_min = {} must be positive", b[0])));
    }
    Ok(b)
}

impl Geometry {
    pub fn build(kind: GeometryKind) -> Result<Self> {
        let periodic = |axis: usize, b: [f64; 2]| Identification { axis, period: b[1] - b[0], phase: vec![] };
        let (bounds, identifications): (Vec<[f64; 2]>, Vec<Identification>) = match &kind {
            GeometryKind::TorusFlat { lengths } => {
                if lengths.is_empty() {
                    return Err(Error::DegenerateChart("torus needs at least one axis".into()));
                }
                let bounds = lengths
                    .iter()
                    .map(|&l| interval("torus period", [0.0, l]))
                    .collect::<Result<Vec<_>>>()?;
                let ids = bounds.iter().enumerate().map(|(k, &b)| periodic(k, b)).collect();
                (bounds, ids)
            }
            GeometryKind::PlaneTruncated { half_widths } => {
                if half_widths.is_empty() {
                    return Err(Error::DegenerateChart("plane needs at least one axis".into()));
                }
                let bounds = half_widths
                    .iter()
                    .map(|&w| interval("box", [-w, w]))
                    .collect::<Result<Vec<_>>>()?;
                (bounds, vec![])
            }
            GeometryKind::HalfPlaneHyperbolic { x, y } => {
                let y = positive_interval("y", *y)?;
                (vec![interval("x", *x)?, [y[0].ln(), y[1].ln()]], vec![])
            }
            GeometryKind::SphereBundleH { x, y } => {
                let y = positive_interval("y", *y)?;
                let phi = [0.0, 2.0 * PI];
                (vec![interval("x", *x)?, [y[0].ln(), y[1].ln()], phi], vec![periodic(2, phi)])
            }
            GeometryKind::NilCover { which, x, y, z } => {
                let z = interval("z", *z)?;
                let ids = match which {
                    NilCover::Universal => vec![],
                    NilCover::MaximalAbelian => vec![periodic(2, z)],
                };
                (vec![interval("x", *x)?, interval("y", *y)?, z], ids)
            }
            GeometryKind::SolCover { x, y, z } => {
                (vec![interval("x", *x)?, interval("y", *y)?, interval("z", *z)?], vec![])
            }
            GeometryKind::PuncturedPlaneRadial { r } => {
                let phi = [0.0, 2.0 * PI];
                (vec![positive_interval("r", *r)?, phi], vec![periodic(1, phi)])
            }
        };
        Ok(Self { dim: bounds.len(), kind, bounds, identifications })
    }

    /// Flat torus with the linear model potential `Σ_j λ_j x_{2j−1} dx^{2j}` made global by
    /// twisted identifications. Each `λ_j L_{2j−1} L_{2j}` must be a multiple of `2π`.
    pub fn magnetic_torus(lengths: Vec<f64>, lambdas: &[f64]) -> Result<Self> {
        let mut g = Self::build(GeometryKind::TorusFlat { lengths: lengths.clone() })?;
        check_pairs(lambdas.len(), g.dim)?;
        for (j, &lam) in lambdas.iter().enumerate() {
            let (a, b) = (2 * j, 2 * j + 1);
            let flux = lam * lengths[a] * lengths[b] / (2.0 * PI);
            if (flux - flux.round()).abs() > 1e-9 {
                return Err(Error::FluxNotQuantized(format!(
                    "pair {}: λ L L / 2π = {flux} is not an integer",
                    j + 1
                )));
            }
            g.identifications[a].phase = (0..g.dim).map(|l| if l == b { -lam * lengths[a] } else { 0.0 }).collect();
        }
        Ok(g)
    }

    /// Identify an additional axis over its chart bounds. Only axes along which the metric
    /// is translation invariant may be identified.
    pub fn with_periodic_axis(mut self, axis: usize) -> Result<Self> {
        let allowed = match &self.kind {
            GeometryKind::TorusFlat { .. } | GeometryKind::PlaneTruncated { .. } => true,
            GeometryKind::HalfPlaneHyperbolic { .. } | GeometryKind::SphereBundleH { .. } => axis == 0,
            GeometryKind::NilCover { .. } => axis == 1 || axis == 2,
            GeometryKind::SolCover { .. } => axis <= 1,
            GeometryKind::PuncturedPlaneRadial { .. } => false,
        };
        if axis >= self.dim || !allowed {
            return Err(Error::DegenerateChart(format!("axis {axis} cannot be identified on this chart")));
        }
        if self.identification(axis).is_none() {
            let b = self.bounds[axis];
            self.identifications.push(Identification { axis, period: b[1] - b[0], phase: vec![] });
        }
        Ok(self)
    }

    pub fn identification(&self, axis: usize) -> Option<&Identification> {
        self.identifications.iter().find(|id| id.axis == axis)
    }

    pub fn is_flat_torus(&self) -> bool {
        matches!(self.kind, GeometryKind::TorusFlat { .. }) && self.identifications.len() == self.dim
    }

    /// Inverse metric `g^{jk}(x)` in chart coordinates, row-major `d × d`.
    pub fn metric_inverse(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        match &self.kind {
            GeometryKind::TorusFlat { .. } | GeometryKind::PlaneTruncated { .. } => {
                for k in 0..d {
                    g[k * d + k] = 1.0;
                }
            }
            GeometryKind::HalfPlaneHyperbolic { .. } => {
                g[0] = (2.0 * x[1]).exp();
                g[3] = 1.0;
            }
            GeometryKind::SphereBundleH { .. } => {
                let y = x[1].exp();
                g.copy_from_slice(&[y * y, 0.0, -y, 0.0, 1.0, 0.0, -y, 0.0, 2.0]);
            }
            GeometryKind::NilCover { .. } => {
                let s = x[0];
                g.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, s, 0.0, s, 1.0 + s * s]);
            }
            GeometryKind::SolCover { .. } => {
                g[0] = (2.0 * x[2]).exp();
                g[4] = (-2.0 * x[2]).exp();
                g[8] = 1.0;
            }
            GeometryKind::PuncturedPlaneRadial { .. } => {
                g[0] = 1.0;
                g[3] = 1.0 / (x[0] * x[0]);
            }
        }
        g
    }

    /// Riemannian volume density `√|g|(x)` in chart coordinates.
    pub fn volume_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            GeometryKind::TorusFlat { .. }
            | GeometryKind::PlaneTruncated { .. }
            | GeometryKind::NilCover { .. }
            | GeometryKind::SolCover { .. } => 1.0,
            GeometryKind::HalfPlaneHyperbolic { .. } | GeometryKind::SphereBundleH { .. } => (-x[1]).exp(),
            GeometryKind::PuncturedPlaneRadial { .. } => x[0],
        }
    }
}

pub(crate) fn check_pairs(pairs: usize, dim: usize) -> Result<()> {
    if 2 * pairs > dim {
        return Err(Error::OddDimensionPairing { pair: pairs - 1, dim });
    }
    Ok(())
}

/// Cholesky test for positive definiteness of a symmetric row-major matrix.
pub fn is_positive_definite(a: &[f64], d: usize) -> bool {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = a[i * d + j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Neighbour of a node along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Neighbor {
    Interior(usize),
    /// Reached by crossing the identification of the axis.
    Wrap(usize),
    /// Outside a Dirichlet-truncated axis.
    Outside,
}

/// Node-centred structured grid over a chart.
///
/// Periodic axes place nodes at `lo + i h` with `h = period / n`; Dirichlet axes are cell
/// centred at `lo + (i + ½) h` with `h = (hi − lo) / n`, so the walls sit half a cell beyond
/// the outermost nodes. Flat indices run with axis 0 fastest.
#[derive(Clone, Debug)]
pub struct Grid {
    pub geometry: Geometry,
    pub nodes: Vec<usize>,
    pub h: Vec<f64>,
    pub boundary: Vec<Boundary>,
    strides: Vec<usize>,
}

pub fn make_grid(geometry: &Geometry, nodes_per_axis: &[usize]) -> Result<Grid> {
    if nodes_per_axis.len() != geometry.dim {
        return Err(Error::ShapeMismatch(format!(
            "{} node counts for a {}-dimensional chart",
            nodes_per_axis.len(),
            geometry.dim
        )));
    }
    if let Some((axis, &nodes)) = nodes_per_axis.iter().enumerate().find(|(_, &n)| n < 4) {
        return Err(Error::TooCoarse { axis, nodes });
    }
    let boundary: Vec<Boundary> = (0..geometry.dim)
        .map(|k| if geometry.identification(k).is_some() { Boundary::Periodic } else { Boundary::Dirichlet })
        .collect();
    let h = (0..geometry.dim)
        .map(|k| (geometry.bounds[k][1] - geometry.bounds[k][0]) / nodes_per_axis[k] as f64)
        .collect();
    let mut strides = vec![1; geometry.dim];
    for k in 1..geometry.dim {
        strides[k] = strides[k - 1] * nodes_per_axis[k - 1];
    }
    Ok(Grid { geometry: geometry.clone(), nodes: nodes_per_axis.to_vec(), h, boundary, strides })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.geometry.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .map(|&n| {
                let i = idx % n;
                idx /= n;
                i
            })
            .collect()
    }

    pub fn axis_coord(&self, axis: usize, i: f64) -> f64 {
        let lo = self.geometry.bounds[axis][0];
        match self.boundary[axis] {
            Boundary::Periodic => lo + i * self.h[axis],
            Boundary::Dirichlet => lo + (i + 0.5) * self.h[axis],
        }
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.axis_coord(k, i as f64))
            .collect()
    }

    pub fn all_coords(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.coords(i)).collect()
    }

    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Neighbor {
        let n = self.nodes[axis];
        let i = (idx / self.strides[axis]) % n;
        let base = idx - i * self.strides[axis];
        let (j, wrapped) = match (forward, i) {
            (true, i) if i + 1 == n => (0, true),
            (true, i) => (i + 1, false),
            (false, 0) => (n - 1, true),
            (false, i) => (i - 1, false),
        };
        match (wrapped, self.boundary[axis]) {
            (false, _) => Neighbor::Interior(base + j * self.strides[axis]),
            (true, Boundary::Periodic) => Neighbor::Wrap(base + j * self.strides[axis]),
            (true, Boundary::Dirichlet) => Neighbor::Outside,
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Node measure `√|g|(x_i) Π h_k`.
    pub fn weights(&self) -> Vec<f64> {
        let cell = self.cell_volume();
        (0..self.len()).map(|i| self.geometry.volume_density(&self.coords(i)) * cell).collect()
    }

    pub fn volume(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// Sample a scalar function at the nodes.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.coords(i))).collect()
    }

    /// Sample a 1-form. Component `k` is evaluated at the link midpoint `x_i + ½ h_k e_k`,
    /// which is where the discrete stencil uses it.
    pub fn sample_form(&self, f: impl Fn(&[f64], usize) -> f64) -> VectorPotential {
        let d = self.dim();
        let mut values = Vec::with_capacity(self.len() * d);
        for i in 0..self.len() {
            let x = self.coords(i);
            for k in 0..d {
                let mut xm = x.clone();
                xm[k] += 0.5 * self.h[k];
                values.push(f(&xm, k));
            }
        }
        VectorPotential { dim: d, values }
    }

    /// Every node has the Cholesky-positive inverse metric and positive density.
    pub fn metric_is_valid(&self) -> bool {
        let d = self.dim();
        (0..self.len()).all(|i| {
            let x = self.coords(i);
            is_positive_definite(&self.geometry.metric_inverse(&x), d) && self.geometry.volume_density(&x) > 0.0
        })
    }
}

/// Nodewise 1-form: `values[i * dim + k]` is `α_k` on the forward link of node `i` along axis `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorPotential {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl VectorPotential {
    pub fn zeros(grid: &Grid) -> Self {
        Self { dim: grid.dim(), values: vec![0.0; grid.len() * grid.dim()] }
    }

    pub fn constant(grid: &Grid, c: &[f64]) -> Self {
        Self { dim: grid.dim(), values: (0..grid.len()).flat_map(|_| c.iter().copied()).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, node: usize, k: usize) -> f64 {
        self.values[node * self.dim + k]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { dim: self.dim, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Weighted inner product `Σ_i w_i Σ_k a_k(i) b_k(i)`.
    pub fn inner(&self, other: &Self, weights: &[f64]) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (0..self.dim).map(|k| self.get(i, k) * other.get(i, k)).sum::<f64>())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarPotential {
    pub values: Vec<f64>,
    pub min: f64,
}

impl ScalarPotential {
    pub fn new(values: Vec<f64>) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        Self { values, min }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::new(vec![0.0; grid.len()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    pub values: Vec<f64>,
}

/// Model potential `α = Σ_j λ_j x_{2j−1} dx^{2j}` (pairs use axes `2j`, `2j+1` zero based).
pub fn model_potential_torus(lambdas: &[f64], grid: &Grid) -> Result<VectorPotential> {
    check_pairs(lambdas.len(), grid.dim())?;
    for (j, &lam) in lambdas.iter().enumerate() {
        let a = 2 * j;
        if lam != 0.0 && grid.boundary[a] == Boundary::Periodic {
            let twisted = grid.geometry.identification(a).is_some_and(|id| {
                let want = -lam * id.period;
                id.phase.get(a + 1).is_some_and(|&c| (c - want).abs() <= 1e-12 * want.abs().max(1.0))
            });
            if !twisted {
                return Err(Error::FluxNotQuantized(format!(
                    "axis {a} is periodic but its identification does not carry the magnetic phase for λ = {lam}"
                )));
            }
        }
    }
    Ok(grid.sample_form(|x, k| {
        if k % 2 == 1 && k / 2 < lambdas.len() {
            lambdas[k / 2] * x[k - 1]
        } else {
            0.0
        }
    }))
}

/// Rotation `Q` (row-major `d × d`, orthogonal) and `λ_j > 0` such that `Qᵀ B Q` is block diagonal
/// with blocks `[[0, λ_j], [−λ_j, 0]]` followed by zeros.
pub fn skew_normal_form(b: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if b.len() != d * d {
        return Err(Error::ShapeMismatch(format!("{} entries for a {d}×{d} matrix", b.len())));
    }
    let asym = (0..d * d).map(|p| (b[p] + b[(p % d) * d + p / d]).abs()).fold(0.0, f64::max);
    if asym > 1e-12 {
        return Err(Error::NotSkew(asym));
    }
    let ib = faer::Mat::<faer::c64>::from_fn(d, d, |i, j| faer::c64::new(0.0, b[i * d + j]));
    let eig = ib
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("eigensolver failed: {e:?}")))?;
    let vals: Vec<f64> = (0..d).map(|i| eig.S().column_vector()[i].re).collect();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-10 * scale;

    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut lambdas = Vec::new();
    let orthogonalize = |v: &mut Vec<f64>, cols: &[Vec<f64>]| {
        for _ in 0..2 {
            for c in cols {
                let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        }
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    for &i in order.iter().filter(|&&i| vals[i] > tol) {
        let lam = vals[i];
        let u = eig.U();
        for part in 0..2 {
            let mut v: Vec<f64> = (0..d).map(|r| if part == 0 { u[(r, i)].re } else { u[(r, i)].im }).collect();
            let norm = orthogonalize(&mut v, &cols);
            if norm < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            let w: Vec<f64> = (0..d).map(|r| -(0..d).map(|c| b[r * d + c] * v[c]).sum::<f64>() / lam).collect();
            cols.push(v);
            cols.push(w);
            lambdas.push(lam);
            break;
        }
    }
    for e in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v: Vec<f64> = (0..d).map(|r| if r == e { 1.0 } else { 0.0 }).collect();
        let norm = orthogonalize(&mut v, &cols);
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            cols.push(v);
        }
    }
    let q = (0..d * d).map(|p| cols[p % d][p / d]).collect();
    Ok((q, lambdas))
}

/// Four-way split of a 1-form on a flat torus.
#[derive(Clone, Debug)]
pub struct HodgeSplit {
    pub harmonic_in_cover_kernel: VectorPotential,
    pub harmonic_orthogonal: VectorPotential,
    pub coexact: VectorPotential,
    pub exact: VectorPotential,
    /// Primitive `f` of the exact part.
    pub primitive: GaugeFunction,
    /// L² norms in the order above.
    pub norms: [f64; 4],
}

impl HodgeSplit {
    /// Coclosed part `α − df_α`.
    pub fn coclosed(&self) -> VectorPotential {
        self.harmonic_in_cover_kernel.add(&self.harmonic_orthogonal).add(&self.coexact)
    }
}

/// Discrete differential with the forward link stencil; Dirichlet walls contribute zero.
pub fn differential(grid: &Grid, f: &[f64]) -> VectorPotential {
    let d = grid.dim();
    let mut values = vec![0.0; grid.len() * d];
    for i in 0..grid.len() {
        for k in 0..d {
            values[i * d + k] = match grid.neighbor(i, k, true) {
                Neighbor::Interior(j) | Neighbor::Wrap(j) => (f[j] - f[i]) / grid.h[k],
                Neighbor::Outside => 0.0,
            };
        }
    }
    VectorPotential { dim: d, values }
}

/// In-place multidimensional FFT over a grid with axis 0 fastest.
pub(crate) fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    let mut stride = 1;
    for &n in dims {
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let block = stride * n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (t, l) in line.iter_mut().enumerate() {
                    *l = data[start + off + t * stride];
                }
                fft.process(&mut line);
                for (t, l) in line.iter().enumerate() {
                    data[start + off + t * stride] = *l;
                }
            }
        }
        stride = block;
    }
}

/// Hodge decomposition on a flat torus grid. `cover_kernel` lists constant directions spanning
/// the harmonic forms that vanish on the covering group; the harmonic part is split against them.
pub fn hodge_decompose_torus(grid: &Grid, alpha: &VectorPotential, cover_kernel: &[Vec<f64>]) -> Result<HodgeSplit> {
    if !grid.geometry.is_flat_torus() {
        return Err(Error::NotTorus);
    }
    let d = grid.dim();
    let n = grid.len();
    if alpha.values.len() != n * d {
        return Err(Error::ShapeMismatch("1-form does not match grid".into()));
    }
    let mean: Vec<f64> = (0..d).map(|k| (0..n).map(|i| alpha.get(i, k)).sum::<f64>() / n as f64).collect();

    // Solve d*d f = d*α spectrally; the symbol of the forward difference is (e^{iθ} − 1)/h.
    let mut spec: Vec<Vec<Complex64>> = (0..d)
        .map(|k| (0..n).map(|i| Complex64::new(alpha.get(i, k), 0.0)).collect())
        .collect();
    for s in spec.iter_mut() {
        fft_nd(s, &grid.nodes, false);
    }
    let mut fhat = vec![Complex64::new(0.0, 0.0); n];
    for (p, fp) in fhat.iter_mut().enumerate().skip(1) {
        let m = grid.multi_index(p);
        let mut lap = 0.0;
        let mut rhs = Complex64::new(0.0, 0.0);
        for k in 0..d {
            let theta = 2.0 * PI * m[k] as f64 / grid.nodes[k] as f64;
            let sym = (Complex64::from_polar(1.0, theta) - 1.0) / grid.h[k];
            lap += sym.norm_sqr();
            rhs += sym.conj() * spec[k][p];
        }
        *fp = rhs / lap;
    }
    fft_nd(&mut fhat, &grid.nodes, true);
    let f: Vec<f64> = fhat.iter().map(|c| c.re / n as f64).collect();
    let exact = differential(grid, &f);

    // Orthonormal basis of the cover kernel directions.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in cover_kernel {
        if v.len() != d {
            return Err(Error::ShapeMismatch("harmonic direction has the wrong dimension".into()));
        }
        let mut w = v.clone();
        for b in &basis {
            let p: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
            w.iter_mut().zip(b).for_each(|(a, c)| *a -= p * c);
        }
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            basis.push(w.iter().map(|a| a / norm).collect());
        }
    }
    let mut h_in = vec![0.0; d];
    for b in &basis {
        let p: f64 = mean.iter().zip(b).map(|(a, c)| a * c).sum();
        h_in.iter_mut().zip(b).for_each(|(a, c)| *a += p * c);
    }
    let h_perp: Vec<f64> = mean.iter().zip(&h_in).map(|(m, a)| m - a).collect();
    let harmonic_in = VectorPotential::constant(grid, &h_in);
    let harmonic_perp = VectorPotential::constant(grid, &h_perp);
    let coexact = alpha.sub(&exact).sub(&harmonic_in).sub(&harmonic_perp);
    let w = grid.weights();
    let norms = [&harmonic_in, &harmonic_perp, &coexact, &exact].map(|p| p.inner(p, &w).sqrt());
    Ok(HodgeSplit {
        harmonic_in_cover_kernel: harmonic_in,
        harmonic_orthogonal: harmonic_perp,
        coexact,
        exact,
        primitive: GaugeFunction { values: f },
        norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(l: &[f64], n: &[usize]) -> Grid {
        make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: l.to_vec() }).unwrap(), n).unwrap()
    }

    #[test]
    fn torus_metric_is_euclidean() {
        let g = Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0, 1.0] }).unwrap();
        assert_eq!(g.metric_inverse(&[0.3, 0.2]), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.volume_density(&[0.3, 0.2]), 1.0);
    }

    #[test]
    fn hyperbolic_metric_in_log_chart() {
        let g = Geometry::build(GeometryKind::HalfPlaneHyperbolic { x: [-1.0, 1.0], y: [0.5, 4.0] }).unwrap();
        let y: f64 = 1.7;
        let z = y.ln();
        let gi = g.metric_inverse(&[0.1, z]);
        // Pull back to (x, y): g^{yy} = (dy/dz)² g^{zz}, √|g|_y = √|g|_z / y.
        assert!((gi[0] - y * y).abs() < 1e-12);
        assert!((gi[3] * y * y - y * y).abs() < 1e-12);
        assert!((g.volume_density(&[0.1, z]) / y - y.powi(-2)).abs() < 1e-12);
        assert!(Geometry::build(GeometryKind::HalfPlaneHyperbolic { x: [0.0, 1.0], y: [0.0, 1.0] }).is_err());
        assert!(Geometry::build(GeometryKind::PuncturedPlaneRadial { r: [-1.0, 1.0] }).is_err());
        assert!(Geometry::build(GeometryKind::TorusFlat { lengths: vec![0.0] }).is_err());
    }

    #[test]
    fn sol_metric() {
        let g = Geometry::build(GeometryKind::SolCover { x: [0.0, 1.0], y: [0.0, 1.0], z: [-6.0, 6.0] }).unwrap();
        let z: f64 = 0.4;
        let gi = g.metric_inverse(&[0.0, 0.0, z]);
        assert!((gi[0] - (2.0 * z).exp()).abs() < 1e-14);
        assert!((gi[4] - (-2.0 * z).exp()).abs() < 1e-14);
        assert_eq!(gi[8], 1.0);
        assert_eq!(g.volume_density(&[0.0, 0.0, z]), 1.0);
        let grid = make_grid(&g, &[4, 4, 600]).unwrap();
        assert!((grid.h[2] - 0.02).abs() < 1e-15);
        assert_eq!(grid.boundary[2], Boundary::Dirichlet);
    }

    #[test]
    fn every_chart_has_positive_metric() {
        let kinds = vec![
            GeometryKind::TorusFlat { lengths: vec![1.0, 2.0] },
            GeometryKind::PlaneTruncated { half_widths: vec![3.0, 3.0] },
            GeometryKind::HalfPlaneHyperbolic { x: [-2.0, 2.0], y: [0.1, 10.0] },
            GeometryKind::SphereBundleH { x: [-2.0, 2.0], y: [0.1, 10.0] },
            GeometryKind::NilCover { which: NilCover::Universal, x: [-3.0, 3.0], y: [0.0, 1.0], z: [0.0, 1.0] },
            GeometryKind::NilCover { which: NilCover::MaximalAbelian, x: [-3.0, 3.0], y: [0.0, 1.0], z: [0.0, 1.0] },
            GeometryKind::SolCover { x: [0.0, 1.0], y: [0.0, 1.0], z: [-6.0, 6.0] },
            GeometryKind::PuncturedPlaneRadial { r: [0.1, 5.0] },
        ];
        for kind in kinds {
            let g = Geometry::build(kind).unwrap();
            let grid = make_grid(&g, &vec![6; g.dim]).unwrap();
            assert!(grid.metric_is_valid(), "{:?}", g.kind);
            for id in &g.identifications {
                let b = g.bounds[id.axis];
                assert_eq!(id.period, b[1] - b[0]);
                assert!((grid.h[id.axis] * grid.nodes[id.axis] as f64 - id.period).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_spacing_and_indexing() {
        let g = torus(&[1.0, 1.0], &[8, 8]);
        assert_eq!(g.h, vec![0.125, 0.125]);
        assert!(g.boundary.iter().all(|b| *b == Boundary::Periodic));
        for i in 0..g.len() {
            assert_eq!(g.index(&g.multi_index(i)), i);
        }
        assert_eq!(g.neighbor(7, 0, true), Neighbor::Wrap(0));
        assert_eq!(g.neighbor(0, 1, false), Neighbor::Wrap(56));
        let plane = make_grid(&Geometry::build(GeometryKind::PlaneTruncated { half_widths: vec![8.0] }).unwrap(), &[256]).unwrap();
        assert_eq!(plane.h[0], 0.0625);
        assert_eq!(plane.boundary[0], Boundary::Dirichlet);
        assert_eq!(plane.neighbor(255, 0, true), Neighbor::Outside);
        assert!(matches!(
            make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0] }).unwrap(), &[3]),
            Err(Error::TooCoarse { axis: 0, nodes: 3 })
        ));
    }

    #[test]
    fn model_potential_pairs() {
        let g = torus(&[1.0, 1.0, 1.0, 1.0], &[4, 4, 4, 4]);
        assert!(model_potential_torus(&[], &g).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(model_potential_torus(&[1.0, 1.0, 1.0], &g), Err(Error::OddDimensionPairing { .. })));
        // λ ≠ 0 on a plainly periodic axis is inconsistent.
        assert!(matches!(model_potential_torus(&[1.0], &g), Err(Error::FluxNotQuantized(_))));

        let box4 = make_grid(&Geometry::build(GeometryKind::PlaneTruncated { half_widths: vec![2.0; 4] }).unwrap(), &[4; 4]).unwrap();
        let a = model_potential_torus(&[1.0, 2.0], &box4).unwrap();
        for i in 0..box4.len() {
            let x = box4.coords(i);
            assert_eq!(a.get(i, 0), 0.0);
            assert_eq!(a.get(i, 1), x[0]);
            assert_eq!(a.get(i, 2), 0.0);
            assert_eq!(a.get(i, 3), 2.0 * x[2]);
        }
    }

    #[test]
    fn model_potential_curl_identity() {
        let l = (8.0 * 2.0 * PI).sqrt();
        let geo = Geometry::magnetic_torus(vec![l, l], &[1.0]).unwrap();
        let g = make_grid(&geo, &[8, 8]).unwrap();
        let a = model_potential_torus(&[1.0], &g).unwrap();
        let area = g.h[0] * g.h[1];
        for i in 0..g.len() {
            let m = g.multi_index(i);
            if m[0] + 1 == g.nodes[0] || m[1] + 1 == g.nodes[1] {
                continue;
            }
            let right = g.index(&[m[0] + 1, m[1]]);
            let up = g.index(&[m[0], m[1] + 1]);
            let circ = a.get(i, 0) * g.h[0] + a.get(right, 1) * g.h[1] - a.get(up, 0) * g.h[0] - a.get(i, 1) * g.h[1];
            assert!((circ - area).abs() < 1e-12);
        }
        assert!(matches!(Geometry::magnetic_torus(vec![1.0, 1.0], &[1.0]), Err(Error::FluxNotQuantized(_))));
    }

    #[test]
    fn skew_forms() {
        let (q, l) = skew_normal_form(&[0.0, 1.0, -1.0, 0.0], 2).unwrap();
        assert_eq!(l.len(), 1);
        assert!((l[0] - 1.0).abs() < 1e-12);
        for (a, b) in q.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let (_, l) = skew_normal_form(&[0.0; 9], 3).unwrap();
        assert!(l.is_empty());
        assert!(matches!(skew_normal_form(&[0.0, 1.0, 1.0, 0.0], 2), Err(Error::NotSkew(_))));
    }

    fn check_normal_form(b: &[f64], d: usize) -> Vec<f64> {
        let (q, l) = skew_normal_form(b, d).unwrap();
        let mut qbq = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                qbq[i * d + j] = (0..d)
                    .flat_map(|r| (0..d).map(move |c| (r, c)))
                    .map(|(r, c)| q[r * d + i] * b[r * d + c] * q[c * d + j])
                    .sum();
                let qtq: f64 = (0..d).map(|r| q[r * d + i] * q[r * d + j]).sum();
                assert!((qtq - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        for i in 0..d {
            for j in 0..d {
                let want = match (i / 2 < l.len(), j / 2 < l.len()) {
                    (true, true) if i / 2 == j / 2 && i % 2 == 0 && j == i + 1 => l[i / 2],
                    (true, true) if i / 2 == j / 2 && i % 2 == 1 && i == j + 1 => -l[i / 2],
                    _ => 0.0,
                };
                assert!((qbq[i * d + j] - want).abs() < 1e-10, "{i},{j}: {} vs {want}", qbq[i * d + j]);
            }
        }
        l
    }

    #[test]
    fn skew_block_example() {
        let b = [0.0, 2.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 3.0, 0.0];
        let mut l = check_normal_form(&b, 4);
        l.sort_by(f64::total_cmp);
        assert!((l[0] - 2.0).abs() < 1e-12 && (l[1] - 3.0).abs() < 1e-12);
        // Degenerate pair and a kernel direction.
        let b5: Vec<f64> = {
            let mut m = vec![0.0; 25];
            for (i, j, v) in [(0, 1, 1.0), (2, 3, 1.0), (0, 4, 0.0)] {
                m[i * 5 + j] = v;
                m[j * 5 + i] = -v;
            }
            m
        };
        assert_eq!(check_normal_form(&b5, 5).len(), 2);
    }

    #[test]
    fn hodge_examples() {
        let g = torus(&[1.0], &[64]);
        let c = VectorPotential::constant(&g, &[0.7]);
        let s = hodge_decompose_torus(&g, &c, &[]).unwrap();
        assert!(s.harmonic_orthogonal.values.iter().all(|v| (v - 0.7).abs() < 1e-12));
        assert!(s.exact.values.iter().chain(&s.coexact.values).all(|v| v.abs() < 1e-12));

        // Exact form built from the same stencil is recovered exactly.
        let f = g.sample(|x| -(2.0 * PI * x[0]).cos() / (2.0 * PI));
        let a = differential(&g, &f);
        let s = hodge_decompose_torus(&g, &a, &[]).unwrap();
        for (x, y) in s.exact.values.iter().zip(&a.values) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(s.norms[0] < 1e-12 && s.norms[1] < 1e-12 && s.norms[2] < 1e-10);
        // The sampled sin form is exact as well: its mean vanishes and in 1D nothing is coexact.
        let sin = g.sample_form(|x, _| 0.7 + (2.0 * PI * x[0]).sin());
        let s = hodge_decompose_torus(&g, &sin, &[vec![1.0]]).unwrap();
        assert!(s.harmonic_in_cover_kernel.values.iter().all(|v| (v - 0.7).abs() < 1e-12));
        assert!(s.norms[2] < 1e-10);
        assert!(matches!(
            hodge_decompose_torus(&make_grid(&Geometry::build(GeometryKind::PlaneTruncated { half_widths: vec![1.0] }).unwrap(), &[8]).unwrap(), &sin, &[]),
            Err(Error::NotTorus)
        ));
    }
}
