//! Eigensolvers: dense Hermitian, thick-restart Lanczos with full reorthogonalization, and a
//! three-point finite-difference solver for one-dimensional effective operators.

use std::fmt;
use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub const DENSE_LIMIT: usize = 4096;
/// Decay certification threshold for truncated ends.
pub const DECAY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Lanczos,
    Fd1d,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub converged: Vec<bool>,
    pub method: Method,
    /// Largest relative amplitude next to a truncation wall, for 1D solves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_amplitude: Option<f64>,
    /// Relative amplitudes at the left and right walls, for 1D solves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_amplitudes: Option<[f64; 2]>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<Complex64>>,
}

impl SpectrumResult {
    pub fn lowest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_norms.iter().copied().fold(0.0, f64::max)
    }
}

fn residual(m: &CsrMatrix, lambda: f64, u: &[Complex64]) -> f64 {
    let hu = m.apply(u);
    let nu = u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    hu.iter().zip(u).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt() / nu
}

fn dense_eigen(m: &CsrMatrix) -> Result<(Vec<f64>, faer::Mat<faer::c64>)> {
    if m.n > DENSE_LIMIT {
        return Err(Error::TooLarge { size: m.n, limit: DENSE_LIMIT });
    }
    let eig = m
        .to_dense()
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("dense eigensolver failed: {e:?}")))?;
    let vals = (0..m.n).map(|i| eig.S().column_vector()[i].re).collect();
    Ok((vals, eig.U().to_owned()))
}

/// Lowest `k` eigenpairs by dense diagonalization.
pub fn dense_lowest(m: &CsrMatrix, k: usize) -> Result<SpectrumResult> {
    let (vals, u) = dense_eigen(m)?;
    let k = k.min(m.n);
    let vecs: Vec<Vec<Complex64>> = (0..k)
        .map(|j| (0..m.n).map(|r| Complex64::new(u[(r, j)].re, u[(r, j)].im)).collect())
        .collect();
    let residual_norms: Vec<f64> = vecs.iter().zip(&vals).map(|(v, &l)| residual(m, l, v)).collect();
    Ok(SpectrumResult {
        eigenvalues: vals[..k].to_vec(),
        converged: residual_norms.iter().map(|&r| r <= 1e-10 * (1.0 + m.max_abs())).collect(),
        residual_norms,
        method: Method::Dense,
        boundary_amplitude: None,
        wall_amplitudes: None,
        eigenvectors: vecs,
    })
}

/// Full spectrum by dense diagonalization.
pub fn dense_spectrum(m: &CsrMatrix) -> Result<SpectrumResult> {
    dense_lowest(m, m.n)
}

/// Deterministic start vectors (splitmix64).
struct StartVectors(u64);

impl StartVectors {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn vector(&mut self, n: usize) -> Mat<Complex64> {
        Mat::from_fn(n, 1, |_, _| Complex64::new(self.next(), self.next()))
    }
}

fn col_norm(w: MatRef<'_, Complex64>) -> f64 {
    w.norm_l2()
}

fn scaled(mut w: Mat<Complex64>, s: f64) -> Mat<Complex64> {
    for r in 0..w.nrows() {
        for c in 0..w.ncols() {
            w[(r, c)] *= s;
        }
    }
    w
}

/// Classical Gram–Schmidt of the column `w` against the first `j` columns of `v`, repeated
/// once when cancellation is severe. Returns the accumulated projection coefficients.
fn orthogonalize(w: &mut Mat<Complex64>, v: MatRef<'_, Complex64>, j: usize) -> Mat<Complex64> {
    let basis = v.subcols(0, j);
    let mut coef = Mat::<Complex64>::zeros(j, 1);
    if j == 0 {
        return coef;
    }
    let before = col_norm(w.as_ref());
    for pass in 0..2 {
        let mut proj = Mat::<Complex64>::zeros(j, 1);
        matmul(proj.as_mut(), Accum::Replace, basis.adjoint(), w.as_ref(), Complex64::new(1.0, 0.0), Par::Seq);
        matmul(w.as_mut(), Accum::Add, basis, proj.as_ref(), Complex64::new(-1.0, 0.0), Par::Seq);
        coef += &proj;
        if pass == 0 && col_norm(w.as_ref()) > 0.7 * before {
            break;
        }
    }
    coef
}

fn apply_col(m: &CsrMatrix, x: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let mut y = Mat::<Complex64>::zeros(m.n, 1);
    for r in 0..m.n {
        let mut s = Complex64::new(0.0, 0.0);
        for p in m.row_ptr[r]..m.row_ptr[r + 1] {
            s += m.vals[p] * x[(m.cols[p], 0)];
        }
        y[(r, 0)] = s;
    }
    y
}

/// Outcome of one thick-restart run: Ritz vectors of the wanted pairs and the number of
/// operator applications spent.
struct KrylovRun {
    vectors: Mat<Complex64>,
    applications: usize,
    accepted: bool,
}

/// Thick-restart Lanczos for the lowest `k` eigenpairs of the Hermitian operator `apply`.
///
/// After every restart cycle the current Ritz vectors are handed to `accept`; the run stops
/// when it returns true or when `max_apps` applications have been spent.
fn thick_restart(
    n: usize,
    k: usize,
    apply: &dyn Fn(MatRef<'_, Complex64>) -> Mat<Complex64>,
    accept: &mut dyn FnMut(MatRef<'_, Complex64>) -> bool,
    max_apps: usize,
) -> Result<KrylovRun> {
    let max_basis = (2 * k + 60).min(n);
    let keep = (k + (max_basis - k) / 3).min(max_basis - 1);
    let mut rng = StartVectors(0x5eed);
    let mut basis = Mat::<Complex64>::zeros(n, max_basis);
    let mut h = Mat::<Complex64>::zeros(max_basis, max_basis);
    let mut v = rng.vector(n);
    let nv = col_norm(v.as_ref());
    v = scaled(v, 1.0 / nv);
    let mut used = 0usize;
    let mut apps = 0usize;
    let mut scale = 0.0f64;

    loop {
        while used < max_basis {
            let j = used;
            basis.col_mut(j).copy_from(v.col(0));
            used += 1;
            let mut w = apply(basis.subcols(j, 1));
            apps += 1;
            let coef = orthogonalize(&mut w, basis.as_ref(), used);
            for i in 0..used {
                h[(i, j)] = coef[(i, 0)];
                h[(j, i)] = coef[(i, 0)].conj();
            }
            h[(j, j)] = Complex64::new(coef[(j, 0)].re, 0.0);
            scale = scale.max(coef[(j, 0)].norm());
            let beta = col_norm(w.as_ref());
            if beta <= 1e-12 * scale.max(1e-300) {
                // Invariant subspace: continue with a fresh direction.
                let mut r = rng.vector(n);
                orthogonalize(&mut r, basis.as_ref(), used);
                let nr = col_norm(r.as_ref());
                v = scaled(r, 1.0 / nr);
            } else {
                v = scaled(w, 1.0 / beta);
            }
        }
        let eig = h
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::InvalidArgument(format!("projected eigensolve failed: {e:?}")))?;
        let theta: Vec<f64> = (0..max_basis).map(|i| eig.S().column_vector()[i].re).collect();
        let y = eig.U();
        let kept = &basis * y.subcols(0, keep);
        let accepted = accept(kept.subcols(0, k));
        if accepted || apps >= max_apps {
            return Ok(KrylovRun { vectors: kept.subcols(0, k).to_owned(), applications: apps, accepted });
        }
        basis.subcols_mut(0, keep).copy_from(&kept);
        for i in 0..keep {
            let mut c = basis.subcols(i, 1).to_owned();
            orthogonalize(&mut c, basis.as_ref(), i);
            let nc = col_norm(c.as_ref());
            basis.col_mut(i).copy_from(scaled(c, 1.0 / nc).col(0));
        }
        used = keep;
        h.fill(Complex64::new(0.0, 0.0));
        for (i, t) in theta.iter().enumerate().take(keep) {
            h[(i, i)] = Complex64::new(*t, 0.0);
        }
        orthogonalize(&mut v, basis.as_ref(), used);
        let nv = col_norm(v.as_ref());
        v = scaled(v, 1.0 / nv);
    }
}

/// Rayleigh quotients and residual norms of the columns of `u` (assumed orthonormal).
fn ritz_pairs(m: &CsrMatrix, u: MatRef<'_, Complex64>) -> (Vec<f64>, Vec<f64>) {
    let mut vals = Vec::with_capacity(u.ncols());
    let mut res = Vec::with_capacity(u.ncols());
    for c in 0..u.ncols() {
        let x = u.subcols(c, 1);
        let hx = apply_col(m, x);
        let nx2 = x.norm_l2().powi(2);
        let rq: Complex64 = (0..m.n).map(|r| x[(r, 0)].conj() * hx[(r, 0)]).sum::<Complex64>() / nx2;
        let r: f64 = (0..m.n).map(|r| (hx[(r, 0)] - rq.re * x[(r, 0)]).norm_sqr()).sum::<f64>().sqrt() / nx2.sqrt();
        vals.push(rq.re);
        res.push(r);
    }
    (vals, res)
}

/// Gershgorin interval containing the spectrum.
fn gershgorin(m: &CsrMatrix) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..m.n {
        let mut d = 0.0;
        let mut off = 0.0;
        for (c, v) in m.row(r) {
            if c == r {
                d = v.re;
            } else {
                off += v.norm();
            }
        }
        lo = lo.min(d - off);
        hi = hi.max(d + off);
    }
    (lo, hi)
}

/// Lowest `k` eigenpairs by thick-restart Lanczos with full reorthogonalization.
///
/// Large operators are first passed through a Chebyshev polynomial that is bounded by one on
/// the upper part of the spectrum and grows below a cut, which leaves eigenvectors unchanged
/// and separates the wanted end. Converges when every returned pair has residual at most
/// `tol`; `max_iter` bounds the number of products with the matrix.
pub fn lanczos_lowest(m: &CsrMatrix, k: usize, tol: f64, max_iter: usize) -> Result<SpectrumResult> {
    let n = m.n;
    if k == 0 || k > 50 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..=min(50, {n})")));
    }
    if n <= 64 {
        return dense_lowest(m, k);
    }
    let mut last: Option<(Vec<f64>, Vec<f64>, Mat<Complex64>)> = None;
    let accept = |u: MatRef<'_, Complex64>, last: &mut Option<(Vec<f64>, Vec<f64>, Mat<Complex64>)>| {
        let (vals, res) = ritz_pairs(m, u);
        let ok = res.iter().all(|&r| r <= tol);
        *last = Some((vals, res, u.to_owned()));
        ok
    };
    let mut matvecs = 0usize;
    let (lo, hi) = gershgorin(m);
    let degree = if n > 4096 { 48 } else { 1 };
    let run = if degree == 1 {
        let apply = |x: MatRef<'_, Complex64>| apply_col(m, x);
        let r = thick_restart(n, k, &apply, &mut |u| accept(u, &mut last), max_iter)?;
        matvecs += r.applications;
        r
    } else {
        // Coarse estimate of the bottom from a short unfiltered run.
        let apply = |x: MatRef<'_, Complex64>| apply_col(m, x);
        let warm = thick_restart(n, 1, &apply, &mut |_| true, 1)?;
        matvecs += warm.applications;
        let (bottom, _) = ritz_pairs(m, warm.vectors.as_ref());
        let mut cut = bottom[0] + 0.01 * (hi - bottom[0]);
        let _ = lo;
        loop {
            let (a, b) = (cut, hi);
            let filter = |x: MatRef<'_, Complex64>| {
                // T_d(σ(H)) x with σ(λ) = (a + b − 2λ)/(b − a), negated so the bottom is lowest.
                let sigma = |y: MatRef<'_, Complex64>| {
                    let hy = apply_col(m, y);
                    Mat::from_fn(n, 1, |r, _| ((a + b) * y[(r, 0)] - 2.0 * hy[(r, 0)]) / (b - a))
                };
                let mut t0 = x.to_owned();
                let mut t1 = sigma(x);
                for _ in 1..degree {
                    let s = sigma(t1.as_ref());
                    let t2 = Mat::from_fn(n, 1, |r, _| 2.0 * s[(r, 0)] - t0[(r, 0)]);
                    t0 = t1;
                    t1 = t2;
                }
                scaled(t1, -1.0)
            };
            let budget = max_iter.saturating_sub(matvecs) / degree;
            let r = thick_restart(n, k, &filter, &mut |u| accept(u, &mut last), budget.max(1))?;
            matvecs += r.applications * degree;
            let top = last.as_ref().map_or(f64::INFINITY, |l| l.0.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            if top < cut || matvecs >= max_iter {
                break r;
            }
            // Fewer than k eigenvalues lie below the cut: widen it.
            cut = bottom[0] + 4.0 * (cut - bottom[0]);
            if cut >= hi {
                let apply = |x: MatRef<'_, Complex64>| apply_col(m, x);
                let r = thick_restart(n, k, &apply, &mut |u| accept(u, &mut last), max_iter.saturating_sub(matvecs).max(1))?;
                matvecs += r.applications;
                break r;
            }
        }
    };
    let (vals, res, vecs) = last.expect("at least one acceptance check runs");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let result = SpectrumResult {
        eigenvalues: order.iter().map(|&i| vals[i]).collect(),
        converged: order.iter().map(|&i| res[i] <= tol).collect(),
        residual_norms: order.iter().map(|&i| res[i]).collect(),
        method: Method::Lanczos,
        boundary_amplitude: None,
        wall_amplitudes: None,
        eigenvectors: order.iter().map(|&i| (0..n).map(|r| vecs[(r, i)]).collect()).collect(),
    };
    if run.accepted {
        Ok(result)
    } else {
        let worst = result.max_residual();
        Err(Error::NotConverged { iterations: matvecs, worst_residual: worst, best: Box::new(result) })
    }
}

/// Lowest `k` eigenvalues: dense when small, Lanczos otherwise.
pub fn lowest_eigenvalues(m: &CsrMatrix, k: usize, tol: f64) -> Result<SpectrumResult> {
    if m.n <= 1536 {
        dense_lowest(m, k)
    } else {
        lanczos_lowest(m, k, tol, 200 * m.n.min(2000))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    /// Friedrichs condition at a singular endpoint `r = 0` where `V ~ −mass/(4r²)`, solved in
    /// the half-density variable with two-grid extrapolation.
    FriedrichsKepler,
    /// Dirichlet at a truncation point, certified by the boundary amplitude.
    Decay,
}

pub type Potential1D = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `−mass · u″ + V(r) u` on `(wall, right)` with Dirichlet walls.
///
/// Nodes sit at `wall + i h`, `i = 1, 2, ...`, with `wall = left + left_shift · h`; the shift is
/// measured in cells so it scales with the grid under extrapolation.
#[derive(Clone)]
pub struct Effective1D {
    pub left: f64,
    pub right: f64,
    pub h: f64,
    pub left_shift: f64,
    pub potential: Potential1D,
    pub left_bc: BoundaryCondition,
    pub right_bc: BoundaryCondition,
    pub mass: f64,
    /// Richardson extrapolation over `h` and `h/2` (always on for the Kepler condition).
    pub extrapolate: bool,
}

impl fmt::Debug for Effective1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Effective1D")
            .field("left", &self.left)
            .field("right", &self.right)
            .field("h", &self.h)
            .field("left_shift", &self.left_shift)
            .field("left_bc", &self.left_bc)
            .field("right_bc", &self.right_bc)
            .field("mass", &self.mass)
            .field("extrapolate", &self.extrapolate)
            .finish()
    }
}

impl Effective1D {
    pub fn new(left: f64, right: f64, h: f64, mass: f64, potential: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            left,
            right,
            h,
            left_shift: 0.0,
            potential: Arc::new(potential),
            left_bc: BoundaryCondition::Dirichlet,
            right_bc: BoundaryCondition::Dirichlet,
            mass,
            extrapolate: false,
        }
    }

    pub fn with_bcs(mut self, left: BoundaryCondition, right: BoundaryCondition) -> Self {
        self.left_bc = left;
        self.right_bc = right;
        self
    }

    pub fn nodes(&self, h: f64) -> Vec<f64> {
        let wall = self.left + self.left_shift * h;
        let n = ((self.right - wall) / h).round() as usize;
        (1..n).map(|i| wall + i as f64 * h).collect()
    }

    pub fn sampled_potential(&self, h: f64) -> Vec<f64> {
        self.nodes(h).iter().map(|&r| (self.potential)(r)).collect()
    }
}

/// Symmetric tridiagonal matrix; `off[i]` couples rows `i` and `i + 1`.
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    fn count_below(&self, x: f64) -> usize {
        let mut q = 1.0;
        let mut count = 0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = d - x - if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.max_off();
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    fn max_off(&self) -> f64 {
        self.off.iter().fold(0.0f64, |m, o| m.max(o.abs()))
    }

    /// `j`-th smallest eigenvalue by Sturm bisection.
    fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solve `(T − σ) x = b` by Gaussian elimination with partial pivoting.
    fn solve_shifted(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        // Rows hold (sub, diag, sup, sup2) after pivoting.
        let mut dl = self.off.clone();
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - sigma).collect();
        let mut du = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut x = b.to_vec();
        let tiny = 1e-300;
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                x[i + 1] -= f * x[i];
                dl[i] = f;
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
                du[i] = tmp;
                x.swap(i, i + 1);
                x[i + 1] -= f * x[i];
                dl[i] = f;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= du[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= du2[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }

    fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.diag.len();
        let scale = self.max_off().max(1.0);
        let sigma = lambda - 1e-13 * scale;
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            for p in previous {
                let c: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
            }
            x = self.solve_shifted(sigma, &x);
            let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            x.iter_mut().for_each(|a| *a /= nx);
        }
        x
    }
}

struct Fd1dSolve {
    values: Vec<f64>,
    residuals: Vec<f64>,
    left_amp: f64,
    right_amp: f64,
}

/// Three-point discretization of `eff` with spacing `h`, and the node positions.
///
/// The Friedrichs condition works on `w = u / √r`, for which the operator becomes
/// `−mass (w″ + w′/r) + (V + mass/(4r²)) w`. Cells are centred at `(i − ½) h` with zero flux
/// through `r = 0`, which selects the regular solution. The matrix is symmetrized by `√r`, so
/// its eigenvectors are samples of `u`.
fn discretize(eff: &Effective1D, h: f64) -> Result<(Tridiagonal, Vec<f64>)> {
    let c = eff.mass / (h * h);
    let (t, nodes) = if eff.left_bc == BoundaryCondition::FriedrichsKepler {
        if eff.left != 0.0 {
            return Err(Error::InvalidArgument("the Friedrichs condition needs the singular point at 0".into()));
        }
        let n = (eff.right / h).round() as usize;
        let r: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) * h).collect();
        let diag = r
            .iter()
            .enumerate()
            .map(|(i, &ri)| {
                let faces = i as f64 * h + (i + 1) as f64 * h;
                c * faces / ri + (eff.potential)(ri) + eff.mass / (4.0 * ri * ri)
            })
            .collect();
        let off = (0..n.saturating_sub(1))
            .map(|i| -c * (i + 1) as f64 * h / (r[i] * r[i + 1]).sqrt())
            .collect();
        (Tridiagonal { diag, off }, r)
    } else {
        let nodes = eff.nodes(h);
        let diag = nodes.iter().map(|&x| (eff.potential)(x) + 2.0 * c).collect();
        let off = vec![-c; nodes.len().saturating_sub(1)];
        (Tridiagonal { diag, off }, nodes)
    };
    if nodes.len() < 4 {
        return Err(Error::InvalidArgument(format!("interval too short for spacing {h}")));
    }
    if t.diag.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("effective potential is not finite on the grid".into()));
    }
    Ok((t, nodes))
}

fn solve_tridiagonal(eff: &Effective1D, h: f64, k: usize) -> Result<Fd1dSolve> {
    let (t, nodes) = discretize(eff, h)?;
    let k = k.min(nodes.len());
    let mut values = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let (mut left_amp, mut right_amp) = (0.0f64, 0.0f64);
    for j in 0..k {
        let lambda = t.eigenvalue(j);
        let x = t.eigenvector(lambda, &vecs);
        let tx = t.apply(&x);
        residuals.push(tx.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt());
        let peak = x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        left_amp = left_amp.max(x[0].abs() / peak);
        right_amp = right_amp.max(x[x.len() - 1].abs() / peak);
        values.push(lambda);
        vecs.push(x);
    }
    Ok(Fd1dSolve { values, residuals, left_amp, right_amp })
}

/// Lowest `k` eigenvalues of a one-dimensional effective operator.
pub fn solve_effective_1d(eff: &Effective1D, k: usize) -> Result<SpectrumResult> {
    let extrapolate = eff.extrapolate || eff.left_bc == BoundaryCondition::FriedrichsKepler;
    let fine = solve_tridiagonal(eff, if extrapolate { 0.5 * eff.h } else { eff.h }, k)?;
    let values = if extrapolate {
        let coarse = solve_tridiagonal(eff, eff.h, k)?;
        fine.values.iter().zip(&coarse.values).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
    } else {
        fine.values.clone()
    };
    let mut amp = 0.0f64;
    if eff.left_bc == BoundaryCondition::Decay {
        if fine.left_amp > DECAY_TOLERANCE {
            return Err(Error::BoundaryAmplitudeTooLarge { amplitude: fine.left_amp, side: "left" });
        }
        amp = amp.max(fine.left_amp);
    }
    if eff.right_bc == BoundaryCondition::Decay {
        if fine.right_amp > DECAY_TOLERANCE {
            return Err(Error::BoundaryAmplitudeTooLarge { amplitude: fine.right_amp, side: "right" });
        }
        amp = amp.max(fine.right_amp);
    }
    Ok(SpectrumResult {
        converged: fine.residuals.iter().map(|&r| r <= 1e-8 * (1.0 + 4.0 * eff.mass / (eff.h * eff.h))).collect(),
        residual_norms: fine.residuals,
        eigenvalues: values,
        method: Method::Fd1d,
        boundary_amplitude: Some(amp.max(fine.left_amp.min(fine.right_amp))),
        wall_amplitudes: Some([fine.left_amp, fine.right_amp]),
        eigenvectors: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let i = Complex64::new(0.0, 1.0);
        let m = CsrMatrix::from_dense(&[vec![0.0.into(), i], vec![-i, 0.0.into()]]);
        let r = dense_spectrum(&m).unwrap();
        assert!((r.eigenvalues[0] + 1.0).abs() < 1e-14 && (r.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(r.max_residual() < 1e-12);
    }

    #[test]
    fn diagonal_lanczos() {
        let r = lanczos_lowest(&CsrMatrix::diagonal(&[3.0, 1.0, 2.0]), 1, 1e-10, 100).unwrap();
        assert_eq!(r.eigenvalues.len(), 1);
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_on_large_diagonal() {
        let d: Vec<f64> = (0..500).map(|i| ((i * 37) % 500) as f64 * 0.01).collect();
        let m = CsrMatrix::diagonal(&d);
        let l = lanczos_lowest(&m, 5, 1e-9, 20000).unwrap();
        for (j, v) in l.eigenvalues.iter().enumerate() {
            assert!((v - 0.01 * j as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn too_large_dense() {
        assert!(matches!(dense_spectrum(&CsrMatrix::diagonal(&vec![0.0; 4097])), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn oscillator_fd() {
        let eff = Effective1D::new(-10.0, 10.0, 0.01, 0.5, |x| 0.5 * x * x);
        let r = solve_effective_1d(&eff, 3).unwrap();
        assert!((r.eigenvalues[0] - 0.5).abs() < 1e-5);
        assert!((r.eigenvalues[1] - 1.5).abs() < 1e-4);
        assert!(r.max_residual() < 1e-8);
    }

    #[test]
    fn free_particle_box() {
        let mut errs = vec![];
        for h in [0.01, 0.005] {
            let r = solve_effective_1d(&Effective1D::new(0.0, 1.0, h, 0.5, |_| 0.0), 1).unwrap();
            errs.push((r.eigenvalues[0] - 0.5 * std::f64::consts::PI.powi(2)).abs());
        }
        assert!(errs[0] < 1e-3);
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn decay_certification() {
        let narrow = Effective1D::new(-2.0, 2.0, 0.01, 0.5, |x| 0.5 * x * x)
            .with_bcs(BoundaryCondition::Decay, BoundaryCondition::Decay);
        assert!(matches!(solve_effective_1d(&narrow, 1), Err(Error::BoundaryAmplitudeTooLarge { .. })));
        let wide = Effective1D::new(-10.0, 10.0, 0.01, 0.5, |x| 0.5 * x * x)
            .with_bcs(BoundaryCondition::Decay, BoundaryCondition::Decay);
        assert!(solve_effective_1d(&wide, 1).unwrap().boundary_amplitude.unwrap() < 1e-8);
    }
}
