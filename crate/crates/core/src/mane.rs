//! Mañé's critical value on compact flat tori: a convex minimax over nodal gauge functions,
//! certified by a dual lower bound, and the strict critical value over harmonic shifts.
//!
//! The node energy averages the squared link values of `α + df` on the links incident to the
//! node, so the mean of the objective dominates the Rayleigh quotient of `e^{-if}` and the
//! discrete inequality `λ₀ ≤ c` holds exactly.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, Character, Convention};
use crate::eigensolve::lowest_eigenvalues;
use crate::error::{Error, Result};
use crate::geometry::{hodge_decompose_torus, GaugeFunction, Grid, Neighbor, ScalarPotential, VectorPotential};

const BETA_STAGES: usize = 16;
const STAGE_ITERATIONS: usize = 3000;
const MEMORY: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MCVResult {
    /// Exact maximum of the node energy at `certificate_f`.
    pub value: f64,
    pub certificate_f: GaugeFunction,
    /// Best certified lower bound: dual bounds over all stages and the averaging bound.
    pub lower_bound: f64,
    /// `½ |harmonic part|² + mean V`.
    pub averaging_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrictMCVResult {
    pub value: f64,
    /// Coefficients `c` of the minimizing shift `α − Σ c_i ω_i`.
    pub argmin: Vec<f64>,
    pub at_argmin: MCVResult,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaVsC {
    pub lambda0: f64,
    pub residual: f64,
    pub c: f64,
    pub gap: f64,
    pub tolerance: f64,
}

/// Link values of `α` with the identification phases folded into the wrap links.
fn link_values(grid: &Grid, alpha: &VectorPotential) -> Vec<f64> {
    let d = grid.dim();
    let mut a = alpha.values.clone();
    for i in 0..grid.len() {
        for k in 0..d {
            if let (Neighbor::Wrap(j), Some(id)) = (grid.neighbor(i, k, true), grid.geometry.identification(k)) {
                a[i * d + k] += id.phase_at(&grid.coords(j)) / grid.h[k];
            }
        }
    }
    a
}

/// Forward and backward neighbor tables of a fully periodic grid.
struct Links {
    n: usize,
    d: usize,
    h: Vec<f64>,
    fwd: Vec<usize>,
}

impl Links {
    fn new(grid: &Grid) -> Result<Self> {
        let (n, d) = (grid.len(), grid.dim());
        let mut fwd = Vec::with_capacity(n * d);
        for i in 0..n {
            for k in 0..d {
                match grid.neighbor(i, k, true) {
                    Neighbor::Interior(j) | Neighbor::Wrap(j) => fwd.push(j),
                    Neighbor::Outside => return Err(Error::NotTorus),
                }
            }
        }
        Ok(Self { n, d, h: grid.h.clone(), fwd })
    }

    fn shifted(&self, a: &[f64], f: &[f64]) -> Vec<f64> {
        let mut out = a.to_vec();
        for i in 0..self.n {
            for k in 0..self.d {
                out[i * self.d + k] += (f[self.fwd[i * self.d + k]] - f[i]) / self.h[k];
            }
        }
        out
    }

    /// Node energy `½ Σ_k (a²_{i,k} + a²_{i−e_k,k}) / 2 + V_i`.
    fn energies(&self, links: &[f64], v: &[f64]) -> Vec<f64> {
        let mut e: Vec<f64> = v.to_vec();
        for i in 0..self.n {
            for k in 0..self.d {
                let q = 0.25 * links[i * self.d + k].powi(2);
                e[i] += q;
                e[self.fwd[i * self.d + k]] += q;
            }
        }
        e
    }

    /// Per-link weights `(p_i + p_j) / 2` induced by node weights `p`.
    fn link_weights(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n * self.d).map(|l| 0.5 * (p[l / self.d] + p[self.fwd[l]])).collect()
    }

    /// Gradient in `f` of `Σ_l ½ w_l a_l²`.
    fn pull_back(&self, links: &[f64], w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for i in 0..self.n {
            for k in 0..self.d {
                let l = i * self.d + k;
                let s = w[l] * links[l] / self.h[k];
                g[self.fwd[l]] += s;
                g[i] -= s;
            }
        }
        g
    }
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Soft-max `(1/β) log Σ e^{β e_i}` and its normalized weights.
fn softmax(e: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let m = max_of(e);
    let mut p: Vec<f64> = e.iter().map(|x| (beta * (x - m)).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    (m + s.ln() / beta, p)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize the soft-max at fixed `β` by limited-memory BFGS with step halving.
fn minimize_stage(links: &Links, a: &[f64], v: &[f64], beta: f64, f: &mut [f64]) -> usize {
    let eval = |f: &[f64]| {
        let l = links.shifted(a, f);
        let (s, p) = softmax(&links.energies(&l, v), beta);
        let g = links.pull_back(&l, &links.link_weights(&p));
        (s, g)
    };
    let (mut val, mut grad) = eval(f);
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    for it in 0..STAGE_ITERATIONS {
        let gnorm = dot(&grad, &grad).sqrt();
        if gnorm < 1e-13 {
            return it;
        }
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let al = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= al * yi);
            alphas.push(al);
        }
        let gamma = hist.last().map_or(1.0 / gnorm, |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|x| *x *= gamma);
        for ((s, y, rho), al) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (al - b) * si);
        }
        let mut slope = -dot(&grad, &q);
        if slope >= 0.0 {
            hist.clear();
            q = grad.iter().map(|g| g / gnorm).collect();
            slope = -gnorm;
        }
        let mut t = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = f.iter().zip(&q).map(|(x, d)| x - t * d).collect();
            let (tv, tg) = eval(&trial);
            if tv <= val + 1e-4 * t * slope {
                break Some((trial, tv, tg));
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        let Some((trial, tv, tg)) = accepted else { return it };
        let s: Vec<f64> = trial.iter().zip(f.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = tg.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            hist.push((s, y, 1.0 / sy));
            if hist.len() > MEMORY {
                hist.remove(0);
            }
        }
        let progress = val - tv;
        f.copy_from_slice(&trial);
        val = tv;
        grad = tg;
        if progress <= 1e-15 * val.abs().max(1e-300) {
            return it + 1;
        }
    }
    STAGE_ITERATIONS
}

/// Solve `Dᵀ W D g = rhs` by conjugate gradients with Jacobi preconditioning.
fn weighted_laplacian_solve(links: &Links, w: &[f64], rhs: &[f64]) -> Vec<f64> {
    let (n, d) = (links.n, links.d);
    let apply = |g: &[f64]| {
        let dg: Vec<f64> = links.shifted(&vec![0.0; n * d], g);
        links.pull_back(&dg, w)
    };
    let mut diag = vec![0.0; n];
    for i in 0..n {
        for k in 0..d {
            let l = i * d + k;
            let c = w[l] / (links.h[k] * links.h[k]);
            diag[i] += c;
            diag[links.fwd[l]] += c;
        }
    }
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = rhs.to_vec();
    let target = 1e-14 * dot(rhs, rhs).sqrt();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..50 * n {
        if dot(&r, &r).sqrt() <= target {
            break;
        }
        let ap = apply(&p);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || rz <= 0.0 {
            break;
        }
        let step = rz / curvature;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= step * ai);
        z = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        let rz_new = dot(&r, &z);
        let ratio = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + ratio * *pi);
    }
    x
}

/// Lower bound `min_f Σ p_i e_i(f) ≤ c` for a probability vector `p`.
///
/// The weights are mixed with a uniform floor `ε` and the weighted quadratic is minimized
/// approximately. With `r` the residual gradient at the approximate minimizer and `w_min`
/// the smallest link weight, the true minimum is at least `Q − ½|r|² / (w_min λ₁)`, where
/// `λ₁` is the first nonzero eigenvalue of the unweighted lattice Laplacian.
fn dual_bound(grid: &Grid, links: &Links, a: &[f64], v: &[f64], f: &[f64], p: &[f64]) -> f64 {
    let n = links.n;
    let lambda1 = grid
        .nodes
        .iter()
        .zip(&links.h)
        .map(|(&m, h)| 4.0 * (std::f64::consts::PI / m as f64).sin().powi(2) / (h * h))
        .fold(f64::INFINITY, f64::min);
    let mut best = f64::NEG_INFINITY;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
        let mixed: Vec<f64> = p.iter().map(|x| (1.0 - eps) * x + eps / n as f64).collect();
        let w = links.link_weights(&mixed);
        let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
        let rhs: Vec<f64> = links.pull_back(&links.shifted(a, f), &w).iter().map(|x| -x).collect();
        let g = weighted_laplacian_solve(links, &w, &rhs);
        let fw: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
        let l = links.shifted(a, &fw);
        let r = links.pull_back(&l, &w);
        let q: f64 = l.iter().zip(&w).map(|(x, wi)| 0.5 * wi * x * x).sum();
        let bound = dot(&mixed, v) + q - 0.5 * dot(&r, &r) / (w_min * lambda1);
        if bound.is_finite() {
            best = best.max(bound);
        }
    }
    best
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: &mut [f64]) {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut theta) = (0.0, 0.0);
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Weights on the nodes within `delta` of the maximum that best balance the node gradients,
/// `argmin_{μ ∈ Δ} |Σ μ_i ∇e_i|²`, by accelerated projected gradient.
fn balanced_weights(links: &Links, shifted: &[f64], energies: &[f64], delta: f64) -> Option<Vec<f64>> {
    let top = max_of(energies);
    let mut active: Vec<usize> = (0..links.n).filter(|&i| energies[i] >= top - delta).collect();
    active.sort_by(|&x, &y| energies[y].total_cmp(&energies[x]));
    active.truncate(256);
    let m = active.len();
    let grads: Vec<Vec<f64>> = active
        .iter()
        .map(|&i| {
            let mut e = vec![0.0; links.n];
            e[i] = 1.0;
            links.pull_back(shifted, &links.link_weights(&e))
        })
        .collect();
    let gram: Vec<f64> = (0..m * m).map(|q| dot(&grads[q / m], &grads[q % m])).collect();
    let lip = (0..m).map(|i| gram[i * m + i]).sum::<f64>().max(1e-300);
    let mut mu = vec![1.0 / m as f64; m];
    let mut y = mu.clone();
    let mut t: f64 = 1.0;
    for _ in 0..1500 {
        let g: Vec<f64> = (0..m).map(|i| dot(&gram[i * m..(i + 1) * m], &y)).collect();
        let mut next: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / lip).collect();
        project_simplex(&mut next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next.iter().zip(&mu).map(|(x, o)| x + (t - 1.0) / t_next * (x - o)).collect();
        mu = next;
        t = t_next;
    }
    let mut p = vec![0.0; links.n];
    active.iter().zip(&mu).for_each(|(&i, &w)| p[i] = w);
    Some(p)
}

fn check_inputs(grid: &Grid, alpha: &VectorPotential, v: &ScalarPotential, tol: f64) -> Result<()> {
    if !grid.geometry.is_flat_torus() {
        return Err(Error::NotTorus);
    }
    if alpha.dim != grid.dim() || alpha.values.len() != grid.len() * grid.dim() || v.values.len() != grid.len() {
        return Err(Error::ShapeMismatch("potentials do not match the grid".into()));
    }
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Exact node-energy maximum `max_x ½|α + df|² + V` for a given gauge function.
pub fn minimax_objective(grid: &Grid, alpha: &VectorPotential, v: &ScalarPotential, f: &GaugeFunction) -> Result<f64> {
    let links = Links::new(grid)?;
    let a = link_values(grid, alpha);
    Ok(max_of(&links.energies(&links.shifted(&a, &f.values), &v.values)))
}

/// `c = inf_f max_x ½|α + df|² + V` by a soft-max homotopy.
pub fn critical_value(grid: &Grid, alpha: &VectorPotential, v: &ScalarPotential, tol: f64) -> Result<MCVResult> {
    critical_value_from(grid, alpha, v, tol, None)
}

/// As [`critical_value`], warm-started from `start`.
pub fn critical_value_from(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    tol: f64,
    start: Option<&GaugeFunction>,
) -> Result<MCVResult> {
    check_inputs(grid, alpha, v, tol)?;
    let links = Links::new(grid)?;
    let a = link_values(grid, alpha);
    let n = grid.len();

    let split = hodge_decompose_torus(grid, &VectorPotential { dim: links.d, values: a.clone() }, &[])?;
    let weights = grid.weights();
    let volume: f64 = weights.iter().sum();
    let mean_v = dot(&weights, &v.values) / volume;
    let harmonic = split.norms[0].powi(2) + split.norms[1].powi(2);
    let averaging_bound = 0.5 * harmonic / volume + mean_v;

    let mut f = match start {
        Some(s) if s.values.len() == n => s.values.clone(),
        _ => split.primitive.values.iter().map(|x| -x).collect(),
    };
    let e0 = links.energies(&links.shifted(&a, &f), &v.values);
    let spread = (max_of(&e0) - e0.iter().copied().fold(f64::INFINITY, f64::min)).max(tol);

    let mut best: Option<MCVResult> = None;
    let mut iterations = 0;
    let mut certified = averaging_bound;
    for stage in 0..BETA_STAGES {
        let beta = 10.0 * 3f64.powi(stage as i32) / spread;
        iterations += minimize_stage(&links, &a, &v.values, beta, &mut f);
        let e = links.energies(&links.shifted(&a, &f), &v.values);
        let value = max_of(&e);
        let (_, p) = softmax(&e, beta);
        certified = certified.max(dual_bound(grid, &links, &a, &v.values, &f, &p));
        if value - certified > tol {
            let sh = links.shifted(&a, &f);
            for delta in [1e-3, 1e-5, 1e-7] {
                if let Some(mu) = balanced_weights(&links, &sh, &e, delta * spread) {
                    certified = certified.max(dual_bound(grid, &links, &a, &v.values, &f, &mu));
                }
            }
        }
        let lower_bound = certified.min(value);
        let gap = value - lower_bound;
        let candidate = MCVResult {
            value,
            certificate_f: GaugeFunction { values: f.clone() },
            lower_bound,
            averaging_bound,
            gap,
            iterations,
            converged: gap <= tol,
        };
        let done = candidate.converged;
        if best.as_ref().is_none_or(|b| candidate.gap < b.gap) {
            best = Some(candidate);
        }
        if done {
            break;
        }
    }
    let mut best = best.expect("at least one homotopy stage runs");
    best.iterations = iterations;
    if !best.converged {
        return Err(Error::MinimaxNotConverged { gap: best.gap, iterations });
    }
    Ok(best)
}

/// Golden-section minimum of a convex function on `[lo, hi]`.
fn golden(mut lo: f64, mut hi: f64, width: f64, mut g: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut g1, mut g2) = (g(x1)?, g(x2)?);
    while hi - lo > width {
        if g1 <= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - r * (hi - lo);
            g1 = g(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + r * (hi - lo);
            g2 = g(x2)?;
        }
    }
    Ok(if g1 <= g2 { (x1, g1) } else { (x2, g2) })
}

/// `c₀ = min_c c(α − Σ c_i ω_i)` over the constant forms `ω_i` listed in `harmonic_basis`.
pub fn strict_critical_value(
    grid: &Grid,
    alpha: &VectorPotential,
    v: &ScalarPotential,
    harmonic_basis: &[Vec<f64>],
    tol: f64,
) -> Result<StrictMCVResult> {
    check_inputs(grid, alpha, v, tol)?;
    let d = grid.dim();
    if harmonic_basis.iter().any(|w| w.len() != d) {
        return Err(Error::ShapeMismatch("harmonic direction has the wrong dimension".into()));
    }
    let m = harmonic_basis.len();
    let shifted = |c: &[f64]| {
        let mut form = vec![0.0; d];
        for (ci, w) in c.iter().zip(harmonic_basis) {
            form.iter_mut().zip(w).for_each(|(x, wi)| *x += ci * wi);
        }
        alpha.sub(&VectorPotential::constant(grid, &form))
    };
    let mut evaluations = 0;
    let mut warm: Option<GaugeFunction> = None;
    let mut eval = |c: &[f64]| -> Result<MCVResult> {
        evaluations += 1;
        let r = critical_value_from(grid, &shifted(c), v, tol, warm.as_ref())?;
        warm = Some(r.certificate_f.clone());
        Ok(r)
    };

    // Start from the least-squares fit of the harmonic part.
    let a = link_values(grid, alpha);
    let mean: Vec<f64> = (0..d).map(|k| (0..grid.len()).map(|i| a[i * d + k]).sum::<f64>() / grid.len() as f64).collect();
    let mut c = least_squares(harmonic_basis, &mean);
    let scale = mean.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let width = 1e-4 * scale;
    let mut current = eval(&c)?;
    for _sweep in 0..4 {
        let before = current.value;
        for axis in 0..m {
            let mut probe = |x: f64| -> Result<f64> {
                let mut trial = c.clone();
                trial[axis] = x;
                Ok(eval(&trial)?.value)
            };
            // Expand a bracket around the current coefficient, then refine.
            let mut step = 0.25 * scale;
            let centre = c[axis];
            let (mut lo, mut hi) = (centre - step, centre + step);
            let fc = current.value;
            while probe(lo)? < fc - tol * 1e-3 && step < 1e6 * scale {
                step *= 2.0;
                lo = centre - step;
            }
            step = 0.25 * scale;
            while probe(hi)? < fc - tol * 1e-3 && step < 1e6 * scale {
                step *= 2.0;
                hi = centre + step;
            }
            let (x, gx) = golden(lo, hi, width, &mut probe)?;
            if gx < current.value {
                c[axis] = x;
            }
            current = eval(&c)?;
        }
        if before - current.value <= tol {
            break;
        }
    }
    Ok(StrictMCVResult { value: current.value, argmin: c, at_argmin: current, evaluations })
}

/// Minimum-norm solution of `Σ c_i ω_i ≈ target` in the Euclidean sense.
fn least_squares(basis: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let m = basis.len();
    if m == 0 {
        return Vec::new();
    }
    let mut gram = faer::Mat::<f64>::zeros(m, m);
    let mut rhs = faer::Mat::<f64>::zeros(m, 1);
    for i in 0..m {
        rhs[(i, 0)] = dot(&basis[i], target);
        for j in 0..m {
            gram[(i, j)] = dot(&basis[i], &basis[j]);
        }
    }
    let sol = gram.as_ref().thin_svd().map(|svd| svd.pseudoinverse() * &rhs);
    match sol {
        Ok(s) => (0..m).map(|i| s[(i, 0)]).collect(),
        Err(_) => vec![0.0; m],
    }
}

/// Analytic critical value of the catalogue geometries as a function of the field strength.
pub fn mane_reference(geometry_kind: &str, b: f64) -> Result<f64> {
    let half = 0.5 * b * b;
    match geometry_kind {
        "hyperbolic" | "half_plane_hyperbolic" | "maass" => Ok(half),
        "sphere_bundle_h" => Ok(half),
        "sl2_universal" => Ok(0.25 * b * b),
        "nil" | "nil_cover" => Ok(half),
        "sol" | "sol_cover" => Ok(half),
        "torus_exact" | "torus_flat" => Ok(0.0),
        "torus_monopole" | "torus_landau" | "plane_truncated" => Ok(if b == 0.0 { 0.0 } else { f64::INFINITY }),
        other => Err(Error::UnknownGeometry(other.to_string())),
    }
}

/// Compute `λ₀` and `c` on the same grid and check `λ₀ ≤ c + 1e-6 + residual`.
pub fn verify_lambda0_le_c(grid: &Grid, alpha: &VectorPotential, v: &ScalarPotential) -> Result<LambdaVsC> {
    let op = assemble(grid, alpha, v, &Character::trivial(grid.dim()), Convention::Half)?;
    let spectrum = lowest_eigenvalues(&op.matrix, 1, 1e-10)?;
    let lambda0 = spectrum.lowest();
    let residual = spectrum.residual_norms.first().copied().unwrap_or(0.0);
    let mcv = critical_value(grid, alpha, v, 1e-4)?;
    let tolerance = 1e-6 + residual;
    if lambda0 > mcv.value + tolerance {
        return Err(Error::ViolationFound { lambda0, c: mcv.value, tol: tolerance });
    }
    Ok(LambdaVsC { lambda0, residual, c: mcv.value, gap: mcv.gap, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::unroll;
    use crate::geometry::{differential, make_grid, Geometry, GeometryKind};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn circle(n: usize) -> Grid {
        make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0] }).unwrap(), &[n]).unwrap()
    }

    fn wobble(g: &Grid) -> VectorPotential {
        g.sample_form(|x, _| 0.7 + (2.0 * PI * x[0]).sin())
    }

    #[test]
    fn circle_example() {
        let g = circle(256);
        let r = critical_value(&g, &wobble(&g), &ScalarPotential::zeros(&g), 1e-4).unwrap();
        assert_abs_diff_eq!(r.value, 0.245, epsilon = 1e-3);
        assert!(r.gap <= 1e-4 && r.lower_bound <= r.value + 1e-12);
        let recomputed = minimax_objective(&g, &wobble(&g), &ScalarPotential::zeros(&g), &r.certificate_f).unwrap();
        assert_eq!(recomputed, r.value);
        // The certificate removes the oscillation: df ≈ −sin 2πx.
        let df = differential(&g, &r.certificate_f.values);
        let x = g.coords(40)[0] + 0.5 * g.h[0];
        assert_abs_diff_eq!(df.get(40, 0), -(2.0 * PI * x).sin(), epsilon = 1e-2);
    }

    #[test]
    fn exact_form_and_pure_potential() {
        let g = circle(128);
        let f: Vec<f64> = g.sample(|x| (2.0 * PI * x[0]).cos());
        let exact = differential(&g, &f);
        let r = critical_value(&g, &exact, &ScalarPotential::zeros(&g), 1e-6).unwrap();
        assert!(r.value.abs() <= 1e-6);
        let v = ScalarPotential::new(g.sample(|x| (2.0 * PI * x[0]).sin() + 0.3));
        let r = critical_value(&g, &VectorPotential::zeros(&g), &v, 1e-6).unwrap();
        assert_abs_diff_eq!(r.value, max_of(&v.values), epsilon = 1e-6);
    }

    #[test]
    fn strict_value_cancels_harmonic_part() {
        let g = circle(128);
        let v = ScalarPotential::zeros(&g);
        let h = VectorPotential::constant(&g, &[0.7 * 2.0 * PI]);
        let r = strict_critical_value(&g, &h, &v, &[vec![1.0]], 1e-4).unwrap();
        assert!(r.value.abs() <= 1e-3);
        assert_abs_diff_eq!(r.argmin[0], 0.7 * 2.0 * PI, epsilon = 1e-2);
        let r = strict_critical_value(&g, &wobble(&g), &v, &[vec![1.0]], 1e-4).unwrap();
        assert!(r.value.abs() <= 1e-3);
        let r = strict_critical_value(&g, &wobble(&g), &v, &[], 1e-4).unwrap();
        assert_abs_diff_eq!(r.value, 0.245, epsilon = 1e-3);
    }

    #[test]
    fn finite_cover_and_scaling() {
        let g = circle(128);
        let v = ScalarPotential::zeros(&g);
        let base = critical_value(&g, &wobble(&g), &v, 1e-4).unwrap().value;
        for n in [2, 3] {
            let (cover, a, w) = unroll(&g, &wobble(&g), &v, &[n]).unwrap();
            let lifted = critical_value(&cover, &a, &w, 1e-4).unwrap().value;
            assert_abs_diff_eq!(lifted, base, epsilon = 2e-4);
        }
        for b in [0.5, 2.0] {
            let scaled = critical_value(&g, &wobble(&g).scaled(b), &v, 1e-4).unwrap().value;
            assert_abs_diff_eq!(scaled, b * b * base, epsilon = 1e-3 * (1.0 + b * b));
        }
    }

    #[test]
    fn references() {
        assert_eq!(mane_reference("hyperbolic", 2.0).unwrap(), 2.0);
        assert_eq!(mane_reference("sl2_universal", 2.0).unwrap(), 1.0);
        assert_eq!(mane_reference("torus_exact", 3.0).unwrap(), 0.0);
        assert!(mane_reference("torus_monopole", 1.0).unwrap().is_infinite());
        assert!(mane_reference("klein", 1.0).is_err());
    }

    #[test]
    fn constant_potential_equality() {
        let g = make_grid(&Geometry::build(GeometryKind::TorusFlat { lengths: vec![1.0, 1.0] }).unwrap(), &[8, 8]).unwrap();
        let v = ScalarPotential::new(vec![0.4; g.len()]);
        let r = verify_lambda0_le_c(&g, &VectorPotential::zeros(&g), &v).unwrap();
        assert_abs_diff_eq!(r.lambda0, r.c, epsilon = 1e-6);
    }
}
