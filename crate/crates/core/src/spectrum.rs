//! Lowest eigenpairs of `H(s)` and the minimum spectral gap along the path.
//!
//! The eigensolver is a thick-restart Lanczos iteration with full
//! reorthogonalization. Eigenpairs are found one at a time: each converged
//! vector is locked and the next search runs in its orthogonal complement,
//! which also recovers degenerate levels that a single Krylov space would
//! miss. Only operator applications are used; no matrix is stored.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QaaError, Result};
use crate::hamiltonian::{HamiltonianPath, Mix};
use crate::seed::{child_seed, rng_from_seed, streams};
use rayon::prelude::*;

use crate::state::{axpy, dot, norm, scale, slice_dot, StateVector, BLOCK, C64, PAR_THRESHOLD};

#[derive(Clone, Debug, PartialEq)]
pub struct EigenConfig {
    /// Residual bound `||H v - λ v||` enforced on every returned pair.
    pub tol: f64,
    /// Maximum Krylov basis size before a thick restart.
    pub krylov_dim: usize,
    /// Ritz vectors retained across a restart.
    pub keep: usize,
    /// Operator-application budget per call.
    pub max_matvecs: usize,
    /// Seed for the random start vectors.
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig {
            tol: 1e-10,
            krylov_dim: 20,
            keep: 6,
            max_matvecs: 100_000,
            seed: 0x5eed_1a2c,
        }
    }
}

impl EigenConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Lowest `k` levels of `H(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSlice {
    pub s: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Vec<StateVector>>,
    /// Final residual norm of each pair.
    pub residuals: Vec<f64>,
    /// Operator applications used.
    pub matvecs: usize,
}

impl SpectrumSlice {
    /// `λ_1 - λ_0`, clamped at zero.
    pub fn gap(&self) -> Option<f64> {
        match self.eigenvalues.as_slice() {
            [a, b, ..] => Some((b - a).max(0.0)),
            _ => None,
        }
    }
}

/// `k` lowest eigenpairs of `H(s)` with residual below `tol`.
pub fn lowest_eigenpairs(
    path: &HamiltonianPath<'_>,
    s: f64,
    k: usize,
    tol: f64,
) -> Result<SpectrumSlice> {
    lowest_eigenpairs_with(path, s, k, &EigenConfig::default().with_tol(tol), None)
}

/// As [`lowest_eigenpairs`], optionally warm-started from approximate
/// eigenvectors (e.g. those of a neighbouring `s`).
pub fn lowest_eigenpairs_with(
    path: &HamiltonianPath<'_>,
    s: f64,
    k: usize,
    cfg: &EigenConfig,
    guess: Option<&[StateVector]>,
) -> Result<SpectrumSlice> {
    if !(0.0..=1.0).contains(&s) {
        return Err(QaaError::invalid(format!("s = {s} outside [0, 1]")));
    }
    let dim = path.dim();
    if k == 0 || k > dim {
        return Err(QaaError::invalid(format!(
            "cannot compute {k} eigenpairs of a {dim}-dimensional operator"
        )));
    }
    let mix = path.mix_at(s);
    if mix.driver == 0.0 && mix.extra == 0.0 {
        return Ok(diagonal_slice(path, s, mix.problem, k));
    }
    let op = |x: &[C64], y: &mut [C64]| path.apply_mix(mix, x, y);
    let mut solver = Lanczos {
        op: &op,
        dim,
        cfg,
        matvecs: 0,
    };
    let mut locked: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let mut rng = rng_from_seed(child_seed(cfg.seed, streams::EIGEN_START + j as u64));
        let random: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let start = match guess.and_then(|g| g.get(j)) {
            Some(g) if g.dim() == dim => {
                let mut v = g.amplitudes().to_vec();
                let gn = norm(&v);
                if gn > 0.0 {
                    scale(&mut v, C64::new(1.0 / gn, 0.0));
                }
                let rn = norm(&random);
                axpy(C64::new(1e-3 / rn, 0.0), &random, &mut v);
                v
            }
            _ => random,
        };
        let (value, vector, resid) = solver.lowest_in_complement(&locked, start)?;
        values.push(value);
        residuals.push(resid);
        locked.push(vector);
    }
    // Deflated searches return levels in order up to roundoff; sort anyway.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let n = path.n();
    let eigenvectors = order
        .iter()
        .map(|&i| StateVector::from_amplitudes(n, std::mem::take(&mut locked[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumSlice {
        s,
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors: Some(eigenvectors),
        residuals: order.iter().map(|&i| residuals[i]).collect(),
        matvecs: solver.matvecs,
    })
}

/// Exact answer when only the diagonal term survives (s = 1): the `k`
/// smallest costs with basis-state eigenvectors, ties broken by index.
fn diagonal_slice(path: &HamiltonianPath<'_>, s: f64, weight: f64, k: usize) -> SpectrumSlice {
    let values = path.cost().values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        (weight * values[a])
            .total_cmp(&(weight * values[b]))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    SpectrumSlice {
        s,
        eigenvalues: order.iter().map(|&z| weight * values[z]).collect(),
        eigenvectors: Some(
            order
                .iter()
                .map(|&z| StateVector::basis(path.n(), z as u64))
                .collect(),
        ),
        residuals: vec![0.0; k],
        matvecs: 0,
    }
}

struct Lanczos<'a, F: Fn(&[C64], &mut [C64])> {
    op: &'a F,
    dim: usize,
    cfg: &'a EigenConfig,
    matvecs: usize,
}

/// Classical Gram-Schmidt against `against`, repeated once when the first
/// pass cancels more than 1 - 1/sqrt(2) of the norm. Works block by block so
/// each slice of `w` stays in cache while the basis streams past it.
fn orthogonalize(w: &mut [C64], against: &[Vec<C64>]) -> Vec<C64> {
    let mut coeffs = vec![C64::new(0.0, 0.0); against.len()];
    if against.is_empty() {
        return coeffs;
    }
    let mut before = norm(w);
    for _ in 0..2 {
        let h = block_dots(against, w);
        block_subtract(against, &h, w);
        for (c, x) in coeffs.iter_mut().zip(&h) {
            *c += x;
        }
        let after = norm(w);
        if after > std::f64::consts::FRAC_1_SQRT_2 * before {
            break;
        }
        before = after;
    }
    coeffs
}

/// `<v_j|w>` for every `v_j`, summed in a fixed block order.
fn block_dots(against: &[Vec<C64>], w: &[C64]) -> Vec<C64> {
    let dim = w.len();
    let per_block = |b: usize| -> Vec<C64> {
        let r = b * BLOCK..((b + 1) * BLOCK).min(dim);
        let ws = &w[r.clone()];
        against
            .iter()
            .map(|v| slice_dot(&v[r.clone()], ws))
            .collect()
    };
    let blocks = dim.div_ceil(BLOCK);
    let partial: Vec<Vec<C64>> = if dim >= PAR_THRESHOLD {
        (0..blocks).into_par_iter().map(per_block).collect()
    } else {
        (0..blocks).map(per_block).collect()
    };
    let mut out = vec![C64::new(0.0, 0.0); against.len()];
    for p in partial {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    out
}

/// `w -= sum_j h_j v_j`.
fn block_subtract(against: &[Vec<C64>], h: &[C64], w: &mut [C64]) {
    let kernel = |b: usize, out: &mut [C64]| {
        let r = b * BLOCK..b * BLOCK + out.len();
        for (v, c) in against.iter().zip(h) {
            for (o, a) in out.iter_mut().zip(&v[r.clone()]) {
                *o -= c * a;
            }
        }
    };
    if w.len() >= PAR_THRESHOLD {
        w.par_chunks_mut(BLOCK)
            .enumerate()
            .for_each(|(b, out)| kernel(b, out));
    } else {
        w.chunks_mut(BLOCK)
            .enumerate()
            .for_each(|(b, out)| kernel(b, out));
    }
}

/// Deterministic, generic-looking vector used when a search direction collapses.
fn fill_vector(dim: usize, salt: usize) -> Vec<C64> {
    let mut rng = rng_from_seed(0x9e37_79b9 ^ salt as u64);
    (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

/// Ascending eigen-decomposition of a small Hermitian matrix.
fn small_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn combine(basis: &[Vec<C64>], coeffs: impl Iterator<Item = C64>, dim: usize) -> Vec<C64> {
    let h: Vec<C64> = coeffs.map(|c| -c).collect();
    let mut out = vec![C64::new(0.0, 0.0); dim];
    block_subtract(&basis[..h.len()], &h, &mut out);
    out
}

impl<F: Fn(&[C64], &mut [C64])> Lanczos<'_, F> {
    fn apply(&mut self, x: &[C64], y: &mut [C64]) -> Result<()> {
        if self.matvecs >= self.cfg.max_matvecs {
            return Err(QaaError::EigenNonConvergence {
                iterations: self.matvecs,
                residuals: vec![],
            });
        }
        self.matvecs += 1;
        (self.op)(x, y);
        Ok(())
    }

    fn lowest_in_complement(
        &mut self,
        locked: &[Vec<C64>],
        start: Vec<C64>,
    ) -> Result<(f64, Vec<C64>, f64)> {
        let dim = self.dim;
        let room = dim - locked.len();
        let max_basis = self.cfg.krylov_dim.max(4).min(room);
        let keep = self.cfg.keep.clamp(1, max_basis.saturating_sub(1).max(1));
        let min_basis = room.min(6);

        let mut v0 = start;
        orthogonalize(&mut v0, locked);
        let mut nrm = norm(&v0);
        if nrm < 1e-8 {
            // Start vector lay inside the locked space; fall back to a deterministic fill.
            v0 = fill_vector(dim, locked.len());
            orthogonalize(&mut v0, locked);
            nrm = norm(&v0);
        }
        scale(&mut v0, C64::new(1.0 / nrm, 0.0));

        let mut basis: Vec<Vec<C64>> = vec![v0];
        let mut proj = DMatrix::<C64>::zeros(0, 0);
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let mut last_resid = f64::INFINITY;
        loop {
            let j = basis.len() - 1;
            self.apply(&basis[j], &mut w)
                .map_err(|_| QaaError::EigenNonConvergence {
                    iterations: self.matvecs,
                    residuals: vec![last_resid],
                })?;
            let h = orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, locked);
            proj = proj.resize(j + 1, j + 1, C64::new(0.0, 0.0));
            for i in 0..j {
                proj[(i, j)] = h[i];
                proj[(j, i)] = h[i].conj();
            }
            proj[(j, j)] = C64::new(h[j].re, 0.0);
            let beta = norm(&w);

            let (theta, y) = small_eigh(&proj);
            let resid_est = beta * y[(j, 0)].norm();
            last_resid = resid_est;
            let exhausted = basis.len() == room;
            if (resid_est < 0.5 * self.cfg.tol && basis.len() >= min_basis) || exhausted {
                let mut v = combine(&basis, y.column(0).iter().copied(), dim);
                orthogonalize(&mut v, locked);
                let vn = norm(&v);
                scale(&mut v, C64::new(1.0 / vn, 0.0));
                let mut r = vec![C64::new(0.0, 0.0); dim];
                self.apply(&v, &mut r)
                    .map_err(|_| QaaError::EigenNonConvergence {
                        iterations: self.matvecs,
                        residuals: vec![last_resid],
                    })?;
                let value = dot(&v, &r).re;
                axpy(C64::new(-value, 0.0), &v, &mut r);
                let resid = norm(&r);
                last_resid = resid;
                if resid < self.cfg.tol {
                    return Ok((value, v, resid));
                }
                // Accuracy lost to roundoff: restart from the refined vector.
                basis = vec![v];
                proj = DMatrix::zeros(0, 0);
                continue;
            }
            if basis.len() == max_basis {
                let ritz: Vec<Vec<C64>> = (0..keep)
                    .map(|c| combine(&basis, y.column(c).iter().copied(), dim))
                    .collect();
                basis = ritz;
                proj = DMatrix::from_fn(keep, keep, |r, c| {
                    if r == c {
                        C64::new(theta[r], 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
            }
            let hnorm = (h.iter().map(|c| c.norm_sqr()).sum::<f64>() + beta * beta).sqrt();
            if beta <= 1e-300 {
                // Invariant subspace: continue from a fresh direction.
                w = fill_vector(dim, basis.len() + locked.len());
            }
            if beta <= 1e-8 * hnorm {
                for _ in 0..2 {
                    let wn = norm(&w);
                    scale(&mut w, C64::new(1.0 / wn, 0.0));
                    orthogonalize(&mut w, &basis);
                    orthogonalize(&mut w, locked);
                }
            }
            let wn = norm(&w);
            scale(&mut w, C64::new(1.0 / wn, 0.0));
            basis.push(std::mem::replace(&mut w, vec![C64::new(0.0, 0.0); dim]));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapScanConfig {
    /// Uniform grid size over `[0, 1]`; at least 11.
    pub grid_points: usize,
    /// Golden-section iterations around the coarse minimum.
    pub refine_iters: usize,
    /// Levels recorded per slice; at least 2.
    pub levels: usize,
    pub eigen: EigenConfig,
}

impl Default for GapScanConfig {
    fn default() -> Self {
        GapScanConfig {
            grid_points: 201,
            refine_iters: 40,
            levels: 2,
            eigen: EigenConfig::default().with_tol(1e-8),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapProfile {
    /// Coarse-grid slices without eigenvectors.
    pub slices: Vec<SpectrumSlice>,
    pub g_min: f64,
    pub s_at_min: f64,
    pub grid_points: usize,
    pub refine_iters: usize,
}

/// Structured record of a gap scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub g_min: f64,
    pub s_at_min: f64,
    pub grid_points: usize,
    pub refine_iters: usize,
}

impl GapProfile {
    pub fn summary(&self) -> GapSummary {
        GapSummary {
            g_min: self.g_min,
            s_at_min: self.s_at_min,
            grid_points: self.grid_points,
            refine_iters: self.refine_iters,
        }
    }
}

/// Scans `λ_1 - λ_0` on a uniform grid, then refines around the smallest
/// grid value by golden-section search. The reported minimum is never above
/// the coarse-grid minimum.
pub fn gap_scan(path: &HamiltonianPath<'_>, cfg: &GapScanConfig) -> Result<GapProfile> {
    if cfg.grid_points < 11 {
        return Err(QaaError::invalid(format!(
            "gap scan needs at least 11 grid points, got {}",
            cfg.grid_points
        )));
    }
    let levels = cfg.levels.max(2);
    let mut slices = Vec::with_capacity(cfg.grid_points);
    let mut warm: Option<Vec<StateVector>> = None;
    let mut best = (f64::INFINITY, 0.0, 0usize);
    let mut warm_at_best: Option<Vec<StateVector>> = None;
    for i in 0..cfg.grid_points {
        let s = i as f64 / (cfg.grid_points - 1) as f64;
        let mut slice = lowest_eigenpairs_with(path, s, levels, &cfg.eigen, warm.as_deref())?;
        let gap = slice.gap().expect("at least two levels");
        warm = slice.eigenvectors.take();
        if gap < best.0 {
            best = (gap, s, i);
            warm_at_best = warm.clone();
        }
        slices.push(slice);
    }

    let step = 1.0 / (cfg.grid_points - 1) as f64;
    let (mut lo, mut hi) = ((best.1 - step).max(0.0), (best.1 + step).min(1.0));
    let mut g_min = best.0;
    let mut s_at_min = best.1;
    let eval = |s: f64, g_min: &mut f64, s_at_min: &mut f64| -> Result<f64> {
        let slice = lowest_eigenpairs_with(path, s, 2, &cfg.eigen, warm_at_best.as_deref())?;
        let gap = slice.gap().expect("two levels");
        if gap < *g_min {
            *g_min = gap;
            *s_at_min = s;
        }
        Ok(gap)
    };
    if cfg.refine_iters > 0 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - inv_phi * (hi - lo);
        let mut b = lo + inv_phi * (hi - lo);
        let mut fa = eval(a, &mut g_min, &mut s_at_min)?;
        let mut fb = eval(b, &mut g_min, &mut s_at_min)?;
        for _ in 0..cfg.refine_iters {
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - inv_phi * (hi - lo);
                fa = eval(a, &mut g_min, &mut s_at_min)?;
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + inv_phi * (hi - lo);
                fb = eval(b, &mut g_min, &mut s_at_min)?;
            }
        }
    }
    Ok(GapProfile {
        slices,
        g_min,
        s_at_min,
        grid_points: cfg.grid_points,
        refine_iters: cfg.refine_iters,
    })
}

/// Rows `s, lambda_0, ..., lambda_{k-1}` with 12 significant digits.
pub fn write_spectrum_csv<W: Write>(mut out: W, slices: &[SpectrumSlice]) -> std::io::Result<()> {
    let k = slices
        .iter()
        .map(|s| s.eigenvalues.len())
        .max()
        .unwrap_or(0);
    let header: Vec<String> = std::iter::once("s".to_string())
        .chain((0..k).map(|i| format!("lambda_{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for slice in slices {
        let row: Vec<String> = std::iter::once(fmt12(slice.s))
            .chain(slice.eigenvalues.iter().map(|&v| fmt12(v)))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// 12 significant digits in scientific notation.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

/// Matrix-free Rayleigh quotient `<v|H(mix)|v> / <v|v>`.
pub fn rayleigh(path: &HamiltonianPath<'_>, mix: Mix, v: &[C64]) -> f64 {
    let mut hv = vec![C64::new(0.0, 0.0); v.len()];
    path.apply_mix(mix, v, &mut hv);
    dot(v, &hv).re / dot(v, v).re
}
