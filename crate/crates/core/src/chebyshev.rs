//! Chebyshev expansion of `exp(-i tau H) x` for a Hermitian operator with a
//! known spectral enclosure.
//!
//! With `H = c + r X`, `spec(X) ⊂ [-1, 1]`,
//! `exp(-i tau H) = e^{-i tau c} sum_k (2 - δ_k0) (-i)^k J_k(tau r) T_k(X)`.
//! The series is cut where the Bessel coefficients drop below the requested
//! tolerance; it needs no inner products, so each application is
//! deterministic and touches memory in a fixed pattern.

use crate::hamiltonian::{HamiltonianPath, Mix};
use crate::state::{for_each_indexed, C64};

/// Bessel functions `J_0(x) ..= J_K(x)` for `x >= 0`, truncated after the
/// first index `K > x` at which both `|J_K|` and `|J_{K+1}|` fall below `tol`.
///
/// Uses Miller's backward recurrence normalized by
/// `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, tol: f64) -> Vec<f64> {
    assert!(
        x >= 0.0 && x.is_finite(),
        "bessel argument must be finite and >= 0"
    );
    if x == 0.0 {
        return vec![1.0];
    }
    let target = (x + 12.0 * x.cbrt() + 30.0).ceil() as usize;
    let mut start = target + (160.0 * target as f64).sqrt() as usize;
    start += start % 2;
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in j.iter_mut() {
        *v /= norm;
    }
    let mut cut = j.len() - 1;
    for k in (x.floor() as usize + 1)..j.len() - 1 {
        if j[k].abs() < tol && j[k + 1].abs() < tol {
            cut = k;
            break;
        }
    }
    j.truncate(cut + 1);
    j
}

/// Scratch space reused across exponentials.
#[derive(Debug, Default)]
pub struct ChebyshevWorkspace {
    prev: Vec<C64>,
    cur: Vec<C64>,
    next: Vec<C64>,
    acc: Vec<C64>,
}

impl ChebyshevWorkspace {
    fn resize(&mut self, dim: usize) {
        for v in [&mut self.prev, &mut self.cur, &mut self.next, &mut self.acc] {
            v.clear();
            v.resize(dim, C64::new(0.0, 0.0));
        }
    }
}

/// Replaces `x` with `exp(-i tau (mix)) x`. Returns the number of operator
/// applications used.
pub fn expm_apply(
    path: &HamiltonianPath<'_>,
    mix: Mix,
    tau: f64,
    x: &mut [C64],
    tol: f64,
    ws: &mut ChebyshevWorkspace,
) -> usize {
    let (lo, hi) = path.spectral_bounds(mix);
    let center = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo) * (1.0 + 1e-12) + 1e-300;
    let phase = C64::from_polar(1.0, -tau * center);
    let arg = tau.abs() * radius;
    if arg < 1e-300 {
        x.iter_mut().for_each(|a| *a *= phase);
        return 0;
    }
    let bessel = bessel_j_sequence(arg, tol);
    // (-i sgn(tau))^k
    let unit = C64::new(0.0, -tau.signum());
    let coeff = |k: usize| -> C64 {
        let w = if k == 0 { 1.0 } else { 2.0 } * bessel[k];
        unit.powu(k as u32) * w
    };

    ws.resize(x.len());
    let scaled = mix.scaled(1.0 / radius);
    let shift = center / radius;
    ws.prev.copy_from_slice(x);
    let a0 = coeff(0);
    for (acc, v) in ws.acc.iter_mut().zip(x.iter()) {
        *acc = v * a0;
    }
    if bessel.len() > 1 {
        path.apply_mix(scaled, &ws.prev, &mut ws.cur);
        let a1 = coeff(1);
        let prev = &ws.prev;
        let cur_ptr = &mut ws.cur;
        for_each_indexed(cur_ptr, |i, c| *c -= prev[i] * shift);
        for (acc, c) in ws.acc.iter_mut().zip(ws.cur.iter()) {
            *acc += c * a1;
        }
    }
    for k in 2..bessel.len() {
        path.apply_mix(scaled, &ws.cur, &mut ws.next);
        let ak = coeff(k);
        {
            let prev = &ws.prev;
            let cur = &ws.cur;
            for_each_indexed(&mut ws.next, |i, nx| {
                *nx = (*nx - cur[i] * shift) * 2.0 - prev[i];
            });
        }
        for (acc, nx) in ws.acc.iter_mut().zip(ws.next.iter()) {
            *acc += nx * ak;
        }
        std::mem::swap(&mut ws.prev, &mut ws.cur);
        std::mem::swap(&mut ws.cur, &mut ws.next);
    }
    for (xi, acc) in x.iter_mut().zip(ws.acc.iter()) {
        *xi = acc * phase;
    }
    bessel.len() - 1
}
