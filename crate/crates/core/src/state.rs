//! State vectors and the vector kernels shared by the propagator and the
//! eigensolver.
//!
//! Reductions (inner products, norms) are computed over fixed blocks of
//! [`BLOCK`] amplitudes and the per-block partial sums are added in block
//! order, so results are bitwise identical whether or not the blocks were
//! evaluated in parallel.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QaaError, Result};
use crate::sat::MAX_QUBITS;

pub type C64 = Complex64;

/// Block length for reductions and operator kernels.
pub const BLOCK: usize = 1 << 12;

/// Dimension at which kernels start using the rayon pool.
pub const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector {
            n,
            amps: vec![C64::new(0.0, 0.0); 1 << n],
        }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(QaaError::invalid(format!(
                "{n} qubits exceeds maximum {MAX_QUBITS}"
            )));
        }
        if amps.len() != 1usize << n {
            return Err(QaaError::DimensionMismatch {
                expected: 1 << n,
                actual: amps.len(),
            });
        }
        Ok(StateVector { n, amps })
    }

    /// Computational basis state `|z>`.
    pub fn basis(n: usize, z: u64) -> Self {
        let mut s = Self::zeros(n);
        s.amps[z as usize] = C64::new(1.0, 0.0);
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_dim(other.dim())?;
        Ok(dot(&self.amps, &other.amps))
    }

    /// `|<z|self>|^2`.
    pub fn probability(&self, z: u64) -> f64 {
        self.amps[z as usize].norm_sqr()
    }

    pub fn scale(&mut self, factor: C64) {
        scale(&mut self.amps, factor);
    }

    pub fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.amps.len() {
            return Err(QaaError::DimensionMismatch {
                expected: self.amps.len(),
                actual,
            });
        }
        Ok(())
    }
}

/// Uniform superposition, the ground state of the transverse-field driver.
pub fn initial_state(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(QaaError::invalid("need at least one qubit"));
    }
    let amp = C64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
    StateVector::from_amplitudes(n, vec![amp; 1 << n])
}

/// Product state with `|->` on qubit `k` and `|+>` on every other qubit: one
/// of the `n` degenerate first excited states of the driver.
pub fn excited_state(n: usize, k: usize) -> Result<StateVector> {
    if k >= n {
        return Err(QaaError::invalid(format!(
            "qubit index {k} out of range for {n} qubits"
        )));
    }
    let mut s = initial_state(n)?;
    for (z, a) in s.amps.iter_mut().enumerate() {
        if z >> k & 1 == 1 {
            *a = -*a;
        }
    }
    Ok(s)
}

fn maybe_par_blocks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let blocks = len.div_ceil(BLOCK);
    let range = move |b: usize| b * BLOCK..((b + 1) * BLOCK).min(len);
    if len >= PAR_THRESHOLD {
        (0..blocks).into_par_iter().map(|b| f(range(b))).collect()
    } else {
        (0..blocks).map(|b| f(range(b))).collect()
    }
}

/// `sum conj(x[i]) * y[i]` over one slice. Four independent accumulators
/// keep the loop from being latency bound; the summation order is fixed.
pub fn slice_dot(x: &[C64], y: &[C64]) -> C64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xt, yt) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            re[k] += a[k].re * b[k].re + a[k].im * b[k].im;
            im[k] += a[k].re * b[k].im - a[k].im * b[k].re;
        }
    }
    for (k, (a, b)) in xt.iter().zip(yt).enumerate() {
        re[k] += a.re * b.re + a.im * b.im;
        im[k] += a.re * b.im - a.im * b.re;
    }
    C64::new(
        (re[0] + re[1]) + (re[2] + re[3]),
        (im[0] + im[1]) + (im[2] + im[3]),
    )
}

/// `sum conj(x[i]) * y[i]` with a fixed reduction order.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    maybe_par_blocks(x.len(), |r| slice_dot(&x[r.clone()], &y[r]))
        .into_iter()
        .fold(C64::new(0.0, 0.0), |acc, p| acc + p)
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    maybe_par_blocks(x.len(), |r| slice_dot(&x[r.clone()], &x[r]).re)
        .into_iter()
        .sum()
}

pub fn norm(x: &[C64]) -> f64 {
    norm_sqr(x).sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    if y.len() >= PAR_THRESHOLD {
        y.par_chunks_mut(BLOCK)
            .zip(x.par_chunks(BLOCK))
            .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(b, a)| *b += alpha * a));
    } else {
        y.iter_mut().zip(x).for_each(|(b, a)| *b += alpha * a);
    }
}

pub fn scale(x: &mut [C64], factor: C64) {
    if x.len() >= PAR_THRESHOLD {
        x.par_chunks_mut(BLOCK)
            .for_each(|c| c.iter_mut().for_each(|a| *a *= factor));
    } else {
        x.iter_mut().for_each(|a| *a *= factor);
    }
}

/// Applies `f(i, &mut y[i])` for every index, block-parallel for large inputs.
pub fn for_each_indexed<F>(y: &mut [C64], f: F)
where
    F: Fn(usize, &mut C64) + Sync,
{
    if y.len() >= PAR_THRESHOLD {
        y.par_chunks_mut(BLOCK).enumerate().for_each(|(b, c)| {
            let base = b * BLOCK;
            c.iter_mut().enumerate().for_each(|(i, a)| f(base + i, a));
        });
    } else {
        y.iter_mut().enumerate().for_each(|(i, a)| f(i, a));
    }
}
