//! Mean-field (product-state) approximation of the annealing run, used as a
//! cheap pre-filter when mining hard instances.
//!
//! Each qubit is a Bloch vector `m_i = (<X_i>, <Y_i>, <Z_i>)`. The energy of a
//! product state is
//!
//! ```text
//! E(s, m) = (1 - s) sum_i (1 - m_x^i)/2 + s f_MF(m_z)
//! ```
//!
//! where `f_MF` is the cost written as a polynomial in `<Z_i>` (bit 0 is the
//! `Z = +1` state). Time-dependent variational evolution over product states
//! is spin precession in the self-consistent field:
//! `dm_i/dt = 2 (dE/dm_i) x m_i`.

use serde::{Deserialize, Serialize};

use crate::error::{QaaError, Result};
use crate::sat::{CostKind, Instance};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_STEPS: usize = 2000;

/// Product state as one unit Bloch vector per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochConfig {
    pub vectors: Vec<[f64; 3]>,
}

impl BlochConfig {
    /// All spins along `+x`: the ground state of the driver.
    pub fn along_x(n: usize) -> Self {
        BlochConfig {
            vectors: vec![[1.0, 0.0, 0.0]; n],
        }
    }

    /// Classical basis state `|z>`.
    pub fn basis(n: usize, z: u64) -> Self {
        BlochConfig {
            vectors: (0..n)
                .map(|i| [0.0, 0.0, if z >> i & 1 == 1 { -1.0 } else { 1.0 }])
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    /// Largest deviation of any `|m_i|` from 1.
    pub fn max_norm_error(&self) -> f64 {
        self.vectors
            .iter()
            .map(|m| ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(QaaError::DimensionMismatch {
                expected: n,
                actual: self.n(),
            });
        }
        if self.vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(QaaError::NonFinite("Bloch vector"));
        }
        let err = self.max_norm_error();
        if err > 1e-6 {
            return Err(QaaError::invalid(format!(
                "Bloch vectors must be unit length (error {err:e})"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldResult {
    pub final_energy: f64,
    pub cost_min: f64,
    pub excess: f64,
    /// True when the instance looks easy and is discarded from mining.
    pub passed_filter: bool,
    /// Largest `| |m_i| - 1 |` seen at any step.
    pub max_norm_error: f64,
}

/// Easy iff `excess <= threshold` (inclusive).
pub fn apply_filter(excess: f64, threshold: f64) -> bool {
    excess <= threshold
}

/// `f_MF(m_z)` and its gradient.
fn cost_polynomial(instance: &Instance, mz: &[f64], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    match instance.cost_kind() {
        CostKind::Max2Sat => {
            let mut f = 0.0;
            for c in instance.clauses() {
                // violated when var_a takes value neg_a and var_b takes neg_b
                let ea = if c.neg_a { -1.0 } else { 1.0 };
                let eb = if c.neg_b { -1.0 } else { 1.0 };
                let pa = 0.5 * (1.0 + ea * mz[c.var_a]);
                let pb = 0.5 * (1.0 + eb * mz[c.var_b]);
                f += pa * pb;
                grad[c.var_a] += 0.5 * ea * pb;
                grad[c.var_b] += 0.5 * eb * pa;
            }
            f
        }
        CostKind::GroverMarked(w) => {
            let (p, g) = product_and_grad(mz, *w);
            for (gi, d) in grad.iter_mut().zip(g) {
                *gi = -d;
            }
            1.0 - p
        }
        CostKind::ExplicitDiagonal(table) => {
            let mut f = 0.0;
            for (z, &v) in table.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let (p, g) = product_and_grad(mz, z as u64);
                f += v * p;
                for (gi, d) in grad.iter_mut().zip(g) {
                    *gi += v * d;
                }
            }
            f
        }
    }
}

/// `prod_i (1 + e_i m_i)/2` for the signs of basis state `z`, with gradient.
fn product_and_grad(mz: &[f64], z: u64) -> (f64, Vec<f64>) {
    let n = mz.len();
    let factor = |i: usize| {
        let e = if z >> i & 1 == 1 { -1.0 } else { 1.0 };
        (0.5 * (1.0 + e * mz[i]), 0.5 * e)
    };
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * factor(i).0;
    }
    let mut grad = vec![0.0; n];
    let mut suffix = 1.0;
    for i in (0..n).rev() {
        let (v, d) = factor(i);
        grad[i] = prefix[i] * suffix * d;
        suffix *= v;
    }
    (prefix[n], grad)
}

/// Product-state energy at schedule position `s`.
pub fn meanfield_energy(instance: &Instance, s: f64, config: &BlochConfig) -> Result<f64> {
    config.validate(instance.n())?;
    Ok(energy(instance, s, &config.vectors))
}

fn energy(instance: &Instance, s: f64, m: &[[f64; 3]]) -> f64 {
    let mz: Vec<f64> = m.iter().map(|v| v[2]).collect();
    let mut grad = vec![0.0; m.len()];
    let driver: f64 = m.iter().map(|v| 0.5 * (1.0 - v[0])).sum();
    (1.0 - s) * driver + s * cost_polynomial(instance, &mz, &mut grad)
}

fn derivative(
    instance: &Instance,
    s: f64,
    m: &[[f64; 3]],
    out: &mut [[f64; 3]],
    scratch: &mut (Vec<f64>, Vec<f64>),
) {
    let (mz, grad) = scratch;
    for (z, v) in mz.iter_mut().zip(m) {
        *z = v[2];
    }
    cost_polynomial(instance, mz, grad);
    for i in 0..m.len() {
        let b = [-0.5 * (1.0 - s), 0.0, s * grad[i]];
        let v = m[i];
        out[i] = [
            2.0 * (b[1] * v[2] - b[2] * v[1]),
            2.0 * (b[2] * v[0] - b[0] * v[2]),
            2.0 * (b[0] * v[1] - b[1] * v[0]),
        ];
    }
}

/// Integrates the product-state equations from all spins along `+x` over
/// `[0, T]` with `steps` fourth-order Runge-Kutta steps, renormalizing each
/// Bloch vector after every step.
pub fn meanfield_trajectory(
    instance: &Instance,
    total_time: f64,
    steps: usize,
) -> Result<(BlochConfig, f64)> {
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(QaaError::invalid(format!(
            "total time must be > 0, got {total_time}"
        )));
    }
    if steps == 0 {
        return Err(QaaError::invalid("steps must be > 0"));
    }
    let n = instance.n();
    let h = total_time / steps as f64;
    let mut m = BlochConfig::along_x(n).vectors;
    let mut scratch = (vec![0.0; n], vec![0.0; n]);
    let mut k = vec![vec![[0.0; 3]; n]; 4];
    let mut tmp = vec![[0.0; 3]; n];
    let mut max_err = 0.0f64;
    for step in 0..steps {
        let t = step as f64 * h;
        let s_at = |t: f64| (t / total_time).clamp(0.0, 1.0);
        derivative(instance, s_at(t), &m, &mut k[0], &mut scratch);
        for (stage, dt) in [0.5, 0.5, 1.0].into_iter().enumerate() {
            for i in 0..n {
                for c in 0..3 {
                    tmp[i][c] = m[i][c] + dt * h * k[stage][i][c];
                }
            }
            derivative(
                instance,
                s_at(t + dt * h),
                &tmp,
                &mut k[stage + 1],
                &mut scratch,
            );
        }
        for i in 0..n {
            for c in 0..3 {
                m[i][c] +=
                    h / 6.0 * (k[0][i][c] + 2.0 * k[1][i][c] + 2.0 * k[2][i][c] + k[3][i][c]);
            }
            let len = (m[i][0] * m[i][0] + m[i][1] * m[i][1] + m[i][2] * m[i][2]).sqrt();
            if !len.is_finite() || len == 0.0 {
                return Err(QaaError::NonFinite("mean-field state"));
            }
            max_err = max_err.max((len - 1.0).abs());
            for c in 0..3 {
                m[i][c] /= len;
            }
        }
    }
    let config = BlochConfig { vectors: m };
    max_err = max_err.max(config.max_norm_error());
    Ok((config, max_err))
}

/// Runs the mean-field anneal and compares its final energy with the
/// certified optimum.
pub fn meanfield_evolve(
    instance: &Instance,
    total_time: f64,
    steps: usize,
    threshold: f64,
) -> Result<MeanFieldResult> {
    let cost_min = instance
        .optimum()
        .ok_or_else(|| QaaError::invalid("instance optimum is not certified; run certify first"))?
        .cost_min;
    let (config, max_norm_error) = meanfield_trajectory(instance, total_time, steps)?;
    let final_energy = energy(instance, 1.0, &config.vectors);
    if !final_energy.is_finite() {
        return Err(QaaError::NonFinite("mean-field energy"));
    }
    let excess = final_energy - cost_min;
    Ok(MeanFieldResult {
        final_energy,
        cost_min,
        excess,
        passed_filter: apply_filter(excess, threshold),
        max_norm_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::Clause;

    #[test]
    fn driver_ground_has_zero_energy() {
        let inst = Instance::max2sat(3, vec![Clause::new(0, 1, false, true)]).unwrap();
        assert_eq!(
            meanfield_energy(&inst, 0.0, &BlochConfig::along_x(3)).unwrap(),
            0.0
        );
    }

    #[test]
    fn basis_configs_reproduce_cost() {
        let inst = Instance::max2sat(
            3,
            vec![
                Clause::new(0, 1, false, true),
                Clause::new(1, 2, true, true),
                Clause::new(0, 2, false, false),
            ],
        )
        .unwrap();
        for z in 0..8 {
            let e = meanfield_energy(&inst, 1.0, &BlochConfig::basis(3, z)).unwrap();
            assert_eq!(e, inst.cost_at(z), "z = {z}");
        }
        let g = Instance::grover(3, 6).unwrap();
        for z in 0..8 {
            assert_eq!(
                meanfield_energy(&g, 1.0, &BlochConfig::basis(3, z)).unwrap(),
                g.cost_at(z)
            );
        }
    }

    #[test]
    fn filter_boundary() {
        assert!(apply_filter(0.0, 0.5));
        assert!(apply_filter(0.5, 0.5));
        assert!(!apply_filter(0.51, 0.5));
    }

    #[test]
    fn free_spins_stay_put() {
        let mut inst = Instance::explicit(2, vec![0.0; 4]).unwrap();
        inst.certify_optimum().unwrap();
        let r = meanfield_evolve(&inst, 10.0, 100, 0.5).unwrap();
        assert_eq!(r.final_energy, 0.0);
        assert!(r.passed_filter);
    }

    #[test]
    fn rejects_bad_configs() {
        let inst = Instance::grover(2, 0).unwrap();
        let bad = BlochConfig {
            vectors: vec![[1.0, 0.0, 0.0], [0.5, 0.0, 0.0]],
        };
        assert!(meanfield_energy(&inst, 0.5, &bad).is_err());
        assert!(meanfield_energy(&inst, 0.5, &BlochConfig::along_x(3)).is_err());
        assert!(meanfield_evolve(&inst, 1.0, 10, 0.5).is_err());
    }
}
