//! Dense reference implementations used as test oracles. Everything here is
//! built from explicit Kronecker products and full diagonalization and shares
//! no code with the matrix-free kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaa_core::hamiltonian::{Category, ExtraHamiltonian};
use qaa_core::meanfield::BlochConfig;
use qaa_core::sat::{generate_instance, Instance};
use qaa_core::{CostVector, StateVector};

pub type M = DMatrix<C>;
pub type V = DVector<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli(label: char) -> M {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match label {
        'I' => M::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => M::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => M::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => M::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad pauli {label}"),
    }
}

/// `op` acting on the listed qubits, identity elsewhere. Qubit 0 is the
/// least significant bit, so it is the rightmost Kronecker factor.
pub fn embed(n: usize, ops: &[(usize, M)]) -> M {
    let mut full = M::from_element(1, 1, c(1.0, 0.0));
    for q in (0..n).rev() {
        let f = ops
            .iter()
            .find(|(k, _)| *k == q)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| pauli('I'));
        full = full.kronecker(&f);
    }
    full
}

pub fn dense_hb(n: usize) -> M {
    let dim = 1 << n;
    let mut h = M::zeros(dim, dim);
    for q in 0..n {
        let x = embed(n, &[(q, pauli('X'))]);
        h += (M::identity(dim, dim) - x) * c(0.5, 0.0);
    }
    h
}

pub fn dense_hp(cost: &[f64]) -> M {
    M::from_diagonal(&V::from_iterator(
        cost.len(),
        cost.iter().map(|&v| c(v, 0.0)),
    ))
}

pub fn basis_labels(cat: Category) -> Vec<String> {
    cat.basis().iter().map(|p| p.to_string()).collect()
}

/// Path-change operator rebuilt from the stored coefficients: label `AB`
/// puts `A` on the lower qubit of the pair and `B` on the higher one.
pub fn dense_he(extra: &ExtraHamiltonian) -> M {
    let n = extra.n();
    let dim = 1 << n;
    let labels = basis_labels(extra.category());
    let mut h = M::zeros(dim, dim);
    for term in extra.terms() {
        let (a, b) = term.qubits();
        for (label, &k) in labels.iter().zip(term.coeffs()) {
            let mut ch = label.chars();
            let (pa, pb) = (ch.next().unwrap(), ch.next().unwrap());
            h += embed(n, &[(a, pauli(pa)), (b, pauli(pb))]) * c(k, 0.0);
        }
    }
    h
}

pub struct Dense {
    pub hb: M,
    pub hp: M,
    pub he: Option<M>,
}

impl Dense {
    pub fn new(n: usize, cost: &[f64], extra: Option<&ExtraHamiltonian>) -> Self {
        Dense {
            hb: dense_hb(n),
            hp: dense_hp(cost),
            he: extra.map(dense_he),
        }
    }

    pub fn at(&self, s: f64) -> M {
        let mut h = &self.hb * c(1.0 - s, 0.0) + &self.hp * c(s, 0.0);
        if let Some(he) = &self.he {
            h += he * c(s * (1.0 - s), 0.0);
        }
        h
    }

    pub fn eigenvalues(&self, s: f64) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.at(s))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn gap(&self, s: f64) -> f64 {
        let v = self.eigenvalues(s);
        v[1] - v[0]
    }

    /// Minimum gap over a uniform grid, then golden-section refinement
    /// around the best grid point.
    pub fn gap_min(&self, points: usize) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..points {
            let s = i as f64 / (points - 1) as f64;
            let g = self.gap(s);
            if g < best.0 {
                best = (g, s);
            }
        }
        let step = 1.0 / (points - 1) as f64;
        let (mut lo, mut hi) = ((best.1 - step).max(0.0), (best.1 + step).min(1.0));
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            let (fa, fb) = (self.gap(a), self.gap(b));
            for (f, s) in [(fa, a), (fb, b)] {
                if f < best.0 {
                    best = (f, s);
                }
            }
            if fa <= fb {
                hi = b;
            } else {
                lo = a;
            }
        }
        best
    }
}

/// `exp(-i tau H)` for Hermitian `H` by full diagonalization.
pub fn expm_herm(h: &M, tau: f64) -> M {
    let eig = SymmetricEigen::new(h.clone());
    let u = &eig.eigenvectors;
    let d = M::from_diagonal(&V::from_iterator(
        h.nrows(),
        eig.eigenvalues
            .iter()
            .map(|&l| C::from_polar(1.0, -tau * l)),
    ));
    u * d * u.adjoint()
}

/// Piecewise-exact propagation: `steps` uniform sub-steps, each the exact
/// exponential of the midpoint Hamiltonian.
pub fn propagate(dense: &Dense, total: f64, steps: usize, psi0: &V) -> V {
    let mut psi = psi0.clone();
    if total == 0.0 {
        return psi;
    }
    let h = total / steps as f64;
    for j in 0..steps {
        let s = (j as f64 + 0.5) / steps as f64;
        psi = expm_herm(&dense.at(s), h) * psi;
    }
    psi
}

pub fn to_dense(v: &StateVector) -> V {
    V::from_column_slice(v.amplitudes())
}

pub fn from_dense(n: usize, v: &V) -> StateVector {
    StateVector::from_amplitudes(n, v.iter().copied().collect()).unwrap()
}

pub fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
    let mut amps: Vec<C> = (0..1 << n)
        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let nrm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= nrm);
    StateVector::from_amplitudes(n, amps).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random certified instance with a unique optimum and `m` clauses.
pub fn unique_instance(n: usize, m: usize, mut seed: u64) -> (Instance, CostVector) {
    for _ in 0..10_000 {
        let mut inst = generate_instance(n, m, seed).unwrap();
        inst.certify_optimum().unwrap();
        if inst.has_unique_optimum().unwrap() {
            let cost = inst.build_cost_vector().unwrap();
            return (inst, cost);
        }
        seed += 1_000_003;
    }
    panic!("no unique-optimum instance found for n = {n}, m = {m}");
}

/// `|<z|f|z>|` brute force: number of violated clauses by explicit literal
/// evaluation.
pub fn brute_cost(inst: &Instance, z: u64) -> f64 {
    inst.clauses()
        .iter()
        .filter(|cl| {
            let va = (z >> cl.var_a) & 1 == 1;
            let vb = (z >> cl.var_b) & 1 == 1;
            let la = if cl.neg_a { !va } else { va };
            let lb = if cl.neg_b { !vb } else { vb };
            !(la || lb)
        })
        .count() as f64
}

pub fn max_abs_diff(a: &V, b: &V) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn mat_vec(h: &M, v: &StateVector) -> V {
    h * to_dense(v)
}

/// Dense product state for the given Bloch vectors (bit 0 is `Z = +1`).
pub fn product_state(cfg: &BlochConfig) -> V {
    let n = cfg.n();
    let factors: Vec<(C, C)> = cfg
        .vectors
        .iter()
        .map(|m| {
            let theta = m[2].clamp(-1.0, 1.0).acos();
            let phi = m[1].atan2(m[0]);
            (
                c((theta / 2.0).cos(), 0.0),
                C::from_polar((theta / 2.0).sin(), phi),
            )
        })
        .collect();
    V::from_iterator(
        1 << n,
        (0..1usize << n).map(|z| {
            (0..n).fold(c(1.0, 0.0), |acc, i| {
                acc * if z >> i & 1 == 1 {
                    factors[i].1
                } else {
                    factors[i].0
                }
            })
        }),
    )
}

pub fn random_bloch(n: usize, r: &mut impl Rng) -> BlochConfig {
    BlochConfig {
        vectors: (0..n)
            .map(|_| {
                let z: f64 = r.random_range(-1.0..1.0);
                let phi: f64 = r.random_range(0.0..std::f64::consts::TAU);
                let rho = (1.0 - z * z).sqrt();
                [rho * phi.cos(), rho * phi.sin(), z]
            })
            .collect(),
    }
}
