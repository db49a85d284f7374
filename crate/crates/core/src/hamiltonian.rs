//! Matrix-free Hamiltonians on `2^n` amplitudes.
//!
//! * driver `H_B = sum_i (1 - X_i) / 2`
//! * problem `H_P = sum_z f(z) |z><z|`
//! * path change `H_E`, a sum of random two-qubit terms on the interaction
//!   graph of the instance
//!
//! The interpolated operator at `s = t/T` is
//! `H(s) = (1 - s) H_B + s (1 - s) H_E + s H_P`.
//!
//! Two-qubit terms act on an ordered qubit pair `(a, b)` with `a < b`. A label
//! such as `ZX` places `Z` on `a` and `X` on `b`. The local 4x4 matrix uses
//! index `l = bit_a + 2 * bit_b`.

use std::fmt;
use std::ops::Mul;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix4, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QaaError, Result};
use crate::sat::{CostVector, Instance};
use crate::seed::rng_from_seed;
use crate::state::{StateVector, BLOCK, C64, PAR_THRESHOLD};

/// Draw cap for stoquastic rejection sampling of one term.
pub const MAX_REJECTION_DRAWS: usize = 1_000_000;

pub const EXTRA_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Two-qubit Pauli product: `.0` on the lower qubit, `.1` on the higher.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliPair(pub Pauli, pub Pauli);

impl PauliPair {
    /// Local 4x4 matrix, `m[row][col]` with `l = bit_a + 2 * bit_b`.
    pub fn local_matrix(self) -> [[C64; 4]; 4] {
        let a = self.0.matrix();
        let b = self.1.matrix();
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = a[r & 1][c & 1] * b[r >> 1][c >> 1];
            }
        }
        m
    }

    pub fn is_diagonal(self) -> bool {
        matches!(self.0, Pauli::I | Pauli::Z) && matches!(self.1, Pauli::I | Pauli::Z)
    }
}

impl fmt::Display for PauliPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0.as_char(), self.1.as_char())
    }
}

impl FromStr for PauliPair {
    type Err = QaaError;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (
            chars.next().and_then(Pauli::from_char),
            chars.next().and_then(Pauli::from_char),
            chars.next(),
        ) {
            (Some(a), Some(b), None) => Ok(PauliPair(a, b)),
            _ => Err(QaaError::invalid(format!(
                "not a two-qubit Pauli label: {s:?}"
            ))),
        }
    }
}

const fn pp(a: Pauli, b: Pauli) -> PauliPair {
    PauliPair(a, b)
}

use Pauli::{I, X, Y, Z};

const STOQUASTIC_BASIS: [PauliPair; 6] =
    [pp(I, X), pp(X, I), pp(Z, X), pp(X, Z), pp(X, X), pp(Y, Y)];

const COMPLEX_BASIS: [PauliPair; 12] = [
    pp(I, X),
    pp(X, I),
    pp(I, Y),
    pp(Y, I),
    pp(Z, X),
    pp(X, Z),
    pp(X, X),
    pp(Y, Y),
    pp(Z, Y),
    pp(Y, Z),
    pp(Y, X),
    pp(X, Y),
];

const DIAGONAL_BASIS: [PauliPair; 3] = [pp(I, Z), pp(Z, I), pp(Z, Z)];

/// Family of random path-change terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Zero diagonal, all off-diagonal entries real and non-positive.
    Stoquastic,
    /// Zero diagonal, general Hermitian.
    Complex,
    /// Diagonal in the computational basis.
    Diagonal,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Stoquastic, Category::Complex, Category::Diagonal];

    pub fn basis(self) -> &'static [PauliPair] {
        match self {
            Category::Stoquastic => &STOQUASTIC_BASIS,
            Category::Complex => &COMPLEX_BASIS,
            Category::Diagonal => &DIAGONAL_BASIS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Stoquastic => "stoquastic",
            Category::Complex => "complex",
            Category::Diagonal => "diagonal",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = QaaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stoquastic" => Ok(Category::Stoquastic),
            "complex" => Ok(Category::Complex),
            "diagonal" => Ok(Category::Diagonal),
            _ => Err(QaaError::invalid(format!(
                "unknown path-change category {s:?}"
            ))),
        }
    }
}

/// Whether path-change terms are placed once per interaction-graph edge or
/// once per clause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermGranularity {
    #[default]
    PerEdge,
    PerClause,
}

/// True iff every off-diagonal entry is real and non-positive.
pub fn is_stoquastic(m: &[[C64; 4]; 4]) -> bool {
    (0..4).all(|r| (0..4).all(|c| r == c || (m[r][c].re <= 0.0 && m[r][c].im == 0.0)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtraTerm {
    var_a: usize,
    var_b: usize,
    coeffs: Vec<f64>,
    matrix: [[C64; 4]; 4],
    /// `matrix` with its diagonal removed; the diagonal is folded into
    /// `ExtraHamiltonian::diagonal`.
    off: [[C64; 4]; 4],
    has_off: bool,
    real: bool,
}

impl ExtraTerm {
    fn new(category: Category, var_a: usize, var_b: usize, coeffs: Vec<f64>) -> Self {
        let matrix = combine(category.basis(), &coeffs);
        let mut off = matrix;
        for (r, row) in off.iter_mut().enumerate() {
            row[r] = C64::new(0.0, 0.0);
        }
        let has_off = off.iter().flatten().any(|v| *v != C64::new(0.0, 0.0));
        let real = off.iter().flatten().all(|v| v.im == 0.0);
        ExtraTerm {
            var_a,
            var_b,
            coeffs,
            matrix,
            off,
            has_off,
            real,
        }
    }

    fn has_diagonal(&self) -> bool {
        (0..4).any(|l| self.matrix[l][l] != C64::new(0.0, 0.0))
    }

    pub fn qubits(&self) -> (usize, usize) {
        (self.var_a, self.var_b)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn local_matrix(&self) -> &[[C64; 4]; 4] {
        &self.matrix
    }

    fn spectral_norm(&self) -> f64 {
        let m = Matrix4::from_fn(|r, c| self.matrix[r][c]);
        SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

fn combine(basis: &[PauliPair], coeffs: &[f64]) -> [[C64; 4]; 4] {
    let mut m = [[C64::new(0.0, 0.0); 4]; 4];
    for (p, &c) in basis.iter().zip(coeffs) {
        let pm = p.local_matrix();
        for r in 0..4 {
            for col in 0..4 {
                m[r][col] += pm[r][col] * c;
            }
        }
    }
    m
}

/// Random two-qubit path-change Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtraHamiltonian {
    n: usize,
    category: Category,
    seed: Option<u64>,
    granularity: TermGranularity,
    terms: Vec<ExtraTerm>,
    norm_bound: f64,
    /// Summed diagonal of all terms over the full basis, if any term has one.
    diagonal: Option<Vec<f64>>,
}

impl ExtraHamiltonian {
    /// Builds an operator from explicit coefficients over `category.basis()`.
    pub fn from_terms(
        n: usize,
        category: Category,
        terms: Vec<(usize, usize, Vec<f64>)>,
    ) -> Result<Self> {
        let basis_len = category.basis().len();
        let mut built = Vec::with_capacity(terms.len());
        for (a, b, coeffs) in terms {
            if !(a < b && b < n) {
                return Err(QaaError::invalid(format!(
                    "term qubits ({a}, {b}) must satisfy a < b < {n}"
                )));
            }
            if coeffs.len() != basis_len {
                return Err(QaaError::invalid(format!(
                    "{category} terms take {basis_len} coefficients, got {}",
                    coeffs.len()
                )));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(QaaError::NonFinite("path-change coefficients"));
            }
            built.push(ExtraTerm::new(category, a, b, coeffs));
        }
        let norm_bound = built.iter().map(ExtraTerm::spectral_norm).sum();
        let diagonal = built.iter().any(ExtraTerm::has_diagonal).then(|| {
            let mut d = vec![0.0; 1usize << n];
            for t in built.iter().filter(|t| t.has_diagonal()) {
                let (a, b) = (t.var_a, t.var_b);
                for (z, v) in d.iter_mut().enumerate() {
                    let l = (z >> a & 1) | (z >> b & 1) << 1;
                    *v += t.matrix[l][l].re;
                }
            }
            d
        });
        Ok(ExtraHamiltonian {
            n,
            category,
            seed: None,
            granularity: TermGranularity::PerEdge,
            terms: built,
            norm_bound,
            diagonal,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn granularity(&self) -> TermGranularity {
        self.granularity
    }

    pub fn terms(&self) -> &[ExtraTerm] {
        &self.terms
    }

    /// Upper bound on the spectral norm (sum of per-term norms).
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn to_json(&self) -> String {
        let file = ExtraFile {
            format_version: EXTRA_FORMAT_VERSION,
            n: self.n,
            category: self.category,
            seed: self.seed,
            granularity: self.granularity,
            terms: self
                .terms
                .iter()
                .map(|t| TermFile {
                    var_a: t.var_a,
                    var_b: t.var_b,
                    basis_labels: self
                        .category
                        .basis()
                        .iter()
                        .map(|p| p.to_string())
                        .collect(),
                    coeffs: t.coeffs.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("extra hamiltonian serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ExtraFile = serde_json::from_str(text)
            .map_err(|e| QaaError::format("path-change file", e.to_string()))?;
        if file.format_version != EXTRA_FORMAT_VERSION {
            return Err(QaaError::format(
                "path-change file",
                format!("unsupported format_version {}", file.format_version),
            ));
        }
        let basis = file.category.basis();
        let mut terms = Vec::with_capacity(file.terms.len());
        for t in file.terms {
            let labels: Vec<PauliPair> = t
                .basis_labels
                .iter()
                .map(|l| l.parse())
                .collect::<Result<_>>()?;
            if labels != basis {
                return Err(QaaError::format(
                    "path-change file",
                    format!(
                        "basis labels {:?} do not match category {}",
                        t.basis_labels, file.category
                    ),
                ));
            }
            terms.push((t.var_a, t.var_b, t.coeffs));
        }
        let mut h = Self::from_terms(file.n, file.category, terms)?;
        h.seed = file.seed;
        h.granularity = file.granularity;
        Ok(h)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| QaaError::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QaaError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    var_a: usize,
    var_b: usize,
    basis_labels: Vec<String>,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ExtraFile {
    format_version: u32,
    n: usize,
    category: Category,
    seed: Option<u64>,
    granularity: TermGranularity,
    terms: Vec<TermFile>,
}

/// Unit-norm Gaussian coefficient vector; stoquastic draws are rejected until
/// the resulting term is stoquastic.
fn sample_coeffs<R: Rng>(rng: &mut R, category: Category) -> Result<Vec<f64>> {
    let basis = category.basis();
    for _ in 0..MAX_REJECTION_DRAWS {
        let raw: Vec<f64> = (0..basis.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let coeffs: Vec<f64> = raw.into_iter().map(|c| c / norm).collect();
        if category != Category::Stoquastic || is_stoquastic(&combine(basis, &coeffs)) {
            return Ok(coeffs);
        }
    }
    Err(QaaError::RejectionLimit(MAX_REJECTION_DRAWS))
}

/// Samples a path-change Hamiltonian with one term per edge of the
/// instance's interaction graph.
pub fn sample_extra(
    instance: &Instance,
    category: Category,
    seed: u64,
) -> Result<ExtraHamiltonian> {
    sample_extra_with(instance, category, seed, TermGranularity::PerEdge)
}

pub fn sample_extra_with(
    instance: &Instance,
    category: Category,
    seed: u64,
    granularity: TermGranularity,
) -> Result<ExtraHamiltonian> {
    if instance.clauses().is_empty() {
        return Err(QaaError::invalid(
            "path change needs an interaction graph; the instance has no clauses",
        ));
    }
    let edges = match granularity {
        TermGranularity::PerEdge => instance.interaction_edges(),
        TermGranularity::PerClause => instance
            .clauses()
            .iter()
            .map(|c| (c.var_a, c.var_b))
            .collect(),
    };
    let mut h = sample_extra_on_edges(instance.n(), &edges, category, seed)?;
    h.granularity = granularity;
    Ok(h)
}

/// Samples one term per listed qubit pair. Terms are drawn sequentially
/// from a single generator seeded with `seed`.
pub fn sample_extra_on_edges(
    n: usize,
    edges: &[(usize, usize)],
    category: Category,
    seed: u64,
) -> Result<ExtraHamiltonian> {
    let mut rng = rng_from_seed(seed);
    let mut terms = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        terms.push((a, b, sample_coeffs(&mut rng, category)?));
    }
    let mut h = ExtraHamiltonian::from_terms(n, category, terms)?;
    h.seed = Some(seed);
    Ok(h)
}

/// All unordered pairs on `n` qubits.
pub fn complete_graph(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect()
}

/// Coefficients of `driver * H_B + extra * H_E + problem * H_P`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mix {
    pub driver: f64,
    pub extra: f64,
    pub problem: f64,
}

impl Mix {
    pub fn at(s: f64) -> Mix {
        Mix {
            driver: 1.0 - s,
            extra: s * (1.0 - s),
            problem: s,
        }
    }

    pub fn scaled(self, k: f64) -> Mix {
        Mix {
            driver: self.driver * k,
            extra: self.extra * k,
            problem: self.problem * k,
        }
    }

    pub fn add(self, other: Mix) -> Mix {
        Mix {
            driver: self.driver + other.driver,
            extra: self.extra + other.extra,
            problem: self.problem + other.problem,
        }
    }
}

/// Total evolution time plus the optional path-change term.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub total_time: f64,
    pub extra: Option<ExtraHamiltonian>,
}

impl Schedule {
    pub fn new(total_time: f64) -> Result<Self> {
        if !(total_time >= 0.0 && total_time.is_finite()) {
            return Err(QaaError::invalid(format!(
                "total time must be finite and >= 0, got {total_time}"
            )));
        }
        Ok(Schedule {
            total_time,
            extra: None,
        })
    }

    pub fn with_extra(mut self, extra: ExtraHamiltonian) -> Self {
        self.extra = Some(extra);
        self
    }

    pub fn has_extra(&self) -> bool {
        self.extra.is_some()
    }

    pub fn path<'a>(&'a self, cost: &'a CostVector) -> Result<HamiltonianPath<'a>> {
        HamiltonianPath::new(cost, self.extra.as_ref())
    }
}

/// The operator family `H(s)` for one cost and optional path change.
#[derive(Clone, Copy, Debug)]
pub struct HamiltonianPath<'a> {
    cost: &'a CostVector,
    extra: Option<&'a ExtraHamiltonian>,
}

impl<'a> HamiltonianPath<'a> {
    pub fn new(cost: &'a CostVector, extra: Option<&'a ExtraHamiltonian>) -> Result<Self> {
        if let Some(e) = extra {
            if e.n() != cost.n() {
                return Err(QaaError::invalid(format!(
                    "path change is on {} qubits, cost on {}",
                    e.n(),
                    cost.n()
                )));
            }
        }
        Ok(HamiltonianPath { cost, extra })
    }

    pub fn n(&self) -> usize {
        self.cost.n()
    }

    pub fn dim(&self) -> usize {
        self.cost.len()
    }

    pub fn cost(&self) -> &'a CostVector {
        self.cost
    }

    pub fn extra(&self) -> Option<&'a ExtraHamiltonian> {
        self.extra
    }

    /// Mix at `s`, with the path-change weight dropped when there is none.
    pub fn mix_at(&self, s: f64) -> Mix {
        let mut m = Mix::at(s);
        if self.extra.is_none() {
            m.extra = 0.0;
        }
        m
    }

    /// Interval guaranteed to contain the spectrum of the mixed operator.
    pub fn spectral_bounds(&self, mix: Mix) -> (f64, f64) {
        fn scaled((lo, hi): (f64, f64), k: f64) -> (f64, f64) {
            if k >= 0.0 {
                (k * lo, k * hi)
            } else {
                (k * hi, k * lo)
            }
        }
        let driver = scaled((0.0, self.n() as f64), mix.driver);
        let problem = scaled((self.cost.min(), self.cost.max()), mix.problem);
        let e = self.extra.map_or(0.0, |e| e.norm_bound()) * mix.extra.abs();
        (driver.0 + problem.0 - e, driver.1 + problem.1 + e)
    }

    /// `y = (mix) x`, overwriting `y`.
    pub fn apply_mix(&self, mix: Mix, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let extra = self.extra.filter(|_| mix.extra != 0.0);
        let kernel = |base: usize, out: &mut [C64]| {
            apply_block(self.n(), mix, self.cost.values(), extra, x, base, out)
        };
        let len = y.len();
        if len >= PAR_THRESHOLD {
            use rayon::prelude::*;
            y.par_chunks_mut(BLOCK)
                .enumerate()
                .for_each(|(b, out)| kernel(b * BLOCK, out));
        } else {
            for (b, out) in y.chunks_mut(BLOCK.min(len)).enumerate() {
                kernel(b * BLOCK.min(len), out);
            }
        }
    }

    pub fn apply_mix_state(&self, mix: Mix, state: &StateVector) -> Result<StateVector> {
        state.check_dim(self.dim())?;
        let mut out = StateVector::zeros(self.n());
        self.apply_mix(mix, state.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `H(s)|state>`.
    pub fn apply(&self, s: f64, state: &StateVector) -> Result<StateVector> {
        if !(0.0..=1.0).contains(&s) {
            return Err(QaaError::invalid(format!("s = {s} outside [0, 1]")));
        }
        self.apply_mix_state(self.mix_at(s), state)
    }
}

/// Computes one aligned block of `y = (mix) x`. `out` covers indices
/// `base..base + out.len()`, with `out.len()` a power of two dividing `base`.
fn apply_block(
    n: usize,
    mix: Mix,
    cost: &[f64],
    extra: Option<&ExtraHamiltonian>,
    x: &[C64],
    base: usize,
    out: &mut [C64],
) {
    let len = out.len();
    let diag = mix.driver * n as f64 / 2.0;
    let xs = &x[base..base + len];
    let cs = &cost[base..base + len];
    for ((o, a), f) in out.iter_mut().zip(xs).zip(cs) {
        *o = a * (diag + mix.problem * f);
    }
    if mix.driver != 0.0 {
        let hop = -mix.driver / 2.0;
        for q in 0..n {
            let bit = 1usize << q;
            if bit >= len {
                let src = &x[(base ^ bit)..(base ^ bit) + len];
                for (o, a) in out.iter_mut().zip(src) {
                    *o += a * hop;
                }
            } else {
                // Pairs of half-blocks swap under the flip of bit q.
                for (o, a) in out.chunks_exact_mut(2 * bit).zip(xs.chunks_exact(2 * bit)) {
                    let (o_lo, o_hi) = o.split_at_mut(bit);
                    let (a_lo, a_hi) = a.split_at(bit);
                    for (y, x) in o_lo.iter_mut().zip(a_hi) {
                        *y += x * hop;
                    }
                    for (y, x) in o_hi.iter_mut().zip(a_lo) {
                        *y += x * hop;
                    }
                }
            }
        }
    }
    if let Some(extra) = extra {
        let w = mix.extra;
        if let Some(d) = &extra.diagonal {
            for ((o, a), v) in out.iter_mut().zip(xs).zip(&d[base..base + len]) {
                *o += a * (w * v);
            }
        }
        for term in extra.terms.iter().filter(|t| t.has_off) {
            let q = (term.var_a, term.var_b);
            if term.real {
                apply_offdiagonal(q, term.off.map(|r| r.map(|v| v.re * w)), x, base, out);
            } else {
                apply_offdiagonal(q, term.off.map(|r| r.map(|v| v * w)), x, base, out);
            }
        }
    }
}

const OTHERS: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Adds `w` times the off-diagonal part of one term. Basis states are
/// visited in groups `{z, z|A, z|B, z|A|B}` so that the inner loops run over
/// contiguous index ranges.
fn apply_offdiagonal<T>(
    qubits: (usize, usize),
    m: [[T; 4]; 4],
    x: &[C64],
    base: usize,
    out: &mut [C64],
) where
    T: Copy + PartialEq + Default + Mul<C64, Output = C64>,
{
    let len = out.len();
    let (ba, bb) = (1usize << qubits.0, 1usize << qubits.1);
    // Row `l` of the off-diagonal part applied to the group `v`.
    let row = |l: usize, v: [C64; 4]| {
        let [p, q, r] = OTHERS[l];
        m[l][p] * v[p] + m[l][q] * v[q] + m[l][r] * v[r]
    };
    if bb < len {
        for (o, a) in out
            .chunks_exact_mut(2 * bb)
            .zip(x[base..base + len].chunks_exact(2 * bb))
        {
            let (o_lo, o_hi) = o.split_at_mut(bb);
            let (a_lo, a_hi) = a.split_at(bb);
            let groups = o_lo
                .chunks_exact_mut(2 * ba)
                .zip(o_hi.chunks_exact_mut(2 * ba))
                .zip(a_lo.chunks_exact(2 * ba).zip(a_hi.chunks_exact(2 * ba)));
            for ((o0, o1), (a0, a1)) in groups {
                let (o00, o01) = o0.split_at_mut(ba);
                let (o10, o11) = o1.split_at_mut(ba);
                let (a00, a01) = a0.split_at(ba);
                let (a10, a11) = a1.split_at(ba);
                for k in 0..ba {
                    let v = [a00[k], a01[k], a10[k], a11[k]];
                    o00[k] += row(0, v);
                    o01[k] += row(1, v);
                    o10[k] += row(2, v);
                    o11[k] += row(3, v);
                }
            }
        }
    } else if ba < len {
        // Bit b is fixed inside the block; its partners live in another block.
        let (own, far) = (
            2 * usize::from(base & bb != 0),
            2 * usize::from(base & bb == 0),
        );
        let (r0, r1) = (m[own], m[own + 1]);
        let other = base ^ bb;
        let chunks = out
            .chunks_exact_mut(2 * ba)
            .zip(x[base..base + len].chunks_exact(2 * ba))
            .zip(x[other..other + len].chunks_exact(2 * ba));
        for ((o, a), f) in chunks {
            let (o0, o1) = o.split_at_mut(ba);
            let (a0, a1) = a.split_at(ba);
            let (f0, f1) = f.split_at(ba);
            for k in 0..ba {
                o0[k] += r0[own + 1] * a1[k] + r0[far] * f0[k] + r0[far + 1] * f1[k];
                o1[k] += r1[own] * a0[k] + r1[far] * f0[k] + r1[far + 1] * f1[k];
            }
        }
    } else {
        let l = usize::from(base & ba != 0) | usize::from(base & bb != 0) << 1;
        let rest = base & !(ba | bb);
        for (c, pat) in [0, ba, bb, ba | bb].into_iter().enumerate() {
            let coef = m[l][c];
            if coef == T::default() {
                continue;
            }
            let src = &x[rest | pat..(rest | pat) + len];
            for (o, a) in out.iter_mut().zip(src) {
                *o += coef * *a;
            }
        }
    }
}

fn zero_cost(n: usize) -> CostVector {
    CostVector::from_values(n, vec![0.0; 1 << n]).expect("valid zero cost")
}

/// `H_B|state>`.
pub fn apply_hb(state: &StateVector) -> StateVector {
    let cost = zero_cost(state.n());
    let path = HamiltonianPath::new(&cost, None).expect("consistent sizes");
    let mut out = StateVector::zeros(state.n());
    path.apply_mix(
        Mix {
            driver: 1.0,
            extra: 0.0,
            problem: 0.0,
        },
        state.amplitudes(),
        out.amplitudes_mut(),
    );
    out
}

/// `H_P|state>`.
pub fn apply_hp(cost: &CostVector, state: &StateVector) -> Result<StateVector> {
    state.check_dim(cost.len())?;
    let amps = state
        .amplitudes()
        .iter()
        .zip(cost.values())
        .map(|(a, f)| a * f)
        .collect();
    StateVector::from_amplitudes(state.n(), amps)
}

/// `H_E|state>`.
pub fn apply_extra(extra: &ExtraHamiltonian, state: &StateVector) -> Result<StateVector> {
    state.check_dim(1 << extra.n())?;
    let cost = zero_cost(extra.n());
    let path = HamiltonianPath::new(&cost, Some(extra))?;
    path.apply_mix_state(
        Mix {
            driver: 0.0,
            extra: 1.0,
            problem: 0.0,
        },
        state,
    )
}

/// `H(s)|state>` for a schedule, cost and `s` in `[0, 1]`.
pub fn apply_ht(
    schedule: &Schedule,
    cost: &CostVector,
    s: f64,
    state: &StateVector,
) -> Result<StateVector> {
    schedule.path(cost)?.apply(s, state)
}
