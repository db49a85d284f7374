//! MAX 2-SAT instances and other diagonal cost functions.
//!
//! Basis-state convention used throughout the crate: qubit `i` is bit `i` of
//! the basis-state index, qubit 0 being the least-significant bit. Bit value
//! 1 means the variable is true. Bit strings are rendered with character `i`
//! holding qubit `i`, so `"100"` is index 1.

use std::fmt;
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QaaError, Result};
use crate::seed::rng_from_seed;

/// Version tag written into every instance file.
pub const INSTANCE_FORMAT_VERSION: u32 = 1;

/// Default ceiling for any single dense `2^n` array.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// Largest supported qubit count; indices are `u64` and arrays `Vec`-backed.
pub const MAX_QUBITS: usize = 30;

/// A two-literal disjunction, violated iff both literals are false.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(
    from = "(usize, usize, bool, bool)",
    into = "(usize, usize, bool, bool)"
)]
pub struct Clause {
    pub var_a: usize,
    pub var_b: usize,
    pub neg_a: bool,
    pub neg_b: bool,
}

impl From<(usize, usize, bool, bool)> for Clause {
    fn from((var_a, var_b, neg_a, neg_b): (usize, usize, bool, bool)) -> Self {
        Clause {
            var_a,
            var_b,
            neg_a,
            neg_b,
        }
    }
}

impl From<Clause> for (usize, usize, bool, bool) {
    fn from(c: Clause) -> Self {
        (c.var_a, c.var_b, c.neg_a, c.neg_b)
    }
}

impl Clause {
    pub fn new(var_a: usize, var_b: usize, neg_a: bool, neg_b: bool) -> Self {
        Clause {
            var_a,
            var_b,
            neg_a,
            neg_b,
        }
    }

    /// Same clause with the lower variable first.
    pub fn canonical(self) -> Self {
        if (self.var_a, self.neg_a) <= (self.var_b, self.neg_b) {
            self
        } else {
            Clause::new(self.var_b, self.var_a, self.neg_b, self.neg_a)
        }
    }

    /// `(mask, pattern)` such that the clause is violated by `z` iff
    /// `z & mask == pattern`.
    #[inline]
    pub fn violation_pattern(&self) -> (u64, u64) {
        let a = 1u64 << self.var_a;
        let b = 1u64 << self.var_b;
        let pattern = if self.neg_a { a } else { 0 } | if self.neg_b { b } else { 0 };
        (a | b, pattern)
    }

    #[inline]
    pub fn is_violated_by(&self, z: u64) -> bool {
        let (mask, pattern) = self.violation_pattern();
        z & mask == pattern
    }

    /// The clause with both literal signs flipped.
    pub fn negated_literals(self) -> Self {
        Clause::new(self.var_a, self.var_b, !self.neg_a, !self.neg_b)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = |v: usize, neg: bool| format!("{}x{}", if neg { "¬" } else { "" }, v);
        write!(
            f,
            "({} ∨ {})",
            lit(self.var_a, self.neg_a),
            lit(self.var_b, self.neg_b)
        )
    }
}

/// How the diagonal cost `f(z)` is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CostKind {
    /// Number of violated clauses.
    Max2Sat,
    /// Cost 0 on the marked index, 1 everywhere else.
    GroverMarked(u64),
    /// Arbitrary table indexed by basis state.
    ExplicitDiagonal(Vec<f64>),
}

/// Certified minimizer of the cost function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// Lowest-index minimizing basis state.
    pub w: u64,
    pub cost_min: f64,
    pub multiplicity: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    n: usize,
    clauses: Vec<Clause>,
    cost_kind: CostKind,
    optimum: Option<Optimum>,
    seed: Option<u64>,
    patterns: Vec<(u64, u64)>,
}

/// Dense diagonal of `H_P`: `values[z] = f(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVector {
    n: usize,
    values: Vec<f64>,
    min: f64,
    max: f64,
}

impl CostVector {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        check_qubits(n, 0)?;
        if values.len() != 1usize << n {
            return Err(QaaError::DimensionMismatch {
                expected: 1 << n,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QaaError::NonFinite("cost vector"));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(CostVector {
            n,
            values,
            min,
            max,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

fn check_qubits(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(QaaError::invalid(format!(
            "need at least {min} qubits, got {n}"
        )));
    }
    if n > MAX_QUBITS {
        return Err(QaaError::invalid(format!(
            "{n} qubits exceeds the supported maximum of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Number of distinct canonical clauses on `n` variables.
pub fn canonical_clause_count(n: usize) -> usize {
    if n < 2 {
        0
    } else {
        4 * n * (n - 1) / 2
    }
}

/// The `index`-th canonical clause in lexicographic order of
/// `(var_a, var_b, neg_a, neg_b)`.
fn canonical_clause_at(n: usize, index: usize) -> Clause {
    let pair = index / 4;
    let signs = index % 4;
    // Walk the upper triangle row by row.
    let mut a = 0;
    let mut remaining = pair;
    while remaining >= n - 1 - a {
        remaining -= n - 1 - a;
        a += 1;
    }
    let b = a + 1 + remaining;
    Clause::new(a, b, signs & 2 != 0, signs & 1 != 0)
}

/// Renders basis index `z` as a string with character `i` = qubit `i`.
pub fn bits_to_string(z: u64, n: usize) -> String {
    (0..n)
        .map(|i| if z >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parses a bit string with character `i` = qubit `i`.
pub fn string_to_bits(s: &str) -> Result<u64> {
    if s.len() > MAX_QUBITS {
        return Err(QaaError::invalid(format!(
            "bit string too long: {} characters",
            s.len()
        )));
    }
    s.chars().enumerate().try_fold(0u64, |acc, (i, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << i),
        other => Err(QaaError::invalid(format!("bit string contains {other:?}"))),
    })
}

/// Basis index of an assignment given as booleans, `z[i]` = qubit `i`.
pub fn assignment_index(z: &[bool]) -> u64 {
    z.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| if b { acc | 1 << i } else { acc })
}

impl Instance {
    /// MAX 2-SAT instance from an arbitrary clause list. Clauses are
    /// canonicalized; duplicates after canonicalization are rejected.
    pub fn max2sat(n: usize, clauses: Vec<Clause>) -> Result<Self> {
        check_qubits(n, 2)?;
        let mut canon = Vec::with_capacity(clauses.len());
        for c in clauses {
            if c.var_a >= n || c.var_b >= n {
                return Err(QaaError::invalid(format!(
                    "clause {c} references a variable >= {n}"
                )));
            }
            if c.var_a == c.var_b {
                return Err(QaaError::invalid(format!(
                    "clause {c} uses the same variable twice"
                )));
            }
            canon.push(c.canonical());
        }
        let mut seen = canon.clone();
        seen.sort_unstable();
        if let Some(dup) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(QaaError::invalid(format!("duplicate clause {}", dup[0])));
        }
        let patterns = canon.iter().map(Clause::violation_pattern).collect();
        Ok(Instance {
            n,
            clauses: canon,
            cost_kind: CostKind::Max2Sat,
            optimum: None,
            seed: None,
            patterns,
        })
    }

    /// Grover search cost: `f(w) = 0`, `f(z) = 1` otherwise.
    pub fn grover(n: usize, w: u64) -> Result<Self> {
        check_qubits(n, 1)?;
        if w >> n != 0 {
            return Err(QaaError::invalid(format!(
                "marked index {w} out of range for {n} qubits"
            )));
        }
        Ok(Instance {
            n,
            clauses: Vec::new(),
            cost_kind: CostKind::GroverMarked(w),
            optimum: None,
            seed: None,
            patterns: Vec::new(),
        })
    }

    /// Cost given as an explicit table of length `2^n`.
    pub fn explicit(n: usize, table: Vec<f64>) -> Result<Self> {
        check_qubits(n, 1)?;
        if table.len() != 1usize << n {
            return Err(QaaError::DimensionMismatch {
                expected: 1 << n,
                actual: table.len(),
            });
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(QaaError::NonFinite("explicit cost table"));
        }
        Ok(Instance {
            n,
            clauses: Vec::new(),
            cost_kind: CostKind::ExplicitDiagonal(table),
            optimum: None,
            seed: None,
            patterns: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn cost_kind(&self) -> &CostKind {
        &self.cost_kind
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Marks the optimum without recomputing it. Use only for values that
    /// came from [`Instance::certify_optimum`].
    pub fn with_optimum(mut self, optimum: Optimum) -> Self {
        self.optimum = Some(optimum);
        self
    }

    /// Distinct unordered variable pairs coupled by at least one clause,
    /// sorted ascending.
    pub fn interaction_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> =
            self.clauses.iter().map(|c| (c.var_a, c.var_b)).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// `f(z)` for a basis index.
    #[inline]
    pub fn cost_at(&self, z: u64) -> f64 {
        match &self.cost_kind {
            CostKind::Max2Sat => self
                .patterns
                .iter()
                .filter(|&&(mask, pattern)| z & mask == pattern)
                .count() as f64,
            CostKind::GroverMarked(w) => {
                if z == *w {
                    0.0
                } else {
                    1.0
                }
            }
            CostKind::ExplicitDiagonal(table) => table[z as usize],
        }
    }

    /// `f(z)` for an assignment with `z[i]` = value of variable `i`.
    pub fn evaluate_cost(&self, z: &[bool]) -> Result<f64> {
        if z.len() != self.n {
            return Err(QaaError::invalid(format!(
                "assignment has {} bits, instance has {}",
                z.len(),
                self.n
            )));
        }
        Ok(self.cost_at(assignment_index(z)))
    }

    pub fn build_cost_vector(&self) -> Result<CostVector> {
        self.build_cost_vector_with_budget(DEFAULT_MEMORY_BUDGET)
    }

    pub fn build_cost_vector_with_budget(&self, budget_bytes: u64) -> Result<CostVector> {
        let required = (std::mem::size_of::<f64>() as u64) << self.n;
        if required > budget_bytes {
            return Err(QaaError::Resource {
                what: format!("cost vector for {} qubits", self.n),
                required_bytes: required,
                budget_bytes,
            });
        }
        let values: Vec<f64> = match &self.cost_kind {
            CostKind::ExplicitDiagonal(table) => table.clone(),
            _ => (0..self.dim())
                .into_par_iter()
                .with_min_len(1 << 12)
                .map(|z| self.cost_at(z as u64))
                .collect(),
        };
        CostVector::from_values(self.n, values)
    }

    /// Exhaustive scan over all `2^n` assignments. Stores and returns the
    /// lowest-index minimizer, the minimum cost and the number of minimizers.
    pub fn certify_optimum(&mut self) -> Result<Optimum> {
        let opt = self.scan_optimum()?;
        self.optimum = Some(opt.clone());
        Ok(opt)
    }

    fn scan_optimum(&self) -> Result<Optimum> {
        const BLOCK: u64 = 1 << 12;
        let dim = self.dim() as u64;
        let blocks = dim.div_ceil(BLOCK);
        // (min, first minimizer, count) per block; merged in block order.
        let partial: Vec<(f64, u64, u64)> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let start = b * BLOCK;
                let end = (start + BLOCK).min(dim);
                let mut best = (f64::INFINITY, start, 0u64);
                for z in start..end {
                    let c = self.cost_at(z);
                    if c < best.0 {
                        best = (c, z, 1);
                    } else if c == best.0 {
                        best.2 += 1;
                    }
                }
                best
            })
            .collect();
        let (cost_min, w, multiplicity) =
            partial.into_iter().fold((f64::INFINITY, 0, 0), |acc, p| {
                match p.0.partial_cmp(&acc.0) {
                    Some(std::cmp::Ordering::Less) => p,
                    Some(std::cmp::Ordering::Equal) => (acc.0, acc.1, acc.2 + p.2),
                    _ => acc,
                }
            });
        if !cost_min.is_finite() {
            return Err(QaaError::NonFinite("cost minimum"));
        }
        Ok(Optimum {
            w,
            cost_min,
            multiplicity,
        })
    }

    /// True iff the cost has exactly one minimizer. Uses the stored optimum
    /// when present.
    pub fn has_unique_optimum(&self) -> Result<bool> {
        let opt = match &self.optimum {
            Some(o) => o.clone(),
            None => self.scan_optimum()?,
        };
        Ok(opt.multiplicity == 1)
    }

    /// The certified unique minimizer, or an error explaining what is missing.
    pub fn target(&self) -> Result<u64> {
        match &self.optimum {
            None => Err(QaaError::invalid(
                "instance optimum is not certified; run certification first",
            )),
            Some(o) if o.multiplicity != 1 => Err(QaaError::invalid(format!(
                "instance has {} optimal assignments; success probability needs a unique one",
                o.multiplicity
            ))),
            Some(o) => Ok(o.w),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)
            .map_err(|e| QaaError::format("instance file", e.to_string()))?;
        file.into_instance()
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| QaaError::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QaaError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Samples `m` pairwise-distinct canonical clauses on `n` variables,
/// uniformly without replacement. Clauses are returned in canonical order.
pub fn generate_instance(n: usize, m: usize, seed: u64) -> Result<Instance> {
    check_qubits(n, 2)?;
    let total = canonical_clause_count(n);
    if m > total {
        return Err(QaaError::invalid(format!(
            "{m} clauses requested but only {total} distinct clauses exist on {n} variables"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut picks = index::sample(&mut rng, total, m).into_vec();
    picks.sort_unstable();
    let clauses = picks
        .into_iter()
        .map(|i| canonical_clause_at(n, i))
        .collect();
    Ok(Instance::max2sat(n, clauses)?.with_seed(seed))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CostKindFile {
    Max2sat,
    GroverMarked { w: String },
    ExplicitDiagonal { table: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct OptimumFile {
    w: String,
    cost_min: f64,
    multiplicity: u64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format_version: u32,
    n: usize,
    cost_kind: CostKindFile,
    clauses: Vec<Clause>,
    optimum: Option<OptimumFile>,
    seed: Option<u64>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            format_version: INSTANCE_FORMAT_VERSION,
            n: inst.n,
            cost_kind: match &inst.cost_kind {
                CostKind::Max2Sat => CostKindFile::Max2sat,
                CostKind::GroverMarked(w) => CostKindFile::GroverMarked {
                    w: bits_to_string(*w, inst.n),
                },
                CostKind::ExplicitDiagonal(t) => {
                    CostKindFile::ExplicitDiagonal { table: t.clone() }
                }
            },
            clauses: inst.clauses.clone(),
            optimum: inst.optimum.as_ref().map(|o| OptimumFile {
                w: bits_to_string(o.w, inst.n),
                cost_min: o.cost_min,
                multiplicity: o.multiplicity,
            }),
            seed: inst.seed,
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance> {
        if self.format_version != INSTANCE_FORMAT_VERSION {
            return Err(QaaError::format(
                "instance file",
                format!("unsupported format_version {}", self.format_version),
            ));
        }
        let n = self.n;
        let parse_w = |s: &str| -> Result<u64> {
            if s.len() != n {
                return Err(QaaError::format(
                    "instance file",
                    format!("bit string {s:?} is not {n} bits"),
                ));
            }
            string_to_bits(s)
        };
        let mut inst = match self.cost_kind {
            CostKindFile::Max2sat => Instance::max2sat(n, self.clauses)?,
            CostKindFile::GroverMarked { w } => {
                if !self.clauses.is_empty() {
                    return Err(QaaError::format(
                        "instance file",
                        "grover cost with clauses",
                    ));
                }
                Instance::grover(n, parse_w(&w)?)?
            }
            CostKindFile::ExplicitDiagonal { table } => {
                if !self.clauses.is_empty() {
                    return Err(QaaError::format(
                        "instance file",
                        "explicit cost with clauses",
                    ));
                }
                Instance::explicit(n, table)?
            }
        };
        inst.seed = self.seed;
        if let Some(o) = self.optimum {
            if o.multiplicity == 0 {
                return Err(QaaError::format(
                    "instance file",
                    "optimum multiplicity is 0",
                ));
            }
            inst.optimum = Some(Optimum {
                w: parse_w(&o.w)?,
                cost_min: o.cost_min,
                multiplicity: o.multiplicity,
            });
        }
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn single_clause_truth_table() {
        let inst = Instance::max2sat(2, vec![Clause::new(0, 1, false, false)]).unwrap();
        assert_eq!(inst.evaluate_cost(&bits("00")).unwrap(), 1.0);
        for z in ["10", "01", "11"] {
            assert_eq!(inst.evaluate_cost(&bits(z)).unwrap(), 0.0);
        }
    }

    #[test]
    fn complementary_clauses_both_satisfied() {
        let inst = Instance::max2sat(
            2,
            vec![
                Clause::new(0, 1, false, false),
                Clause::new(0, 1, true, true),
            ],
        )
        .unwrap();
        // x0 = 0, x1 = 1
        assert_eq!(inst.evaluate_cost(&bits("01")).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let inst = Instance::max2sat(3, vec![Clause::new(0, 2, false, true)]).unwrap();
        assert!(matches!(
            inst.evaluate_cost(&bits("01")),
            Err(QaaError::InvalidArgument(_))
        ));
    }

    #[test]
    fn grover_cost_vector() {
        let inst = Instance::grover(2, 0).unwrap();
        assert_eq!(
            inst.build_cost_vector().unwrap().values(),
            &[0.0, 1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn one_variable_max2sat_is_invalid() {
        assert!(matches!(
            Instance::max2sat(1, vec![]),
            Err(QaaError::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_instance(1, 0, 0),
            Err(QaaError::InvalidArgument(_))
        ));
    }

    #[test]
    fn budget_error_names_bytes() {
        let inst = Instance::grover(10, 3).unwrap();
        match inst.build_cost_vector_with_budget(1024) {
            Err(QaaError::Resource { required_bytes, .. }) => assert_eq!(required_bytes, 8192),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_enumeration_is_complete() {
        for n in 2..7 {
            let all: Vec<Clause> = (0..canonical_clause_count(n))
                .map(|i| canonical_clause_at(n, i))
                .collect();
            let mut sorted = all.clone();
            sorted.sort_unstable();
            assert_eq!(all, sorted, "enumeration is in canonical order");
            sorted.dedup();
            assert_eq!(sorted.len(), all.len());
            assert!(all.iter().all(|c| c.var_a < c.var_b && c.var_b < n));
        }
    }

    #[test]
    fn exhaustive_generation_on_two_variables() {
        let inst = generate_instance(2, 4, 99).unwrap();
        let expected: Vec<Clause> = [(false, false), (false, true), (true, false), (true, true)]
            .iter()
            .map(|&(a, b)| Clause::new(0, 1, a, b))
            .collect();
        assert_eq!(inst.clauses(), expected.as_slice());
        assert!(generate_instance(2, 5, 99).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_instance(20, 60, 12345).unwrap();
        let b = generate_instance(20, 60, 12345).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clauses().len(), 60);
        assert!(a.clauses().iter().all(|c| c.var_a != c.var_b));
        assert_ne!(a, generate_instance(20, 60, 12346).unwrap());
    }

    #[test]
    fn swapped_literal_order_is_one_clause() {
        let dup = Instance::max2sat(
            2,
            vec![
                Clause::new(0, 1, false, true),
                Clause::new(1, 0, true, false),
            ],
        );
        assert!(dup.is_err());
    }

    #[test]
    fn certify_single_clause() {
        let mut inst = Instance::max2sat(2, vec![Clause::new(0, 1, false, false)]).unwrap();
        let opt = inst.certify_optimum().unwrap();
        assert_eq!(opt.cost_min, 0.0);
        assert_eq!(opt.multiplicity, 3);
        assert_eq!(opt.w, 1);
        assert!(!inst.has_unique_optimum().unwrap());
        assert!(inst.target().is_err());
    }

    #[test]
    fn certify_grover() {
        for n in 1..8 {
            let w = (5 * n as u64 + 1) % (1 << n);
            let mut inst = Instance::grover(n, w).unwrap();
            let opt = inst.certify_optimum().unwrap();
            assert_eq!((opt.w, opt.cost_min, opt.multiplicity), (w, 0.0, 1));
            assert!(inst.has_unique_optimum().unwrap());
        }
    }

    #[test]
    fn bit_string_round_trip() {
        assert_eq!(bits_to_string(1, 3), "100");
        assert_eq!(string_to_bits("100").unwrap(), 1);
        assert_eq!(string_to_bits("0011").unwrap(), 12);
        assert!(string_to_bits("0a").is_err());
    }

    #[test]
    fn json_round_trip_all_kinds() {
        let mut a = generate_instance(6, 10, 4).unwrap();
        a.certify_optimum().unwrap();
        let b = Instance::grover(4, 9).unwrap();
        let c = Instance::explicit(2, vec![0.5, -1.25, 3.0, 1e-17]).unwrap();
        for inst in [a, b, c] {
            let back = Instance::from_json(&inst.to_json()).unwrap();
            assert_eq!(back, inst);
            assert_eq!(back.to_json(), inst.to_json());
        }
    }

    #[test]
    fn rejects_future_format_version() {
        let text = Instance::grover(2, 1)
            .unwrap()
            .to_json()
            .replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(
            Instance::from_json(&text),
            Err(QaaError::Format { .. })
        ));
    }
}
