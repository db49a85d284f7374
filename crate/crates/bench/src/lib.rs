//! Fixtures shared by the benchmarks.

use qaa_core::hamiltonian::{sample_extra, Category};
use qaa_core::sat::generate_instance;
use qaa_core::{CostVector, ExtraHamiltonian, Instance};

/// Certified random instance with clause density 3 and its dense cost.
pub fn fixture(n: usize, seed: u64) -> (Instance, CostVector, ExtraHamiltonian) {
    let mut inst = generate_instance(n, 3 * n, seed).expect("valid size");
    inst.certify_optimum().expect("certify");
    let cost = inst.build_cost_vector().expect("cost");
    let extra = sample_extra(&inst, Category::Complex, seed).expect("extra");
    (inst, cost, extra)
}
