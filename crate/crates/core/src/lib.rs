//! Simulation of the quantum adiabatic algorithm on small MAX 2-SAT
//! instances, with three strategies for boosting the success probability on
//! hard instances: running faster, starting from an excited state, and
//! randomly changing the interpolation path.
//!
//! Qubit `i` is bit `i` of a basis-state index. Energies use ħ = 1.

pub mod chebyshev;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod meanfield;
pub mod pipeline;
pub mod sat;
pub mod seed;
pub mod spectrum;
pub mod state;
pub mod strategies;

pub use error::{QaaError, Result};
pub use evolution::{evolve, EvolutionResult, IntegratorConfig, ObservationPlan};
pub use hamiltonian::{Category, ExtraHamiltonian, HamiltonianPath, Schedule};
pub use sat::{Clause, CostVector, Instance};
pub use spectrum::{gap_scan, lowest_eigenpairs, GapScanConfig};
pub use state::{excited_state, initial_state, StateVector, C64};
