//! Time-dependent Schrödinger evolution `i d|ψ>/dt = H(t/T)|ψ>` (ħ = 1).
//!
//! Each step of length `h` applies the fourth-order commutator-free Magnus
//! propagator
//!
//! ```text
//! U(t + h, t) = exp(-i h (a2 H(t1) + a1 H(t2))) exp(-i h (a1 H(t1) + a2 H(t2)))
//! t1,2 = t + (1/2 ∓ √3/6) h,   a1,2 = 1/4 ± √3/6
//! ```
//!
//! with both exponentials evaluated by a Chebyshev expansion to near machine
//! precision. The scheme is unitary up to the expansion cutoff, so the state
//! is never renormalized and the measured norm drift is a direct quality
//! signal.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::chebyshev::{expm_apply, ChebyshevWorkspace};
use crate::error::{QaaError, Result};
use crate::hamiltonian::{HamiltonianPath, Mix, Schedule};
use crate::sat::CostVector;
use crate::spectrum::{fmt12, lowest_eigenpairs_with, EigenConfig};
use crate::state::{dot, StateVector, C64};

/// Norm drift above which a run is rejected.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

static WORST_DRIFT: AtomicU64 = AtomicU64::new(0);

/// Largest norm drift of any run accepted so far in this process. Drifts are
/// non-negative, so their bit patterns order like the values.
pub fn worst_accepted_drift() -> f64 {
    f64::from_bits(WORST_DRIFT.load(Ordering::Relaxed))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Largest allowed step, in units of time.
    pub base_step: f64,
    /// Step-halving acceptance threshold on `|P(h) - P(h/2)|` and on the
    /// estimated amplitude error of the finer run.
    pub tolerance: f64,
    /// Hard cap on steps per run.
    pub max_steps: usize,
    /// Lower bound on steps for short runs.
    pub min_steps: usize,
    /// Run the step-halving check (and refine until it passes).
    pub check_convergence: bool,
    /// Truncation threshold of the Chebyshev series.
    pub expm_tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            base_step: 1.0,
            tolerance: 1e-6,
            max_steps: 1 << 22,
            min_steps: 8,
            check_convergence: true,
            expm_tolerance: 1e-15,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_step > 0.0 && self.base_step.is_finite()) {
            return Err(QaaError::invalid(format!(
                "base_step must be > 0, got {}",
                self.base_step
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(QaaError::invalid(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_steps == 0 {
            return Err(QaaError::invalid("max_steps must be > 0"));
        }
        Ok(())
    }

    /// Step count for a run of length `total_time` before any refinement.
    pub fn initial_steps(&self, total_time: f64) -> usize {
        ((total_time / self.base_step).ceil() as usize)
            .max(self.min_steps)
            .max(1)
    }

    pub fn without_check(mut self) -> Self {
        self.check_convergence = false;
        self
    }
}

/// What to record along the way.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationPlan {
    /// Number of uniform `s` samples including both ends; 0 disables the
    /// trajectory.
    pub points: usize,
    /// Also compute overlaps with the two lowest instantaneous eigenstates.
    pub overlaps: bool,
    pub eigen: EigenConfig,
}

impl ObservationPlan {
    pub fn none() -> Self {
        ObservationPlan {
            points: 0,
            overlaps: false,
            eigen: EigenConfig::default(),
        }
    }

    pub fn energies(points: usize) -> Self {
        ObservationPlan {
            points,
            ..Self::none()
        }
    }

    /// Energies plus eigenstate overlaps; eigenpairs are solved to the
    /// 1e-8 residual bound.
    pub fn full(points: usize) -> Self {
        ObservationPlan {
            points,
            overlaps: true,
            eigen: EigenConfig::default().with_tol(1e-8),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points == 1 {
            return Err(QaaError::invalid(
                "a trajectory needs at least 2 sample points",
            ));
        }
        Ok(())
    }
}

impl Default for ObservationPlan {
    fn default() -> Self {
        Self::none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub s: f64,
    pub energy_expectation: f64,
    pub overlap_ground: Option<f64>,
    pub overlap_first_excited: Option<f64>,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    /// `|<w|ψ(T)>|^2`.
    pub success_probability: f64,
    /// `| ||ψ(T)|| - ||ψ(0)|| |`.
    pub final_norm_drift: f64,
    /// Steps used by the accepted run.
    pub steps: usize,
    /// Step-halving change of the accepted pair (see `tolerance`), when
    /// checked.
    pub convergence_delta: Option<f64>,
    pub trajectory: Option<Vec<TrajectorySample>>,
    pub final_state: StateVector,
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9; // √3/6
const NODE_1: f64 = 0.5 - SQRT3_6;
const NODE_2: f64 = 0.5 + SQRT3_6;
const WEIGHT_1: f64 = 0.25 + SQRT3_6;
const WEIGHT_2: f64 = 0.25 - SQRT3_6;

/// Steps a state along `H(t/T)` for one schedule and cost.
pub struct Propagator<'a> {
    path: HamiltonianPath<'a>,
    total_time: f64,
    expm_tolerance: f64,
    ws: ChebyshevWorkspace,
    matvecs: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(path: HamiltonianPath<'a>, total_time: f64, expm_tolerance: f64) -> Self {
        Propagator {
            path,
            total_time,
            expm_tolerance,
            ws: ChebyshevWorkspace::default(),
            matvecs: 0,
        }
    }

    /// Operator applications performed so far.
    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    fn mix(&self, t: f64) -> Mix {
        let s = (t / self.total_time).clamp(0.0, 1.0);
        self.path.mix_at(s)
    }

    /// One step from `t` to `t + h`; `h` may be negative.
    pub fn step(&mut self, amps: &mut [C64], t: f64, h: f64) {
        let m1 = self.mix(t + NODE_1 * h);
        let m2 = self.mix(t + NODE_2 * h);
        let first = m1.scaled(WEIGHT_1).add(m2.scaled(WEIGHT_2));
        let second = m1.scaled(WEIGHT_2).add(m2.scaled(WEIGHT_1));
        self.matvecs += expm_apply(
            &self.path,
            first,
            h,
            amps,
            self.expm_tolerance,
            &mut self.ws,
        );
        self.matvecs += expm_apply(
            &self.path,
            second,
            h,
            amps,
            self.expm_tolerance,
            &mut self.ws,
        );
    }

    /// Advances from `t_from` to `t_to` in `steps` equal steps.
    pub fn advance(&mut self, amps: &mut [C64], t_from: f64, t_to: f64, steps: usize) {
        if steps == 0 || t_from == t_to {
            return;
        }
        let h = (t_to - t_from) / steps as f64;
        for j in 0..steps {
            self.step(amps, t_from + j as f64 * h, h);
        }
    }
}

/// Integrates the Schrödinger equation from `initial` over `[0, T]` and
/// reads out the success probability on basis state `target`.
pub fn evolve(
    schedule: &Schedule,
    cost: &CostVector,
    target: u64,
    initial: &StateVector,
    config: &IntegratorConfig,
    observe: &ObservationPlan,
) -> Result<EvolutionResult> {
    config.validate()?;
    observe.validate()?;
    let path = schedule.path(cost)?;
    initial.check_dim(path.dim())?;
    if target as usize >= path.dim() {
        return Err(QaaError::invalid(format!(
            "target index {target} out of range"
        )));
    }
    let total = schedule.total_time;
    if !(total >= 0.0 && total.is_finite()) {
        return Err(QaaError::invalid(format!(
            "total time must be finite and >= 0, got {total}"
        )));
    }
    if total == 0.0 {
        return run(&path, total, target, initial, 0, config, observe);
    }

    let align = observe.points.saturating_sub(1).max(1);
    let mut steps = config.initial_steps(total).next_multiple_of(align);
    if !config.check_convergence {
        return run(&path, total, target, initial, steps, config, observe);
    }
    let mut coarse = run(
        &path,
        total,
        target,
        initial,
        steps,
        config,
        &ObservationPlan::none(),
    )?;
    loop {
        let fine_steps = 2 * steps;
        if fine_steps > config.max_steps {
            return Err(QaaError::NonConvergence {
                achieved_steps: steps,
                max_steps: config.max_steps,
                last_delta: coarse.convergence_delta.unwrap_or(f64::NAN),
            });
        }
        let mut fine = run(&path, total, target, initial, fine_steps, config, observe)?;
        let delta = halving_delta(&coarse, &fine);
        fine.convergence_delta = Some(delta);
        if delta < config.tolerance {
            return Ok(fine);
        }
        coarse = fine;
        steps = fine_steps;
    }
}

/// Change between runs at `h` and `h/2`: the larger of `|dP|` and the error
/// estimate `max |d psi_k| / 15` of the finer run (the scheme is fourth
/// order), so an accepted run is converged in phase as well as in `P`.
fn halving_delta(coarse: &EvolutionResult, fine: &EvolutionResult) -> f64 {
    let amps = coarse
        .final_state
        .amplitudes()
        .iter()
        .zip(fine.final_state.amplitudes())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    (amps / 15.0).max((fine.success_probability - coarse.success_probability).abs())
}

fn run(
    path: &HamiltonianPath<'_>,
    total: f64,
    target: u64,
    initial: &StateVector,
    steps: usize,
    config: &IntegratorConfig,
    observe: &ObservationPlan,
) -> Result<EvolutionResult> {
    let mut state = initial.clone();
    let norm0 = initial.norm();
    let mut prop = Propagator::new(*path, total, config.expm_tolerance);
    let mut trajectory = None;
    if observe.points >= 2 {
        let segments = observe.points - 1;
        let per = steps / segments;
        let mut samples = Vec::with_capacity(observe.points);
        let mut warm: Option<Vec<StateVector>> = None;
        for j in 0..observe.points {
            let s = j as f64 / segments as f64;
            if j > 0 {
                let t0 = total * (j - 1) as f64 / segments as f64;
                let t1 = total * s;
                prop.advance(state.amplitudes_mut(), t0, t1, per);
            }
            samples.push(sample(path, total * s, s, &state, observe, &mut warm)?);
        }
        trajectory = Some(samples);
    } else {
        prop.advance(state.amplitudes_mut(), 0.0, total, steps);
    }
    let drift = (state.norm() - norm0).abs();
    if !drift.is_finite() {
        return Err(QaaError::NonFinite("state vector"));
    }
    if drift > MAX_NORM_DRIFT {
        return Err(QaaError::IntegrationQuality {
            drift,
            limit: MAX_NORM_DRIFT,
        });
    }
    WORST_DRIFT.fetch_max(drift.to_bits(), Ordering::Relaxed);
    Ok(EvolutionResult {
        success_probability: state.probability(target),
        final_norm_drift: drift,
        steps,
        convergence_delta: None,
        trajectory,
        final_state: state,
    })
}

fn sample(
    path: &HamiltonianPath<'_>,
    t: f64,
    s: f64,
    state: &StateVector,
    observe: &ObservationPlan,
    warm: &mut Option<Vec<StateVector>>,
) -> Result<TrajectorySample> {
    let energy = expectation(path, s, state)?.re;
    let (g, e) = if observe.overlaps {
        let slice = lowest_eigenpairs_with(path, s, 2, &observe.eigen, warm.as_deref())?;
        let vecs = slice.eigenvectors.expect("eigenvectors requested");
        let ov = eigenstate_overlaps(state, &vecs)?;
        *warm = Some(vecs);
        (Some(ov[0]), Some(ov[1]))
    } else {
        (None, None)
    };
    Ok(TrajectorySample {
        t,
        s,
        energy_expectation: energy,
        overlap_ground: g,
        overlap_first_excited: e,
        norm: state.norm(),
    })
}

/// `<ψ|H(s)|ψ>` including its (diagnostic) imaginary part.
pub fn expectation(path: &HamiltonianPath<'_>, s: f64, state: &StateVector) -> Result<C64> {
    let h = path.apply(s, state)?;
    Ok(dot(state.amplitudes(), h.amplitudes()))
}

/// Real part of `<ψ|H(s)|ψ>`.
pub fn energy_expectation(
    schedule: &Schedule,
    cost: &CostVector,
    s: f64,
    state: &StateVector,
) -> Result<f64> {
    Ok(expectation(&schedule.path(cost)?, s, state)?.re)
}

/// `|<φ_j|ψ>|^2` for each supplied eigenstate.
pub fn eigenstate_overlaps(state: &StateVector, eigenstates: &[StateVector]) -> Result<Vec<f64>> {
    eigenstates
        .iter()
        .map(|e| Ok(e.inner(state)?.norm_sqr()))
        .collect()
}

pub const TRAJECTORY_HEADER: &str =
    "t,s,energy_expectation,overlap_ground,overlap_first_excited,norm";

/// One header row, then one row per sample with 12 significant digits.
/// Overlap columns are left empty when they were not computed.
pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    samples: &[TrajectorySample],
) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    let opt = |v: Option<f64>| v.map(fmt12).unwrap_or_default();
    for r in samples {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt12(r.t),
            fmt12(r.s),
            fmt12(r.energy_expectation),
            opt(r.overlap_ground),
            opt(r.overlap_first_excited),
            fmt12(r.norm)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::Instance;
    use crate::state::{excited_state, initial_state};

    fn grover(n: usize) -> (Instance, CostVector) {
        let mut inst = Instance::grover(n, 5 % (1 << n)).unwrap();
        inst.certify_optimum().unwrap();
        let cost = inst.build_cost_vector().unwrap();
        (inst, cost)
    }

    #[test]
    fn zero_time_is_overlap_of_initial_state() {
        let (inst, cost) = grover(4);
        let sched = Schedule::new(0.0).unwrap();
        let w = inst.target().unwrap();
        let r = evolve(
            &sched,
            &cost,
            w,
            &initial_state(4).unwrap(),
            &IntegratorConfig::default(),
            &ObservationPlan::none(),
        )
        .unwrap();
        assert!((r.success_probability - 1.0 / 16.0).abs() < 1e-16);
        let r = evolve(
            &sched,
            &cost,
            w,
            &excited_state(4, 2).unwrap(),
            &IntegratorConfig::default(),
            &ObservationPlan::none(),
        )
        .unwrap();
        assert!((r.success_probability - 1.0 / 16.0).abs() < 1e-16);
    }

    #[test]
    fn single_qubit_adiabatic_limit() {
        let cost = CostVector::from_values(1, vec![0.0, 1.0]).unwrap();
        let sched = Schedule::new(50.0).unwrap();
        let r = evolve(
            &sched,
            &cost,
            0,
            &initial_state(1).unwrap(),
            &IntegratorConfig::default(),
            &ObservationPlan::none(),
        )
        .unwrap();
        assert!(
            r.success_probability > 0.99,
            "P = {}",
            r.success_probability
        );
        assert!(r.final_norm_drift < 1e-12);
    }

    #[test]
    fn trajectory_shape() {
        let (inst, cost) = grover(3);
        let sched = Schedule::new(5.0).unwrap();
        let r = evolve(
            &sched,
            &cost,
            inst.target().unwrap(),
            &initial_state(3).unwrap(),
            &IntegratorConfig::default(),
            &ObservationPlan::full(11),
        )
        .unwrap();
        let traj = r.trajectory.unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.windows(2).all(|w| w[1].t > w[0].t));
        assert!(traj[0].energy_expectation.abs() < 1e-12);
        assert!((traj[0].overlap_ground.unwrap() - 1.0).abs() < 1e-10);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert!(text.starts_with(TRAJECTORY_HEADER));
    }

    #[test]
    fn energies_at_start() {
        let (_, cost) = grover(4);
        let sched = Schedule::new(1.0).unwrap();
        let e0 = energy_expectation(&sched, &cost, 0.0, &initial_state(4).unwrap()).unwrap();
        let e1 = energy_expectation(&sched, &cost, 0.0, &excited_state(4, 1).unwrap()).unwrap();
        assert!(e0.abs() < 1e-14);
        assert!((e1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn overlaps_trivial_cases() {
        let a = StateVector::basis(2, 0);
        let b = StateVector::basis(2, 1);
        assert_eq!(
            eigenstate_overlaps(&a, &[a.clone(), b.clone()]).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            eigenstate_overlaps(&StateVector::basis(2, 3), &[a, b]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn bad_inputs() {
        let (_, cost) = grover(3);
        let sched = Schedule::new(1.0).unwrap();
        let cfg = IntegratorConfig {
            base_step: 0.0,
            ..Default::default()
        };
        assert!(evolve(
            &sched,
            &cost,
            0,
            &initial_state(3).unwrap(),
            &cfg,
            &ObservationPlan::none()
        )
        .is_err());
        assert!(evolve(
            &sched,
            &cost,
            0,
            &initial_state(2).unwrap(),
            &IntegratorConfig::default(),
            &ObservationPlan::none()
        )
        .is_err());
        assert!(Schedule::new(-1.0).is_err());
    }

    #[test]
    fn step_cap_reports_non_convergence() {
        let (inst, cost) = grover(3);
        let sched = Schedule::new(10.0).unwrap();
        let cfg = IntegratorConfig {
            base_step: 5.0,
            tolerance: 1e-15,
            max_steps: 8,
            min_steps: 1,
            ..Default::default()
        };
        let err = evolve(
            &sched,
            &cost,
            inst.target().unwrap(),
            &initial_state(3).unwrap(),
            &cfg,
            &ObservationPlan::none(),
        )
        .unwrap_err();
        assert!(matches!(err, QaaError::NonConvergence { .. }), "{err}");
    }
}
