//! Batch drivers for the three boosting strategies (short total time,
//! excited initial states, random path change) and their statistics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QaaError, Result};
use crate::evolution::{evolve, IntegratorConfig, ObservationPlan};
use crate::hamiltonian::{
    complete_graph, sample_extra_on_edges, sample_extra_with, Category, Schedule, TermGranularity,
};
use crate::sat::{CostVector, Instance};
use crate::seed::{child_seed, streams};
use crate::spectrum::{fmt12, gap_scan, GapScanConfig};
use crate::state::{excited_state, initial_state};

/// Reference total time for improvement ratios.
pub const T_REF: f64 = 100.0;

/// Integer total times `1..=40`.
pub fn default_time_grid() -> Vec<f64> {
    (1..=40).map(f64::from).collect()
}

/// Certified instance together with its dense cost and target index.
pub struct Problem<'a> {
    pub instance: &'a Instance,
    pub cost: &'a CostVector,
    pub target: u64,
}

impl<'a> Problem<'a> {
    pub fn new(instance: &'a Instance, cost: &'a CostVector) -> Result<Self> {
        if cost.n() != instance.n() {
            return Err(QaaError::DimensionMismatch {
                expected: instance.dim(),
                actual: cost.len(),
            });
        }
        Ok(Problem {
            instance,
            cost,
            target: instance.target()?,
        })
    }

    fn success(
        &self,
        schedule: &Schedule,
        init: Init,
        integrator: &IntegratorConfig,
    ) -> Result<f64> {
        let n = self.instance.n();
        let initial = match init {
            Init::Ground => initial_state(n)?,
            Init::Excited(k) => excited_state(n, k)?,
        };
        Ok(evolve(
            schedule,
            self.cost,
            self.target,
            &initial,
            integrator,
            &ObservationPlan::none(),
        )?
        .success_probability)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    Ground,
    Excited(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub integrator: IntegratorConfig,
    /// Rounds of local bisection around the grid argmax (0 disables).
    pub refine_rounds: usize,
    /// Reference time for the improvement ratio; `None` skips it.
    pub t_ref: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            integrator: IntegratorConfig::default(),
            refine_rounds: 0,
            t_ref: Some(T_REF),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub total_time: f64,
    pub success_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// One point per requested grid value, in grid order.
    pub grid: Vec<SweepPoint>,
    /// Extra points evaluated during refinement.
    pub refined: Vec<SweepPoint>,
    pub t_max: f64,
    pub p_at_tmax: f64,
    pub t_ref: Option<f64>,
    pub p_ref: Option<f64>,
    /// `P(T_max) / P(T_ref)`.
    pub improvement_vs_ref: Option<f64>,
}

impl SweepResult {
    /// `P(a) / P(b)` for two grid (or refined) times.
    pub fn ratio(&self, a: f64, b: f64) -> Option<f64> {
        let find = |t: f64| {
            self.grid
                .iter()
                .chain(&self.refined)
                .chain(
                    self.t_ref
                        .zip(self.p_ref)
                        .map(|(t, p)| SweepPoint {
                            total_time: t,
                            success_probability: p,
                        })
                        .as_ref(),
                )
                .find(|p| p.total_time == t)
                .map(|p| p.success_probability)
        };
        Some(find(a)? / find(b)?)
    }
}

/// Evaluates `P(T)` over a grid of total times, optionally refining the
/// maximum, and compares it with `P(T_ref)`.
pub fn sweep_total_time(
    problem: &Problem<'_>,
    extra: Option<&crate::hamiltonian::ExtraHamiltonian>,
    grid: &[f64],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(QaaError::invalid("time grid is empty"));
    }
    if let Some(t) = grid.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(QaaError::invalid(format!(
            "grid times must be finite and >= 0, got {t}"
        )));
    }
    let run = |t: f64| -> Result<SweepPoint> {
        let mut sched = Schedule::new(t)?;
        if let Some(e) = extra {
            sched = sched.with_extra(e.clone());
        }
        Ok(SweepPoint {
            total_time: t,
            success_probability: problem.success(&sched, Init::Ground, &cfg.integrator)?,
        })
    };
    let points: Vec<SweepPoint> = grid.par_iter().map(|&t| run(t)).collect::<Result<_>>()?;

    let mut best = argmax(&points);
    let mut refined = Vec::new();
    if cfg.refine_rounds > 0 && points.len() > 1 {
        let mut sorted: Vec<f64> = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pos = sorted.partition_point(|&t| t < best.total_time);
        let mut lo = sorted[pos.saturating_sub(1)];
        let mut hi = sorted[(pos + 1).min(sorted.len() - 1)];
        for _ in 0..cfg.refine_rounds {
            let left = 0.5 * (lo + best.total_time);
            let right = 0.5 * (best.total_time + hi);
            let probes: Vec<f64> = [left, right]
                .into_iter()
                .filter(|t| {
                    *t != best.total_time
                        && !points.iter().chain(&refined).any(|p| p.total_time == *t)
                })
                .collect();
            let new: Vec<SweepPoint> = probes.par_iter().map(|&t| run(t)).collect::<Result<_>>()?;
            refined.extend(new);
            let prev = best.total_time;
            best = argmax_with(best, &refined);
            if best.total_time == prev {
                lo = left;
                hi = right;
            } else if best.total_time < prev {
                hi = prev;
            } else {
                lo = prev;
            }
        }
    }

    let p_ref = match cfg.t_ref {
        Some(t) => Some(match points.iter().find(|p| p.total_time == t) {
            Some(p) => p.success_probability,
            None => run(t)?.success_probability,
        }),
        None => None,
    };
    Ok(SweepResult {
        t_max: best.total_time,
        p_at_tmax: best.success_probability,
        improvement_vs_ref: p_ref.map(|p| best.success_probability / p),
        t_ref: cfg.t_ref,
        p_ref,
        grid: points,
        refined,
    })
}

/// First point with the largest probability.
fn argmax(points: &[SweepPoint]) -> SweepPoint {
    argmax_with(points[0], &points[1..])
}

fn argmax_with(start: SweepPoint, rest: &[SweepPoint]) -> SweepPoint {
    rest.iter().fold(start, |b, p| {
        if p.success_probability > b.success_probability {
            *p
        } else {
            b
        }
    })
}

pub const SWEEP_HEADER: &str = "T,success_probability";

pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{}",
            fmt12(p.total_time),
            fmt12(p.success_probability)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitedScanResult {
    pub total_time: f64,
    /// Success from `excited_state(n, k)` for each `k`.
    pub per_qubit: Vec<f64>,
    pub average: f64,
    pub maximum: f64,
    /// Success from the uniform superposition at the same `T`.
    pub ground_start: f64,
}

impl ExcitedScanResult {
    /// `P(ground) + sum_k P(excited_k)`; bounded by 1 for a unitary evolution.
    pub fn total(&self) -> f64 {
        self.ground_start + self.per_qubit.iter().sum::<f64>()
    }
}

/// Runs the `n` excited-state starts (and the ground start) at one `T`.
pub fn excited_scan(
    problem: &Problem<'_>,
    extra: Option<&crate::hamiltonian::ExtraHamiltonian>,
    total_time: f64,
    integrator: &IntegratorConfig,
) -> Result<ExcitedScanResult> {
    let n = problem.instance.n();
    let mut sched = Schedule::new(total_time)?;
    if let Some(e) = extra {
        sched = sched.with_extra(e.clone());
    }
    let inits: Vec<Init> = std::iter::once(Init::Ground)
        .chain((0..n).map(Init::Excited))
        .collect();
    let probs: Vec<f64> = inits
        .par_iter()
        .map(|&init| problem.success(&sched, init, integrator))
        .collect::<Result<_>>()?;
    let per_qubit = probs[1..].to_vec();
    Ok(ExcitedScanResult {
        total_time,
        average: per_qubit.iter().sum::<f64>() / n as f64,
        maximum: per_qubit.iter().copied().fold(0.0, f64::max),
        ground_start: probs[0],
        per_qubit,
    })
}

pub const EXCITED_HEADER: &str = "k,success_probability";

pub fn write_excited_csv<W: Write>(mut out: W, r: &ExcitedScanResult) -> std::io::Result<()> {
    writeln!(out, "{EXCITED_HEADER}")?;
    writeln!(out, "ground,{}", fmt12(r.ground_start))?;
    for (k, p) in r.per_qubit.iter().enumerate() {
        writeln!(out, "{k},{}", fmt12(*p))?;
    }
    Ok(())
}

/// `chi = (prod_i (1 - P_i))^(1/N)`, evaluated as `exp(mean ln(1 - P_i))`.
/// Any trial with `P = 1` gives `chi = 0`.
pub fn chi(successes: &[f64]) -> Result<f64> {
    if successes.is_empty() {
        return Err(QaaError::invalid("chi needs at least one trial"));
    }
    if let Some(p) = successes.iter().find(|p| !p.is_finite()) {
        return Err(QaaError::invalid(format!(
            "success probability {p} is not finite"
        )));
    }
    let mut sum = 0.0;
    for p in successes {
        let fail = (1.0 - p).clamp(0.0, 1.0);
        if fail == 0.0 {
            return Ok(0.0);
        }
        sum += fail.ln();
    }
    Ok((sum / successes.len() as f64).exp())
}

/// Which trials of a campaign get a gap scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapSelection {
    None,
    All,
    /// The most successful trial plus one trial picked with this seed.
    BestAndRandom(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignConfig {
    pub trials: usize,
    pub total_time: f64,
    pub seed: u64,
    pub granularity: TermGranularity,
    pub gaps: GapSelection,
    pub integrator: IntegratorConfig,
    pub gap_scan: GapScanConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            trials: 25,
            total_time: T_REF,
            seed: 0,
            granularity: TermGranularity::PerEdge,
            gaps: GapSelection::None,
            integrator: IntegratorConfig::default(),
            gap_scan: GapScanConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub success_probability: f64,
    pub g_min: Option<f64>,
    pub s_at_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathChangeCampaign {
    pub instance_id: String,
    pub category: Category,
    pub total_time: f64,
    pub master_seed: u64,
    pub trials: Vec<Trial>,
    pub chi: f64,
    pub effective_success: f64,
}

impl PathChangeCampaign {
    /// Builds a campaign record from already known trial outcomes.
    pub fn from_trials(
        instance_id: impl Into<String>,
        category: Category,
        total_time: f64,
        master_seed: u64,
        trials: Vec<Trial>,
    ) -> Result<Self> {
        let successes: Vec<f64> = trials.iter().map(|t| t.success_probability).collect();
        let chi = chi(&successes)?;
        Ok(PathChangeCampaign {
            instance_id: instance_id.into(),
            category,
            total_time,
            master_seed,
            trials,
            chi,
            effective_success: 1.0 - chi,
        })
    }

    /// Index of the first trial with the largest success.
    pub fn best_trial(&self) -> Option<usize> {
        (0..self.trials.len()).reduce(|b, i| {
            if self.trials[i].success_probability > self.trials[b].success_probability {
                i
            } else {
                b
            }
        })
    }

    /// Trial drawn with `child_seed(seed, SELECTION + c)`, `c` the position
    /// of the category in [`Category::ALL`]. Campaign gap scans and the gap
    /// table use the same draw.
    pub fn random_trial(&self, seed: u64) -> Option<usize> {
        if self.trials.is_empty() {
            return None;
        }
        let salt = Category::ALL
            .iter()
            .position(|c| *c == self.category)
            .expect("known category") as u64;
        Some((child_seed(seed, streams::SELECTION + salt) % self.trials.len() as u64) as usize)
    }

    /// Interquartile range of `ln(1 - P)` over trials.
    pub fn log_failure_iqr(&self) -> f64 {
        let mut v: Vec<f64> = self
            .trials
            .iter()
            .map(|t| {
                (1.0 - t.success_probability)
                    .clamp(f64::MIN_POSITIVE, 1.0)
                    .ln()
            })
            .collect();
        v.sort_by(f64::total_cmp);
        quantile(&v, 0.75) - quantile(&v, 0.25)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Edges used for path-change terms: the interaction graph of a clause
/// instance, or the complete graph for costs without clauses.
pub fn campaign_edges(instance: &Instance) -> Vec<(usize, usize)> {
    if instance.clauses().is_empty() {
        complete_graph(instance.n())
    } else {
        instance.interaction_edges()
    }
}

/// Samples and evolves `trials` independent path changes of one category.
///
/// Trial `i` uses seed `child_seed(master, TRIALS + i)`. Trials run in
/// parallel and are aggregated in index order. If a trial fails the campaign
/// is aborted; the error carries every trial before the failing index.
pub fn path_change_campaign(
    problem: &Problem<'_>,
    instance_id: &str,
    category: Category,
    cfg: &CampaignConfig,
) -> Result<PathChangeCampaign> {
    if cfg.trials == 0 {
        return Err(QaaError::invalid("a campaign needs at least one trial"));
    }
    let edges = campaign_edges(problem.instance);
    let sample = |seed: u64| {
        if problem.instance.clauses().is_empty() || cfg.granularity == TermGranularity::PerEdge {
            sample_extra_on_edges(problem.instance.n(), &edges, category, seed)
        } else {
            sample_extra_with(problem.instance, category, seed, cfg.granularity)
        }
    };
    let run_trial = |i: usize| -> Result<(Trial, Option<crate::hamiltonian::ExtraHamiltonian>)> {
        let seed = child_seed(cfg.seed, streams::TRIALS + i as u64);
        let extra = sample(seed)?;
        let sched = Schedule::new(cfg.total_time)?.with_extra(extra);
        let p = problem.success(&sched, Init::Ground, &cfg.integrator)?;
        let mut trial = Trial {
            index: i,
            seed,
            success_probability: p,
            g_min: None,
            s_at_min: None,
        };
        let keep = sched.extra;
        if cfg.gaps == GapSelection::All {
            if let Some(e) = keep.as_ref() {
                scan_into(problem, e, &cfg.gap_scan, &mut trial)?;
            }
        }
        Ok((trial, keep))
    };
    let outcomes: Vec<Result<(Trial, Option<crate::hamiltonian::ExtraHamiltonian>)>> =
        (0..cfg.trials).into_par_iter().map(run_trial).collect();

    let mut trials = Vec::with_capacity(cfg.trials);
    let mut extras = Vec::with_capacity(cfg.trials);
    for outcome in outcomes {
        match outcome {
            Ok((t, e)) => {
                trials.push(t);
                extras.push(e);
            }
            Err(source) => {
                let partial = PathChangeCampaign::from_trials(
                    instance_id,
                    category,
                    cfg.total_time,
                    cfg.seed,
                    trials.clone(),
                )
                .unwrap_or(PathChangeCampaign {
                    instance_id: instance_id.to_string(),
                    category,
                    total_time: cfg.total_time,
                    master_seed: cfg.seed,
                    trials,
                    chi: f64::NAN,
                    effective_success: f64::NAN,
                });
                return Err(QaaError::CampaignAborted {
                    partial: Box::new(partial),
                    source: Box::new(source),
                });
            }
        }
    }
    let mut campaign =
        PathChangeCampaign::from_trials(instance_id, category, cfg.total_time, cfg.seed, trials)?;
    if let GapSelection::BestAndRandom(sel_seed) = cfg.gaps {
        let mut picks = vec![campaign.best_trial().expect("non-empty")];
        let r = campaign.random_trial(sel_seed).expect("non-empty");
        if r != picks[0] {
            picks.push(r);
        }
        for i in picks {
            let e = extras[i].as_ref().expect("extra kept");
            scan_into(problem, e, &cfg.gap_scan, &mut campaign.trials[i])?;
        }
    }
    Ok(campaign)
}

fn scan_into(
    problem: &Problem<'_>,
    extra: &crate::hamiltonian::ExtraHamiltonian,
    cfg: &GapScanConfig,
    trial: &mut Trial,
) -> Result<()> {
    let path = crate::hamiltonian::HamiltonianPath::new(problem.cost, Some(extra))?;
    let profile = gap_scan(&path, cfg)?;
    trial.g_min = Some(profile.g_min);
    trial.s_at_min = Some(profile.s_at_min);
    Ok(())
}

pub const CAMPAIGN_SUMMARY_HEADER: &str =
    "instance_id,category,trials,chi,effective_success,best_trial,best_seed,best_success";
pub const CAMPAIGN_TRIAL_HEADER: &str =
    "instance_id,category,trial,seed,success_probability,g_min,s_at_min";

pub fn write_campaign_summary_csv<W: Write>(
    mut out: W,
    campaigns: &[PathChangeCampaign],
) -> std::io::Result<()> {
    writeln!(out, "{CAMPAIGN_SUMMARY_HEADER}")?;
    for c in campaigns {
        let best = c.best_trial().map(|i| &c.trials[i]);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.instance_id,
            c.category,
            c.trials.len(),
            fmt12(c.chi),
            fmt12(c.effective_success),
            best.map(|t| t.index.to_string()).unwrap_or_default(),
            best.map(|t| t.seed.to_string()).unwrap_or_default(),
            best.map(|t| fmt12(t.success_probability))
                .unwrap_or_default(),
        )?;
    }
    Ok(())
}

pub fn write_campaign_trials_csv<W: Write>(
    mut out: W,
    campaigns: &[PathChangeCampaign],
) -> std::io::Result<()> {
    writeln!(out, "{CAMPAIGN_TRIAL_HEADER}")?;
    for c in campaigns {
        for t in &c.trials {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.instance_id,
                c.category,
                t.index,
                t.seed,
                fmt12(t.success_probability),
                t.g_min.map(fmt12).unwrap_or_default(),
                t.s_at_min.map(fmt12).unwrap_or_default(),
            )?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialSelector {
    Best,
    Random(u64),
}

impl std::fmt::Display for TrialSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrialSelector::Best => f.write_str("best"),
            TrialSelector::Random(_) => f.write_str("random"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub instance_id: String,
    pub category: Category,
    pub selector: String,
    pub trial: usize,
    pub success_probability: f64,
    pub g_min: f64,
}

/// Success versus minimum gap for one selected trial per campaign. The
/// random selector uses [`PathChangeCampaign::random_trial`].
pub fn gap_success_table(
    campaigns: &[PathChangeCampaign],
    selector: TrialSelector,
) -> Result<Vec<GapRow>> {
    campaigns
        .iter()
        .map(|c| {
            let i = match selector {
                TrialSelector::Best => c.best_trial(),
                TrialSelector::Random(seed) => c.random_trial(seed),
            }
            .ok_or_else(|| {
                QaaError::invalid(format!("campaign {} has no trials", c.instance_id))
            })?;
            let t = &c.trials[i];
            let g_min = t.g_min.ok_or_else(|| {
                QaaError::invalid(format!(
                    "campaign {} ({}) has no gap data for trial {i}",
                    c.instance_id, c.category
                ))
            })?;
            Ok(GapRow {
                instance_id: c.instance_id.clone(),
                category: c.category,
                selector: selector.to_string(),
                trial: i,
                success_probability: t.success_probability,
                g_min,
            })
        })
        .collect()
}

pub const GAP_TABLE_HEADER: &str = "instance_id,category,selector,trial,success_probability,g_min";

pub fn write_gap_table_csv<W: Write>(mut out: W, rows: &[GapRow]) -> std::io::Result<()> {
    writeln!(out, "{GAP_TABLE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.instance_id,
            r.category,
            r.selector,
            r.trial,
            fmt12(r.success_probability),
            fmt12(r.g_min)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(i: usize, p: f64, g: Option<f64>) -> Trial {
        Trial {
            index: i,
            seed: i as u64,
            success_probability: p,
            g_min: g,
            s_at_min: None,
        }
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(chi(&[1.0, 0.5]).unwrap(), 0.0);
        let direct = (0.9f64 * 0.5 * 0.99).powf(1.0 / 3.0);
        assert!((chi(&[0.1, 0.5, 0.01]).unwrap() - direct).abs() < 1e-15);
        assert!(chi(&[]).is_err());
    }

    #[test]
    fn campaign_from_stub_successes() {
        let c = PathChangeCampaign::from_trials(
            "x",
            Category::Diagonal,
            100.0,
            0,
            vec![trial(0, 1.0, None), trial(1, 0.5, None)],
        )
        .unwrap();
        assert_eq!(c.chi, 0.0);
        assert_eq!(c.effective_success, 1.0);
        assert_eq!(c.best_trial(), Some(0));
    }

    #[test]
    fn gap_table_selection() {
        assert!(gap_success_table(&[], TrialSelector::Best)
            .unwrap()
            .is_empty());
        let c = PathChangeCampaign::from_trials(
            "a",
            Category::Complex,
            10.0,
            0,
            vec![
                trial(0, 0.2, Some(0.3)),
                trial(1, 0.7, Some(0.1)),
                trial(2, 0.7, None),
            ],
        )
        .unwrap();
        let rows = gap_success_table(std::slice::from_ref(&c), TrialSelector::Best).unwrap();
        assert_eq!(rows[0].trial, 1);
        assert_eq!(rows[0].g_min, 0.1);
        let mut missing = c.clone();
        missing.trials[1].g_min = None;
        assert!(gap_success_table(&[missing], TrialSelector::Best).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
    }
}
