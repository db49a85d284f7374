//! Hard-instance mining: generate, certify a unique optimum, apply the
//! mean-field filter, evolve the survivors at `T_ref`, keep the hard ones.
//!
//! Instance `id` is generated from `child_seed(master, INSTANCES + id)`, so
//! each record depends only on the configuration and its id. Records are
//! computed in parallel batches and appended to the ledger strictly in id
//! order; a run stops right after the record that reaches `target_count`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QaaError, Result};
use crate::evolution::{evolve, IntegratorConfig, ObservationPlan};
use crate::hamiltonian::Schedule;
use crate::meanfield::{meanfield_evolve, DEFAULT_STEPS, DEFAULT_THRESHOLD};
use crate::sat::{generate_instance, Instance};
use crate::seed::{child_seed, streams};
use crate::state::initial_state;
use crate::strategies::T_REF;

pub const LEDGER_FORMAT_VERSION: u32 = 1;
pub const LEDGER_FILE: &str = "ledger.csv";
pub const CONFIG_FILE: &str = "mining_config.json";
pub const HARD_DIR: &str = "hard";
pub const LEDGER_HEADER: &str =
    "id,seed,multiplicity,unique,cost_min,mf_final_energy,mf_excess,filter_easy,p_ref,hard";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub n: usize,
    pub m: usize,
    pub t_ref: f64,
    pub hardness_cutoff: f64,
    pub mf_threshold: f64,
    pub mf_steps: usize,
    /// Stop once this many hard instances are found.
    pub target_count: Option<usize>,
    /// Stop after this many generated instances.
    pub max_instances: u64,
    pub master_seed: u64,
    /// Evolve every unique instance regardless of the filter verdict.
    pub calibration: bool,
    pub base_step: f64,
    pub tolerance: f64,
    pub check_convergence: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        let integ = IntegratorConfig::default();
        MiningConfig {
            n: 12,
            m: 36,
            t_ref: T_REF,
            hardness_cutoff: 1e-4,
            mf_threshold: DEFAULT_THRESHOLD,
            mf_steps: DEFAULT_STEPS,
            target_count: None,
            max_instances: 1000,
            master_seed: 0,
            calibration: false,
            base_step: integ.base_step,
            tolerance: integ.tolerance,
            check_convergence: integ.check_convergence,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hardness_cutoff > 0.0 && self.hardness_cutoff < 1.0) {
            return Err(QaaError::invalid(format!(
                "hardness cutoff must be in (0, 1), got {}",
                self.hardness_cutoff
            )));
        }
        if !(self.mf_threshold > 0.0) {
            return Err(QaaError::invalid(format!(
                "mean-field threshold must be > 0, got {}",
                self.mf_threshold
            )));
        }
        if !(self.t_ref > 0.0 && self.t_ref.is_finite()) {
            return Err(QaaError::invalid(format!(
                "T_ref must be > 0, got {}",
                self.t_ref
            )));
        }
        if self.mf_steps == 0 {
            return Err(QaaError::invalid("mean-field steps must be > 0"));
        }
        self.integrator().validate()
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            base_step: self.base_step,
            tolerance: self.tolerance,
            check_convergence: self.check_convergence,
            ..IntegratorConfig::default()
        }
    }

    pub fn instance_seed(&self, id: u64) -> u64 {
        child_seed(self.master_seed, streams::INSTANCES + id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningRecord {
    pub id: u64,
    pub seed: u64,
    pub multiplicity: u64,
    pub unique: bool,
    pub cost_min: f64,
    pub mf_final_energy: Option<f64>,
    pub mf_excess: Option<f64>,
    /// Mean-field verdict: true means easy.
    pub filter_easy: Option<bool>,
    pub p_ref: Option<f64>,
    pub hard: Option<bool>,
}

impl MiningRecord {
    fn to_row(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.id,
            self.seed,
            self.multiplicity,
            self.unique,
            self.cost_min,
            opt(self.mf_final_energy),
            opt(self.mf_excess),
            opt(self.filter_easy),
            opt(self.p_ref),
            opt(self.hard)
        )
    }

    fn from_row(line: &str) -> Result<Self> {
        let bad = |d: String| QaaError::format("ledger row", format!("{d}: {line:?}"));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(bad(format!("expected 10 columns, found {}", cols.len())));
        }
        fn req<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("cannot parse {s:?}"))
        }
        fn opt<T: std::str::FromStr>(s: &str) -> std::result::Result<Option<T>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                req(s).map(Some)
            }
        }
        (|| -> std::result::Result<Self, String> {
            Ok(MiningRecord {
                id: req(cols[0])?,
                seed: req(cols[1])?,
                multiplicity: req(cols[2])?,
                unique: req(cols[3])?,
                cost_min: req(cols[4])?,
                mf_final_energy: opt(cols[5])?,
                mf_excess: opt(cols[6])?,
                filter_easy: opt(cols[7])?,
                p_ref: opt(cols[8])?,
                hard: opt(cols[9])?,
            })
        })()
        .map_err(bad)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningStats {
    pub generated: u64,
    pub non_unique: u64,
    pub filtered_easy: u64,
    pub simulated: u64,
    pub hard: u64,
}

impl MiningStats {
    pub fn from_records(records: &[MiningRecord]) -> Self {
        let mut s = MiningStats::default();
        for r in records {
            s.generated += 1;
            if !r.unique {
                s.non_unique += 1;
            } else if r.p_ref.is_none() {
                s.filtered_easy += 1;
            } else {
                s.simulated += 1;
            }
            if r.hard == Some(true) {
                s.hard += 1;
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct MiningOutcome {
    /// Hard instances with their ids, in id order.
    pub hard: Vec<(u64, Instance)>,
    pub records: Vec<MiningRecord>,
    pub stats: MiningStats,
}

#[derive(Clone, Debug, Default)]
pub struct MiningOptions {
    /// Directory for the ledger, config snapshot and hard-instance files.
    /// Without one the run is purely in memory.
    pub out_dir: Option<PathBuf>,
    /// Written as a comment line after the ledger's format line.
    pub manifest_note: Option<String>,
    /// Instances evaluated per parallel batch (0 picks a default).
    pub batch: usize,
    /// Stop (as if killed) after appending this many new records.
    pub stop_after: Option<usize>,
}

/// Evaluates one instance id through every stage it survives.
pub fn mine_one(config: &MiningConfig, id: u64) -> Result<(MiningRecord, Option<Instance>)> {
    let seed = config.instance_seed(id);
    let mut inst = generate_instance(config.n, config.m, seed)?;
    let opt = inst.certify_optimum()?.clone();
    let mut rec = MiningRecord {
        id,
        seed,
        multiplicity: opt.multiplicity,
        unique: opt.multiplicity == 1,
        cost_min: opt.cost_min,
        mf_final_energy: None,
        mf_excess: None,
        filter_easy: None,
        p_ref: None,
        hard: None,
    };
    if !rec.unique {
        return Ok((rec, None));
    }
    let mf = meanfield_evolve(&inst, config.t_ref, config.mf_steps, config.mf_threshold)?;
    rec.mf_final_energy = Some(mf.final_energy);
    rec.mf_excess = Some(mf.excess);
    rec.filter_easy = Some(mf.passed_filter);
    if mf.passed_filter && !config.calibration {
        return Ok((rec, None));
    }
    let cost = inst.build_cost_vector()?;
    let r = evolve(
        &Schedule::new(config.t_ref)?,
        &cost,
        inst.target()?,
        &initial_state(config.n)?,
        &config.integrator(),
        &ObservationPlan::none(),
    )?;
    let hard = r.success_probability < config.hardness_cutoff;
    rec.p_ref = Some(r.success_probability);
    rec.hard = Some(hard);
    Ok((rec, hard.then_some(inst)))
}

fn should_stop(config: &MiningConfig, next_id: u64, hard: usize) -> bool {
    next_id >= config.max_instances || config.target_count.is_some_and(|t| hard >= t)
}

/// Runs (or resumes) a mining campaign.
pub fn mine(config: &MiningConfig, opts: &MiningOptions) -> Result<MiningOutcome> {
    config.validate()?;
    let mut records = Vec::new();
    let mut hard = Vec::new();
    let mut ledger = match &opts.out_dir {
        Some(dir) => {
            let (prev, file) = open_ledger(dir, config, opts.manifest_note.as_deref())?;
            for r in &prev {
                if r.hard == Some(true) {
                    let inst = regenerate(config, r)?;
                    hard.push((r.id, inst));
                }
            }
            records = prev;
            Some(file)
        }
        None => None,
    };
    let batch = if opts.batch == 0 {
        4 * rayon::current_num_threads()
    } else {
        opts.batch
    };
    let mut appended = 0usize;
    let mut next_id = records.len() as u64;
    'outer: while !should_stop(config, next_id, hard.len()) {
        let end = (next_id + batch as u64).min(config.max_instances);
        let results: Vec<_> = (next_id..end)
            .into_par_iter()
            .map(|id| mine_one(config, id))
            .collect();
        for res in results {
            let (rec, inst) = res?;
            if let Some(f) = ledger.as_mut() {
                writeln!(f, "{}", rec.to_row())
                    .and_then(|_| f.flush())
                    .map_err(|e| QaaError::io(ledger_path(opts), e))?;
            }
            if let (Some(inst), Some(dir)) = (&inst, &opts.out_dir) {
                let hard_dir = dir.join(HARD_DIR);
                fs::create_dir_all(&hard_dir).map_err(|e| QaaError::io(&hard_dir, e))?;
                inst.write_file(&hard_dir.join(hard_file_name(rec.id)))?;
            }
            if let Some(inst) = inst {
                hard.push((rec.id, inst));
            }
            records.push(rec);
            next_id += 1;
            appended += 1;
            if opts.stop_after.is_some_and(|k| appended >= k)
                || should_stop(config, next_id, hard.len())
            {
                break 'outer;
            }
        }
    }
    let stats = MiningStats::from_records(&records);
    Ok(MiningOutcome {
        hard,
        records,
        stats,
    })
}

pub fn hard_file_name(id: u64) -> String {
    format!("instance_{id:06}.json")
}

fn ledger_path(opts: &MiningOptions) -> PathBuf {
    opts.out_dir
        .as_deref()
        .unwrap_or(Path::new("."))
        .join(LEDGER_FILE)
}

fn regenerate(config: &MiningConfig, r: &MiningRecord) -> Result<Instance> {
    let mut inst = generate_instance(config.n, config.m, r.seed)?;
    inst.certify_optimum()?;
    Ok(inst)
}

/// Opens the ledger for appending, creating it (and the config snapshot) on
/// a fresh run. On resume the stored config must match and a trailing
/// partial row from an interrupted write is discarded.
fn open_ledger(
    dir: &Path,
    config: &MiningConfig,
    note: Option<&str>,
) -> Result<(Vec<MiningRecord>, File)> {
    fs::create_dir_all(dir).map_err(|e| QaaError::io(dir, e))?;
    let cfg_path = dir.join(CONFIG_FILE);
    let path = dir.join(LEDGER_FILE);
    let cfg_json = serde_json::to_string_pretty(config).expect("config serializes");
    if path.exists() {
        let stored = fs::read_to_string(&cfg_path).map_err(|e| QaaError::io(&cfg_path, e))?;
        let stored: MiningConfig = serde_json::from_str(&stored)
            .map_err(|e| QaaError::format("mining config", e.to_string()))?;
        if &stored != config {
            return Err(QaaError::invalid(format!(
                "{} was written by a different mining configuration",
                path.display()
            )));
        }
        let text = fs::read_to_string(&path).map_err(|e| QaaError::io(&path, e))?;
        let complete = match text.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        let records = parse_ledger(&text[..complete])?;
        for (i, r) in records.iter().enumerate() {
            if r.id != i as u64 {
                return Err(QaaError::format(
                    "ledger",
                    format!("row {i} has id {}", r.id),
                ));
            }
        }
        let f = OpenOptions::new()
            .write(true)
            .open(&path)
            .map_err(|e| QaaError::io(&path, e))?;
        f.set_len(complete as u64)
            .map_err(|e| QaaError::io(&path, e))?;
        drop(f);
        let f = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| QaaError::io(&path, e))?;
        Ok((records, f))
    } else {
        fs::write(&cfg_path, cfg_json).map_err(|e| QaaError::io(&cfg_path, e))?;
        let mut f = File::create(&path).map_err(|e| QaaError::io(&path, e))?;
        let mut head = format!("# qaa-ledger format_version={LEDGER_FORMAT_VERSION}\n");
        if let Some(n) = note {
            head.push_str(&format!("# {n}\n"));
        }
        head.push_str(LEDGER_HEADER);
        head.push('\n');
        f.write_all(head.as_bytes())
            .map_err(|e| QaaError::io(&path, e))?;
        Ok((Vec::new(), f))
    }
}

/// Parses ledger text: comment lines, then the header, then rows.
pub fn parse_ledger(text: &str) -> Result<Vec<MiningRecord>> {
    let mut lines = text.lines();
    let mut version_seen = false;
    let mut header_seen = false;
    let mut out = Vec::new();
    for line in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("qaa-ledger format_version=") {
                if v.trim() != LEDGER_FORMAT_VERSION.to_string() {
                    return Err(QaaError::format(
                        "ledger",
                        format!("unsupported format_version {v}"),
                    ));
                }
                version_seen = true;
            }
            continue;
        }
        if !header_seen {
            if line != LEDGER_HEADER {
                return Err(QaaError::format(
                    "ledger",
                    format!("unexpected header {line:?}"),
                ));
            }
            header_seen = true;
            continue;
        }
        if !line.is_empty() {
            out.push(MiningRecord::from_row(line)?);
        }
    }
    if !text.is_empty() && !version_seen {
        return Err(QaaError::format("ledger", "missing format_version line"));
    }
    Ok(out)
}

pub fn read_ledger(path: &Path) -> Result<Vec<MiningRecord>> {
    let f = File::open(path).map_err(|e| QaaError::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(f).lines() {
        text.push_str(&line.map_err(|e| QaaError::io(path, e))?);
        text.push('\n');
    }
    parse_ledger(&text)
}

/// `P(T_ref)` of every fully simulated instance, in ledger order.
pub fn success_histogram(records: &[MiningRecord]) -> Vec<f64> {
    records.iter().filter_map(|r| r.p_ref).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MiningConfig {
        MiningConfig {
            n: 4,
            m: 6,
            t_ref: 5.0,
            hardness_cutoff: 0.5,
            mf_steps: 200,
            max_instances: 12,
            master_seed: 3,
            ..MiningConfig::default()
        }
    }

    #[test]
    fn row_round_trip() {
        let r = MiningRecord {
            id: 3,
            seed: 99,
            multiplicity: 1,
            unique: true,
            cost_min: 2.0,
            mf_final_energy: Some(2.125),
            mf_excess: Some(0.125),
            filter_easy: Some(true),
            p_ref: None,
            hard: None,
        };
        assert_eq!(MiningRecord::from_row(&r.to_row()).unwrap(), r);
        assert!(MiningRecord::from_row("1,2,3").is_err());
    }

    #[test]
    fn totals_add_up() {
        let out = mine(&small(), &MiningOptions::default()).unwrap();
        let s = out.stats;
        assert_eq!(s.generated, 12);
        assert_eq!(s.generated, s.non_unique + s.filtered_easy + s.simulated);
        assert_eq!(success_histogram(&out.records).len() as u64, s.simulated);
        for (_, inst) in &out.hard {
            assert!(inst.has_unique_optimum().unwrap());
        }
    }

    #[test]
    fn zero_target_stops_immediately() {
        let cfg = MiningConfig {
            target_count: Some(0),
            ..small()
        };
        let out = mine(&cfg, &MiningOptions::default()).unwrap();
        assert!(out.hard.is_empty());
    }

    #[test]
    fn invalid_configs() {
        let bad = MiningConfig {
            hardness_cutoff: 1.0,
            ..small()
        };
        assert!(mine(&bad, &MiningOptions::default()).is_err());
        assert!(parse_ledger("id,seed\n").is_err());
    }
}
