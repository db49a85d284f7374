//! `qaa`: command-line driver for the adiabatic-algorithm experiments.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 numerical,
//! convergence or resource failure, 4 I/O or file-format failure. Errors are
//! printed on stderr as `error[class]: message`.

mod commands;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qaa_core::evolution::IntegratorConfig;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "qaa",
    version,
    about = "Adiabatic-algorithm simulation and hard-instance experiments on MAX 2-SAT"
)]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for outputs and run manifests.
    #[arg(long, global = true, env = "QAA_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Generate random certified MAX 2-SAT instances.
    Generate(GenerateArgs),
    /// Brute-force the optimum of an instance and write a certified copy.
    Certify(CertifyArgs),
    /// Sample a random path-change Hamiltonian for an instance.
    SampleExtra(SampleExtraArgs),
    /// Run one evolution and print P(T).
    Evolve(EvolveArgs),
    /// Success probability over a grid of total times.
    Sweep(SweepArgs),
    /// Success probability from each first excited state of the driver.
    Excited(ExcitedArgs),
    /// Path-change campaigns with the effective success 1 - chi.
    Pathchange(PathchangeArgs),
    /// Lowest energy levels along the path and the minimum gap.
    Spectrum(SpectrumArgs),
    /// Mean-field run and filter verdict for one instance.
    Meanfield(MeanfieldArgs),
    /// Mine hard instances (resumable).
    Mine(MineArgs),
    /// Aggregate ledgers, sweeps, scans and campaigns into plot data.
    #[command(long_about = report::SCHEMA_HELP)]
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IntegratorArgs {
    /// Largest integration step.
    #[arg(long, default_value_t = 1.0)]
    pub base_step: f64,
    /// Accept a run when halving the step changes P, and the estimated
    /// amplitude error, by less than this.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Step budget for the halving loop.
    #[arg(long, default_value_t = 1 << 22)]
    pub max_steps: usize,
    /// Skip the step-halving check.
    #[arg(long)]
    pub no_convergence_check: bool,
}

impl IntegratorArgs {
    pub fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            base_step: self.base_step,
            tolerance: self.tolerance,
            max_steps: self.max_steps,
            check_convergence: !self.no_convergence_check,
            ..IntegratorConfig::default()
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    /// Number of distinct clauses.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    pub instance: PathBuf,
    /// Output file (default: `<stem>.certified.json` in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum CategoryArg {
    Stoquastic,
    Complex,
    Diagonal,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum GranularityArg {
    PerEdge,
    PerClause,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleExtraArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub category: CategoryArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "per-edge")]
    pub granularity: GranularityArg,
    /// Output file (default: `extra_<category>_<seed>.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EvolveArgs {
    /// Instance file.
    pub instance: PathBuf,
    /// Total evolution time.
    #[arg(short = 'T', long = "time")]
    pub time: f64,
    /// `ground`, or `excited K` to flip qubit K of the driver ground state.
    #[arg(long, num_args = 1..=2, value_names = ["KIND", "K"], default_values_t = ["ground".to_string()])]
    pub init: Vec<String>,
    /// Path-change Hamiltonian file.
    #[arg(long)]
    pub extra: Option<PathBuf>,
    /// Record this many evenly spaced trajectory samples.
    #[arg(long)]
    pub trajectory: Option<usize>,
    /// Also record overlaps with the two lowest instantaneous eigenstates.
    #[arg(long)]
    pub overlaps: bool,
    /// Trajectory file stem.
    #[arg(long, default_value = "trajectory")]
    pub name: String,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// Instance file.
    pub instance: PathBuf,
    /// Explicit comma-separated grid of total times.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 40.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_step: f64,
    /// Reference time for the improvement ratio.
    #[arg(long, default_value_t = 100.0)]
    pub t_ref: f64,
    #[arg(long)]
    pub no_ref: bool,
    /// Rounds of local bisection around the grid maximum.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long)]
    pub extra: Option<PathBuf>,
    #[arg(long, default_value = "sweep")]
    pub name: String,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ExcitedArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(short = 'T', long = "time", default_value_t = 100.0)]
    pub time: f64,
    #[arg(long)]
    pub extra: Option<PathBuf>,
    #[arg(long, default_value = "excited")]
    pub name: String,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum GapsArg {
    None,
    All,
    BestAndRandom,
}

#[derive(Args, Debug, Serialize)]
pub struct PathchangeArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub category: CategoryArg,
    #[arg(long, default_value_t = 25)]
    pub trials: usize,
    #[arg(short = 'T', long = "time", default_value_t = 100.0)]
    pub time: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which trials get a minimum-gap scan.
    #[arg(long, value_enum, default_value = "none")]
    pub gaps: GapsArg,
    /// Seed of the random trial selection (default: the master seed).
    #[arg(long)]
    pub gap_seed: Option<u64>,
    #[arg(long, default_value_t = 201)]
    pub gap_points: usize,
    #[arg(long, default_value_t = 40)]
    pub gap_refine: usize,
    #[arg(long, value_enum, default_value = "per-edge")]
    pub granularity: GranularityArg,
    /// Identifier used in output rows (default: the instance file stem).
    #[arg(long)]
    pub instance_id: Option<String>,
    #[arg(long, default_value = "pathchange")]
    pub name: String,
    /// Use these trial successes instead of simulating.
    #[arg(long, value_delimiter = ',', hide = true)]
    pub stub_successes: Option<Vec<f64>>,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(long)]
    pub extra: Option<PathBuf>,
    /// Uniform s-grid size.
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Levels per slice.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Golden-section iterations around the smallest grid gap.
    #[arg(long, default_value_t = 40)]
    pub refine: usize,
    /// Eigenpair residual bound.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value = "spectrum")]
    pub name: String,
}

#[derive(Args, Debug, Serialize)]
pub struct MeanfieldArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(short = 'T', long = "time", default_value_t = 100.0)]
    pub time: f64,
    #[arg(long, default_value_t = qaa_core::meanfield::DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long, default_value_t = qaa_core::meanfield::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "meanfield")]
    pub name: String,
}

#[derive(Args, Debug, Serialize)]
pub struct MineArgs {
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 36)]
    pub m: usize,
    #[arg(long, default_value_t = 100.0)]
    pub t_ref: f64,
    /// Instances with P(T_ref) below this are hard.
    #[arg(long, default_value_t = 1e-4)]
    pub cutoff: f64,
    #[arg(long, default_value_t = qaa_core::meanfield::DEFAULT_THRESHOLD)]
    pub mf_threshold: f64,
    #[arg(long, default_value_t = qaa_core::meanfield::DEFAULT_STEPS)]
    pub mf_steps: usize,
    /// Stop after this many hard instances.
    #[arg(long)]
    pub target_count: Option<usize>,
    /// Stop after this many generated instances.
    #[arg(long, default_value_t = 1000)]
    pub max_instances: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulate every unique instance, ignoring the mean-field verdict.
    #[arg(long)]
    pub calibration: bool,
    /// Instances per parallel batch (0: automatic).
    #[arg(long, default_value_t = 0)]
    pub batch: usize,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// Directory scanned recursively (default: the output directory).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Fixed short time for the fixed-T improvement table.
    #[arg(long, default_value_t = 10.0)]
    pub fixed_time: f64,
    /// Reference time matched in sweep summaries.
    #[arg(long, default_value_t = 100.0)]
    pub t_ref: f64,
    /// Also write a gnuplot script for the emitted tables.
    #[arg(long)]
    pub gnuplot: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            eprintln!(
                "error[usage]: {}",
                text.trim_start_matches("error: ").trim_end()
            );
            return ExitCode::from(output::EXIT_USAGE);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class, e.message);
            ExitCode::from(e.code)
        }
    }
}
