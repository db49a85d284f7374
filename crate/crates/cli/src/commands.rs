use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use qaa_core::evolution::{evolve, write_trajectory_csv, ObservationPlan};
use qaa_core::hamiltonian::{
    sample_extra_on_edges, sample_extra_with, Category, ExtraHamiltonian, Schedule, TermGranularity,
};
use qaa_core::meanfield::meanfield_evolve;
use qaa_core::pipeline::{mine, MiningConfig, MiningOptions, LEDGER_FILE};
use qaa_core::sat::{bits_to_string, generate_instance, Instance};
use qaa_core::seed::{child_seed, streams};
use qaa_core::spectrum::{fmt12, gap_scan, write_spectrum_csv, EigenConfig, GapScanConfig};
use qaa_core::strategies::{
    campaign_edges, excited_scan, gap_success_table, path_change_campaign, sweep_total_time,
    write_campaign_summary_csv, write_campaign_trials_csv, write_excited_csv, write_gap_table_csv,
    write_sweep_csv, CampaignConfig, GapSelection, PathChangeCampaign, Problem, SweepConfig, Trial,
    TrialSelector,
};
use qaa_core::{excited_state, initial_state, QaaError, StateVector};

use crate::output::{CliError, CliResult, Run};
use crate::{
    CategoryArg, CertifyArgs, Cli, Command, EvolveArgs, ExcitedArgs, GapsArg, GenerateArgs,
    GranularityArg, MeanfieldArgs, MineArgs, PathchangeArgs, SampleExtraArgs, SpectrumArgs,
    SweepArgs,
};

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot configure thread pool: {e}")))?;
    }
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Generate(a) => generate(out, a),
        Command::Certify(a) => certify(out, a),
        Command::SampleExtra(a) => sample_extra_cmd(out, a),
        Command::Evolve(a) => evolve_cmd(out, a),
        Command::Sweep(a) => sweep(out, a),
        Command::Excited(a) => excited(out, a),
        Command::Pathchange(a) => pathchange(out, a),
        Command::Spectrum(a) => spectrum(out, a),
        Command::Meanfield(a) => meanfield(out, a),
        Command::Mine(a) => mine_cmd(out, a),
        Command::Report(a) => crate::report::report(out, a),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

fn load_instance(run: &mut Run, path: &Path) -> CliResult<Instance> {
    run.input(path);
    Ok(Instance::read_file(path)?)
}

/// Instance with a certified unique optimum.
fn load_certified(run: &mut Run, path: &Path) -> CliResult<Instance> {
    let inst = load_instance(run, path)?;
    if inst.optimum().is_none() {
        return Err(QaaError::invalid(format!(
            "{} has no certified optimum; run `qaa certify` on it first",
            path.display()
        ))
        .into());
    }
    inst.target()?;
    Ok(inst)
}

fn load_extra(run: &mut Run, path: Option<&PathBuf>) -> CliResult<Option<ExtraHamiltonian>> {
    path.map(|p| {
        run.input(p);
        ExtraHamiltonian::read_file(p).map_err(CliError::from)
    })
    .transpose()
}

fn categories(c: CategoryArg) -> Vec<Category> {
    match c {
        CategoryArg::Stoquastic => vec![Category::Stoquastic],
        CategoryArg::Complex => vec![Category::Complex],
        CategoryArg::Diagonal => vec![Category::Diagonal],
        CategoryArg::All => Category::ALL.to_vec(),
    }
}

fn granularity(g: GranularityArg) -> TermGranularity {
    match g {
        GranularityArg::PerEdge => TermGranularity::PerEdge,
        GranularityArg::PerClause => TermGranularity::PerClause,
    }
}

fn generate(out: &Path, a: &GenerateArgs) -> CliResult<()> {
    let mut run = Run::start("generate", a, Some(a.seed), out, "generate")?;
    let mut rows = Vec::with_capacity(a.count);
    let mut unique = 0usize;
    for i in 0..a.count {
        let seed = child_seed(a.seed, streams::INSTANCES + i as u64);
        let mut inst = generate_instance(a.n, a.m, seed)?;
        let opt = run.stage("certify", || inst.certify_optimum())?;
        let path = out.join(format!("instance_{i:06}.json"));
        run.output(&path)?;
        inst.write_file(&path)?;
        let is_unique = opt.multiplicity == 1;
        unique += usize::from(is_unique);
        rows.push(format!(
            "{},{seed},{},{},{},{}",
            path.file_name().unwrap().to_string_lossy(),
            opt.cost_min,
            opt.multiplicity,
            is_unique,
            bits_to_string(opt.w, a.n)
        ));
    }
    run.csv(&out.join("generate_summary.csv"), |w| {
        writeln!(w, "file,seed,cost_min,multiplicity,unique,optimum")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    let frac = if a.count == 0 {
        0.0
    } else {
        unique as f64 / a.count as f64
    };
    println!(
        "generated {} instances; unique optimum: {unique}/{} ({frac:.4})",
        a.count, a.count
    );
    run.finish()
}

fn certify(out: &Path, a: &CertifyArgs) -> CliResult<()> {
    let s = stem(&a.instance);
    let mut run = Run::start("certify", a, None, out, &format!("{s}.certify"))?;
    let mut inst = load_instance(&mut run, &a.instance)?;
    let opt = run.stage("certify", || inst.certify_optimum())?;
    let dest = a
        .out
        .clone()
        .unwrap_or_else(|| out.join(format!("{s}.certified.json")));
    run.output(&dest)?;
    inst.write_file(&dest)?;
    println!(
        "optimum {} cost_min {} multiplicity {} -> {}",
        bits_to_string(opt.w, inst.n()),
        opt.cost_min,
        opt.multiplicity,
        dest.display()
    );
    run.finish()
}

fn sample_extra_cmd(out: &Path, a: &SampleExtraArgs) -> CliResult<()> {
    let cat = match a.category {
        CategoryArg::All => return Err(CliError::usage("sample-extra needs a single category")),
        c => categories(c)[0],
    };
    let name = format!("extra_{cat}_{}", a.seed);
    let mut run = Run::start("sample-extra", a, Some(a.seed), out, &name)?;
    let inst = load_instance(&mut run, &a.instance)?;
    let extra = if inst.clauses().is_empty() || a.granularity == GranularityArg::PerEdge {
        sample_extra_on_edges(inst.n(), &campaign_edges(&inst), cat, a.seed)?
    } else {
        sample_extra_with(&inst, cat, a.seed, granularity(a.granularity))?
    };
    let dest = a
        .out
        .clone()
        .unwrap_or_else(|| out.join(format!("{name}.json")));
    run.output(&dest)?;
    extra.write_file(&dest)?;
    println!("{} terms -> {}", extra.terms().len(), dest.display());
    run.finish()
}

fn initial(init: &[String], n: usize) -> CliResult<StateVector> {
    match init
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["ground"] => Ok(initial_state(n)?),
        ["excited", k] => {
            let k: usize = k
                .parse()
                .map_err(|_| CliError::usage(format!("excited index {k:?} is not an integer")))?;
            Ok(excited_state(n, k)?)
        }
        ["excited"] => Err(CliError::usage(
            "--init excited needs a qubit index, e.g. `--init excited 0`",
        )),
        other => Err(CliError::usage(format!(
            "unknown initial state {other:?}; use `ground` or `excited K`"
        ))),
    }
}

fn schedule(time: f64, extra: Option<ExtraHamiltonian>) -> CliResult<Schedule> {
    let s = Schedule::new(time)?;
    Ok(match extra {
        Some(e) => s.with_extra(e),
        None => s,
    })
}

fn evolve_cmd(out: &Path, a: &EvolveArgs) -> CliResult<()> {
    let mut run = Run::start("evolve", a, None, out, &a.name)?;
    let inst = load_certified(&mut run, &a.instance)?;
    let extra = load_extra(&mut run, a.extra.as_ref())?;
    let cost = inst.build_cost_vector()?;
    let psi0 = initial(&a.init, inst.n())?;
    let plan = match a.trajectory {
        Some(p) if a.overlaps => ObservationPlan::full(p),
        Some(p) => ObservationPlan::energies(p),
        None if a.overlaps => return Err(CliError::usage("--overlaps needs --trajectory")),
        None => ObservationPlan::none(),
    };
    let sched = schedule(a.time, extra)?;
    let cfg = a.integrator.config();
    let r = run.stage("evolve", || {
        evolve(&sched, &cost, inst.target()?, &psi0, &cfg, &plan)
    })?;
    if let Some(traj) = &r.trajectory {
        run.csv(&out.join(format!("{}.csv", a.name)), |w| {
            write_trajectory_csv(w, traj)
        })?;
    }
    println!("{}", fmt12(r.success_probability));
    run.finish()
}

fn time_grid(a: &SweepArgs) -> CliResult<Vec<f64>> {
    if let Some(g) = &a.grid {
        return Ok(g.clone());
    }
    if !(a.t_step > 0.0) || a.t_max < a.t_min {
        return Err(CliError::usage(
            "time range needs t_step > 0 and t_max >= t_min",
        ));
    }
    let count = ((a.t_max - a.t_min) / a.t_step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a.t_min + i as f64 * a.t_step).collect())
}

fn sweep(out: &Path, a: &SweepArgs) -> CliResult<()> {
    let mut run = Run::start("sweep", a, None, out, &a.name)?;
    let inst = load_certified(&mut run, &a.instance)?;
    let extra = load_extra(&mut run, a.extra.as_ref())?;
    let cost = inst.build_cost_vector()?;
    let problem = Problem::new(&inst, &cost)?;
    let grid = time_grid(a)?;
    let cfg = SweepConfig {
        integrator: a.integrator.config(),
        refine_rounds: a.refine,
        t_ref: (!a.no_ref).then_some(a.t_ref),
    };
    let r = run.stage("sweep", || {
        sweep_total_time(&problem, extra.as_ref(), &grid, &cfg)
    })?;
    run.csv(&out.join(format!("{}.csv", a.name)), |w| {
        write_sweep_csv(w, &r.grid)
    })?;
    run.json(
        &out.join(format!("{}.summary.json", a.name)),
        json!({"kind": "sweep", "instance": stem(&a.instance), "result": r}),
    )?;
    println!("T_max {} P(T_max) {}", r.t_max, fmt12(r.p_at_tmax));
    if let (Some(t), Some(p), Some(x)) = (r.t_ref, r.p_ref, r.improvement_vs_ref) {
        println!("P({t}) {} improvement {}", fmt12(p), fmt12(x));
    }
    run.finish()
}

fn excited(out: &Path, a: &ExcitedArgs) -> CliResult<()> {
    let mut run = Run::start("excited", a, None, out, &a.name)?;
    let inst = load_certified(&mut run, &a.instance)?;
    let extra = load_extra(&mut run, a.extra.as_ref())?;
    let cost = inst.build_cost_vector()?;
    let problem = Problem::new(&inst, &cost)?;
    let cfg = a.integrator.config();
    let r = run.stage("excited", || {
        excited_scan(&problem, extra.as_ref(), a.time, &cfg)
    })?;
    run.csv(&out.join(format!("{}.csv", a.name)), |w| {
        write_excited_csv(w, &r)
    })?;
    run.json(
        &out.join(format!("{}.summary.json", a.name)),
        json!({"kind": "excited", "instance": stem(&a.instance), "result": r}),
    )?;
    println!(
        "average {} maximum {} ground {} total {}",
        fmt12(r.average),
        fmt12(r.maximum),
        fmt12(r.ground_start),
        fmt12(r.total())
    );
    run.finish()
}

fn pathchange(out: &Path, a: &PathchangeArgs) -> CliResult<()> {
    let mut run = Run::start("pathchange", a, Some(a.seed), out, &a.name)?;
    let id = a.instance_id.clone().unwrap_or_else(|| stem(&a.instance));
    let gap_seed = a.gap_seed.unwrap_or(a.seed);
    let cfg = CampaignConfig {
        trials: a.trials,
        total_time: a.time,
        seed: a.seed,
        granularity: granularity(a.granularity),
        gaps: match a.gaps {
            GapsArg::None => GapSelection::None,
            GapsArg::All => GapSelection::All,
            GapsArg::BestAndRandom => GapSelection::BestAndRandom(gap_seed),
        },
        integrator: a.integrator.config(),
        gap_scan: GapScanConfig {
            grid_points: a.gap_points,
            refine_iters: a.gap_refine,
            ..GapScanConfig::default()
        },
    };
    let mut campaigns = Vec::new();
    let mut failure = None;
    if let Some(stub) = &a.stub_successes {
        run.input(&a.instance);
        for cat in categories(a.category) {
            let trials = stub
                .iter()
                .enumerate()
                .map(|(i, &p)| Trial {
                    index: i,
                    seed: child_seed(a.seed, streams::TRIALS + i as u64),
                    success_probability: p,
                    g_min: None,
                    s_at_min: None,
                })
                .collect();
            campaigns.push(PathChangeCampaign::from_trials(
                id.clone(),
                cat,
                a.time,
                a.seed,
                trials,
            )?);
        }
    } else {
        let inst = load_certified(&mut run, &a.instance)?;
        let cost = inst.build_cost_vector()?;
        let problem = Problem::new(&inst, &cost)?;
        for cat in categories(a.category) {
            match run.stage(&format!("campaign {cat}"), || {
                path_change_campaign(&problem, &id, cat, &cfg)
            }) {
                Ok(c) => campaigns.push(c),
                Err(QaaError::CampaignAborted { partial, source }) => {
                    campaigns.push(*partial);
                    failure = Some(QaaError::CampaignAborted {
                        partial: Box::new(campaigns.last().unwrap().clone()),
                        source,
                    });
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    run.csv(&out.join(format!("{}_trials.csv", a.name)), |w| {
        write_campaign_trials_csv(w, &campaigns)
    })?;
    if let Some(e) = failure {
        run.finish()?;
        return Err(e.into());
    }
    run.csv(&out.join(format!("{}_summary.csv", a.name)), |w| {
        write_campaign_summary_csv(w, &campaigns)
    })?;
    if a.gaps != GapsArg::None {
        for (sel, tag) in [
            (TrialSelector::Best, "best"),
            (TrialSelector::Random(gap_seed), "random"),
        ] {
            let rows = gap_success_table(&campaigns, sel)?;
            run.csv(&out.join(format!("{}_gaps_{tag}.csv", a.name)), |w| {
                write_gap_table_csv(w, &rows)
            })?;
        }
    }
    for c in &campaigns {
        println!(
            "{} {} chi {} effective_success {}",
            c.instance_id,
            c.category,
            fmt12(c.chi),
            fmt12(c.effective_success)
        );
    }
    run.finish()
}

fn spectrum(out: &Path, a: &SpectrumArgs) -> CliResult<()> {
    let mut run = Run::start("spectrum", a, None, out, &a.name)?;
    let inst = load_instance(&mut run, &a.instance)?;
    let extra = load_extra(&mut run, a.extra.as_ref())?;
    let cost = inst.build_cost_vector()?;
    let sched = schedule(1.0, extra)?;
    let path = sched.path(&cost)?;
    let cfg = GapScanConfig {
        grid_points: a.points,
        refine_iters: a.refine,
        levels: a.levels,
        eigen: EigenConfig::default().with_tol(a.tol),
    };
    if a.levels < 2 {
        return Err(CliError::usage("--levels must be at least 2"));
    }
    let profile = run.stage("gap scan", || gap_scan(&path, &cfg))?;
    run.csv(&out.join(format!("{}.csv", a.name)), |w| {
        write_spectrum_csv(w, &profile.slices)
    })?;
    run.json(
        &out.join(format!("{}.gap.json", a.name)),
        json!({"kind": "gap", "instance": stem(&a.instance), "summary": profile.summary()}),
    )?;
    println!(
        "g_min {} at s {}",
        fmt12(profile.g_min),
        fmt12(profile.s_at_min)
    );
    run.finish()
}

fn meanfield(out: &Path, a: &MeanfieldArgs) -> CliResult<()> {
    let mut run = Run::start("meanfield", a, None, out, &a.name)?;
    let inst = load_certified(&mut run, &a.instance)?;
    let r = run.stage("meanfield", || {
        meanfield_evolve(&inst, a.time, a.steps, a.threshold)
    })?;
    let row = format!(
        "{},{},{},{},{}",
        stem(&a.instance),
        fmt12(r.final_energy),
        r.cost_min,
        fmt12(r.excess),
        r.passed_filter
    );
    run.csv(&out.join(format!("{}.csv", a.name)), |w| {
        writeln!(w, "instance_id,final_energy,cost_min,excess,passed_filter")?;
        writeln!(w, "{row}")
    })?;
    println!("{row}");
    run.finish()
}

fn mine_cmd(out: &Path, a: &MineArgs) -> CliResult<()> {
    let mut run = Run::start("mine", a, Some(a.seed), out, "mine")?;
    let cfg = MiningConfig {
        n: a.n,
        m: a.m,
        t_ref: a.t_ref,
        hardness_cutoff: a.cutoff,
        mf_threshold: a.mf_threshold,
        mf_steps: a.mf_steps,
        target_count: a.target_count,
        max_instances: a.max_instances,
        master_seed: a.seed,
        calibration: a.calibration,
        base_step: a.integrator.base_step,
        tolerance: a.integrator.tolerance,
        check_convergence: !a.integrator.no_convergence_check,
    };
    let opts = MiningOptions {
        out_dir: Some(out.to_path_buf()),
        manifest_note: Some(format!("manifest: {}", run.manifest_name())),
        batch: a.batch,
        stop_after: None,
    };
    let outcome = run.stage("mine", || mine(&cfg, &opts))?;
    run.output(&out.join(LEDGER_FILE))?;
    for (id, _) in &outcome.hard {
        run.output(
            &out.join(qaa_core::pipeline::HARD_DIR)
                .join(qaa_core::pipeline::hard_file_name(*id)),
        )?;
    }
    let s = &outcome.stats;
    println!(
        "generated {} non_unique {} filtered_easy {} simulated {} hard {}",
        s.generated, s.non_unique, s.filtered_easy, s.simulated, s.hard
    );
    run.finish()
}
