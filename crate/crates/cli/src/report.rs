//! Aggregates experiment outputs into plot-ready tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use qaa_core::evolution::TRAJECTORY_HEADER;
use qaa_core::pipeline::LEDGER_HEADER;
use qaa_core::spectrum::fmt12;
use qaa_core::strategies::{
    CAMPAIGN_SUMMARY_HEADER, CAMPAIGN_TRIAL_HEADER, GAP_TABLE_HEADER, SWEEP_HEADER,
};

use crate::output::{io_error, CliResult, Run};
use crate::ReportArgs;

const STEM: &str = "report";

pub const SCHEMA_HELP: &str = "\
Scans a directory tree for outputs of the other subcommands and writes one
table per plot into the output directory. Inputs are recognised by their
header line (delimited text) or their \"kind\" field (JSON); anything else is
ignored. Every table starts with a `# manifest:` comment line.

  success_distribution.csv    instance_id,p_ref
      P(T_ref) of every simulated instance, from mining ledgers.
  success_vs_time.csv         source,T,success_probability
      P(T) curves from sweep tables.
  lowest_levels.csv           source,s,level,energy
      Lowest instantaneous eigenvalues from spectrum tables.
  energy_expectation.csv      source,t,s,energy_expectation
      Instantaneous energy expectation from evolve trajectories.
  eigenstate_overlaps.csv     source,s,overlap_ground,overlap_first_excited
      Overlaps with the two lowest instantaneous eigenstates.
  tmax_improvement.csv        instance,t_max,p_tmax,t_ref,p_ref,improvement
      Best total time per instance (histogram of t_max) and the scatter of
      P(T_max)/P(T_ref) against P(T_ref), from sweep summaries.
  fixed_time_improvement.csv  instance,fixed_time,p_fixed,p_ref,improvement
      P(fixed)/P(T_ref) per instance (--fixed-time, --t-ref).
  excited_success.csv         instance,T,average,maximum,ground_start,total
      Excited-start success per instance, from excited summaries.
  pathchange_trials.csv       instance_id,category,trial,seed,success_probability,g_min,s_at_min
      Every path-change trial (per-category histograms).
  pathchange_max.csv          instance_id,category,max_success
      Largest trial success per instance and category.
  pathchange_effective.csv    instance_id,category,trials,chi,effective_success
      Geometric-mean failure statistic per campaign.
  gap_vs_success.csv          instance_id,category,selector,trial,success_probability,g_min
      Minimum gap against success for the selected trials.

With --gnuplot a script report.gp is written that plots every non-empty table.
An empty input directory yields header-only tables and a warning.";

struct Table {
    name: &'static str,
    header: &'static str,
    rows: Vec<String>,
}

impl Table {
    fn new(name: &'static str, header: &'static str) -> Self {
        Table {
            name,
            header,
            rows: Vec::new(),
        }
    }
}

#[derive(Default)]
struct Tables {
    distribution: Vec<String>,
    sweep: Vec<String>,
    levels: Vec<String>,
    energy: Vec<String>,
    overlaps: Vec<String>,
    tmax: Vec<String>,
    fixed: Vec<String>,
    excited: Vec<String>,
    trials: Vec<String>,
    max: Vec<String>,
    effective: Vec<String>,
    gaps: Vec<String>,
}

/// Header line and data rows of a delimited file, comment lines dropped.
fn read_delimited(path: &Path) -> Option<(String, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).ok()?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().ok()?.iter().collect::<Vec<_>>().join(",");
    let width = header.split(',').count();
    let rows = reader
        .records()
        .filter_map(|r| r.ok())
        .filter(|r| r.len() == width)
        .map(|r| r.iter().map(str::to_string).collect())
        .collect();
    Some((header, rows))
}

fn source_name(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .with_extension("")
        .display()
        .to_string()
}

fn is_own_output(path: &Path) -> bool {
    let own = format!("# manifest: {STEM}.manifest.json");
    fs::read_to_string(path)
        .map(|t| t.lines().next() == Some(own.as_str()))
        .unwrap_or(false)
}

fn ingest_delimited(root: &Path, path: &Path, t: &mut Tables) {
    if is_own_output(path) {
        return;
    }
    let Some((header, rows)) = read_delimited(path) else {
        return;
    };
    let src = source_name(root, path);
    match header.as_str() {
        LEDGER_HEADER => {
            for r in rows.iter().filter(|r| !r[8].is_empty()) {
                t.distribution.push(format!("{},{}", r[0], r[8]));
            }
        }
        SWEEP_HEADER => t
            .sweep
            .extend(rows.iter().map(|r| format!("{src},{},{}", r[0], r[1]))),
        TRAJECTORY_HEADER => {
            for r in &rows {
                t.energy.push(format!("{src},{},{},{}", r[0], r[1], r[2]));
                if !r[3].is_empty() {
                    t.overlaps.push(format!("{src},{},{},{}", r[1], r[3], r[4]));
                }
            }
        }
        CAMPAIGN_TRIAL_HEADER => {
            let mut best: Vec<(String, String, f64)> = Vec::new();
            for r in &rows {
                t.trials.push(r.join(","));
                let p: f64 = r[4].parse().unwrap_or(f64::NAN);
                match best.iter_mut().find(|b| b.0 == r[0] && b.1 == r[1]) {
                    Some(b) => b.2 = b.2.max(p),
                    None => best.push((r[0].clone(), r[1].clone(), p)),
                }
            }
            t.max.extend(
                best.into_iter()
                    .map(|(i, c, p)| format!("{i},{c},{}", fmt12(p))),
            );
        }
        CAMPAIGN_SUMMARY_HEADER => t.effective.extend(rows.iter().map(|r| r[..5].join(","))),
        GAP_TABLE_HEADER => t.gaps.extend(rows.iter().map(|r| r.join(","))),
        h if h.starts_with("s,lambda_0") => {
            for r in &rows {
                for (level, e) in r[1..].iter().enumerate() {
                    t.levels.push(format!("{src},{},{level},{e}", r[0]));
                }
            }
        }
        _ => {}
    }
}

fn num(v: &Value) -> Option<f64> {
    v.as_f64()
}

/// `P(T)` at a time recorded in a sweep result.
fn sweep_p(result: &Value, time: f64) -> Option<f64> {
    let points = result["grid"]
        .as_array()?
        .iter()
        .chain(result["refined"].as_array()?.iter());
    let from_ref = (num(&result["t_ref"]) == Some(time))
        .then(|| num(&result["p_ref"]))
        .flatten();
    points
        .filter(|p| num(&p["total_time"]) == Some(time))
        .find_map(|p| num(&p["success_probability"]))
        .or(from_ref)
}

fn ingest_json(path: &Path, a: &ReportArgs, t: &mut Tables) {
    let Ok(text) = fs::read_to_string(path) else {
        return;
    };
    let Ok(v) = serde_json::from_str::<Value>(&text) else {
        return;
    };
    if v["manifest"].as_str() == Some(&format!("{STEM}.manifest.json")) {
        return;
    }
    let instance = v["instance"].as_str().unwrap_or("?");
    let r = &v["result"];
    match v["kind"].as_str() {
        Some("sweep") => {
            if let (Some(tm), Some(pm)) = (num(&r["t_max"]), num(&r["p_at_tmax"])) {
                let pr = sweep_p(r, a.t_ref);
                let ratio = pr.map(|p| fmt12(pm / p)).unwrap_or_default();
                let pr_s = pr.map(fmt12).unwrap_or_default();
                t.tmax.push(format!(
                    "{instance},{tm},{},{},{pr_s},{ratio}",
                    fmt12(pm),
                    a.t_ref
                ));
            }
            if let (Some(pf), Some(pr)) = (sweep_p(r, a.fixed_time), sweep_p(r, a.t_ref)) {
                t.fixed.push(format!(
                    "{instance},{},{},{},{}",
                    a.fixed_time,
                    fmt12(pf),
                    fmt12(pr),
                    fmt12(pf / pr)
                ));
            }
        }
        Some("excited") => {
            if let (Some(tt), Some(avg), Some(max), Some(g)) = (
                num(&r["total_time"]),
                num(&r["average"]),
                num(&r["maximum"]),
                num(&r["ground_start"]),
            ) {
                let total = g + r["per_qubit"]
                    .as_array()
                    .map(|p| p.iter().filter_map(num).sum())
                    .unwrap_or(0.0);
                t.excited.push(format!(
                    "{instance},{tt},{},{},{},{}",
                    fmt12(avg),
                    fmt12(max),
                    fmt12(g),
                    fmt12(total)
                ));
            }
        }
        _ => {}
    }
}

const GNUPLOT: &[(&str, &str)] = &[
    ("success_distribution", "set xlabel 'P(T_ref)'; set ylabel 'count'; bin(x)=0.02*floor(x/0.02); plot f using (bin($2)):(1.0) smooth freq with boxes notitle"),
    ("success_vs_time", "set xlabel 'T'; set ylabel 'P(T)'; plot f using 2:3 with linespoints notitle"),
    ("lowest_levels", "set xlabel 's'; set ylabel 'energy'; plot f using 2:4:3 with points lc variable notitle"),
    ("energy_expectation", "set xlabel 's'; set ylabel '<H>'; plot f using 3:4 with lines notitle"),
    ("eigenstate_overlaps", "set xlabel 's'; set ylabel 'overlap'; plot f using 2:3 with lines title 'ground', f using 2:4 with lines title 'first excited'"),
    ("tmax_improvement", "set xlabel 'P(T_ref)'; set ylabel 'P(T_max)/P(T_ref)'; set logscale xy; plot f using 5:6 with points notitle; unset logscale"),
    ("fixed_time_improvement", "set xlabel 'P(T_ref)'; set ylabel 'ratio'; set logscale xy; plot f using 4:5 with points notitle; unset logscale"),
    ("excited_success", "set xlabel 'instance'; set ylabel 'P'; plot f using 0:3 with points title 'average', f using 0:4 with points title 'maximum'"),
    ("pathchange_trials", "set xlabel 'log10 P'; set ylabel 'count'; bin(x)=0.25*floor(x/0.25); plot f using (bin(log10($5))):(1.0) smooth freq with boxes notitle"),
    ("pathchange_max", "set xlabel 'max P'; set ylabel 'count'; bin(x)=0.05*floor(x/0.05); plot f using (bin($3)):(1.0) smooth freq with boxes notitle"),
    ("pathchange_effective", "set xlabel 'campaign'; set ylabel '1 - chi'; plot f using 0:5 with points notitle"),
    ("gap_vs_success", "set xlabel 'g_min'; set ylabel 'P'; set logscale xy; plot f using 6:5 with points notitle; unset logscale"),
];

pub fn report(out: &Path, a: &ReportArgs) -> CliResult<()> {
    let mut run = Run::start("report", a, None, out, STEM)?;
    let root = a.input.clone().unwrap_or_else(|| out.to_path_buf());
    if !root.is_dir() {
        return Err(io_error(
            &root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input directory not found"),
        ));
    }
    let mut t = Tables::default();
    let mut seen = 0usize;
    let files = walkdir::WalkDir::new(&root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok());
    run.stage("scan", || {
        for e in files.filter(|e| e.file_type().is_file()) {
            let p = e.path();
            let before = t.total();
            match p.extension().and_then(|x| x.to_str()) {
                Some("csv") => ingest_delimited(&root, p, &mut t),
                Some("json") => ingest_json(p, a, &mut t),
                _ => {}
            }
            seen += usize::from(t.total() > before);
        }
    });
    run.input(&root);
    if seen == 0 {
        eprintln!(
            "warning: no recognised inputs under {}; writing empty tables",
            root.display()
        );
    }

    let tables = [
        (
            Table::new("success_distribution", "instance_id,p_ref"),
            t.distribution,
        ),
        (
            Table::new("success_vs_time", "source,T,success_probability"),
            t.sweep,
        ),
        (
            Table::new("lowest_levels", "source,s,level,energy"),
            t.levels,
        ),
        (
            Table::new("energy_expectation", "source,t,s,energy_expectation"),
            t.energy,
        ),
        (
            Table::new(
                "eigenstate_overlaps",
                "source,s,overlap_ground,overlap_first_excited",
            ),
            t.overlaps,
        ),
        (
            Table::new(
                "tmax_improvement",
                "instance,t_max,p_tmax,t_ref,p_ref,improvement",
            ),
            t.tmax,
        ),
        (
            Table::new(
                "fixed_time_improvement",
                "instance,fixed_time,p_fixed,p_ref,improvement",
            ),
            t.fixed,
        ),
        (
            Table::new(
                "excited_success",
                "instance,T,average,maximum,ground_start,total",
            ),
            t.excited,
        ),
        (
            Table::new("pathchange_trials", CAMPAIGN_TRIAL_HEADER),
            t.trials,
        ),
        (
            Table::new("pathchange_max", "instance_id,category,max_success"),
            t.max,
        ),
        (
            Table::new(
                "pathchange_effective",
                "instance_id,category,trials,chi,effective_success",
            ),
            t.effective,
        ),
        (Table::new("gap_vs_success", GAP_TABLE_HEADER), t.gaps),
    ];
    let mut plotted = Vec::new();
    for (mut table, rows) in tables {
        table.rows = rows;
        run.csv(&out.join(format!("{}.csv", table.name)), |w| {
            writeln!(w, "{}", table.header)?;
            table.rows.iter().try_for_each(|r| writeln!(w, "{r}"))
        })?;
        println!("{:<24} {} rows", table.name, table.rows.len());
        if !table.rows.is_empty() {
            plotted.push(table.name);
        }
    }
    if a.gnuplot {
        let path = out.join("report.gp");
        run.output(&path)?;
        let mut script = format!("# manifest: {STEM}.manifest.json\nset datafile separator ','\nset terminal pngcairo size 900,600\n");
        for name in plotted {
            let cmd = GNUPLOT
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, c)| *c)
                .unwrap_or_default();
            script += &format!("\nf = '{name}.csv'\nset output '{name}.png'\nreset; set datafile separator ','\n{cmd}\n");
        }
        fs::write(&path, script).map_err(|e| io_error(&path, e))?;
    }
    run.finish()
}

impl Tables {
    fn total(&self) -> usize {
        [
            &self.distribution,
            &self.sweep,
            &self.levels,
            &self.energy,
            &self.overlaps,
            &self.tmax,
            &self.fixed,
            &self.excited,
            &self.trials,
            &self.max,
            &self.effective,
            &self.gaps,
        ]
        .iter()
        .map(|v| v.len())
        .sum()
    }
}
