use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qaa_core::evolution::{evolve, IntegratorConfig, ObservationPlan};
use qaa_core::sat::{generate_instance, Instance};
use qaa_core::spectrum::fmt12;
use qaa_core::{initial_state, Schedule};

fn qaa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qaa"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("QAA_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "failed: {}", stderr(&o));
    o
}

/// Writes a certified unique-optimum instance and returns its path.
fn unique_instance_file(dir: &Path, n: usize, m: usize) -> (PathBuf, Instance) {
    let mut seed = 7;
    loop {
        let mut inst = generate_instance(n, m, seed).unwrap();
        if inst.certify_optimum().unwrap().multiplicity == 1 {
            let p = dir.join(format!("inst_n{n}.json"));
            inst.write_file(&p).unwrap();
            return (p, inst);
        }
        seed += 1;
    }
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(qaa(
            d.path(),
            &[
                "generate", "--n", "6", "--m", "12", "--count", "4", "--seed", "11",
            ],
        ));
    }
    for i in 0..4 {
        let name = format!("instance_{i:06}.json");
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap()
        );
    }
    assert_eq!(
        fs::read(a.path().join("generate_summary.csv")).unwrap(),
        fs::read(b.path().join("generate_summary.csv")).unwrap()
    );
    assert_eq!(data_rows(&a.path().join("generate_summary.csv")).len(), 4);
}

#[test]
fn impossible_clause_count_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = qaa(d.path(), &["generate", "--n", "2", "--m", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).starts_with("error[invalid-argument]:"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn zero_time_gives_uniform_overlap() {
    let d = tempfile::tempdir().unwrap();
    let (p, _) = unique_instance_file(d.path(), 4, 7);
    let o = ok(qaa(d.path(), &["evolve", p.to_str().unwrap(), "-T", "0"]));
    assert_eq!(stdout(&o).trim(), fmt12(1.0 / 16.0));
}

#[test]
fn evolve_matches_library_exactly() {
    let d = tempfile::tempdir().unwrap();
    let (p, inst) = unique_instance_file(d.path(), 3, 5);
    let o = ok(qaa(d.path(), &["evolve", p.to_str().unwrap(), "-T", "7.5"]));
    let lib = evolve(
        &Schedule::new(7.5).unwrap(),
        &inst.build_cost_vector().unwrap(),
        inst.target().unwrap(),
        &initial_state(3).unwrap(),
        &IntegratorConfig::default(),
        &ObservationPlan::none(),
    )
    .unwrap();
    assert_eq!(stdout(&o).trim(), fmt12(lib.success_probability));
}

#[test]
fn trajectory_and_sweep_tables() {
    let d = tempfile::tempdir().unwrap();
    let (p, _) = unique_instance_file(d.path(), 4, 7);
    let p = p.to_str().unwrap();
    ok(qaa(
        d.path(),
        &["evolve", p, "-T", "5", "--trajectory", "11", "--overlaps"],
    ));
    let rows = data_rows(&d.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.split(',').all(|c| !c.is_empty())));

    ok(qaa(
        d.path(),
        &["sweep", p, "--t-min", "1", "--t-max", "5", "--t-ref", "20"],
    ));
    assert_eq!(data_rows(&d.path().join("sweep.csv")).len(), 5);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("sweep.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["kind"], "sweep");
    assert_eq!(summary["manifest"], "sweep.manifest.json");
    assert_eq!(summary["result"]["t_ref"], 20.0);
}

#[test]
fn stub_campaign_with_certain_trial_has_zero_chi() {
    let d = tempfile::tempdir().unwrap();
    let (p, _) = unique_instance_file(d.path(), 4, 7);
    ok(qaa(
        d.path(),
        &[
            "pathchange",
            p.to_str().unwrap(),
            "--category",
            "diagonal",
            "--stub-successes",
            "1,0.5",
        ],
    ));
    let rows = data_rows(&d.path().join("pathchange_summary.csv"));
    assert_eq!(rows.len(), 1);
    let cols: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(cols[1], "diagonal");
    assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(cols[4].parse::<f64>().unwrap(), 1.0);
    assert_eq!(data_rows(&d.path().join("pathchange_trials.csv")).len(), 2);
}

#[test]
fn empty_report_warns_and_succeeds() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = ok(qaa(
        out.path(),
        &[
            "report",
            "--input",
            input.path().to_str().unwrap(),
            "--gnuplot",
        ],
    ));
    assert!(stderr(&o).contains("warning"));
    let tables: Vec<_> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(tables.len(), 12);
    for t in tables {
        assert!(data_rows(&t).is_empty(), "{}", t.display());
    }
    assert!(out.path().join("report.gp").exists());
}

#[test]
fn report_collects_experiment_outputs() {
    let d = tempfile::tempdir().unwrap();
    let (p, _) = unique_instance_file(d.path(), 4, 7);
    let p = p.to_str().unwrap();
    ok(qaa(
        d.path(),
        &["sweep", p, "--t-min", "1", "--t-max", "10", "--t-ref", "20"],
    ));
    ok(qaa(d.path(), &["excited", p, "-T", "5"]));
    ok(qaa(
        d.path(),
        &["spectrum", p, "--points", "21", "--levels", "3"],
    ));
    ok(qaa(
        d.path(),
        &["report", "--fixed-time", "10", "--t-ref", "20"],
    ));
    assert_eq!(data_rows(&d.path().join("success_vs_time.csv")).len(), 10);
    assert_eq!(data_rows(&d.path().join("lowest_levels.csv")).len(), 21 * 3);
    assert_eq!(data_rows(&d.path().join("excited_success.csv")).len(), 1);
    assert_eq!(
        data_rows(&d.path().join("fixed_time_improvement.csv")).len(),
        1
    );
    // A second pass must not ingest its own tables.
    ok(qaa(
        d.path(),
        &["report", "--fixed-time", "10", "--t-ref", "20"],
    ));
    assert_eq!(data_rows(&d.path().join("success_vs_time.csv")).len(), 10);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let (p, _) = unique_instance_file(d.path(), 4, 7);
    let p = p.to_str().unwrap();

    let o = qaa(d.path(), &["evolve", "missing.json", "-T", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[io]:"));

    let bad = d.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let o = qaa(d.path(), &["evolve", bad.to_str().unwrap(), "-T", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[format]:"));

    let o = qaa(d.path(), &["evolve", p, "-T", "1", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[usage]:"));

    let o = qaa(d.path(), &["--threads", "0", "evolve", p, "-T", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = qaa(d.path(), &["evolve", p, "-T", "50", "--max-steps", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[non-convergence]:"));

    let mut degenerate = generate_instance(3, 12, 0).unwrap();
    degenerate.certify_optimum().unwrap();
    let dp = d.path().join("degenerate.json");
    degenerate.write_file(&dp).unwrap();
    let o = qaa(d.path(), &["evolve", dp.to_str().unwrap(), "-T", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let raw = d.path().join("raw.json");
    generate_instance(4, 7, 1)
        .unwrap()
        .write_file(&raw)
        .unwrap();
    let o = qaa(d.path(), &["evolve", raw.to_str().unwrap(), "-T", "1"]);
    assert!(stderr(&o).contains("qaa certify"));
}

#[test]
fn inputs_are_never_modified() {
    let d = tempfile::tempdir().unwrap();
    let (p, _) = unique_instance_file(d.path(), 4, 7);
    let before = fs::read(&p).unwrap();
    let ps = p.to_str().unwrap();
    let o = qaa(d.path(), &["certify", ps, "--out", ps]);
    assert_eq!(o.status.code(), Some(2));
    ok(qaa(d.path(), &["certify", ps]));
    ok(qaa(d.path(), &["meanfield", ps]));
    assert_eq!(fs::read(&p).unwrap(), before);
    assert!(d.path().join("inst_n4.certified.json").exists());
}

#[test]
fn every_table_names_an_existing_manifest() {
    let d = tempfile::tempdir().unwrap();
    let (p, _) = unique_instance_file(d.path(), 4, 7);
    let p = p.to_str().unwrap();
    ok(qaa(
        d.path(),
        &["evolve", p, "-T", "3", "--trajectory", "5"],
    ));
    ok(qaa(d.path(), &["meanfield", p]));
    ok(qaa(
        d.path(),
        &[
            "mine",
            "--n",
            "5",
            "--m",
            "8",
            "--t-ref",
            "5",
            "--cutoff",
            "0.5",
            "--max-instances",
            "6",
        ],
    ));
    for e in fs::read_dir(d.path()).unwrap() {
        let path = e.unwrap().path();
        if path.extension().is_some_and(|x| x == "csv") {
            let text = fs::read_to_string(&path).unwrap();
            let manifest = text
                .lines()
                .find_map(|l| l.strip_prefix("# manifest: "))
                .unwrap_or_else(|| panic!("{} has no manifest line", path.display()));
            let m: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(d.path().join(manifest)).unwrap())
                    .unwrap();
            assert!(m["stage_timings"].as_array().is_some());
            assert!(m["outputs"].as_array().unwrap().iter().any(|o| o
                .as_str()
                .unwrap()
                .ends_with(path.file_name().unwrap().to_str().unwrap())));
        }
    }
}

#[test]
fn out_dir_comes_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qaa"))
        .args(["generate", "--n", "4", "--m", "5"])
        .env("QAA_OUT_DIR", d.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.path().join("instance_000000.json").exists());
    assert!(d.path().join("generate.manifest.json").exists());
}
