mod common;

use common::*;
use proptest::prelude::*;

use qaa_core::hamiltonian::{sample_extra, Category, Schedule};
use qaa_core::sat::Instance;
use qaa_core::spectrum::{gap_scan, lowest_eigenpairs, write_spectrum_csv, GapScanConfig};
use qaa_core::{initial_state, CostVector};

#[test]
fn lowest_three_match_dense_diagonalization() {
    let mut r = rng(21);
    for trial in 0..20u64 {
        let n = 2 + (trial % 3) as usize;
        let (inst, cost) = unique_instance(n, 2 * n - 1, trial);
        let cat = Category::ALL[trial as usize % 3];
        let extra = sample_extra(&inst, cat, 500 + trial).unwrap();
        let sched = Schedule::new(1.0).unwrap().with_extra(extra.clone());
        let path = sched.path(&cost).unwrap();
        let s: f64 = rand::Rng::random(&mut r);
        let got = lowest_eigenpairs(&path, s, 3, 1e-10).unwrap();
        let want = Dense::new(n, cost.values(), Some(&extra)).eigenvalues(s);
        for j in 0..3 {
            assert!(
                (got.eigenvalues[j] - want[j]).abs() < 1e-9,
                "trial {trial} level {j}"
            );
        }
        assert!(got.residuals.iter().all(|&x| x < 1e-10));
    }
}

#[test]
fn eigenvectors_are_orthonormal_with_small_residuals() {
    let (inst, cost) = unique_instance(6, 14, 2);
    let extra = sample_extra(&inst, Category::Complex, 8).unwrap();
    let sched = Schedule::new(1.0).unwrap().with_extra(extra);
    let path = sched.path(&cost).unwrap();
    let slice = lowest_eigenpairs(&path, 0.45, 3, 1e-9).unwrap();
    let vecs = slice.eigenvectors.as_ref().unwrap();
    for (i, a) in vecs.iter().enumerate() {
        for (j, b) in vecs.iter().enumerate() {
            let ip = a.inner(b).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip.norm() - want).abs() < 1e-8);
        }
        let hv = qaa_core::hamiltonian::apply_ht(&sched, &cost, 0.45, a).unwrap();
        let res: f64 = hv
            .amplitudes()
            .iter()
            .zip(a.amplitudes())
            .map(|(h, v)| (h - v * slice.eigenvalues[i]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-8);
    }
    for w in slice.eigenvalues.windows(2) {
        assert!(w[0] <= w[1]);
    }
}

#[test]
fn endpoint_spectra() {
    let (inst, cost) = unique_instance(5, 12, 4);
    let sched = Schedule::new(1.0).unwrap();
    let path = sched.path(&cost).unwrap();
    let s0 = lowest_eigenpairs(&path, 0.0, 2, 1e-10).unwrap();
    assert!(s0.eigenvalues[0].abs() < 1e-10);
    assert!((s0.eigenvalues[1] - 1.0).abs() < 1e-10);
    let ground = &s0.eigenvectors.as_ref().unwrap()[0];
    assert!((ground.inner(&initial_state(5).unwrap()).unwrap().norm() - 1.0).abs() < 1e-9);

    let s1 = lowest_eigenpairs(&path, 1.0, 2, 1e-10).unwrap();
    let opt = inst.optimum().unwrap();
    assert_eq!(s1.eigenvalues[0], opt.cost_min);
    let mut sorted = cost.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    assert!((s1.eigenvalues[1] - sorted[1]).abs() < 1e-10);
}

#[test]
fn gap_scan_matches_refined_dense_scan() {
    for trial in 0..6u64 {
        let n = 2 + (trial % 3) as usize;
        let (inst, cost) = unique_instance(n, 2 * n - 1, 90 + trial);
        let extra = sample_extra(&inst, Category::ALL[trial as usize % 3], trial).unwrap();
        let sched = Schedule::new(1.0).unwrap().with_extra(extra.clone());
        let path = sched.path(&cost).unwrap();
        let got = gap_scan(&path, &GapScanConfig::default()).unwrap();
        let (want, _) = Dense::new(n, cost.values(), Some(&extra)).gap_min(2001);
        assert!(
            (got.g_min - want).abs() < 1e-6,
            "trial {trial}: {} vs {want}",
            got.g_min
        );
        let coarse = got
            .slices
            .iter()
            .filter_map(|s| s.gap())
            .fold(f64::INFINITY, f64::min);
        assert!(got.g_min <= coarse);
    }
}

#[test]
fn grover_gap_matches_dense_scan() {
    let n = 6;
    let mut inst = Instance::grover(n, 37).unwrap();
    inst.certify_optimum().unwrap();
    let cost = inst.build_cost_vector().unwrap();
    let sched = Schedule::new(1.0).unwrap();
    let path = sched.path(&cost).unwrap();
    let got = gap_scan(&path, &GapScanConfig::default()).unwrap();
    let (want, s_want) = Dense::new(n, cost.values(), None).gap_min(2001);
    assert!((got.g_min - want).abs() < 1e-6);
    assert!((got.s_at_min - s_want).abs() < 1e-3);
}

#[test]
fn single_qubit_gap_closed_form() {
    // Gap of the 2x2 path is sqrt(s^2 + (1 - s)^2), smallest at s = 1/2.
    let cost = CostVector::from_values(1, vec![0.0, 1.0]).unwrap();
    let sched = Schedule::new(1.0).unwrap();
    let path = sched.path(&cost).unwrap();
    let got = gap_scan(&path, &GapScanConfig::default()).unwrap();
    assert!((got.g_min - 0.5f64.sqrt()).abs() < 1e-8);
    assert!((got.s_at_min - 0.5).abs() < 1e-4);
    for slice in &got.slices {
        let s = slice.s;
        let want = (s * s + (1.0 - s) * (1.0 - s)).sqrt();
        assert!((slice.gap().unwrap() - want).abs() < 1e-8);
    }
}

#[test]
fn degenerate_optimum_has_zero_gap() {
    let mut inst = Instance::explicit(3, vec![2.0, 0.0, 1.0, 3.0, 0.0, 2.0, 1.0, 1.0]).unwrap();
    inst.certify_optimum().unwrap();
    let cost = inst.build_cost_vector().unwrap();
    let sched = Schedule::new(1.0).unwrap();
    let path = sched.path(&cost).unwrap();
    let got = gap_scan(&path, &GapScanConfig::default()).unwrap();
    assert!(got.g_min < 1e-8);
    assert!(got.slices.last().unwrap().gap().unwrap() < 1e-8);
}

#[test]
fn rejects_small_grid_and_bad_k() {
    let cost = CostVector::from_values(2, vec![0.0, 1.0, 1.0, 2.0]).unwrap();
    let sched = Schedule::new(1.0).unwrap();
    let path = sched.path(&cost).unwrap();
    let cfg = GapScanConfig {
        grid_points: 10,
        ..GapScanConfig::default()
    };
    assert!(gap_scan(&path, &cfg).is_err());
    assert!(lowest_eigenpairs(&path, 0.5, 0, 1e-10).is_err());
    assert!(lowest_eigenpairs(&path, 0.5, 5, 1e-10).is_err());
    assert!(lowest_eigenpairs(&path, 1.5, 1, 1e-10).is_err());
}

#[test]
fn spectrum_csv_layout() {
    let cost = CostVector::from_values(2, vec![0.0, 1.0, 1.0, 2.0]).unwrap();
    let sched = Schedule::new(1.0).unwrap();
    let path = sched.path(&cost).unwrap();
    let slices: Vec<_> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&s| lowest_eigenpairs(&path, s, 3, 1e-10).unwrap())
        .collect();
    let mut out = Vec::new();
    write_spectrum_csv(&mut out, &slices).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "s,lambda_0,lambda_1,lambda_2");
    assert_eq!(lines.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eigenvalues_agree_with_dense(seed in 0u64..10_000, cat in 0usize..3, s in 0.0f64..=1.0) {
        let n = 4;
        let (inst, cost) = unique_instance(n, 9, seed);
        let extra = sample_extra(&inst, Category::ALL[cat], seed).unwrap();
        let sched = Schedule::new(1.0).unwrap().with_extra(extra.clone());
        let path = sched.path(&cost).unwrap();
        let got = lowest_eigenpairs(&path, s, 3, 1e-10).unwrap();
        let want = Dense::new(n, cost.values(), Some(&extra)).eigenvalues(s);
        for j in 0..3 {
            prop_assert!((got.eigenvalues[j] - want[j]).abs() < 1e-9);
        }
    }
}
