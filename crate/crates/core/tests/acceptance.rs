//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts it.

mod common;

use std::time::Instant;

use coded_incentives::coded::{self, DecodeStatus};
use coded_incentives::experiments::{run_fig4, run_fig5, run_fig7, ExperimentName, ExperimentSpec};
use coded_incentives::mechanism::{
    brute_force_complete, solve_complete, solve_cost_only, solve_incomplete, PlatformConfig,
};
use coded_incentives::numerics::{lambert_w_minus1, solve_lambda, Tolerance};
use coded_incentives::runtime::{
    assign_loads_hetero, expected_runtime_hetero, monte_carlo_runtime, LoadAssignment,
};
use coded_incentives::verify_ir_ic;
use coded_incentives::worker::{build_population, reference_types, WorkerType};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} [{name}] {}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} [{name}] failed: {detail}");
}

#[test]
fn criterion_01_complete_solver_matches_subset_enumeration() {
    let start = Instant::now();
    let mut rng = common::stream(1);
    let mut mismatches = Vec::new();
    for i in 0..1000 {
        let m = rng.random_range(2..=12);
        let pop = common::random_population(&mut rng, m);
        let cfg = PlatformConfig::new(
            common::log_uniform(&mut rng, 1.0, 1e4),
            common::log_uniform(&mut rng, 0.1, 10.0),
            1000.0,
        )
        .unwrap();
        let solved = solve_complete(&pop, &cfg).unwrap();
        let (best, _) = brute_force_complete(&pop, &cfg).unwrap();
        if solved.targeted != best {
            mismatches.push((i, solved.targeted, best));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "closed-form selection equals subset enumeration",
        mismatches.is_empty() && secs < 60.0,
        &format!(
            "{} mismatches in 1000 instances, {secs:.2}s {:?}",
            mismatches.len(),
            mismatches.first()
        ),
    );
}

#[test]
fn criterion_02_solver_outputs_are_ir_and_ic() {
    let mut rng = common::stream(2);
    let mut failures = Vec::new();
    for i in 0..1000 {
        let m = rng.random_range(2..=12);
        let cfg = PlatformConfig::new(
            common::log_uniform(&mut rng, 1.0, 1e4),
            common::log_uniform(&mut rng, 0.1, 10.0),
            1000.0,
        )
        .unwrap();
        let pop = common::random_population(&mut rng, m);
        let homogeneous = common::random_homogeneous(&mut rng, m, 500);
        let mechs = [
            solve_complete(&pop, &cfg).unwrap(),
            solve_incomplete(&pop, &cfg).unwrap(),
            solve_cost_only(&homogeneous, &cfg).unwrap(),
        ];
        for (j, mech) in mechs.iter().enumerate() {
            let p = if j == 2 { &homogeneous } else { &pop };
            let r = verify_ir_ic(mech, p).unwrap();
            if !r.truthful {
                failures.push(format!("instance {i} {}: {r}", mech.scenario));
            }
        }
    }
    report(
        2,
        "IR and IC for every solver output",
        failures.is_empty(),
        &format!(
            "{} violating mechanisms out of 3000 {:?}",
            failures.len(),
            failures.first()
        ),
    );
}

#[test]
fn criterion_03_order_statistic_runtime() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, &(n, k)) in [(5u64, 3u64), (10, 7), (50, 25), (100, 60)]
        .iter()
        .enumerate()
    {
        let (mu, a, r) = (20.0, 0.05, 600.0);
        let pop = build_population(vec![WorkerType::new(1, 1.0, mu, a, n).unwrap()]).unwrap();
        let assignment = LoadAssignment::mds_uniform(&[1], k as usize, r);
        let est = monte_carlo_runtime(&pop, &assignment, 100_000, 300 + i as u64).unwrap();
        let exact = (r / k as f64) * (a + common::harmonic_tail(n, k) / mu);
        let z = (est.expected_runtime - exact) / est.stderr.unwrap();
        pass &= z.abs() <= 3.0;
        lines.push(format!("({n},{k}) z={z:+.2}"));
    }
    report(
        3,
        "MDS runtime equals k-th order statistic",
        pass,
        &lines.join(", "),
    );
}

#[test]
fn criterion_04_asymptotic_runtime_at_5000_workers() {
    let pop = build_population(reference_types(500)).unwrap();
    let targeted: Vec<usize> = pop.ids().collect();
    let r = 1000.0;
    let assignment = assign_loads_hetero(&pop, &targeted, r).unwrap();
    let analytic = expected_runtime_hetero(&pop, &targeted, r)
        .unwrap()
        .expected_runtime;
    let est = monte_carlo_runtime(&pop, &assignment, 500, 4).unwrap();
    let rel = (est.expected_runtime - analytic).abs() / analytic;
    report(
        4,
        "large-population runtime",
        rel <= 0.02,
        &format!(
            "Monte Carlo {:.6} vs analytic {analytic:.6}, relative gap {rel:.2e}",
            est.expected_runtime
        ),
    );
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn criterion_05_targeted_types_near_1400() {
    let spec = ExperimentSpec::new(ExperimentName::Fig4);
    let t = run_fig4(&spec).unwrap();
    let n = t.column("N").unwrap();
    let complete = t.column("n_complete").unwrap();
    let incomplete = t.column("n_incomplete").unwrap();
    let window: Vec<usize> = (0..n.len())
        .filter(|&i| (1200.0..=1600.0).contains(&n[i]))
        .collect();
    let anchor = window
        .iter()
        .any(|&i| complete[i] == 3.0 && incomplete[i] == 4.0);
    let at = n.iter().position(|&x| x == 1400.0).unwrap();
    let monotone = nonincreasing(&complete) && nonincreasing(&incomplete);
    report(
        5,
        "targeted types near N=1400",
        anchor && monotone,
        &format!(
            "at N=1400 complete={} incomplete={}; (3,4) found in N∈[1200,1600]: {anchor}; both nonincreasing: {monotone}",
            complete[at], incomplete[at]
        ),
    );
}

#[test]
fn criterion_06_information_cost_gap() {
    let spec = ExperimentSpec::new(ExperimentName::Fig5);
    let t = run_fig5(&spec).unwrap();
    let n = t.column("N").unwrap();
    let gap = t.column("gap").unwrap();
    let cost = t.column("cost_complete").unwrap();
    let tol: Vec<f64> = cost.iter().map(|c| 1e-9 * c).collect();
    let nonnegative = gap.iter().zip(&tol).all(|(g, t)| *g >= -t);
    // first N from which the gap stays at zero
    let zero_from = (0..n.len())
        .find(|&i| (i..n.len()).all(|j| gap[j].abs() <= tol[j]))
        .map(|i| n[i]);
    let threshold_ok = zero_from.is_some_and(|z| (3000.0..=4000.0).contains(&z));
    let increases: Vec<f64> = (1..n.len())
        .filter(|&i| gap[i] > gap[i - 1] + tol[i])
        .map(|i| n[i])
        .collect();
    let non_monotone = !increases.is_empty();
    report(
        6,
        "cost of private information",
        nonnegative && threshold_ok && non_monotone,
        &format!(
            "gap ≥ 0: {nonnegative}; zero from N={zero_from:?}; local increases at {increases:?}"
        ),
    );
}

#[test]
fn criterion_07_type_uncertainty_gap_vanishes() {
    let mut spec = ExperimentSpec::new(ExperimentName::Fig7);
    spec.type_probabilities = Some(vec![0.1; 10]);
    spec.replications = 200;
    let t = run_fig7(&spec).unwrap();
    let n = t.column("N").unwrap();
    let mean = t.column("gap_mean").unwrap();
    let stderr = t.column("gap_stderr").unwrap();
    let outside: Vec<String> = (0..n.len())
        .filter(|&i| n[i] > 400.0 && mean[i].abs() > 2.0 * stderr[i])
        .map(|i| format!("N={} gap={:.4}±{:.4}", n[i], mean[i], stderr[i]))
        .collect();
    report(
        7,
        "type-uncertainty gap within 2 stderr of 0 for N>400",
        outside.is_empty(),
        &format!(
            "{} of {} points outside: {outside:?}",
            outside.len(),
            n.iter().filter(|&&x| x > 400.0).count()
        ),
    );
}

#[test]
fn criterion_08_mds_decode() {
    // integer data: every operation below is exact in floating point
    let a = DMatrix::from_row_slice(
        4,
        3,
        &[1.0, 2.0, 0.0, -1.0, 3.0, 1.0, 2.0, 0.0, 5.0, 4.0, -2.0, 1.0],
    );
    let x = DVector::from_vec(vec![2.0, -1.0, 3.0]);
    let task = coded::encode_with_generator(&a, coded::three_worker_generator()).unwrap();
    let y2 = task.compute(1, &x).unwrap();
    let y3 = task.compute(2, &x).unwrap();
    let mut expected = DVector::zeros(4);
    expected.rows_mut(0, 2).copy_from(&(&y3 - &y2));
    expected.rows_mut(2, 2).copy_from(&y2);
    let DecodeStatus::Decoded(got) = coded::mds_decode(&task, &[(1, y2), (2, y3)]).unwrap() else {
        panic!("two results should decode");
    };
    let fig_ok = got == expected && got == &a * &x;

    let mut rng = common::stream(8);
    let mut worst: f64 = 0.0;
    let mut subsets = 0;
    for (n, k) in [(5usize, 3usize), (8, 5), (12, 8)] {
        let a = DMatrix::from_fn(24, 6, |_, _| rng.random_range(-1.0..1.0));
        let x = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let direct = &a * &x;
        let task = coded::mds_encode(&a, n, k).unwrap();
        let results: Vec<_> = (0..n).map(|i| task.compute(i, &x).unwrap()).collect();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let got: Vec<_> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| (i, results[i].clone()))
                .collect();
            let DecodeStatus::Decoded(v) = coded::mds_decode(&task, &got).unwrap() else {
                panic!("k results should decode");
            };
            worst = worst.max((v - &direct).amax());
            subsets += 1;
        }
    }
    report(
        8,
        "MDS decoding",
        fig_ok && worst <= 1e-6,
        &format!("three-worker example exact: {fig_ok}; {subsets} subsets, max error {worst:.2e}"),
    );
}

#[test]
fn criterion_09_recovery_threshold_is_near_grid_optimum() {
    let mut rng = common::stream(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=8);
        let pop = common::random_homogeneous(&mut rng, m, 500);
        let cfg = PlatformConfig::new(
            common::log_uniform(&mut rng, 1.0, 1e4),
            common::log_uniform(&mut rng, 0.1, 10.0),
            1000.0,
        )
        .unwrap();
        let mech = solve_cost_only(&pop, &cfg).unwrap();
        let n = mech.participants(&pop).unwrap();
        assert!(n <= 500);
        let w = pop.worker(mech.threshold_type).unwrap();
        let scale = cfg.gamma_time + cfg.gamma_pay * n as f64 * w.cost_rate;
        let grid_min = (1..=n)
            .map(|k| {
                scale * (1000.0 / k as f64) * (w.startup + common::harmonic_tail(n, k) / w.speed)
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(mech.expected_cost / grid_min - 1.0);
    }
    report(
        9,
        "recovery threshold cost vs integer grid",
        worst <= 0.005,
        &format!("worst excess over grid minimum {:.3e}", worst),
    );
}

#[test]
fn criterion_10_comparative_statics() {
    let mut rng = common::stream(10);
    let g1: Vec<f64> = (0..20).map(|i| 10f64.powf(4.0 * i as f64 / 19.0)).collect();
    let g2: Vec<f64> = (0..20)
        .map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / 19.0))
        .collect();
    let mut violations = 0;
    for _ in 0..50 {
        let m = rng.random_range(2..=12);
        let pop = common::random_population(&mut rng, m);
        for solve in [solve_complete, solve_incomplete] {
            let grid: Vec<Vec<usize>> = g1
                .iter()
                .map(|&a| {
                    g2.iter()
                        .map(|&b| {
                            solve(&pop, &PlatformConfig::new(a, b, 1000.0).unwrap())
                                .unwrap()
                                .threshold_type
                        })
                        .collect()
                })
                .collect();
            for i in 0..20 {
                for j in 0..20 {
                    if i + 1 < 20 && grid[i + 1][j] < grid[i][j] {
                        violations += 1;
                    }
                    if j + 1 < 20 && grid[i][j + 1] > grid[i][j] {
                        violations += 1;
                    }
                }
            }
        }
    }
    report(
        10,
        "targeted set grows with time weight and shrinks with payment weight",
        violations == 0,
        &format!("{violations} violations over 50 populations"),
    );
}

#[test]
fn criterion_11_special_functions_match_bisection() {
    let mut rng = common::stream(11);
    let tol = Tolerance::default();
    let (mut worst_lambda, mut worst_w): (f64, f64) = (0.0, 0.0);
    for i in 0..10_000 {
        let mu = common::log_uniform(&mut rng, 0.1, 1000.0);
        let a = common::log_uniform(&mut rng, 1e-4, 1.0);
        let got = solve_lambda(mu, a, tol).unwrap();
        let want = common::lambda_bisection(mu, a);
        worst_lambda = worst_lambda.max((got - want).abs() / want);

        let x = if i % 2 == 0 {
            -(-1.0f64).exp() * rng.random_range(f64::EPSILON..1.0)
        } else {
            -10f64.powf(-rng.random_range(0.5..300.0))
        };
        let got = lambert_w_minus1(x, tol).unwrap();
        let want = common::lambert_bisection(x);
        worst_w = worst_w.max((got - want).abs() / want.abs());
    }
    report(
        11,
        "special functions vs bisection",
        worst_lambda <= 1e-9 && worst_w <= 1e-9,
        &format!("worst relative error: lambda {worst_lambda:.2e}, W₋₁ {worst_w:.2e}"),
    );
}
