//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured quantities. Run with
//! `cargo test -p masolve --test acceptance -- --nocapture` to see every
//! line; failures repeat the detail in the panic message.

use std::time::Instant;

use masolve::harness::{convergence_study, monotonicity_trials, stability_table};
use masolve::viscosity::{counterexample_flat_boundary, counterexample_gradient_blowup};
use masolve::{
    delta2, discrete_comparison_check, lookup, seeded_comparison_pair, solve_problem,
    stencil_pairs, SolveParams,
};

fn check(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("[{status}] {criterion}: {detail}");
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn criterion_1_quadratic_exactness() {
    let mut detail = String::new();
    let mut pass = true;
    for (key, n) in [("quad2d", 8usize), ("quad2d", 16), ("ma1d", 8)] {
        let problem = lookup(key).unwrap();
        let params = SolveParams::for_problem(problem);
        let start = Instant::now();
        let (sol, report) = solve_problem(problem, n, 1, &params).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        let exact = problem.exact.unwrap();
        let grid = sol.grid();
        let err = (0..grid.n_nodes())
            .map(|i| (sol.value(i) - exact(grid.node(i))).abs())
            .fold(0.0f64, f64::max);
        let ok = report.converged && err <= 10.0 * params.tol && elapsed < 5.0;
        pass &= ok;
        detail.push_str(&format!(
            "{key} n={n} err={err:.2e} (limit {:.0e}) in {elapsed:.2}s; ",
            10.0 * params.tol
        ));
    }
    check("criterion 1 quadratic exactness", pass, &detail);
}

#[test]
fn criterion_2_convergence_under_refinement() {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for key in ["exp2d", "cone2d"] {
        let problem = lookup(key).unwrap();
        let params = SolveParams::for_problem(problem);
        let table = convergence_study(problem, &[3, 4, 5, 6], 1, &params).unwrap();
        let infs: Vec<String> = table
            .rows
            .iter()
            .map(|r| format!("{:.4e}", r.err_inf))
            .collect();
        let strictly_decreasing = table
            .rows
            .windows(2)
            .all(|w| w[1].err_inf < w[0].err_inf);
        let probe_first = table.rows.first().unwrap().err_probe;
        let probe_last = table.rows.last().unwrap().err_probe;
        let probe_halved = probe_last < 0.5 * probe_first;
        pass &= strictly_decreasing && probe_halved;
        detail.push_str(&format!(
            "{key} err_inf={infs:?} strictly_decreasing={strictly_decreasing} \
             err_probe {probe_first:.3e}->{probe_last:.3e} halved={probe_halved}; "
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass &= elapsed < 300.0;
    detail.push_str(&format!("total {elapsed:.0}s"));
    check("criterion 2 convergence (pointwise refinement)", pass, &detail);
}

#[test]
fn criterion_3_scheme_monotonicity() {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for problem in masolve::registry() {
        let report = monotonicity_trials(problem, 7, 1000, 8, 1).unwrap();
        pass &= report.passes == report.trials;
        detail.push_str(&format!("{} {}/{}; ", problem.name, report.passes, report.trials));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass &= elapsed < 30.0;
    detail.push_str(&format!("total {elapsed:.1}s"));
    check("criterion 3 scheme monotonicity", pass, &detail);
}

#[test]
fn criterion_4_stability_bound() {
    let mut pass = true;
    let mut detail = String::new();
    for problem in masolve::registry() {
        let params = SolveParams::for_problem(problem);
        let table = stability_table(problem, &[3, 4, 5, 6], 1, &params).unwrap();
        let max = table
            .rows
            .iter()
            .map(|r| r.sup_norm)
            .fold(0.0f64, f64::max);
        pass &= table.bound_ok;
        detail.push_str(&format!(
            "{} max={max:.3} bound={:.3}; ",
            problem.name, table.bound
        ));
    }
    check("criterion 4 stability (uniform sup-norm bound)", pass, &detail);
}

#[test]
fn criterion_5_discrete_comparison() {
    let problem = lookup("quad2d").unwrap();
    let params = SolveParams::for_problem(problem);
    let (sol, _) = solve_problem(problem, 8, 1, &params).unwrap();
    let slack = 10.0 * params.tol;
    let mut passes = 0;
    for seed in 0..100u64 {
        let (sub, sup) = seeded_comparison_pair(problem, &sol, seed);
        match discrete_comparison_check(problem, &sub, &sup, 1, slack) {
            Ok(true) => passes += 1,
            Ok(false) => {}
            Err(e) => panic!("seed {seed}: precondition failed: {e}"),
        }
    }
    check(
        "criterion 5 discrete comparison",
        passes == 100,
        &format!("{passes}/100 seeded sub/supersolution pairs ordered componentwise"),
    );
}

#[test]
fn criterion_6_flat_boundary_counterexample() {
    let start = Instant::now();
    let report = counterexample_flat_boundary(42);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = report.subsolution_pass
        && report.supersolution_pass
        && report.boundary_probes.len() >= 8
        && report.max_boundary_gap == 1.0
        && elapsed < 60.0;
    let retained: usize = report
        .boundary_probes
        .iter()
        .map(|p| p.subsolution.retained + p.supersolution.retained)
        .sum();
    check(
        "criterion 6 flat-boundary counterexample",
        pass,
        &format!(
            "sub_pass={} super_pass={} mid-edge points={} retained_probes={} gap={} in {elapsed:.1}s",
            report.subsolution_pass,
            report.supersolution_pass,
            report.boundary_probes.len(),
            retained,
            report.max_boundary_gap
        ),
    );
}

#[test]
fn criterion_7_gradient_blowup_counterexample() {
    let report = counterexample_gradient_blowup(42).unwrap();
    let sg = &report.subgradient_at_1;
    let errors: Vec<String> = report
        .interior_errors
        .iter()
        .map(|r| format!("{:.4e}", r.error_at_probe))
        .collect();
    let decreasing = report
        .interior_errors
        .windows(2)
        .all(|w| w[1].error_at_probe < w[0].error_at_probe);
    let pass = !sg.found
        && sg.max_violation_at_best_p > 10.0 * sg.tol_sg
        && report.gap_at_1 == 1.0
        && report.interior_errors.len() == 4
        && decreasing;
    check(
        "criterion 7 gradient-blowup counterexample",
        pass,
        &format!(
            "subgradient empty={} violation={:.3e} (>10*tol_sg={:.1e}) gap_at_1={} probe errors={errors:?} decreasing={decreasing}",
            !sg.found,
            sg.max_violation_at_best_p,
            10.0 * sg.tol_sg,
            report.gap_at_1
        ),
    );
}

#[test]
fn criterion_8_solutions_are_discretely_convex() {
    let mut pass = true;
    let mut detail = String::new();
    for key in ["quad2d", "exp2d", "cone2d"] {
        let problem = lookup(key).unwrap();
        let params = SolveParams::for_problem(problem);
        let (sol, report) = solve_problem(problem, 16, 1, &params).unwrap();
        assert!(report.converged);
        let tol_convex = 10.0 * params.tol;
        let mut worst = f64::INFINITY;
        for node in sol.grid().interior_indices() {
            for pair in stencil_pairs(1).unwrap() {
                for dir in [pair.v, pair.w] {
                    let d = delta2(&sol, node, dir).unwrap();
                    worst = worst.min(d);
                }
            }
        }
        pass &= worst >= -tol_convex;
        detail.push_str(&format!("{key} min second difference={worst:.2e}; "));
    }
    check("criterion 8 discrete convexity", pass, &detail);
}

#[test]
fn criterion_9_boundary_rows_exact() {
    let mut pass = true;
    let mut detail = String::new();
    for problem in masolve::registry() {
        let params = SolveParams::for_problem(problem);
        let (sol, _) = solve_problem(problem, 16, 1, &params).unwrap();
        let grid = sol.grid();
        let exact_boundary = grid
            .boundary_indices()
            .all(|b| sol.value(b) == (problem.g)(grid.node(b)));
        pass &= exact_boundary;
        detail.push_str(&format!("{} boundary exact={exact_boundary}; ", problem.name));
    }
    let ex1 = counterexample_flat_boundary(42);
    let ex2 = counterexample_gradient_blowup(42).unwrap();
    pass &= ex1.sub_candidate_leq_g && ex2.sub_candidate_leq_g;
    detail.push_str(&format!(
        "subsolution candidates below g: ex1={} ex2={}",
        ex1.sub_candidate_leq_g, ex2.sub_candidate_leq_g
    ));
    check("criterion 9 boundary behavior", pass, &detail);
}
