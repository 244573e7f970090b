//! `masolve` command line: solve registry problems, run refinement
//! studies, verify scheme properties, and reproduce the comparison-failure
//! suites. Reports go to `--out` / `--csv` (stdout by default); status
//! lines go to stderr so piped output stays clean.
//!
//! Exit codes: 0 success, 1 assertion or convergence failure, 2 usage
//! error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use masolve::config::{parse_levels, FileConfig, RunConfig};
use masolve::harness::{convergence_study, verify_scheme};
use masolve::viscosity::{counterexample_flat_boundary, counterexample_gradient_blowup};
use masolve::{lookup, solve_problem, Error, SolveReport};

#[derive(Parser)]
#[command(
    name = "masolve",
    version,
    about = "Monotone finite differences for the Dirichlet Monge-Ampere equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML config file; command-line flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem registry key (see `solve --problem help` for the list)
    #[arg(long)]
    problem: Option<String>,
    /// Intervals per axis for single solves
    #[arg(long)]
    n: Option<usize>,
    /// Inclusive refinement range `a..b`; level L uses n = 2^L
    #[arg(long)]
    levels: Option<LevelRange>,
    /// Stencil width (1, 2, or 3)
    #[arg(long)]
    width: Option<u8>,
    /// Seed for randomized verification and probing
    #[arg(long)]
    seed: Option<u64>,
    /// JSON report destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV destination for convergence tables (stdout when omitted)
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and dump the nodal solution with a report
    Solve(CommonArgs),
    /// Refinement study against the exact solution, emitted as CSV
    Converge(CommonArgs),
    /// Monotonicity, consistency, and stability checks for the scheme
    Verify(CommonArgs),
    /// Reproduce a comparison-failure suite (case: ex1 or ex2)
    Counterexample {
        case: String,
        #[command(flatten)]
        args: CommonArgs,
    },
}

#[derive(Clone, Debug)]
struct LevelRange(Vec<u32>);

impl std::str::FromStr for LevelRange {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_levels(s).map(LevelRange)
    }
}

#[derive(Serialize)]
struct SolutionRow {
    index: usize,
    x: Vec<f64>,
    value: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    schema_version: u32,
    problem: String,
    n_per_axis: usize,
    width: u8,
    report: SolveReport,
    solution: Vec<SolutionRow>,
}

fn resolve_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let file = FileConfig::load(path)?;
        cfg.apply_file(&file)?;
    }
    if let Some(p) = &args.problem {
        cfg.problem = p.clone();
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(l) = &args.levels {
        cfg.levels = l.0.clone();
    }
    if let Some(w) = args.width {
        cfg.width = w;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(c) = &args.csv {
        cfg.csv = Some(c.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(dest: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match dest {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(dest: Option<&PathBuf>, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_text(dest, &text)
}

fn cmd_solve(args: &CommonArgs) -> Result<i32, Error> {
    let cfg = resolve_config(args)?;
    let problem = lookup(&cfg.problem)?;
    let params = cfg.solve_params(problem);
    let (sol, report) = solve_problem(problem, cfg.n, cfg.width, &params)?;
    let grid = sol.grid();
    let solution = (0..grid.n_nodes())
        .map(|i| SolutionRow {
            index: i,
            x: grid.node(i)[..problem.dim].to_vec(),
            value: sol.value(i),
        })
        .collect();
    let out = SolveOutput {
        schema_version: 1,
        problem: cfg.problem.clone(),
        n_per_axis: cfg.n,
        width: cfg.width,
        report,
        solution,
    };
    write_json(cfg.out.as_ref(), &out)?;
    eprintln!(
        "solve {}: n={} converged={} residual={:.3e} iterations={} ({:.1} ms)",
        cfg.problem, cfg.n, report.converged, report.final_residual, report.iterations,
        report.wall_time_ms
    );
    Ok(if report.converged { 0 } else { 1 })
}

fn cmd_converge(args: &CommonArgs) -> Result<i32, Error> {
    let cfg = resolve_config(args)?;
    let problem = lookup(&cfg.problem)?;
    let params = cfg.solve_params(problem);
    let table = convergence_study(problem, &cfg.levels, cfg.width, &params)?;
    write_text(cfg.csv.as_ref(), &table.to_csv())?;
    if cfg.out.is_some() {
        write_json(cfg.out.as_ref(), &table)?;
    }
    let last = table.rows.last().expect("validated nonempty levels");
    eprintln!(
        "converge {}: levels {:?} final err_inf={:.3e} err_probe={:.3e}",
        cfg.problem, cfg.levels, last.err_inf, last.err_probe
    );
    Ok(0)
}

fn cmd_verify(args: &CommonArgs) -> Result<i32, Error> {
    let cfg = resolve_config(args)?;
    let problem = lookup(&cfg.problem)?;
    let report = verify_scheme(problem, cfg.seed, &cfg.levels, cfg.width)?;
    write_json(cfg.out.as_ref(), &report)?;
    eprintln!(
        "verify {}: monotonicity {}/{} stability_ok={}",
        cfg.problem, report.monotonicity.passes, report.monotonicity.trials,
        report.stability.bound_ok
    );
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_counterexample(case: &str, args: &CommonArgs) -> Result<i32, Error> {
    let cfg = resolve_config(args)?;
    match case {
        "ex1" => {
            let report = counterexample_flat_boundary(cfg.seed);
            write_json(cfg.out.as_ref(), &report)?;
            let ok = report.subsolution_pass
                && report.supersolution_pass
                && report.max_boundary_gap == 1.0
                && report.sub_candidate_leq_g;
            eprintln!(
                "counterexample ex1: sub={} super={} boundary_gap={}",
                report.subsolution_pass, report.supersolution_pass, report.max_boundary_gap
            );
            Ok(if ok { 0 } else { 1 })
        }
        "ex2" => {
            let report = counterexample_gradient_blowup(cfg.seed)?;
            write_json(cfg.out.as_ref(), &report)?;
            let sg = &report.subgradient_at_1;
            let ok = report.gap_at_1 == 1.0
                && !sg.found
                && sg.max_violation_at_best_p > 10.0 * sg.tol_sg
                && report.subsolution_pass
                && report.supersolution_classical_pass
                && report.left_boundary_value_matches
                && report.sub_candidate_leq_g
                && report.interior_errors_decreasing
                && report.interior_errors.iter().all(|r| r.converged);
            eprintln!(
                "counterexample ex2: gap_at_1={} subgradient_found={} errors_decreasing={}",
                report.gap_at_1, sg.found, report.interior_errors_decreasing
            );
            Ok(if ok { 0 } else { 1 })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown counterexample case \"{other}\"; expected ex1 or ex2"
        ))),
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::UnknownProblem { .. }
        | Error::InvalidConfig(_)
        | Error::MissingExactSolution
        | Error::TooFewIntervals(_)
        | Error::UnsupportedWidth(_)
        | Error::DegenerateBounds { .. } => 2,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Counterexample { case, args } => cmd_counterexample(case, args),
    };
    let code = match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    };
    std::process::exit(code);
}
