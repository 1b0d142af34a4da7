//! `shadow-simplex`: solve MPS files, run random ensembles, estimate mean
//! widths and evaluate the pivot bounds.

mod experiment;
mod format;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shadow_simplex::analysis::{
    estimate_mean_width, estimate_mean_width_joint, omega, pivot_bound, omega_bound, BoundInputs, InnerSolver,
    MeanWidthEstimate,
};
use shadow_simplex::lp_model::{fold_bounds, normalize_rows, parse_mps_with, MpsOptions};
use shadow_simplex::random::{sample_perturbed_bounds, PerturbationParams, RngState};
use shadow_simplex::shadow::trace_csv;
use shadow_simplex::solver::{solve_detailed, EpsilonMode, SolveOutcome};
use shadow_simplex::{InputLp64, SolveStatus, SolverConfig64};

use experiment::{run_ensemble, EnsembleParams, ExperimentRow};
use format::{sig6, vector};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "shadow-simplex", version, about = "Two-phase shadow vertex simplex method with perturbed bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an LP given in MPS format
    Solve(SolveArgs),
    /// Solve an ensemble of random instances and report pivots and bounds per trial
    Experiment(ExperimentArgs),
    /// Estimate the mean width of an LP's feasible region by Monte Carlo
    Meanwidth(MeanWidthArgs),
    /// Evaluate the expected pivot bound for given parameters
    Bound(BoundArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Feasibility tolerance; 1e-6 is the usual default of commercial and open-source solvers
    #[arg(long = "feastol", default_value = "1e-6")]
    feas_tol: f64,
    /// Optimality tolerance; 1e-6 is the usual default of commercial and open-source solvers
    #[arg(long = "opttol", default_value = "1e-6")]
    opt_tol: f64,
    /// Assumed bound on basis inverse norms, used for the Phase I threshold
    #[arg(long, default_value = "1e12")]
    kappa: f64,
    /// Compute the Phase I threshold exactly by enumerating all bases
    #[arg(long)]
    exact_epsilon: bool,
    /// RNG seed for perturbations and auxiliary objectives
    #[arg(long, env = "SHADOW_SIMPLEX_SEED", default_value_t = 0)]
    seed: u64,
    /// Pivot budget per shadow run [default: 50 (n + 2d)]
    #[arg(long = "max-pivots")]
    max_pivots: Option<usize>,
}

impl SolverArgs {
    /// Validated configuration; checked before any file is read.
    fn config(&self) -> Result<SolverConfig64, String> {
        PerturbationParams::from_tolerances(self.feas_tol, self.opt_tol, 2).map_err(|e| e.to_string())?;
        if !(1.0..f64::INFINITY).contains(&self.kappa) {
            return Err(format!("--kappa must be a finite number ≥ 1, got {}", self.kappa));
        }
        if self.max_pivots == Some(0) {
            return Err("--max-pivots must be positive".into());
        }
        Ok(SolverConfig64 {
            feas_tol: self.feas_tol,
            opt_tol: self.opt_tol,
            kappa: self.kappa,
            epsilon_mode: if self.exact_epsilon { EpsilonMode::ExactEnumeration } else { EpsilonMode::KappaHeuristic },
            seed: self.seed,
            max_pivots: self.max_pivots,
            ..SolverConfig64::default()
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    /// MPS input file
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Replacement for infinite variable bounds
    #[arg(long, default_value = "1e4")]
    big_bound: f64,
    /// Include wall-clock timings (makes output differ between runs)
    #[arg(long)]
    timings: bool,
    /// Write the Phase II pivot trace as CSV to this file
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of random instances
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Smallest number of constraints
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    /// Largest number of constraints
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    /// Smallest number of variables
    #[arg(long, default_value_t = 2)]
    d_min: usize,
    /// Largest number of variables
    #[arg(long, default_value_t = 4)]
    d_max: usize,
    /// Directions per instance for the mean-width estimate behind the bound column
    #[arg(long, default_value_t = 200)]
    width_trials: usize,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Inner {
    Oracle,
    TwoPhase,
}

#[derive(Args)]
struct MeanWidthArgs {
    /// MPS input file
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of random directions
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// How each direction is maximized
    #[arg(long, value_enum, default_value_t = Inner::TwoPhase)]
    inner: Inner,
    /// Resample the bound perturbation in every trial instead of fixing it once
    #[arg(long)]
    joint: bool,
    /// Replacement for infinite variable bounds
    #[arg(long, default_value = "1e4")]
    big_bound: f64,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    /// Number of constraints
    #[arg(long)]
    n: usize,
    /// Number of variables
    #[arg(long)]
    d: usize,
    /// Half mean width M
    #[arg(long)]
    m: f64,
    /// Perturbation scale η
    #[arg(long)]
    eta: f64,
    /// Phase I threshold ε
    #[arg(long)]
    eps: f64,
    /// Objective range N
    #[arg(long = "bigN")]
    big_n: f64,
    /// Rate L of the auxiliary objective's distribution
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

/// A failure with its exit code and message for stderr.
struct Failure(u8, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn read_lp(path: &Path, big_bound: f64) -> Result<InputLp64, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let opts = MpsOptions { big_bound, ..MpsOptions::default() };
    parse_mps_with(&text, &opts).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str) -> Result<(), Failure> {
    io::stdout().write_all(text.as_bytes()).map_err(|e| Failure(EXIT_NUMERICAL, format!("cannot write output: {e}")))
}

fn to_csv<R: Serialize>(rows: &[R]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn solve_cmd(args: &SolveArgs) -> Result<u8, Failure> {
    let mut cfg = args.solver.config().map_err(usage)?;
    cfg.record_timings = args.timings;
    let lp = read_lp(&args.input, args.big_bound)?;
    let out = solve_detailed(&lp, &cfg).map_err(|e| usage(e.to_string()))?;
    if let Some(path) = &args.trace {
        let records = out.phase2_path.as_ref().map(|p| p.records.as_slice()).unwrap_or_default();
        fs::write(path, trace_csv(records)).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    }
    emit(&render_solve(&lp, &out, args.format))?;
    Ok(match out.report.status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::PivotBudget | SolveStatus::NumericalFailure => EXIT_NUMERICAL,
    })
}

#[derive(Serialize)]
struct SolveRow {
    name: String,
    status: String,
    objective: Option<f64>,
    phase1_pivots: usize,
    phase2_pivots: usize,
    total_pivots: usize,
    rejections: usize,
    infeasible_constraint: Option<usize>,
    seed: u64,
    feastol: f64,
    opttol: f64,
    kappa: f64,
}

fn render_solve(lp: &InputLp64, out: &SolveOutcome<f64>, fmt: Format) -> String {
    let r = &out.report;
    match fmt {
        Format::Json => r.to_json() + "\n",
        Format::Csv => {
            let row = SolveRow {
                name: lp.name.clone(),
                status: format!("{:?}", r.status),
                objective: r.objective_value,
                phase1_pivots: r.phase1_pivots.iter().sum(),
                phase2_pivots: r.phase2_pivots,
                total_pivots: r.total_pivots,
                rejections: r.rejections,
                infeasible_constraint: r.infeasible_constraint,
                seed: r.seed,
                feastol: r.config.feas_tol,
                opttol: r.config.opt_tol,
                kappa: r.config.kappa,
            };
            to_csv(&[row])
        }
        Format::Human => {
            let mut s = format!("problem     {} ({} rows, {} columns)\n", lp.name, r.n, r.d);
            s += &format!("status      {:?}\n", r.status);
            if let Some(msg) = &r.message {
                s += &format!("message     {msg}\n");
            }
            if let Some(v) = r.objective_value {
                s += &format!("objective   {}\n", sig6(v));
            }
            s += &format!(
                "pivots      {} (Phase I {}, Phase II {})\n",
                r.total_pivots,
                r.phase1_pivots.iter().sum::<usize>(),
                r.phase2_pivots
            );
            s += &format!("rejections  {}\n", r.rejections);
            if let Some(c) = &r.certificate {
                for (name, x) in lp.col_names.iter().zip(&c.primal) {
                    s += &format!("  {name} = {}\n", sig6(*x));
                }
                s += &format!("duals       {}\n", vector(&c.dual));
            }
            s += &format!(
                "config      feastol {} opttol {} kappa {} seed {}\n",
                sig6(r.config.feas_tol),
                sig6(r.config.opt_tol),
                sig6(r.config.kappa),
                r.seed
            );
            s
        }
    }
}

fn experiment_cmd(args: &ExperimentArgs) -> Result<u8, Failure> {
    let cfg = args.solver.config().map_err(usage)?;
    if args.trials == 0 || args.width_trials == 0 {
        return Err(usage("--trials and --width-trials must be positive"));
    }
    if args.n_min == 0 || args.n_min > args.n_max || args.d_min == 0 || args.d_min > args.d_max {
        return Err(usage("need 1 ≤ n-min ≤ n-max and 1 ≤ d-min ≤ d-max"));
    }
    let params = EnsembleParams {
        trials: args.trials,
        n_min: args.n_min,
        n_max: args.n_max,
        d_min: args.d_min,
        d_max: args.d_max,
        width_trials: args.width_trials,
    };
    let rows = run_ensemble(&params, &cfg);
    emit(&render_experiment(&rows, &cfg, args.format))?;
    Ok(0)
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    config: &'a SolverConfig64,
    rows: &'a [ExperimentRow],
}

fn opt6(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), sig6)
}

fn render_experiment(rows: &[ExperimentRow], cfg: &SolverConfig64, fmt: Format) -> String {
    match fmt {
        Format::Json => serde_json::to_string_pretty(&ExperimentReport { config: cfg, rows }).expect("serializes") + "\n",
        Format::Csv => to_csv(rows),
        Format::Human => {
            let mut s = format!(
                "{:>5} {:>3} {:>2} {:>16} {:>8} {:>6} {:>6} {:>5} {:>12} {:>12}\n",
                "trial", "n", "d", "status", "phase1", "phase2", "cert", "M", "N", "bound"
            );
            for r in rows {
                s += &format!(
                    "{:>5} {:>3} {:>2} {:>16} {:>8} {:>6} {:>6} {:>5} {:>12} {:>12}\n",
                    r.trial,
                    r.n,
                    r.d,
                    r.status,
                    r.phase1_pivots,
                    r.phase2_pivots,
                    r.certificate_pass,
                    opt6(r.mean_width),
                    opt6(r.big_n),
                    opt6(r.bound)
                );
            }
            s
        }
    }
}

#[derive(Serialize)]
struct MeanWidthReport<'a> {
    input: String,
    inner: &'static str,
    joint: bool,
    summary: shadow_simplex::analysis::MeanWidthSummary,
    config: &'a SolverConfig64,
}

fn meanwidth_cmd(args: &MeanWidthArgs) -> Result<u8, Failure> {
    let cfg = args.solver.config().map_err(usage)?;
    if args.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let lp = read_lp(&args.input, args.big_bound)?;
    let nl = normalize_rows(&lp).map_err(|e| usage(e.to_string()))?;
    let k = lp.num_rows() + 2 * lp.num_cols();
    let params = cfg.perturbation(k).map_err(|e| usage(e.to_string()))?;
    let inner = match args.inner {
        Inner::Oracle => InnerSolver::Oracle,
        Inner::TwoPhase => InnerSolver::TwoPhase,
    };
    let rng = RngState::new(cfg.seed, 0);
    let numerical = |e: shadow_simplex::Error| Failure(EXIT_NUMERICAL, e.to_string());
    let est: MeanWidthEstimate<f64> = if args.joint {
        estimate_mean_width_joint(&nl, &params, args.trials, &rng, inner, &cfg).map_err(numerical)?
    } else {
        let pb = sample_perturbed_bounds(&nl, &params, &mut rng.child(u64::MAX)).map_err(numerical)?;
        let folded = fold_bounds(&nl, &pb.lower, &pb.upper, &pb.rhs).map_err(numerical)?;
        estimate_mean_width(&folded, args.trials, &rng, inner, &cfg).map_err(numerical)?
    };
    let summary = est.summary();
    let text = match args.format {
        Format::Json => {
            let report = MeanWidthReport {
                input: args.input.display().to_string(),
                inner: if inner == InnerSolver::Oracle { "oracle" } else { "two-phase" },
                joint: args.joint,
                summary,
                config: &cfg,
            };
            serde_json::to_string_pretty(&report).expect("serializes") + "\n"
        }
        Format::Csv => est.to_csv(),
        Format::Human => format!(
            "mean width estimate  {} ± {}\ntrials               {} ({} failed)\nmean pivots          {}\n",
            sig6(summary.mean),
            sig6(summary.std_err),
            summary.count,
            summary.failures,
            sig6(summary.mean_pivots)
        ),
    };
    emit(&text)?;
    Ok(0)
}

#[derive(Serialize)]
struct BoundReport {
    inputs: BoundInputs,
    pivot_bound: f64,
    omega_bound: f64,
    omega: f64,
}

fn bound_cmd(args: &BoundArgs) -> Result<u8, Failure> {
    let bi = BoundInputs { n: args.n, d: args.d, eta: args.eta, eps: args.eps, m: args.m, big_n: args.big_n, l: args.l };
    let report = BoundReport {
        inputs: bi,
        pivot_bound: pivot_bound(&bi).map_err(|e| usage(e.to_string()))?,
        omega_bound: omega_bound(&bi).map_err(|e| usage(e.to_string()))?,
        omega: omega(bi.eta, bi.n, bi.d).map_err(|e| usage(e.to_string()))?,
    };
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("serializes") + "\n",
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                n: usize,
                d: usize,
                m: f64,
                eta: f64,
                eps: f64,
                big_n: f64,
                l: f64,
                pivot_bound: f64,
                omega_bound: f64,
                omega: f64,
            }
            to_csv(&[Row {
                n: bi.n,
                d: bi.d,
                m: bi.m,
                eta: bi.eta,
                eps: bi.eps,
                big_n: bi.big_n,
                l: bi.l,
                pivot_bound: report.pivot_bound,
                omega_bound: report.omega_bound,
                omega: report.omega,
            }])
        }
        Format::Human => format!(
            "pivot bound    {}\nomega bound    {}\nomega          {}\n",
            sig6(report.pivot_bound),
            sig6(report.omega_bound),
            sig6(report.omega)
        ),
    };
    emit(&text)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Meanwidth(a) => meanwidth_cmd(a),
        Command::Bound(a) => bound_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
