//! Random-ensemble experiments: one solve per trial plus the bound inputs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shadow_simplex::analysis::{estimate_mean_width, estimate_n, pivot_bound, BoundInputs, InnerSolver};
use shadow_simplex::oracle::{binomial, ENUMERATION_BUDGET};
use shadow_simplex::solver::solve_detailed;
use shadow_simplex::{InputLp64, RngState, SolveStatus, SolverConfig64};

#[derive(Debug, Clone, Copy)]
pub struct EnsembleParams {
    pub trials: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub d_min: usize,
    pub d_max: usize,
    pub width_trials: usize,
}

/// One CSV row. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub trial: usize,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub status: String,
    pub phase1_pivots: usize,
    pub phase2_pivots: usize,
    pub total_pivots: usize,
    pub rejections: usize,
    pub certificate_pass: bool,
    pub objective: Option<f64>,
    pub mean_width: Option<f64>,
    pub big_n: Option<f64>,
    pub bound: Option<f64>,
}

/// Rows of `[-1, 1]` entries, right-hand sides in `[0, 1]`, box `[0, 1]^d`.
pub fn random_instance(rng: &mut impl Rng, n: usize, d: usize) -> InputLp64 {
    loop {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        if rows.iter().any(|r| r.iter().map(|v| v * v).sum::<f64>() < 1e-6) {
            continue;
        }
        let rhs = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let c = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        return InputLp64::new(&rows, rhs, vec![0.0; d], vec![1.0; d], c).expect("generated instance is valid");
    }
}

fn status_name(s: SolveStatus) -> String {
    format!("{s:?}")
}

pub fn run_trial(params: &EnsembleParams, cfg: &SolverConfig64, trial: usize) -> ExperimentRow {
    let base = RngState::new(cfg.seed, 0).child(trial as u64);
    let mut rng = base.child(0);
    let n = rng.random_range(params.n_min..=params.n_max);
    let d = rng.random_range(params.d_min..=params.d_max);
    let lp = random_instance(&mut rng, n, d);
    let seed = cfg.seed.wrapping_add(trial as u64);
    let mut row = ExperimentRow {
        trial,
        n,
        d,
        seed,
        status: status_name(SolveStatus::NumericalFailure),
        phase1_pivots: 0,
        phase2_pivots: 0,
        total_pivots: 0,
        rejections: 0,
        certificate_pass: false,
        objective: None,
        mean_width: None,
        big_n: None,
        bound: None,
    };
    let out = match solve_detailed(&lp, &cfg.clone().with_seed(seed)) {
        Ok(o) => o,
        Err(_) => return row,
    };
    let r = &out.report;
    row.status = status_name(r.status);
    row.phase1_pivots = r.phase1_pivots.iter().sum();
    row.phase2_pivots = r.phase2_pivots;
    row.total_pivots = r.total_pivots;
    row.rejections = r.rejections;
    row.certificate_pass = r.status == SolveStatus::Optimal && r.violations.is_empty();
    row.objective = r.objective_value;
    if let (Some(folded), Some(eta), Some(eps)) = (out.folded.as_ref(), r.eta, r.epsilon) {
        let inner = if binomial(folded.num_rows(), d) <= ENUMERATION_BUDGET {
            InnerSolver::Oracle
        } else {
            InnerSolver::TwoPhase
        };
        let wrng = base.child(1);
        row.mean_width = estimate_mean_width(folded, params.width_trials, &wrng, inner, cfg).ok().map(|e| e.mean);
        row.big_n = estimate_n(folded, &lp.objective, inner, cfg, &wrng).ok();
        if let (Some(m), Some(big_n)) = (row.mean_width, row.big_n) {
            let bi = BoundInputs {
                n: folded.num_rows(),
                d,
                eta,
                eps,
                m: m.max(f64::MIN_POSITIVE),
                big_n: big_n.max(f64::MIN_POSITIVE),
                l: 1.0,
            };
            row.bound = pivot_bound(&bi).ok();
        }
    }
    row
}

/// Runs every trial in parallel; rows come back in trial order.
pub fn run_ensemble(params: &EnsembleParams, cfg: &SolverConfig64) -> Vec<ExperimentRow> {
    (0..params.trials).into_par_iter().map(|t| run_trial(params, cfg, t)).collect()
}
