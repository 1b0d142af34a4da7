//! The two-phase method: perturb, insert constraints one at a time, optimize,
//! certify.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{LuFactors, DEFAULT_SINGULAR_TOL};
use crate::lp_model::{fold_bounds, normalize_rows, FoldedLp, ImpliedBound, InputLp, NormalizedLp, RowKind};
use crate::oracle::{binomial, Combinations, ENUMERATION_BUDGET};
use crate::random::{
    sample_perturbed_bounds, sample_sphere_uniform, PerturbationParams, PerturbedBounds, RngState,
    DEFAULT_FEAS_TOL, DEFAULT_MAX_REJECTIONS, DEFAULT_OPT_TOL,
};
use crate::scalar::{dot, norm_inf, Scalar};
use crate::shadow::{follow_shadow_path, Basis, PivotRecord, ShadowState, StopReason};

pub const DEFAULT_KAPPA: f64 = 1e12;
/// Residual of `A^T y + s - t = c + optTol·θ` above which no certificate is issued.
pub const STATIONARITY_LIMIT: f64 = 1e-6;
/// Slack inside which a Phase I run counts as having reached the inserted facet.
pub const FACET_TOL: f64 = 1e-9;
/// Numerical allowance when evaluating certificate conditions.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsilonMode {
    /// `ε = 1 / (d² max_B ‖Ā_B^{-1}‖)` over all nonsingular row subsets.
    ExactEnumeration,
    /// `ε = 1 / (d² κ)`.
    KappaHeuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolverConfig<T: Scalar> {
    pub feas_tol: T,
    pub opt_tol: T,
    /// Assumed bound on `‖Ā_B^{-1}‖` over all bases.
    pub kappa: T,
    pub epsilon_mode: EpsilonMode,
    pub seed: u64,
    /// Pivot budget per shadow run; `None` means `50 (n + 2d)`.
    pub max_pivots: Option<usize>,
    pub max_rejections: usize,
    /// Wall-clock timings make reports non-reproducible, so they are opt-in.
    pub record_timings: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            feas_tol: T::lit(DEFAULT_FEAS_TOL),
            opt_tol: T::lit(DEFAULT_OPT_TOL),
            kappa: T::lit(DEFAULT_KAPPA),
            epsilon_mode: EpsilonMode::KappaHeuristic,
            seed: 0,
            max_pivots: None,
            max_rejections: DEFAULT_MAX_REJECTIONS,
            record_timings: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Perturbation parameters for a folded system with `k = n + 2d` rows.
    pub fn perturbation(&self, k: usize) -> Result<PerturbationParams<T>> {
        if !(self.kappa >= T::one()) {
            return Err(Error::InvalidParameter(format!("kappa = {} must be at least 1", self.kappa)));
        }
        let mut p = PerturbationParams::from_tolerances(self.feas_tol, self.opt_tol, k)?;
        p.max_rejections = self.max_rejections;
        Ok(p)
    }

    pub fn pivot_budget(&self, folded: &FoldedLp<T>) -> usize {
        self.max_pivots.unwrap_or(50 * folded.num_rows())
    }
}

/// Facet threshold `ε` for truncating Phase I runs.
pub fn epsilon_threshold<T: Scalar>(folded: &FoldedLp<T>, cfg: &SolverConfig<T>) -> Result<T> {
    let d2 = T::lit((folded.d * folded.d) as f64);
    match cfg.epsilon_mode {
        EpsilonMode::KappaHeuristic => Ok(T::one() / (d2 * cfg.kappa)),
        EpsilonMode::ExactEnumeration => {
            let m = folded.num_rows();
            let count = binomial(m, folded.d);
            if count > ENUMERATION_BUDGET {
                return Err(Error::EnumerationTooLarge(count));
            }
            let mut worst = T::zero();
            for rows in Combinations::new(m, folded.d) {
                let sub = folded.matrix.select_rows(&rows);
                match LuFactors::factorize(&sub, T::tol(DEFAULT_SINGULAR_TOL)) {
                    Ok(f) => worst = worst.max(f.inverse_norm_estimate()),
                    Err(Error::SingularBasis(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(T::one() / (d2 * worst))
        }
    }
}

/// Basis of the box corner `x_j = û_j` if `θ_j ≥ 0`, else `ô_j`.
pub fn phase1_initial_vertex<T: Scalar>(folded: &FoldedLp<T>, theta: &[T]) -> Result<Basis<T>> {
    if theta.len() != folded.d {
        return Err(Error::DimensionMismatch("θ has the wrong length".into()));
    }
    let (n, d) = (folded.n, folded.d);
    let mut rows = Vec::with_capacity(d);
    for (j, &th) in theta.iter().enumerate() {
        if th.abs() < T::lit(1e-12) {
            return Err(Error::ZeroComponent(j));
        }
        rows.push(if th >= T::zero() { n + j } else { n + d + j });
    }
    Basis::new(folded, &rows)
}

/// A shadow run as recorded for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PathTrace<T: Scalar> {
    pub start_basis: Vec<usize>,
    pub start_objective: T,
    pub start_aux: T,
    pub records: Vec<PivotRecord<T>>,
    pub stop: StopReason,
}

impl<T: Scalar> PathTrace<T> {
    fn from_state(start_basis: Vec<usize>, state: &ShadowState<T>, stop: StopReason) -> Self {
        PathTrace {
            start_basis,
            start_objective: state.start_objective,
            start_aux: state.start_aux,
            records: state.trace.clone(),
            stop,
        }
    }

    /// Visited bases, start first.
    pub fn bases(&self) -> Vec<Vec<usize>> {
        let mut cur = self.start_basis.clone();
        let mut out = vec![cur.clone()];
        for r in &self.records {
            cur.retain(|&i| i != r.leaving);
            cur.push(r.entering);
            cur.sort_unstable();
            out.push(cur.clone());
        }
        out
    }

    /// Pivots where the target value drops or the auxiliary value rises by more than `tol`.
    pub fn monotonicity_violations(&self, tol: T) -> usize {
        let mut prev = (self.start_objective, self.start_aux);
        let mut bad = 0;
        for r in &self.records {
            if r.objective_value < prev.0 - tol || r.aux_value > prev.1 + tol {
                bad += 1;
            }
            prev = (r.objective_value, r.aux_value);
        }
        bad
    }
}

#[derive(Debug, Clone)]
pub struct Phase1Result<T: Scalar> {
    pub basis: Basis<T>,
    pub pivots: Vec<usize>,
    pub paths: Vec<PathTrace<T>>,
}

/// Largest violation of `θ`-optimality (negative multiplier) or feasibility of `basis` in `folded`.
pub fn entry_invariant_gap<T: Scalar>(folded: &FoldedLp<T>, basis: &Basis<T>, theta: &[T]) -> T {
    let m = basis.multipliers(theta);
    let dual = m.iter().fold(T::zero(), |acc, &v| acc.max(-v));
    let primal = folded.max_violation(basis.vertex()).map_or(T::zero(), |(_, v)| v);
    dual.max(primal)
}

/// Inserts constraints `1..n` in order, restoring `θ`-optimality after each
/// violated one with a shadow run toward `-A_k` truncated at `t = 1/ε`.
///
/// Fails with [`Error::Infeasible`] carrying the 1-based number of the first
/// constraint whose facet the run cannot reach.
pub fn phase1_sequential<T: Scalar>(
    folded: &FoldedLp<T>,
    theta: &[T],
    eps: T,
    cfg: &SolverConfig<T>,
) -> Result<Phase1Result<T>> {
    let mut pivots = Vec::new();
    let mut paths = Vec::new();
    let basis = run_phase1(folded, theta, eps, cfg, &mut pivots, &mut paths)?;
    Ok(Phase1Result { basis, pivots, paths })
}

fn run_phase1<T: Scalar>(
    folded: &FoldedLp<T>,
    theta: &[T],
    eps: T,
    cfg: &SolverConfig<T>,
    pivots: &mut Vec<usize>,
    paths: &mut Vec<PathTrace<T>>,
) -> Result<Basis<T>> {
    let n = folded.n;
    let budget = cfg.pivot_budget(folded);
    let t_stop = T::one() / eps;
    let mut work = folded.clone();
    work.active[..n].iter_mut().for_each(|a| *a = false);
    let mut basis = phase1_initial_vertex(&work, theta)?;
    for k in 0..n {
        if work.slack(k, basis.vertex()) >= T::zero() {
            work.active[k] = true;
            pivots.push(0);
            continue;
        }
        // Exit LP: same system with the new row reversed, maximizing -A_k.
        let target: Vec<T> = work.matrix.row(k).iter().map(|&a| -a).collect();
        work.matrix.row_mut(k).copy_from_slice(&target);
        work.rhs[k] = -work.rhs[k];
        work.active[k] = true;
        let start_rows = basis.indices().to_vec();
        let run = follow_shadow_path(&work, basis, theta, &target, t_stop, budget);
        work.matrix.row_mut(k).iter_mut().for_each(|a| *a = -*a);
        work.rhs[k] = -work.rhs[k];
        let (state, stop) = run?;
        pivots.push(state.pivot_count);
        paths.push(PathTrace::from_state(start_rows, &state, stop));
        if stop == StopReason::PivotBudget {
            return Err(Error::PivotBudget(budget));
        }
        let residual = -work.slack(k, state.basis.vertex());
        if !state.basis.contains(k) {
            return Err(if residual > T::tol(FACET_TOL) {
                Error::Infeasible(k + 1)
            } else {
                Error::NumericalBreakdown(format!("constraint {} is tight but not basic", k + 1))
            });
        }
        basis = Basis::new(&work, state.basis.indices())?;
        let gap = entry_invariant_gap(&work, &basis, theta);
        let scale = T::one() + norm_inf(&basis.multipliers(theta)) + norm_inf(basis.vertex());
        if gap > T::tol(1e-7) * scale {
            return Err(Error::NumericalBreakdown(format!(
                "basis after inserting constraint {} is off by {:e}",
                k + 1,
                gap.as_f64()
            )));
        }
    }
    Ok(basis)
}

/// Shadow run from the Phase I basis with auxiliary `θ` to `c + optTol·θ`.
pub fn phase2<T: Scalar>(
    folded: &FoldedLp<T>,
    start: Basis<T>,
    theta: &[T],
    c: &[T],
    cfg: &SolverConfig<T>,
) -> Result<(ShadowState<T>, StopReason)> {
    let target: Vec<T> = c.iter().zip(theta).map(|(&ci, &ti)| ci + cfg.opt_tol * ti).collect();
    follow_shadow_path(folded, start, theta, &target, T::infinity(), cfg.pivot_budget(folded))
}

/// Primal/dual pair for the unperturbed problem.
///
/// Duals refer to the row-normalized matrix; divide `dual[i]` by the row scale
/// to express it for the original row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Certificate<T: Scalar> {
    pub primal: Vec<T>,
    /// `y*`, one entry per row of `A`.
    pub dual: Vec<T>,
    /// `s*`, multipliers of the upper bounds.
    pub dual_upper: Vec<T>,
    /// `t*`, multipliers of the lower bounds.
    pub dual_lower: Vec<T>,
    pub feas_tol: T,
    pub opt_tol: T,
    pub stationarity_residual: T,
}

/// Splits the final multipliers of `c + optTol·θ` over the rows they belong to.
pub fn extract_certificate<T: Scalar>(
    final_state: &ShadowState<T>,
    lp: &NormalizedLp<T>,
    cfg: &SolverConfig<T>,
) -> Result<Certificate<T>> {
    let (n, d) = (lp.num_rows(), lp.num_cols());
    let m = final_state.basis.multipliers(&final_state.target);
    let mut y = vec![T::zero(); n];
    let mut s = vec![T::zero(); d];
    let mut t = vec![T::zero(); d];
    for (&row, &mult) in final_state.basis.indices().iter().zip(&m) {
        let v = mult.max(T::zero());
        let kind = if row < n {
            RowKind::Constraint(row)
        } else if row < n + d {
            RowKind::Upper(row - n)
        } else {
            RowKind::Lower(row - n - d)
        };
        match kind {
            RowKind::Constraint(i) => y[i] = v,
            RowKind::Upper(j) => s[j] = v,
            RowKind::Lower(j) => t[j] = v,
        }
    }
    let aty = lp.matrix.tr_mul_vec(&y);
    let residual = (0..d)
        .map(|j| (aty[j] + s[j] - t[j] - final_state.target[j]).abs())
        .fold(T::zero(), T::max);
    if residual > T::tol(STATIONARITY_LIMIT) {
        return Err(Error::StationarityViolation(residual.as_f64()));
    }
    Ok(Certificate {
        primal: final_state.basis.vertex().to_vec(),
        dual: y,
        dual_upper: s,
        dual_lower: t,
        feas_tol: cfg.feas_tol,
        opt_tol: cfg.opt_tol,
        stationarity_residual: residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `A x* ≤ b + feasTol`
    RowFeasibility,
    /// `x* ≥ o - feasTol`
    LowerBound,
    /// `x* ≤ u + feasTol`
    UpperBound,
    /// `y*, s*, t* ≥ 0`
    DualSign,
    /// `y*_i > 0 ⇒ (A x*)_i ≥ b_i`
    RowSlackness,
    /// `c_j > (A^T y*)_j + optTol ⇒ x*_j ≥ u_j`
    UpperSlackness,
    /// `c_j < (A^T y*)_j - optTol ⇒ x*_j ≤ o_j`
    LowerSlackness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Violation<T: Scalar> {
    pub kind: ViolationKind,
    pub index: usize,
    pub magnitude: T,
}

/// Evaluates the approximate feasibility and complementary slackness
/// conditions against the unperturbed data and lists every failure.
pub fn check_certificate<T: Scalar>(cert: &Certificate<T>, lp: &NormalizedLp<T>) -> Vec<Violation<T>> {
    let (n, d) = (lp.num_rows(), lp.num_cols());
    let x = &cert.primal;
    let slop = |v: T| T::tol(CHECK_TOL) * (T::one() + v.abs());
    let mut out = Vec::new();
    let mut push = |kind, index, magnitude| out.push(Violation { kind, index, magnitude });
    let ax = lp.matrix.mul_vec(x);
    for i in 0..n {
        let over = ax[i] - lp.rhs[i] - cert.feas_tol;
        if over > slop(lp.rhs[i]) {
            push(ViolationKind::RowFeasibility, i, over);
        }
        if cert.dual[i] < T::zero() {
            push(ViolationKind::DualSign, i, -cert.dual[i]);
        }
        let short = lp.rhs[i] - ax[i];
        if cert.dual[i] > T::zero() && short > slop(lp.rhs[i]) {
            push(ViolationKind::RowSlackness, i, short);
        }
    }
    let aty = lp.matrix.tr_mul_vec(&cert.dual);
    for j in 0..d {
        let below = lp.lower[j] - cert.feas_tol - x[j];
        if below > slop(lp.lower[j]) {
            push(ViolationKind::LowerBound, j, below);
        }
        let above = x[j] - lp.upper[j] - cert.feas_tol;
        if above > slop(lp.upper[j]) {
            push(ViolationKind::UpperBound, j, above);
        }
        for v in [cert.dual_upper[j], cert.dual_lower[j]] {
            if v < T::zero() {
                push(ViolationKind::DualSign, n + j, -v);
            }
        }
        let c = lp.objective[j];
        if c > aty[j] + cert.opt_tol && lp.upper[j] - x[j] > slop(lp.upper[j]) {
            push(ViolationKind::UpperSlackness, j, lp.upper[j] - x[j]);
        }
        if c < aty[j] - cert.opt_tol && x[j] - lp.lower[j] > slop(lp.lower[j]) {
            push(ViolationKind::LowerSlackness, j, x[j] - lp.lower[j]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    PivotBudget,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub perturb_ms: f64,
    pub phase1_ms: f64,
    pub phase2_ms: f64,
    pub total_ms: f64,
}

/// Everything a solve produced, in a form that serializes deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolveReport<T: Scalar> {
    pub status: SolveStatus,
    pub message: Option<String>,
    pub n: usize,
    pub d: usize,
    /// `c·x*` for the returned primal point.
    pub objective_value: Option<T>,
    /// Pivots spent restoring each constraint in Phase I (0 when already satisfied).
    pub phase1_pivots: Vec<usize>,
    pub phase2_pivots: usize,
    pub total_pivots: usize,
    /// Perturbation draws thrown away before one fit inside the tolerance bands.
    pub rejections: usize,
    pub theta_resamples: usize,
    /// 1-based constraint number that proved infeasibility.
    pub infeasible_constraint: Option<usize>,
    pub epsilon: Option<T>,
    pub eta: Option<T>,
    pub gamma: Option<T>,
    pub theta: Option<Vec<T>>,
    pub perturbed: Option<PerturbedBounds<T>>,
    pub certificate: Option<Certificate<T>>,
    pub violations: Vec<Violation<T>>,
    /// Infinite bounds replaced by the big bound when the problem was read.
    pub implied_bounds: Vec<ImpliedBound>,
    pub seed: u64,
    pub config: SolverConfig<T>,
    pub timings: Option<Timings>,
}

impl<T: Scalar> SolveReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Report plus the intermediate objects tests and diagnostics need.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T: Scalar> {
    pub report: SolveReport<T>,
    pub normalized: NormalizedLp<T>,
    /// The perturbed, folded system the phases ran on.
    pub folded: Option<FoldedLp<T>>,
    pub phase1_paths: Vec<PathTrace<T>>,
    pub phase2_path: Option<PathTrace<T>>,
}

/// Progress of the two phases, kept even when a phase fails.
#[derive(Debug, Clone)]
pub struct PhaseRun<T: Scalar> {
    pub theta: Vec<T>,
    pub theta_resamples: usize,
    pub epsilon: T,
    pub phase1_pivots: Vec<usize>,
    pub phase1_paths: Vec<PathTrace<T>>,
    pub phase2_path: Option<PathTrace<T>>,
    pub final_state: Option<ShadowState<T>>,
    /// Why the run stopped early; `None` exactly when `final_state` is set.
    pub error: Option<Error>,
    pub phase1_ms: f64,
    pub phase2_ms: f64,
}

impl<T: Scalar> PhaseRun<T> {
    pub fn phase2_pivots(&self) -> usize {
        self.phase2_path.as_ref().map_or(0, |p| p.records.len())
    }

    pub fn total_pivots(&self) -> usize {
        self.phase1_pivots.iter().sum::<usize>() + self.phase2_pivots()
    }
}

fn sample_theta<T: Scalar>(d: usize, rng: &mut RngState) -> (Vec<T>, usize) {
    let mut resamples = 0;
    loop {
        let th: Vec<T> = sample_sphere_uniform(d, rng);
        if th.iter().all(|v| v.abs() >= T::lit(1e-12)) {
            return (th, resamples);
        }
        resamples += 1;
    }
}

/// Runs Phase I and Phase II on an already perturbed system, maximizing `c`.
///
/// Draws `θ` from `rng`. A failed run keeps its partial progress and records
/// the error.
pub fn run_phases<T: Scalar>(folded: &FoldedLp<T>, c: &[T], cfg: &SolverConfig<T>, rng: &mut RngState) -> PhaseRun<T> {
    let mut run = start_run(folded, rng);
    if let Err(e) = drive(folded, c, cfg, &mut run) {
        run.error = Some(e);
    }
    run
}

fn start_run<T: Scalar>(folded: &FoldedLp<T>, rng: &mut RngState) -> PhaseRun<T> {
    let (theta, theta_resamples) = sample_theta::<T>(folded.d, rng);
    PhaseRun {
        theta,
        theta_resamples,
        epsilon: T::zero(),
        phase1_pivots: Vec::new(),
        phase1_paths: Vec::new(),
        phase2_path: None,
        final_state: None,
        error: None,
        phase1_ms: 0.0,
        phase2_ms: 0.0,
    }
}

fn drive<T: Scalar>(folded: &FoldedLp<T>, c: &[T], cfg: &SolverConfig<T>, run: &mut PhaseRun<T>) -> Result<()> {
    run.epsilon = epsilon_threshold(folded, cfg)?;
    let clock = Instant::now();
    let basis = run_phase1(folded, &run.theta, run.epsilon, cfg, &mut run.phase1_pivots, &mut run.phase1_paths);
    run.phase1_ms = clock.elapsed().as_secs_f64() * 1e3;
    let basis = basis?;
    let clock = Instant::now();
    let start_rows = basis.indices().to_vec();
    let result = phase2(folded, basis, &run.theta, c, cfg);
    run.phase2_ms = clock.elapsed().as_secs_f64() * 1e3;
    let (state, stop) = result?;
    run.phase2_path = Some(PathTrace::from_state(start_rows, &state, stop));
    if stop == StopReason::PivotBudget {
        return Err(Error::PivotBudget(cfg.pivot_budget(folded)));
    }
    run.final_state = Some(state);
    Ok(())
}

fn status_of(e: &Error) -> SolveStatus {
    match e {
        Error::Infeasible(_) => SolveStatus::Infeasible,
        Error::PivotBudget(_) => SolveStatus::PivotBudget,
        _ => SolveStatus::NumericalFailure,
    }
}

/// Solves `lp` end to end. Invalid input or configuration is an `Err`; every
/// algorithmic outcome, including infeasibility, is a report status.
pub fn solve<T: Scalar>(lp: &InputLp<T>, cfg: &SolverConfig<T>) -> Result<SolveReport<T>> {
    solve_detailed(lp, cfg).map(|o| o.report)
}

pub fn solve_detailed<T: Scalar>(lp: &InputLp<T>, cfg: &SolverConfig<T>) -> Result<SolveOutcome<T>> {
    let total = Instant::now();
    lp.validate()?;
    let normalized = normalize_rows(lp)?;
    let (n, d) = (lp.num_rows(), lp.num_cols());
    let params = cfg.perturbation(n + 2 * d)?;
    let mut rng = RngState::new(cfg.seed, 0);
    let mut report = SolveReport {
        status: SolveStatus::NumericalFailure,
        message: None,
        n,
        d,
        objective_value: None,
        phase1_pivots: Vec::new(),
        phase2_pivots: 0,
        total_pivots: 0,
        rejections: 0,
        theta_resamples: 0,
        infeasible_constraint: None,
        epsilon: None,
        eta: Some(params.eta),
        gamma: Some(params.gamma),
        theta: None,
        perturbed: None,
        certificate: None,
        violations: Vec::new(),
        implied_bounds: lp.implied_bounds.clone(),
        seed: cfg.seed,
        config: cfg.clone(),
        timings: None,
    };
    let mut outcome = SolveOutcome {
        report: report.clone(),
        normalized,
        folded: None,
        phase1_paths: Vec::new(),
        phase2_path: None,
    };
    let fail = |mut outcome: SolveOutcome<T>, mut report: SolveReport<T>, e: Error| {
        report.status = status_of(&e);
        if let Error::Infeasible(k) = e {
            report.infeasible_constraint = Some(k);
        }
        report.message = Some(e.to_string());
        outcome.report = report;
        Ok(outcome)
    };

    let perturb = Instant::now();
    let pb = match sample_perturbed_bounds(&outcome.normalized, &params, &mut rng) {
        Ok(pb) => pb,
        Err(e) => return fail(outcome, report, e),
    };
    report.rejections = pb.rejections;
    let folded = match fold_bounds(&outcome.normalized, &pb.lower, &pb.upper, &pb.rhs) {
        Ok(f) => f,
        Err(e) => return fail(outcome, report, e),
    };
    report.perturbed = Some(pb);
    let perturb_ms = perturb.elapsed().as_secs_f64() * 1e3;

    let mut run = run_phases(&folded, &lp.objective, cfg, &mut rng);
    outcome.folded = Some(folded);
    let err = run.error.take();
    report.theta = Some(run.theta.clone());
    report.theta_resamples = run.theta_resamples;
    report.epsilon = Some(run.epsilon);
    report.phase1_pivots = run.phase1_pivots.clone();
    report.phase2_pivots = run.phase2_pivots();
    report.total_pivots = run.total_pivots();
    if cfg.record_timings {
        report.timings = Some(Timings {
            perturb_ms,
            phase1_ms: run.phase1_ms,
            phase2_ms: run.phase2_ms,
            total_ms: total.elapsed().as_secs_f64() * 1e3,
        });
    }
    outcome.phase1_paths = run.phase1_paths;
    outcome.phase2_path = run.phase2_path;
    if let Some(e) = err {
        return fail(outcome, report, e);
    }
    let state = run.final_state.expect("successful run has a final state");
    let cert = match extract_certificate(&state, &outcome.normalized, cfg) {
        Ok(c) => c,
        Err(e) => return fail(outcome, report, e),
    };
    report.objective_value = Some(dot(&lp.objective, &cert.primal));
    report.violations = check_certificate(&cert, &outcome.normalized);
    if report.violations.is_empty() {
        report.status = SolveStatus::Optimal;
    } else {
        report.status = SolveStatus::NumericalFailure;
        report.message = Some(format!("{} certificate condition(s) failed", report.violations.len()));
    }
    report.certificate = Some(cert);
    outcome.report = report;
    Ok(outcome)
}

/// Smallest θ-multiplier of a basis; positive means θ is strictly inside its cone.
pub fn min_multiplier<T: Scalar>(basis: &Basis<T>, obj: &[T]) -> T {
    basis.multipliers(obj).into_iter().fold(T::infinity(), T::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::solve_by_enumeration;

    fn boxed(rows: &[Vec<f64>], b: Vec<f64>, c: Vec<f64>) -> InputLp<f64> {
        let d = c.len();
        InputLp::new(rows, b, vec![0.0; d], vec![1.0; d], c).unwrap()
    }

    fn folded_of(lp: &InputLp<f64>) -> FoldedLp<f64> {
        FoldedLp::unperturbed(&normalize_rows(lp).unwrap()).unwrap()
    }

    #[test]
    fn epsilon_modes() {
        let sq = folded_of(&boxed(&[], vec![], vec![1.0, 1.0]));
        let exact = SolverConfig { epsilon_mode: EpsilonMode::ExactEnumeration, ..SolverConfig::default() };
        assert_eq!(epsilon_threshold(&sq, &exact).unwrap(), 0.25);
        let line = folded_of(&boxed(&[], vec![], vec![1.0]));
        assert_eq!(epsilon_threshold(&line, &exact).unwrap(), 1.0);
        let ten = folded_of(&boxed(&[], vec![], vec![1.0; 10]));
        let eps = epsilon_threshold(&ten, &SolverConfig::default()).unwrap();
        assert!((eps - 1e-14).abs() < 1e-28);
    }

    #[test]
    fn exact_epsilon_respects_budget() {
        let big = folded_of(&boxed(&vec![vec![1.0; 12]; 20], vec![1.0; 20], vec![1.0; 12]));
        let exact = SolverConfig { epsilon_mode: EpsilonMode::ExactEnumeration, ..SolverConfig::default() };
        assert!(matches!(epsilon_threshold(&big, &exact), Err(Error::EnumerationTooLarge(_))));
    }

    #[test]
    fn initial_vertex_follows_signs() {
        let sq = folded_of(&boxed(&[], vec![], vec![1.0, 1.0]));
        let b = phase1_initial_vertex(&sq, &[0.6, 0.8]).unwrap();
        assert_eq!(b.vertex(), &[1.0, 1.0]);
        assert_eq!(b.indices(), &[0, 1]);
        assert!(min_multiplier(&b, &[0.6, 0.8]) > 0.0);
        let b = phase1_initial_vertex(&sq, &[-0.6, 0.8]).unwrap();
        assert_eq!(b.vertex(), &[0.0, 1.0]);
        let line = folded_of(&boxed(&[], vec![], vec![1.0]));
        assert_eq!(phase1_initial_vertex(&line, &[-1.0]).unwrap().vertex(), &[0.0]);
        assert_eq!(phase1_initial_vertex(&sq, &[0.0, 1.0]).unwrap_err(), Error::ZeroComponent(0));
    }

    #[test]
    fn phase1_skips_satisfied_rows() {
        let f = folded_of(&boxed(&[vec![1.0, 1.0]], vec![3.0], vec![1.0, 1.0]));
        let r = phase1_sequential(&f, &[0.6, 0.8], 0.25, &SolverConfig::default()).unwrap();
        assert_eq!(r.pivots, vec![0]);
        assert_eq!(r.basis.vertex(), &[1.0, 1.0]);
    }

    #[test]
    fn phase1_lands_on_theta_optimal_facet_vertex() {
        let f = folded_of(&boxed(&[vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0]));
        let theta = [0.6, 0.8];
        let r = phase1_sequential(&f, &theta, 0.25, &SolverConfig::default()).unwrap();
        let oracle = solve_by_enumeration(&f, &theta).unwrap();
        let x = r.basis.vertex();
        assert!((x[0] - oracle.point[0]).abs() < 1e-12 && (x[1] - oracle.point[1]).abs() < 1e-12);
        assert!(f.slack(0, x).abs() < 1e-12);
        assert!(r.basis.contains(0));
        assert_eq!(entry_invariant_gap(&f, &r.basis, &theta), 0.0);
    }

    #[test]
    fn phase1_detects_infeasibility() {
        let f = folded_of(&boxed(&[vec![1.0, 1.0]], vec![-5.0], vec![1.0, 1.0]));
        let r = phase1_sequential(&f, &[0.6, 0.8], 0.25, &SolverConfig::default());
        assert_eq!(r.unwrap_err(), Error::Infeasible(1));
    }

    #[test]
    fn phase2_cases() {
        let sq = folded_of(&boxed(&[], vec![], vec![1.0, 1.0]));
        let cfg = SolverConfig::default();
        let theta = [0.6, 0.8];
        let start = phase1_initial_vertex(&sq, &theta).unwrap();
        let (s, _) = phase2(&sq, start.clone(), &theta, &theta, &cfg).unwrap();
        assert_eq!(s.pivot_count, 0);
        let (s, why) = phase2(&sq, start.clone(), &theta, &[-1.0, -1.0], &cfg).unwrap();
        assert_eq!(why, StopReason::OptimalForTarget);
        assert_eq!(s.basis.vertex(), &[0.0, 0.0]);
        let (s, _) = phase2(&sq, start, &theta, &[-0.6, -0.8], &cfg).unwrap();
        assert_eq!(s.basis.vertex(), &[0.0, 0.0]);
    }

    fn final_state(f: &FoldedLp<f64>, theta: &[f64], c: &[f64], cfg: &SolverConfig<f64>) -> ShadowState<f64> {
        let r = phase1_sequential(f, theta, 0.1, cfg).unwrap();
        phase2(f, r.basis, theta, c, cfg).unwrap().0
    }

    #[test]
    fn certificates_on_square() {
        let cfg = SolverConfig::default();
        let theta = [0.6, 0.8];
        let lp = boxed(&[], vec![], vec![1.0, 1.0]);
        let nl = normalize_rows(&lp).unwrap();
        let f = FoldedLp::unperturbed(&nl).unwrap();
        let cert = extract_certificate(&final_state(&f, &theta, &[1.0, 1.0], &cfg), &nl, &cfg).unwrap();
        assert_eq!(cert.primal, vec![1.0, 1.0]);
        assert!(cert.dual.is_empty());
        assert!((cert.dual_upper[0] - (1.0 + 0.6e-6)).abs() < 1e-15);
        assert_eq!(cert.dual_lower, vec![0.0, 0.0]);
        assert!(check_certificate(&cert, &nl).is_empty());

        let lp = boxed(&[], vec![], vec![-1.0, -1.0]);
        let nl = normalize_rows(&lp).unwrap();
        let cert = extract_certificate(&final_state(&f, &theta, &[-1.0, -1.0], &cfg), &nl, &cfg).unwrap();
        assert_eq!(cert.primal, vec![0.0, 0.0]);
        assert_eq!(cert.dual_upper, vec![0.0, 0.0]);
        assert!((cert.dual_lower[1] - (1.0 - 0.8e-6)).abs() < 1e-15);
        assert!(check_certificate(&cert, &nl).is_empty());
    }

    #[test]
    fn certificate_on_triangle_matches_direct_solve() {
        // x ≥ 0, (x₁ + x₂)/√2 ≤ 1/√2 with a slack box at 2; c = (1, 1)
        let cfg = SolverConfig::default();
        let theta = [0.6, 0.8];
        let lp = InputLp::new(&[vec![1.0, 1.0]], vec![1.0], vec![0.0; 2], vec![2.0; 2], vec![1.0, 1.0]).unwrap();
        let nl = normalize_rows(&lp).unwrap();
        let f = FoldedLp::unperturbed(&nl).unwrap();
        let state = final_state(&f, &theta, &[1.0, 1.0], &cfg);
        let cert = extract_certificate(&state, &nl, &cfg).unwrap();
        // c + optTol·θ tilts toward x₂, so the optimum is the vertex (0, 1)
        assert_eq!(cert.primal.iter().map(|v| v.round()).collect::<Vec<_>>(), vec![0.0, 1.0]);
        // direct 2x2 solve: y/√2 - t₁ = 1 + 0.6e-6 and y/√2 = 1 + 0.8e-6
        let g = [1.0 + 0.6e-6, 1.0 + 0.8e-6];
        let y = g[1] * 2f64.sqrt();
        let t1 = g[1] - g[0];
        assert!((cert.dual[0] - y).abs() < 1e-12);
        assert!((cert.dual_lower[0] - t1).abs() < 1e-12);
        assert!(cert.stationarity_residual < 1e-8);
        assert!(check_certificate(&cert, &nl).is_empty());
    }

    fn cert_for(x: Vec<f64>, y: Vec<f64>) -> Certificate<f64> {
        let d = x.len();
        Certificate {
            primal: x,
            dual: y,
            dual_upper: vec![0.0; d],
            dual_lower: vec![0.0; d],
            feas_tol: 1e-6,
            opt_tol: 1e-6,
            stationarity_residual: 0.0,
        }
    }

    #[test]
    fn check_flags_constructed_violations() {
        let nl = normalize_rows(&boxed(&[vec![1.0, 0.0]], vec![0.5], vec![0.0, 0.0])).unwrap();
        let v = check_certificate(&cert_for(vec![0.5 + 2e-6, 0.0], vec![0.0]), &nl);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].kind, v[0].index), (ViolationKind::RowFeasibility, 0));
        let v = check_certificate(&cert_for(vec![0.0, 0.0], vec![1.0]), &nl);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].kind, v[0].index), (ViolationKind::RowSlackness, 0));
        assert!((v[0].magnitude - 0.5).abs() < 1e-15);
    }

    #[test]
    fn solve_box_and_infeasible() {
        let d = 3;
        let c = vec![1.0 / (d as f64).sqrt(); d];
        let lp = boxed(&[], vec![], c);
        let r = solve(&lp, &SolverConfig::default().with_seed(3)).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let x = &r.certificate.as_ref().unwrap().primal;
        assert!(x.iter().all(|&v| (1.0..=1.0 + 1e-6).contains(&v)));
        let theta = r.theta.as_ref().unwrap();
        assert_eq!(r.phase2_pivots, theta.iter().filter(|&&t| t < 0.0).count());

        let lp = boxed(&[vec![1.0, 1.0]], vec![-5.0], vec![1.0, 1.0]);
        let r = solve(&lp, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.infeasible_constraint, Some(1));
    }

    #[test]
    fn solve_is_deterministic() {
        let lp = boxed(&[vec![1.0, 2.0], vec![-1.0, 1.0]], vec![2.0, 0.5], vec![1.0, 1.0]);
        let cfg = SolverConfig::default().with_seed(17);
        assert_eq!(solve(&lp, &cfg).unwrap().to_json(), solve(&lp, &cfg).unwrap().to_json());
    }

    #[test]
    fn solve_in_single_precision() {
        let lp = InputLp::<f32>::new(&[vec![1.0, 1.0]], vec![1.5], vec![0.0; 2], vec![1.0; 2], vec![1.0, 2.0]).unwrap();
        let cfg = SolverConfig::<f32> { feas_tol: 1e-3, opt_tol: 1e-3, kappa: 1e4, ..SolverConfig::default() };
        let r = solve(&lp, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{:?}", r.message);
        let x = &r.certificate.unwrap().primal;
        assert!((x[0] - 0.5).abs() < 1e-2 && (x[1] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_configuration() {
        let lp = boxed(&[], vec![], vec![1.0, 1.0]);
        let cfg = SolverConfig { kappa: 0.5, ..SolverConfig::default() };
        assert!(matches!(solve(&lp, &cfg), Err(Error::InvalidParameter(_))));
        let cfg = SolverConfig { feas_tol: 0.5, ..SolverConfig::default() };
        assert!(matches!(solve(&lp, &cfg), Err(Error::InvalidParameter(_))));
    }
}
