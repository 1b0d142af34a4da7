//! Shadow vertex pivoting.
//!
//! The engine follows the objectives `z + t·c` for increasing `t ≥ 0`. A basis
//! `B` stays current while every multiplier of `z + t·c` with respect to `Ā_B`
//! is nonnegative; the dual ratio test finds the `t` where one of them hits
//! zero, and the primal ratio test along the edge that releases that row picks
//! the row that enters.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{LuFactors, DEFAULT_SINGULAR_TOL};
use crate::lp_model::FoldedLp;
use crate::scalar::{dot, norm_inf, Scalar};

/// Threshold below which a multiplier counts as negative.
pub const DUAL_TOL: f64 = 1e-9;
/// Relative window inside which two ratios are treated as tied.
pub const TIE_TOL: f64 = 1e-9;
/// Minimal edge/row inner product for a row to block.
pub const EDGE_TOL: f64 = 1e-12;
/// Primal feasibility slack accepted for a starting vertex.
pub const START_FEAS_TOL: f64 = 1e-9;
/// Smallest multiplier of the auxiliary objective accepted at the start.
pub const GENERIC_TOL: f64 = 1e-9;

/// A set of `d` linearly independent rows, its factorization and its vertex.
#[derive(Debug, Clone)]
pub struct Basis<T: Scalar> {
    indices: Vec<usize>,
    factors: LuFactors<T>,
    vertex: Vec<T>,
}

impl<T: Scalar> Basis<T> {
    pub fn new(folded: &FoldedLp<T>, indices: &[usize]) -> Result<Self> {
        let mut indices = indices.to_vec();
        indices.sort_unstable();
        indices.dedup();
        if indices.len() != folded.d {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} distinct rows, need {}",
                indices.len(),
                folded.d
            )));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= folded.num_rows()) {
            return Err(Error::DimensionMismatch(format!("row {i} out of range")));
        }
        let sub = folded.matrix.select_rows(&indices);
        let factors = LuFactors::factorize(&sub, T::tol(DEFAULT_SINGULAR_TOL))?;
        let rhs: Vec<T> = indices.iter().map(|&i| folded.rhs[i]).collect();
        let vertex = factors.solve_right(&rhs);
        Ok(Basis {
            indices,
            factors,
            vertex,
        })
    }

    /// Sorted row indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn vertex(&self) -> &[T] {
        &self.vertex
    }

    pub fn factors(&self) -> &LuFactors<T> {
        &self.factors
    }

    pub fn contains(&self, row: usize) -> bool {
        self.indices.binary_search(&row).is_ok()
    }

    /// `obj^T Ā_B^{-1}`, one entry per basis row in sorted order.
    pub fn multipliers(&self, obj: &[T]) -> Vec<T> {
        self.factors.solve_left(obj)
    }
}

/// One basis exchange on the shadow path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PivotRecord<T: Scalar> {
    pub leaving: usize,
    pub entering: usize,
    /// Increase of `t` taken by this pivot.
    pub lambda: T,
    /// `t` after the pivot.
    pub t: T,
    /// `c·x` at the new vertex.
    pub objective_value: T,
    /// `z·x` at the new vertex.
    pub aux_value: T,
}

/// Position on the shadow path.
#[derive(Debug, Clone)]
pub struct ShadowState<T: Scalar> {
    pub basis: Basis<T>,
    pub aux: Vec<T>,
    pub target: Vec<T>,
    pub t: T,
    pub pivot_count: usize,
    pub trace: Vec<PivotRecord<T>>,
    pub start_objective: T,
    pub start_aux: T,
}

impl<T: Scalar> ShadowState<T> {
    pub fn new(basis: Basis<T>, aux: Vec<T>, target: Vec<T>) -> Self {
        let start_objective = dot(&target, basis.vertex());
        let start_aux = dot(&aux, basis.vertex());
        ShadowState {
            basis,
            aux,
            target,
            t: T::zero(),
            pivot_count: 0,
            trace: Vec::new(),
            start_objective,
            start_aux,
        }
    }

    /// `z + t·c` at the current `t`.
    pub fn current_objective(&self) -> Vec<T> {
        self.aux
            .iter()
            .zip(&self.target)
            .map(|(&z, &c)| z + self.t * c)
            .collect()
    }

    /// Basis sequence visited so far, starting basis first.
    pub fn visited(&self, start: &[usize]) -> Vec<Vec<usize>> {
        let mut cur = start.to_vec();
        let mut out = vec![cur.clone()];
        for r in &self.trace {
            cur.retain(|&i| i != r.leaving);
            cur.push(r.entering);
            cur.sort_unstable();
            out.push(cur.clone());
        }
        out
    }
}

/// `obj^T Ā_B^{-1}` for the state's current basis.
pub fn multipliers<T: Scalar>(state: &ShadowState<T>, obj: &[T]) -> Vec<T> {
    state.basis.multipliers(obj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioOutcome<T> {
    /// Every multiplier of the target is nonnegative.
    Optimal,
    /// The multiplier at `position` (row `row`) reaches zero after `t` grows by `lambda`.
    Step { lambda: T, position: usize, row: usize },
}

/// Dual ratio test on the current basis.
///
/// Among positions whose target multiplier is below `-DUAL_TOL`, returns the
/// smallest step `λ = -(w A_B^{-1})_i / (c A_B^{-1})_i`, with `w = z + t·c`.
/// Near-ties go to the least row index.
pub fn ratio_test<T: Scalar>(state: &ShadowState<T>) -> Result<RatioOutcome<T>> {
    let mz = state.basis.multipliers(&state.aux);
    let mc = state.basis.multipliers(&state.target);
    let cur: Vec<T> = mz.iter().zip(&mc).map(|(&a, &b)| a + state.t * b).collect();
    let scale = T::one() + norm_inf(&mz) + state.t * norm_inf(&mc);
    let breakdown = T::tol(1e-6) * scale;
    if let Some(i) = (0..cur.len()).find(|&i| cur[i] < -breakdown) {
        return Err(Error::NumericalBreakdown(format!(
            "multiplier of row {} is {:e} at t = {:e}",
            state.basis.indices()[i],
            cur[i].as_f64(),
            state.t.as_f64()
        )));
    }
    let neg = -T::tol(DUAL_TOL);
    let mut best: Option<(T, usize)> = None;
    for (i, (&num, &den)) in cur.iter().zip(&mc).enumerate() {
        if den >= neg {
            continue;
        }
        if den.abs() < T::tol(EDGE_TOL) && num < T::zero() {
            return Err(Error::NumericalBreakdown(format!("vanishing denominator at position {i}")));
        }
        let lambda = num.max(T::zero()) / -den;
        best = match best {
            None => Some((lambda, i)),
            Some((bl, bi)) => {
                let window = T::tol(TIE_TOL) * T::one().max(bl.abs());
                let row = state.basis.indices()[i];
                let brow = state.basis.indices()[bi];
                if lambda < bl - window || (lambda <= bl + window && row < brow) {
                    Some((lambda, i))
                } else {
                    Some((bl, bi))
                }
            }
        };
    }
    Ok(match best {
        None => RatioOutcome::Optimal,
        Some((lambda, position)) => RatioOutcome::Step {
            lambda,
            position,
            row: state.basis.indices()[position],
        },
    })
}

/// Result of the primal ratio test along an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStep<T> {
    pub entering: usize,
    pub step: T,
    /// Second smallest blocking ratio, if another row blocks.
    pub runner_up: Option<T>,
}

/// Primal ratio test along the edge leaving basis position `position`.
///
/// The edge direction `w` solves `Ā_B w = -e_position`, so it releases the
/// leaving row and keeps the other basis rows tight.
pub fn edge_ratio_test<T: Scalar>(folded: &FoldedLp<T>, basis: &Basis<T>, position: usize) -> Result<EdgeStep<T>> {
    let d = folded.d;
    let mut e = vec![T::zero(); d];
    e[position] = -T::one();
    let w = basis.factors.solve_right(&e);
    let blocks = T::tol(EDGE_TOL) * T::one().max(norm_inf(&w));
    let x = basis.vertex();
    let mut best: Option<(T, usize)> = None;
    let mut runner_up: Option<T> = None;
    for j in 0..folded.num_rows() {
        if !folded.active[j] || basis.contains(j) {
            continue;
        }
        let rate = dot(folded.matrix.row(j), &w);
        if rate <= blocks {
            continue;
        }
        let ratio = folded.slack(j, x).max(T::zero()) / rate;
        match best {
            None => best = Some((ratio, j)),
            Some((br, _)) => {
                let window = T::tol(TIE_TOL) * T::one().max(br.abs());
                // rows are scanned in increasing order, so a tie keeps the earlier row
                if ratio < br - window {
                    runner_up = Some(br);
                    best = Some((ratio, j));
                } else {
                    runner_up = Some(runner_up.map_or(ratio, |r: T| r.min(ratio)));
                }
            }
        }
    }
    let (step, entering) = best.ok_or(Error::UnboundedDirection(basis.indices()[position]))?;
    Ok(EdgeStep {
        entering,
        step,
        runner_up,
    })
}

/// Exchanges the row at `position` for the primal blocking row and advances `t` by `lambda`.
pub fn pivot_step<T: Scalar>(
    state: &ShadowState<T>,
    lambda: T,
    position: usize,
    folded: &FoldedLp<T>,
) -> Result<ShadowState<T>> {
    let leaving = state.basis.indices()[position];
    let edge = edge_ratio_test(folded, &state.basis, position)?;
    let mut rows: Vec<usize> = state.basis.indices().to_vec();
    rows[position] = edge.entering;
    let basis = Basis::new(folded, &rows)?;
    let t = state.t + lambda;
    let record = PivotRecord {
        leaving,
        entering: edge.entering,
        lambda,
        t,
        objective_value: dot(&state.target, basis.vertex()),
        aux_value: dot(&state.aux, basis.vertex()),
    };
    let mut next = state.clone();
    next.basis = basis;
    next.t = t;
    next.pivot_count += 1;
    next.trace.push(record);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// The basis is optimal for the target objective itself.
    OptimalForTarget,
    /// The path reached `t_stop`; the basis is optimal for `z + t_stop·c`.
    TruncatedAtT,
    PivotBudget,
}

/// Follows the shadow path from `start` along `z + t·c` until the target is
/// optimal, `t` would pass `t_stop`, or `max_pivots` pivots were made.
///
/// `start` must be feasible and `z` strictly inside its normal cone.
pub fn follow_shadow_path<T: Scalar>(
    folded: &FoldedLp<T>,
    start: Basis<T>,
    z: &[T],
    c: &[T],
    t_stop: T,
    max_pivots: usize,
) -> Result<(ShadowState<T>, StopReason)> {
    if z.len() != folded.d || c.len() != folded.d {
        return Err(Error::DimensionMismatch("objective length differs from d".into()));
    }
    if let Some((row, v)) = folded.max_violation(start.vertex()) {
        if v > T::tol(START_FEAS_TOL) {
            return Err(Error::InfeasibleStart {
                row,
                violation: v.as_f64(),
            });
        }
    }
    let mz = start.multipliers(z);
    let min_mz = mz.iter().copied().fold(T::infinity(), T::min);
    if !(min_mz > T::tol(GENERIC_TOL)) {
        return Err(Error::NonGenericAuxiliary(min_mz.as_f64()));
    }
    let mut state = ShadowState::new(start, z.to_vec(), c.to_vec());
    if !(t_stop > T::zero()) {
        return Ok((state, StopReason::TruncatedAtT));
    }
    loop {
        match ratio_test(&state)? {
            RatioOutcome::Optimal => return Ok((state, StopReason::OptimalForTarget)),
            RatioOutcome::Step { lambda, position, .. } => {
                if state.t + lambda > t_stop {
                    state.t = t_stop;
                    return Ok((state, StopReason::TruncatedAtT));
                }
                if state.pivot_count >= max_pivots {
                    return Ok((state, StopReason::PivotBudget));
                }
                state = pivot_step(&state, lambda, position, folded)?;
            }
        }
    }
}

/// CSV rendering of a trace: `pivot,leaving,entering,lambda,t,objective,aux`.
pub fn trace_csv<T: Scalar>(trace: &[PivotRecord<T>]) -> String {
    let mut out = String::from("pivot,leaving,entering,lambda,t,objective,aux\n");
    for (k, r) in trace.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            k + 1,
            r.leaving,
            r.entering,
            r.lambda,
            r.t,
            r.objective_value,
            r.aux_value
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_model::{normalize_rows, InputLp};

    /// Unit square folded: rows 0,1 are x₁ ≤ 1, x₂ ≤ 1; rows 2,3 are -x₁ ≤ 0, -x₂ ≤ 0.
    fn square() -> FoldedLp<f64> {
        let lp = InputLp::unit_box(2, 0.0, 1.0, vec![1.0, 1.0]).unwrap();
        FoldedLp::unperturbed(&normalize_rows(&lp).unwrap()).unwrap()
    }

    fn state_at(folded: &FoldedLp<f64>, rows: &[usize], z: &[f64], c: &[f64]) -> ShadowState<f64> {
        ShadowState::new(Basis::new(folded, rows).unwrap(), z.to_vec(), c.to_vec())
    }

    #[test]
    fn multipliers_on_identity_and_diagonal() {
        let sq = square();
        let s = state_at(&sq, &[0, 1], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(multipliers(&s, &[1.0, 1.0]), vec![1.0, 1.0]);
        let s = state_at(&sq, &[0, 3], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(multipliers(&s, &[2.0, 3.0]), vec![2.0, -3.0]);
    }

    #[test]
    fn ratio_test_cases() {
        let sq = square();
        let s = state_at(&sq, &[0, 1], &[1.0, 1.0], &[-1.0, 0.0]);
        assert_eq!(ratio_test(&s).unwrap(), RatioOutcome::Step { lambda: 1.0, position: 0, row: 0 });
        let s = state_at(&sq, &[0, 1], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(ratio_test(&s).unwrap(), RatioOutcome::Optimal);
        let s = state_at(&sq, &[0, 1], &[2.0, 1.0], &[-1.0, -1.0]);
        assert_eq!(ratio_test(&s).unwrap(), RatioOutcome::Step { lambda: 1.0, position: 1, row: 1 });
    }

    #[test]
    fn ratio_test_ties_go_to_least_row() {
        let sq = square();
        let s = state_at(&sq, &[0, 1], &[1.0, 1.0], &[-1.0, -1.0]);
        assert_eq!(ratio_test(&s).unwrap(), RatioOutcome::Step { lambda: 1.0, position: 0, row: 0 });
    }

    #[test]
    fn first_pivot_on_square() {
        let sq = square();
        let s = state_at(&sq, &[0, 1], &[0.6, 0.8], &[-1.0, 0.1]);
        let RatioOutcome::Step { lambda, position, row } = ratio_test(&s).unwrap() else {
            panic!("expected a step")
        };
        assert_eq!(row, 0);
        let next = pivot_step(&s, lambda, position, &sq).unwrap();
        assert_eq!(next.basis.indices(), &[1, 2]);
        assert_eq!(next.basis.vertex(), &[0.0, 1.0]);
        assert_eq!(next.trace[0].leaving, 0);
        assert_eq!(next.trace[0].entering, 2);
        assert!((next.t - 0.6).abs() < 1e-15);
        // the leaving row is now slack and the entering row tight
        assert!(sq.slack(0, next.basis.vertex()) > 0.5);
        assert_eq!(sq.slack(2, next.basis.vertex()), 0.0);
    }

    #[test]
    fn path_on_square() {
        let sq = square();
        let start = Basis::new(&sq, &[0, 1]).unwrap();
        let (s, why) = follow_shadow_path(&sq, start.clone(), &[0.6, 0.8], &[1.0, 2.0], f64::INFINITY, 100).unwrap();
        assert_eq!((why, s.pivot_count), (StopReason::OptimalForTarget, 0));

        let (s, why) = follow_shadow_path(&sq, start.clone(), &[0.6, 0.8], &[-1.0, -2.0], f64::INFINITY, 100).unwrap();
        assert_eq!(why, StopReason::OptimalForTarget);
        // the ray (0.6 - t, 0.8 - 2t) leaves the positive quadrant through y = 0 first
        assert_eq!(s.visited(&[0, 1]), vec![vec![0, 1], vec![0, 3], vec![2, 3]]);
        assert_eq!(s.basis.vertex(), &[0.0, 0.0]);

        let (s, why) = follow_shadow_path(&sq, start.clone(), &[0.6, 0.8], &[-1.0, -2.0], 0.0, 100).unwrap();
        assert_eq!((why, s.pivot_count), (StopReason::TruncatedAtT, 0));

        let (s, why) = follow_shadow_path(&sq, start, &[0.6, 0.8], &[-1.0, -2.0], 0.5, 100).unwrap();
        assert_eq!((why, s.pivot_count), (StopReason::TruncatedAtT, 1));
        let m: Vec<f64> = multipliers(&s, &s.current_objective());
        assert!(m.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn pivot_budget_and_start_checks() {
        let sq = square();
        let start = Basis::new(&sq, &[0, 1]).unwrap();
        let (_, why) = follow_shadow_path(&sq, start.clone(), &[0.6, 0.8], &[-1.0, -2.0], f64::INFINITY, 1).unwrap();
        assert_eq!(why, StopReason::PivotBudget);
        assert!(matches!(
            follow_shadow_path(&sq, start.clone(), &[-0.6, 0.8], &[1.0, 1.0], f64::INFINITY, 10),
            Err(Error::NonGenericAuxiliary(_))
        ));
        let mut shifted = sq.clone();
        shifted.rhs[0] = 0.5;
        let bad = Basis::new(&sq, &[0, 1]).unwrap();
        assert!(matches!(
            follow_shadow_path(&shifted, bad, &[0.6, 0.8], &[1.0, 1.0], f64::INFINITY, 10),
            Err(Error::InfeasibleStart { row: 0, .. })
        ));
    }

    #[test]
    fn trace_exports_as_csv() {
        let sq = square();
        let start = Basis::new(&sq, &[0, 1]).unwrap();
        let (s, _) = follow_shadow_path(&sq, start, &[0.6, 0.8], &[-1.0, -2.0], f64::INFINITY, 100).unwrap();
        let csv = trace_csv(&s.trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "pivot,leaving,entering,lambda,t,objective,aux");
        assert!(lines[1].starts_with("1,1,3,"));
        assert!(lines[2].starts_with("2,0,2,"));
    }

    #[test]
    fn runs_in_single_precision() {
        let lp = InputLp::<f32>::unit_box(2, 0.0, 1.0, vec![1.0, 1.0]).unwrap();
        let sq = FoldedLp::unperturbed(&normalize_rows(&lp).unwrap()).unwrap();
        let start = Basis::new(&sq, &[0, 1]).unwrap();
        let (s, why) = follow_shadow_path(&sq, start, &[0.6, 0.8], &[-1.0, -2.0], f32::INFINITY, 100).unwrap();
        assert_eq!(why, StopReason::OptimalForTarget);
        assert_eq!(s.basis.vertex(), &[0.0, 0.0]);
    }
}
