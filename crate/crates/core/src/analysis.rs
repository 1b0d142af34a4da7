//! Monte Carlo mean width, the objective range `N`, the slack threshold `ω`,
//! and the theoretical pivot bounds they feed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp_model::{fold_bounds, FoldedLp, NormalizedLp};
use crate::oracle::{best_in_catalog, enumerate_vertices, VertexCatalog};
use crate::random::{sample_gaussian, sample_perturbed_bounds, PerturbationParams, RngState};
use crate::scalar::{dot, norm2, Scalar};
use crate::solver::{run_phases, SolverConfig};

/// How each trial maximizes its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerSolver {
    /// Vertex enumeration; exact but limited to small systems.
    Oracle,
    /// The two-phase shadow method.
    TwoPhase,
}

/// One direction of a mean-width run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WidthSample<T: Scalar> {
    pub trial: usize,
    /// RNG stream that produced the direction; `RngState::new(seed, stream)` replays it.
    pub stream: u64,
    /// `z·x_max / ‖z‖`.
    pub support: T,
    /// Pivots spent by the inner solver (0 for the oracle).
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeanWidthEstimate<T: Scalar> {
    pub samples: Vec<WidthSample<T>>,
    /// Mean of the successful support values, an estimate of half the mean width.
    pub mean: T,
    pub std_err: T,
    /// Trials attempted.
    pub count: usize,
    pub failures: usize,
}

/// The estimate without per-trial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanWidthSummary {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
    pub failures: usize,
    pub mean_pivots: f64,
}

impl<T: Scalar> MeanWidthEstimate<T> {
    /// Aggregates per-trial results in trial order; errors count as failures.
    pub fn from_trials(results: Vec<Result<WidthSample<T>>>) -> Result<Self> {
        let count = results.len();
        let samples: Vec<WidthSample<T>> = results.into_iter().filter_map(|r| r.ok()).collect();
        if samples.is_empty() {
            return Err(Error::AllTrialsFailed);
        }
        let k = samples.len();
        let kt = T::lit(k as f64);
        let mean = samples.iter().map(|s| s.support).sum::<T>() / kt;
        let std_err = if k > 1 {
            let var = samples.iter().map(|s| (s.support - mean).powi(2)).sum::<T>() / T::lit((k - 1) as f64);
            (var / kt).sqrt()
        } else {
            T::zero()
        };
        Ok(MeanWidthEstimate { failures: count - k, samples, mean, std_err, count })
    }

    pub fn summary(&self) -> MeanWidthSummary {
        let pivots: usize = self.samples.iter().map(|s| s.pivots).sum();
        MeanWidthSummary {
            mean: self.mean.as_f64(),
            std_err: self.std_err.as_f64(),
            count: self.count,
            failures: self.failures,
            mean_pivots: pivots as f64 / self.samples.len() as f64,
        }
    }

    /// One row per successful trial: `trial,stream,support,pivots`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,stream,support,pivots\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{:e},{}\n", s.trial, s.stream, s.support.as_f64(), s.pivots));
        }
        out
    }
}

/// Per-trial mean-width sampler over one fixed region.
///
/// Trials are independent and the sampler is `Sync`, so callers may evaluate
/// them in any order or in parallel and aggregate with
/// [`MeanWidthEstimate::from_trials`].
pub struct WidthSampler<'a, T: Scalar> {
    folded: &'a FoldedLp<T>,
    catalog: Option<VertexCatalog<T>>,
    cfg: SolverConfig<T>,
    rng: RngState,
}

impl<'a, T: Scalar> WidthSampler<'a, T> {
    pub fn new(folded: &'a FoldedLp<T>, inner: InnerSolver, cfg: &SolverConfig<T>, rng: &RngState) -> Result<Self> {
        let catalog = match inner {
            InnerSolver::Oracle => Some(enumerate_vertices(folded)?),
            InnerSolver::TwoPhase => None,
        };
        Ok(WidthSampler { folded, catalog, cfg: cfg.clone(), rng: rng.clone() })
    }

    pub fn trial(&self, trial: usize) -> Result<WidthSample<T>> {
        let mut rng = self.rng.child(trial as u64);
        let stream = rng.stream();
        let theta = random_direction::<T>(self.folded.d, &mut rng);
        let (x, pivots) = maximize(self.folded, self.catalog.as_ref(), &theta, &self.cfg, &mut rng)?;
        Ok(WidthSample { trial, stream, support: dot(&theta, &x), pivots })
    }
}

fn random_direction<T: Scalar>(d: usize, rng: &mut RngState) -> Vec<T> {
    loop {
        let z: Vec<T> = sample_gaussian(d, rng);
        let r = norm2(&z);
        if r > T::lit(1e-12) {
            return z.into_iter().map(|v| v / r).collect();
        }
    }
}

fn maximize<T: Scalar>(
    folded: &FoldedLp<T>,
    catalog: Option<&VertexCatalog<T>>,
    obj: &[T],
    cfg: &SolverConfig<T>,
    rng: &mut RngState,
) -> Result<(Vec<T>, usize)> {
    match catalog {
        Some(cat) => Ok((best_in_catalog(cat, obj)?.point, 0)),
        None => {
            let run = run_phases(folded, obj, cfg, rng);
            let pivots = run.total_pivots();
            match (run.final_state, run.error) {
                (Some(state), None) => Ok((state.basis.vertex().to_vec(), pivots)),
                (_, err) => Err(err.unwrap_or_else(|| Error::NumericalBreakdown("run ended without a basis".into()))),
            }
        }
    }
}

/// Estimates `E[max_x z·x / ‖z‖]` over a fixed region with Gaussian `z`.
pub fn estimate_mean_width<T: Scalar>(
    folded: &FoldedLp<T>,
    trials: usize,
    rng: &RngState,
    inner: InnerSolver,
    cfg: &SolverConfig<T>,
) -> Result<MeanWidthEstimate<T>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let sampler = WidthSampler::new(folded, inner, cfg, rng)?;
    MeanWidthEstimate::from_trials((0..trials).map(|i| sampler.trial(i)).collect())
}

/// One trial of the joint estimate: fresh perturbation, then a fresh direction.
pub fn joint_width_trial<T: Scalar>(
    lp: &NormalizedLp<T>,
    params: &PerturbationParams<T>,
    trial: usize,
    rng: &RngState,
    inner: InnerSolver,
    cfg: &SolverConfig<T>,
) -> Result<WidthSample<T>> {
    let mut rng = rng.child(trial as u64);
    let stream = rng.stream();
    let pb = sample_perturbed_bounds(lp, params, &mut rng)?;
    let folded = fold_bounds(lp, &pb.lower, &pb.upper, &pb.rhs)?;
    let catalog = match inner {
        InnerSolver::Oracle => Some(enumerate_vertices(&folded)?),
        InnerSolver::TwoPhase => None,
    };
    let theta = random_direction::<T>(folded.d, &mut rng);
    let (x, pivots) = maximize(&folded, catalog.as_ref(), &theta, cfg, &mut rng)?;
    Ok(WidthSample { trial, stream, support: dot(&theta, &x), pivots })
}

/// Mean width averaged over both the bound perturbation and the direction.
pub fn estimate_mean_width_joint<T: Scalar>(
    lp: &NormalizedLp<T>,
    params: &PerturbationParams<T>,
    trials: usize,
    rng: &RngState,
    inner: InnerSolver,
    cfg: &SolverConfig<T>,
) -> Result<MeanWidthEstimate<T>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    MeanWidthEstimate::from_trials((0..trials).map(|i| joint_width_trial(lp, params, i, rng, inner, cfg)).collect())
}

/// `max(|max c·x|, |max -c·x|)` over the region: a deterministic stand-in for
/// the objective range `N`.
pub fn estimate_n<T: Scalar>(
    folded: &FoldedLp<T>,
    c: &[T],
    inner: InnerSolver,
    cfg: &SolverConfig<T>,
    rng: &RngState,
) -> Result<T> {
    if c.iter().all(|&v| v == T::zero()) {
        return Ok(T::zero());
    }
    let catalog = match inner {
        InnerSolver::Oracle => Some(enumerate_vertices(folded)?),
        InnerSolver::TwoPhase => None,
    };
    let neg: Vec<T> = c.iter().map(|&v| -v).collect();
    let mut best = T::zero();
    for (k, obj) in [c.to_vec(), neg].iter().enumerate() {
        let mut r = rng.child(k as u64);
        let (x, _) = maximize(folded, catalog.as_ref(), obj, cfg, &mut r)?;
        best = best.max(dot(obj, &x).abs());
    }
    Ok(best)
}

/// Good-slack threshold `ω = η / (1240 d ln n)`.
pub fn omega(eta: f64, n: usize, d: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("ω needs n ≥ 3, got {n}")));
    }
    if d == 0 || !(eta > 0.0) {
        return Err(Error::Domain("ω needs d ≥ 1 and η > 0".into()));
    }
    Ok(eta / (1240.0 * d as f64 * (n as f64).ln()))
}

/// Inputs of the pivot bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub eps: f64,
    /// Half mean width.
    pub m: f64,
    /// Objective range.
    pub big_n: f64,
    /// Rate of the `L`-exponential auxiliary objective.
    pub l: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.d == 0 || self.n < self.d {
            return Err(Error::Domain(format!("need n ≥ max(d, 3) and d ≥ 1, got n = {}, d = {}", self.n, self.d)));
        }
        for (name, v) in [("eta", self.eta), ("eps", self.eps), ("M", self.m), ("N", self.big_n), ("L", self.l)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

fn checked_ln(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        Err(Error::Domain(format!("logarithm of nonpositive {what}: {x}")))
    }
}

fn checked_sqrt(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else {
        Err(Error::Domain(format!("square root of negative value {x}")))
    }
}

/// Expected shadow path length bound
/// `121 + 141 d sqrt((d ln n · M/η) · ln(2480 e d³ N ln²n / (η ε)))`.
pub fn pivot_bound(bi: &BoundInputs) -> Result<f64> {
    bi.validate()?;
    let d = bi.d as f64;
    let ln_n = (bi.n as f64).ln();
    let inner = 2480.0 * std::f64::consts::E * d.powi(3) * bi.big_n * ln_n * ln_n / (bi.eta * bi.eps);
    let root = checked_sqrt(d * ln_n * bi.m / bi.eta * checked_ln(inner, "bound argument")?)?;
    Ok(121.0 + 141.0 * d * root)
}

/// The variant stated through `ω` and `L`: `120 + 4d sqrt((M/ω) ln(dLN/(ωε)))`.
pub fn omega_bound(bi: &BoundInputs) -> Result<f64> {
    bi.validate()?;
    let d = bi.d as f64;
    let w = omega(bi.eta, bi.n, bi.d)?;
    let lg = checked_ln(d * bi.l * bi.big_n / (w * bi.eps), "bound argument")?;
    Ok(120.0 + 4.0 * d * checked_sqrt(bi.m / w * lg)?)
}

/// Counts over the feasible bases of one perturbed system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlackCounts {
    pub feasible_bases: usize,
    /// Feasible bases whose smallest non-basic slack is below the threshold.
    pub small_slack: usize,
}

/// Classifies every feasible basis by its minimum slack over the rows outside
/// the basis.
pub fn slack_statistic<T: Scalar>(folded: &FoldedLp<T>, threshold: T) -> Result<SlackCounts> {
    let catalog = enumerate_vertices(folded)?;
    let mut counts = SlackCounts { feasible_bases: 0, small_slack: 0 };
    for e in catalog.feasible() {
        counts.feasible_bases += 1;
        let min_slack = (0..folded.num_rows())
            .filter(|&i| folded.active[i] && !e.basis.contains(&i))
            .map(|i| folded.slack(i, &e.point))
            .fold(T::infinity(), T::min);
        if min_slack < threshold {
            counts.small_slack += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_model::{normalize_rows, InputLp};

    fn square(scale: f64, d: usize) -> FoldedLp<f64> {
        let lp = InputLp::unit_box(d, 0.0, scale, vec![1.0; d]).unwrap();
        FoldedLp::unperturbed(&normalize_rows(&lp).unwrap()).unwrap()
    }

    #[test]
    fn omega_values() {
        assert!((omega(1240.0 * 10f64.ln(), 10, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((omega(2.0, 10, 3).unwrap() / omega(1.0, 10, 3).unwrap() - 2.0).abs() < 1e-12);
        let eta = 1e-6 / (4.0 * 25f64.ln());
        let expect = 1e-6 / (4.0 * 25f64.ln() * 1240.0 * 2.0 * 21f64.ln());
        assert!((omega(eta, 21, 2).unwrap() / expect - 1.0).abs() < 1e-12);
        assert!(matches!(omega(1.0, 2, 1), Err(Error::Domain(_))));
    }

    fn inputs() -> BoundInputs {
        BoundInputs { n: 100, d: 2, eta: 1e-6 / (4.0 * 104f64.ln()), eps: 1e-14, m: 100.0, big_n: 1e4, l: 1.0 }
    }

    #[test]
    fn bound_vanishing_width() {
        let bi = BoundInputs { n: 10, d: 1, eta: 1.0, eps: 1.0, m: 1e-12, big_n: 1.0, l: 1.0 };
        assert!((pivot_bound(&bi).unwrap() - 121.0).abs() < 1e-3);
    }

    #[test]
    fn bound_reference_value() {
        let bi = inputs();
        let ln_n = 100f64.ln();
        let arg = 2480.0 * 1f64.exp() * 8.0 * 1e4 * ln_n.powi(2) / (bi.eta * 1e-14);
        let expect = 121.0 + 282.0 * (2.0 * ln_n * 100.0 / bi.eta * arg.ln()).sqrt();
        assert!((pivot_bound(&bi).unwrap() / expect - 1.0).abs() < 1e-12);
        assert!(omega_bound(&bi).unwrap().is_finite());
    }

    #[test]
    fn bound_monotonicity() {
        let base = inputs();
        for m in [1e-3, 1.0, 1e3] {
            for eta in [1e-9, 1e-6, 1e-3] {
                let b = BoundInputs { m, eta, ..base };
                let more_m = BoundInputs { m: 2.0 * m, ..b };
                let more_eta = BoundInputs { eta: 2.0 * eta, ..b };
                assert!(pivot_bound(&more_m).unwrap() > pivot_bound(&b).unwrap());
                assert!(pivot_bound(&more_eta).unwrap() < pivot_bound(&b).unwrap());
            }
        }
    }

    #[test]
    fn bound_domain_errors() {
        let bad = BoundInputs { eps: 1e30, big_n: 1e-30, ..inputs() };
        assert!(matches!(pivot_bound(&bad), Err(Error::Domain(_))));
        assert!(matches!(pivot_bound(&BoundInputs { m: 0.0, ..inputs() }), Err(Error::Domain(_))));
        assert!(matches!(pivot_bound(&BoundInputs { n: 1, d: 1, ..inputs() }), Err(Error::Domain(_))));
    }

    #[test]
    fn mean_width_segment_is_exact() {
        let lp = InputLp::unit_box(1, -1.0, 1.0, vec![1.0]).unwrap();
        let f = FoldedLp::unperturbed(&normalize_rows(&lp).unwrap()).unwrap();
        let cfg = SolverConfig::default();
        let est = estimate_mean_width(&f, 200, &RngState::new(1, 0), InnerSolver::Oracle, &cfg).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.failures, 0);
    }

    #[test]
    fn mean_width_square_and_scaling() {
        let cfg = SolverConfig::default();
        let rng = RngState::new(5, 0);
        let est = estimate_mean_width(&square(1.0, 2), 4000, &rng, InnerSolver::Oracle, &cfg).unwrap();
        assert!((est.mean - 2.0 / std::f64::consts::PI).abs() < 4.0 * est.std_err);
        let a = estimate_mean_width(&square(1.0, 3), 2000, &rng, InnerSolver::Oracle, &cfg).unwrap();
        let b = estimate_mean_width(&square(10.0, 3), 2000, &rng, InnerSolver::Oracle, &cfg).unwrap();
        // same directions, so homogeneity holds sample by sample
        assert!((b.mean / a.mean - 10.0).abs() < 0.2);
    }

    #[test]
    fn mean_width_two_phase_agrees_with_oracle() {
        let cfg = SolverConfig::default();
        let rng = RngState::new(9, 0);
        let f = square(1.0, 2);
        let a = estimate_mean_width(&f, 100, &rng, InnerSolver::Oracle, &cfg).unwrap();
        let b = estimate_mean_width(&f, 100, &rng, InnerSolver::TwoPhase, &cfg).unwrap();
        assert_eq!(b.failures, 0);
        assert!((a.mean - b.mean).abs() < 1e-9);
        assert!(b.to_csv().starts_with("trial,stream,support,pivots\n"));
    }

    #[test]
    fn joint_estimate_tracks_conditional() {
        let lp = normalize_rows(&InputLp::unit_box(2, 0.0, 1.0, vec![1.0, 1.0]).unwrap()).unwrap();
        let params = PerturbationParams::from_tolerances(1e-6, 1e-6, 4).unwrap();
        let cfg = SolverConfig::default();
        let est = estimate_mean_width_joint(&lp, &params, 2000, &RngState::new(2, 0), InnerSolver::Oracle, &cfg).unwrap();
        assert!((est.mean - 2.0 / std::f64::consts::PI).abs() < 4.0 * est.std_err + 1e-5);
    }

    #[test]
    fn n_estimates() {
        let cfg = SolverConfig::default();
        let rng = RngState::new(0, 0);
        let c = [1.0 / 2f64.sqrt(); 2];
        let n = estimate_n(&square(1.0, 2), &c, InnerSolver::Oracle, &cfg, &rng).unwrap();
        assert!((n - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(estimate_n(&square(1.0, 2), &[0.0, 0.0], InnerSolver::Oracle, &cfg, &rng).unwrap(), 0.0);
        let n2 = estimate_n(&square(1.0, 2), &c, InnerSolver::TwoPhase, &cfg, &rng).unwrap();
        assert!((n2 - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn slack_counts_on_square() {
        let counts = slack_statistic(&square(1.0, 2), 0.5).unwrap();
        assert_eq!(counts, SlackCounts { feasible_bases: 4, small_slack: 0 });
        let counts = slack_statistic(&square(1.0, 2), 2.0).unwrap();
        assert_eq!(counts.small_slack, 4);
    }

    #[test]
    fn all_failures_is_an_error() {
        let r: Result<MeanWidthEstimate<f64>> = MeanWidthEstimate::from_trials(vec![Err(Error::EmptyRegion)]);
        assert_eq!(r.unwrap_err(), Error::AllTrialsFailed);
    }
}
