//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use shadow_simplex::{
    normalize_rows, oracle::solve_by_enumeration, random::sample_perturbed_bounds, fold_bounds, FoldedLp64,
    InputLp64, PerturbationParams, RngState,
};

/// `n` rows with entries uniform in `[-1, 1]`, right-hand sides uniform in
/// `[0, 1]` (so the origin is feasible), box `[0, 1]^d`, objective uniform in
/// `[-1, 1]^d`.
pub fn random_instance(rng: &mut impl Rng, n: usize, d: usize) -> InputLp64 {
    loop {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        if rows.iter().any(|r| r.iter().map(|v| v * v).sum::<f64>() < 1e-6) {
            continue;
        }
        return InputLp64::new(&rows, rhs, vec![0.0; d], vec![1.0; d], c).unwrap();
    }
}

/// Row-normalizes `lp` and folds it with freshly perturbed bounds.
pub fn perturbed_folded(lp: &InputLp64, rng: &mut RngState) -> FoldedLp64 {
    let nl = normalize_rows(lp).unwrap();
    let k = lp.num_rows() + 2 * lp.num_cols();
    let params = PerturbationParams::from_tolerances(1e-6, 1e-6, k).unwrap();
    let pb = sample_perturbed_bounds(&nl, &params, rng).unwrap();
    fold_bounds(&nl, &pb.lower, &pb.upper, &pb.rhs).unwrap()
}

/// Uniform unit vector in `R^d`.
pub fn unit_vector(rng: &mut RngState, d: usize) -> Vec<f64> {
    shadow_simplex::random::sample_sphere_uniform(d, rng)
}

/// Starting basis for a shadow run: the oracle's `z`-optimal vertex.
pub fn oracle_start(folded: &FoldedLp64, z: &[f64]) -> Vec<usize> {
    solve_by_enumeration(folded, z).unwrap().basis
}
