//! Stochastic primitives: shifted Laplace perturbations of the bound vectors,
//! uniform directions on the sphere and the isotropic `L`-exponential law.
//!
//! Every draw goes through an [`RngState`], a ChaCha8 stream keyed by
//! `(seed, stream)`. Parallel trials use [`RngState::child`] so that no two
//! trials share a stream.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::Open01;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp_model::NormalizedLp;
use crate::scalar::{norm2, Scalar};

/// Seeded, stream-addressed random source.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent state for trial `index`, derived only from `(seed, stream, index)`.
    pub fn child(&self, index: u64) -> RngState {
        RngState::new(splitmix64(self.seed ^ splitmix64(self.stream)), index)
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// One draw from the Laplace law with location `v + γη` and scale `η`,
/// by inverting its CDF.
pub fn sample_shifted_laplace<T: Scalar, R: Rng + ?Sized>(v: T, eta: T, gamma: T, rng: &mut R) -> T {
    let u: f64 = Distribution::<f64>::sample(&Open01, rng) - 0.5;
    let offset = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
    v + gamma * eta + eta * T::lit(offset)
}

/// Entrywise independent shifted-Laplace vector around `v`.
pub fn sample_exponential_vector<T: Scalar, R: Rng + ?Sized>(v: &[T], eta: T, gamma: T, rng: &mut R) -> Vec<T> {
    v.iter().map(|&vi| sample_shifted_laplace(vi, eta, gamma, rng)).collect()
}

/// Perturbation scale, shift and the tolerances that bound the accepted bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PerturbationParams<T: Scalar> {
    pub eta: T,
    pub gamma: T,
    pub feas_tol: T,
    pub opt_tol: T,
    pub max_rejections: usize,
}

pub const DEFAULT_FEAS_TOL: f64 = 1e-6;
pub const DEFAULT_OPT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_REJECTIONS: usize = 64;

impl<T: Scalar> PerturbationParams<T> {
    /// `η = feasTol / (4 ln k)` and `γ = 2 ln k` for `k = n + 2d` perturbed entries.
    ///
    /// With this choice `2γη = feasTol`, so an accepted draw moves every bound by
    /// at most `feasTol`.
    pub fn from_tolerances(feas_tol: T, opt_tol: T, k: usize) -> Result<Self> {
        let lo = T::lit(1e-9);
        let hi = T::lit(1e-2);
        for (name, v) in [("feasTol", feas_tol), ("optTol", opt_tol)] {
            if !(v >= lo && v <= hi) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [1e-9, 1e-2]")));
            }
        }
        if k < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 perturbed entries, got {k}")));
        }
        let ln_k = T::lit(k as f64).ln();
        Ok(PerturbationParams {
            eta: feas_tol / (T::lit(4.0) * ln_k),
            gamma: T::lit(2.0) * ln_k,
            feas_tol,
            opt_tol,
            max_rejections: DEFAULT_MAX_REJECTIONS,
        })
    }
}

/// Perturbed bounds `(ô, û, b̂)` and how many draws were thrown away first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PerturbedBounds<T: Scalar> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub rhs: Vec<T>,
    pub rejections: usize,
}

/// Every perturbed entry moved outward by an amount in `[0, band]`.
fn within_band<T: Scalar>(orig: &[T], pert: &[T], band: T) -> bool {
    orig.iter().zip(pert).all(|(&v, &p)| p >= v && p <= v + band)
}

/// Draws `(-ô, û, b̂)` around `(-o, u, b)` and rejects until every entry moved
/// outward by at most `feasTol`, so the feasible region only grows.
pub fn sample_perturbed_bounds<T: Scalar, R: Rng + ?Sized>(
    lp: &NormalizedLp<T>,
    params: &PerturbationParams<T>,
    rng: &mut R,
) -> Result<PerturbedBounds<T>> {
    let neg_lower: Vec<T> = lp.lower.iter().map(|&o| -o).collect();
    for rejections in 0..=params.max_rejections {
        let nl = sample_exponential_vector(&neg_lower, params.eta, params.gamma, rng);
        let upper = sample_exponential_vector(&lp.upper, params.eta, params.gamma, rng);
        let rhs = sample_exponential_vector(&lp.rhs, params.eta, params.gamma, rng);
        let ok = within_band(&neg_lower, &nl, params.feas_tol)
            && within_band(&lp.upper, &upper, params.feas_tol)
            && within_band(&lp.rhs, &rhs, params.feas_tol);
        if ok {
            return Ok(PerturbedBounds {
                lower: nl.into_iter().map(|x| -x).collect(),
                upper,
                rhs,
                rejections,
            });
        }
    }
    Err(Error::RejectionBudgetExceeded(params.max_rejections))
}

/// Uniform point on `S^{d-1}`: a standard Gaussian vector, normalized.
pub fn sample_sphere_uniform<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    assert!(d >= 1, "sphere dimension must be positive");
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&g);
        if n >= 1e-12 {
            return g.iter().map(|&x| T::lit(x / n)).collect();
        }
    }
}

/// Standard Gaussian vector, unnormalized.
pub fn sample_gaussian<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    (0..d)
        .map(|_| T::lit(StandardNormal.sample(rng)))
        .collect()
}

/// Draw from the density proportional to `exp(-L‖x‖)` on `R^d`: a uniform
/// direction scaled by a `Gamma(d, 1/L)` radius.
pub fn sample_l_exponential<T: Scalar, R: Rng + ?Sized>(d: usize, l: T, rng: &mut R) -> Vec<T> {
    assert!(l > T::zero(), "L must be positive");
    let dir: Vec<T> = sample_sphere_uniform(d, rng);
    let gamma = Gamma::new(d as f64, 1.0 / l.as_f64()).expect("shape and scale are positive");
    let r = T::lit(gamma.sample(rng));
    dir.into_iter().map(|x| x * r).collect()
}

/// `E‖X‖^k = L^{-k} (k+d-1)! / (d-1)!` for the `L`-exponential law.
pub fn l_exponential_norm_moment(d: usize, l: f64, k: u32) -> f64 {
    let rising: f64 = (d..d + k as usize).map(|m| m as f64).product();
    rising / l.powi(k as i32)
}
