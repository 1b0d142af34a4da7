//! Two-phase shadow vertex simplex method with exponential bound perturbations.
//!
//! The solver works on `max c·x s.t. Ax ≤ b, o ≤ x ≤ u` with unit-norm rows. It
//! perturbs `o`, `u` and `b` outward by shifted Laplace noise (rejecting draws
//! that move any bound by more than `feasTol`), finds a feasible vertex by
//! inserting the constraints one at a time with truncated shadow vertex runs,
//! then follows the shadow path from a random direction `θ` to
//! `c + optTol·θ`. The final primal/dual pair is checked against the
//! unperturbed data.
//!
//! All numerics are generic over [`Scalar`]; the `*64` aliases below fix the
//! usual `f64` instantiation.
//!
//! ```
//! use shadow_simplex::{solve, InputLp64, SolverConfig64, SolveStatus};
//!
//! let lp = InputLp64::new(
//!     &[vec![1.0, 1.0]],
//!     vec![1.5],
//!     vec![0.0, 0.0],
//!     vec![1.0, 1.0],
//!     vec![1.0, 2.0],
//! )
//! .unwrap();
//! let report = solve(&lp, &SolverConfig64::default()).unwrap();
//! assert_eq!(report.status, SolveStatus::Optimal);
//! let x = &report.certificate.as_ref().unwrap().primal;
//! assert!((x[0] - 0.5).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
//! ```

// `!(a > b)` is used on purpose so that NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod lp_model;
pub mod oracle;
pub mod random;
pub mod scalar;
pub mod shadow;
pub mod solver;

pub use error::{Error, Result};
pub use lp_model::{fold_bounds, normalize_rows, parse_mps, write_mps, FoldedLp, InputLp, NormalizedLp};
pub use random::{PerturbationParams, RngState};
pub use scalar::Scalar;
pub use shadow::{follow_shadow_path, Basis, ShadowState, StopReason};
pub use solver::{solve, solve_detailed, Certificate, SolveReport, SolveStatus, SolverConfig};

pub type InputLp64 = InputLp<f64>;
pub type NormalizedLp64 = NormalizedLp<f64>;
pub type FoldedLp64 = FoldedLp<f64>;
pub type Basis64 = Basis<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolveReport64 = SolveReport<f64>;
pub type Certificate64 = Certificate<f64>;
pub type PerturbationParams64 = PerturbationParams<f64>;

pub type InputLp32 = InputLp<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type SolveReport32 = SolveReport<f32>;
