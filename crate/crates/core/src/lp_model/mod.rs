//! Linear programs in boxed inequality form and their derived shapes.
//!
//! [`InputLp`] is `max c·x s.t. Ax ≤ b, o ≤ x ≤ u`. [`NormalizedLp`] rescales every
//! row of `A` to unit Euclidean norm, and [`FoldedLp`] stacks the box into the
//! constraint matrix as `(A; I; -I)` so the simplex engine sees a single system.

mod mps;

pub use mps::{parse_mps, parse_mps_with, write_mps, MpsOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, norm2, Scalar};

/// Default magnitude substituted for infinite variable bounds.
pub const DEFAULT_BIG_BOUND: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    Lower,
    Upper,
}

/// A variable bound that was infinite in the source and replaced by the big bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpliedBound {
    pub col: usize,
    pub side: BoundSide,
}

/// `max c·x` subject to `Ax ≤ b` and `o ≤ x ≤ u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct InputLp<T: Scalar> {
    pub name: String,
    pub matrix: Matrix<T>,
    pub rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub objective: Vec<T>,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    /// Bounds that were infinite in the source file.
    pub implied_bounds: Vec<ImpliedBound>,
}

impl<T: Scalar> InputLp<T> {
    /// Builds and validates a problem with generated row and column names.
    ///
    /// `rows` may be empty, which describes a pure box.
    pub fn new(
        rows: &[Vec<T>],
        rhs: Vec<T>,
        lower: Vec<T>,
        upper: Vec<T>,
        objective: Vec<T>,
    ) -> Result<Self> {
        let d = objective.len();
        let matrix = if rows.is_empty() {
            Matrix::zeros(0, d)
        } else {
            Matrix::from_rows(rows)?
        };
        let lp = InputLp {
            name: String::new(),
            row_names: (0..matrix.nrows()).map(|i| format!("R{i}")).collect(),
            col_names: (0..d).map(|j| format!("X{j}")).collect(),
            matrix,
            rhs,
            lower,
            upper,
            objective,
            implied_bounds: Vec::new(),
        };
        lp.validate()?;
        Ok(lp)
    }

    /// Box `[lo, hi]^d` with no further rows.
    pub fn unit_box(d: usize, lo: T, hi: T, objective: Vec<T>) -> Result<Self> {
        Self::new(&[], vec![], vec![lo; d], vec![hi; d], objective)
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.num_rows(), self.num_cols());
        if d == 0 {
            return Err(Error::EmptyProblem);
        }
        if self.matrix.ncols() != d && n > 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, objective has {d}",
                self.matrix.ncols()
            )));
        }
        for (what, len, want) in [
            ("rhs", self.rhs.len(), n),
            ("lower", self.lower.len(), d),
            ("upper", self.upper.len(), d),
            ("row_names", self.row_names.len(), n),
            ("col_names", self.col_names.len(), d),
        ] {
            if len != want {
                return Err(Error::DimensionMismatch(format!("{what} has length {len}, expected {want}")));
            }
        }
        let finite = self.matrix.rows().flatten().all(|x| x.is_finite())
            && [&self.rhs, &self.lower, &self.upper, &self.objective]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidProblem("non-finite entry".into()));
        }
        if let Some(j) = (0..d).find(|&j| self.lower[j] > self.upper[j]) {
            return Err(Error::InvalidProblem(format!(
                "column {} has lower bound above upper bound",
                self.col_names[j]
            )));
        }
        Ok(())
    }

    /// Membership in `{x : Ax ≤ b + tol, o - tol ≤ x ≤ u + tol}`.
    pub fn contains(&self, x: &[T], tol: T) -> bool {
        self.matrix.rows().zip(&self.rhs).all(|(r, &b)| dot(r, x) <= b + tol)
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&xi, (&lo, &hi))| xi >= lo - tol && xi <= hi + tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("InputLp serializes")
    }
}

/// An [`InputLp`] whose constraint rows have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormalizedLp<T: Scalar> {
    pub lp: InputLp<T>,
    /// Original row norms; row `i` and `b_i` were divided by `row_scales[i]`.
    pub row_scales: Vec<T>,
}

impl<T: Scalar> std::ops::Deref for NormalizedLp<T> {
    type Target = InputLp<T>;
    fn deref(&self) -> &InputLp<T> {
        &self.lp
    }
}

/// Divides each row of `A` and its right-hand side by the row's Euclidean norm.
pub fn normalize_rows<T: Scalar>(lp: &InputLp<T>) -> Result<NormalizedLp<T>> {
    let floor = T::lit(1e-300).max(T::min_positive_value());
    let mut out = lp.clone();
    let mut row_scales = Vec::with_capacity(lp.num_rows());
    for i in 0..lp.num_rows() {
        let s = norm2(lp.matrix.row(i));
        if !(s >= floor) {
            return Err(Error::ZeroRow(i));
        }
        out.matrix.row_mut(i).iter_mut().for_each(|a| *a = *a / s);
        out.rhs[i] = lp.rhs[i] / s;
        row_scales.push(s);
    }
    Ok(NormalizedLp { lp: out, row_scales })
}

/// Which original object a row of a [`FoldedLp`] encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// Row `i` of `A`.
    Constraint(usize),
    /// `x_j ≤ u_j`.
    Upper(usize),
    /// `-x_j ≤ -o_j`.
    Lower(usize),
}

/// The box folded into the constraint matrix: rows `(A; I; -I)`, rhs `(b; u; -o)`.
///
/// Rows can be switched off through `active`; inactive rows are ignored by every
/// feasibility scan and can never enter a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FoldedLp<T: Scalar> {
    pub n: usize,
    pub d: usize,
    pub matrix: Matrix<T>,
    pub rhs: Vec<T>,
    pub active: Vec<bool>,
}

/// Stacks `A`, `I`, `-I` with right-hand side `(b̂; û; -ô)`.
pub fn fold_bounds<T: Scalar>(
    lp: &NormalizedLp<T>,
    lower: &[T],
    upper: &[T],
    rhs: &[T],
) -> Result<FoldedLp<T>> {
    let (n, d) = (lp.num_rows(), lp.num_cols());
    if lower.len() != d || upper.len() != d || rhs.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "bounds have lengths ({}, {}, {}), expected ({d}, {d}, {n})",
            lower.len(),
            upper.len(),
            rhs.len()
        )));
    }
    if let Some(j) = (0..d).find(|&j| !(lower[j] < upper[j])) {
        return Err(Error::CrossedBounds(j));
    }
    let mut matrix = Matrix::zeros(n + 2 * d, d);
    for i in 0..n {
        matrix.row_mut(i).copy_from_slice(lp.matrix.row(i));
    }
    for j in 0..d {
        matrix[(n + j, j)] = T::one();
        matrix[(n + d + j, j)] = -T::one();
    }
    let rhs = rhs
        .iter()
        .copied()
        .chain(upper.iter().copied())
        .chain(lower.iter().map(|&o| -o))
        .collect();
    Ok(FoldedLp {
        n,
        d,
        matrix,
        rhs,
        active: vec![true; n + 2 * d],
    })
}

impl<T: Scalar> FoldedLp<T> {
    /// Folds the unperturbed bounds of `lp`.
    pub fn unperturbed(lp: &NormalizedLp<T>) -> Result<Self> {
        fold_bounds(lp, &lp.lower, &lp.upper, &lp.rhs)
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn row_kind(&self, i: usize) -> RowKind {
        if i < self.n {
            RowKind::Constraint(i)
        } else if i < self.n + self.d {
            RowKind::Upper(i - self.n)
        } else {
            RowKind::Lower(i - self.n - self.d)
        }
    }

    /// `b̄_i - Ā_i·x`.
    #[inline]
    pub fn slack(&self, i: usize, x: &[T]) -> T {
        self.rhs[i] - dot(self.matrix.row(i), x)
    }

    /// Largest violation over the active rows, with its row, if any row is violated.
    pub fn max_violation(&self, x: &[T]) -> Option<(usize, T)> {
        (0..self.num_rows())
            .filter(|&i| self.active[i])
            .map(|i| (i, -self.slack(i, x)))
            .filter(|&(_, v)| v > T::zero())
            .fold(None, |best: Option<(usize, T)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        self.max_violation(x).is_none_or(|(_, v)| v <= tol)
    }

    /// Lower bounds `ô` encoded in the `-I` block.
    pub fn lower(&self) -> Vec<T> {
        self.rhs[self.n + self.d..].iter().map(|&v| -v).collect()
    }

    /// Upper bounds `û` encoded in the `I` block.
    pub fn upper(&self) -> Vec<T> {
        self.rhs[self.n..self.n + self.d].to_vec()
    }

    /// Copy with every right-hand side scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.rhs.iter_mut().for_each(|b| *b = *b * factor);
        out
    }
}
