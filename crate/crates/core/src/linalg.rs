//! Dense matrices and LU factorization with partial pivoting.
//!
//! Basis systems are refactorized from scratch at every pivot, so nothing here
//! supports rank-one updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm2, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Matrix<T: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row vectors. All rows must share one length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Stacks the selected rows of `self` into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        self.rows().map(|r| crate::scalar::dot(r, x)).collect()
    }

    /// `y^T * self`.
    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &yi) in self.rows().zip(y) {
            for (o, &a) in out.iter_mut().zip(r) {
                *o = *o + yi * a;
            }
        }
        out
    }

    pub fn max_row_norm(&self) -> T {
        self.rows().map(norm2).fold(T::zero(), T::max)
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Default pivot threshold, relative to the largest row norm of the factored matrix.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-10;

/// Packed `P·M = L·U` with unit-diagonal `L`.
#[derive(Debug, Clone)]
pub struct LuFactors<T: Scalar> {
    dim: usize,
    lu: Matrix<T>,
    /// Row `i` of `P·M` is row `perm[i]` of `M`.
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactors<T> {
    /// Factorizes a square matrix with partial (row) pivoting.
    ///
    /// A pivot whose magnitude falls below `singular_tol` times the largest row
    /// norm of `m` fails with [`Error::SingularBasis`] carrying the step index.
    pub fn factorize(m: &Matrix<T>, singular_tol: T) -> Result<Self> {
        let d = m.nrows();
        if d == 0 || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "cannot factor a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let threshold = singular_tol * m.max_row_norm();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..d).collect();
        for k in 0..d {
            let (piv, mag) = (k..d)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(mag > threshold) {
                return Err(Error::SingularBasis(k));
            }
            if piv != k {
                for j in 0..d {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..d {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..d {
                        let v = lu[(k, j)];
                        lu[(i, j)] = lu[(i, j)] - f * v;
                    }
                }
            }
        }
        Ok(LuFactors { dim: d, lu, perm })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Unit lower-triangular factor.
    pub fn l(&self) -> Matrix<T> {
        let mut l = Matrix::identity(self.dim);
        for i in 0..self.dim {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    /// Upper-triangular factor.
    pub fn u(&self) -> Matrix<T> {
        let mut u = Matrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    /// Solves `M x = rhs`.
    pub fn solve_right(&self, rhs: &[T]) -> Vec<T> {
        let d = self.dim;
        assert_eq!(rhs.len(), d);
        let mut x: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..d {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..d).rev() {
            let mut s = x[i];
            for j in i + 1..d {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `m^T M = y^T`, i.e. returns the row vector `y^T M^{-1}`.
    pub fn solve_left(&self, y: &[T]) -> Vec<T> {
        let d = self.dim;
        assert_eq!(y.len(), d);
        // U^T w = y
        let mut w = y.to_vec();
        for i in 0..d {
            let mut s = w[i];
            for j in 0..i {
                s = s - self.lu[(j, i)] * w[j];
            }
            w[i] = s / self.lu[(i, i)];
        }
        // L^T v = w
        for i in (0..d).rev() {
            let mut s = w[i];
            for j in i + 1..d {
                s = s - self.lu[(j, i)] * w[j];
            }
            w[i] = s;
        }
        let mut m = vec![T::zero(); d];
        for (i, &p) in self.perm.iter().enumerate() {
            m[p] = w[i];
        }
        m
    }

    /// Estimates `||M^{-1}||_2` by 50 rounds of power iteration on `M^{-T} M^{-1}`.
    ///
    /// The result is a lower bound that is within a factor 2 on all but
    /// adversarially aligned starting vectors.
    pub fn inverse_norm_estimate(&self) -> T {
        let d = self.dim;
        let mut v: Vec<T> = (0..d)
            .map(|i| T::one() + T::lit(0.5) * T::lit(i as f64) / T::lit(d as f64))
            .collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x = *x / nv);
        let mut best = T::zero();
        for _ in 0..50 {
            let x = self.solve_right(&v);
            let nx = norm2(&x);
            best = best.max(nx);
            if !(nx > T::zero()) || !nx.is_finite() {
                break;
            }
            let w = self.solve_left(&x);
            let nw = norm2(&w);
            if !(nw > T::zero()) || !nw.is_finite() {
                break;
            }
            v = w.into_iter().map(|x| x / nw).collect();
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::norm_inf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> Matrix<f64> {
        let mut m = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        m
    }

    fn matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let mut c = Matrix::zeros(a.nrows(), b.ncols());
        for i in 0..a.nrows() {
            for j in 0..b.ncols() {
                c[(i, j)] = (0..a.ncols()).map(|k| a[(i, k)] * b[(k, j)]).sum();
            }
        }
        c
    }

    #[test]
    fn identity_factors_trivially() {
        let f = LuFactors::factorize(&Matrix::<f64>::identity(2), 1e-10).unwrap();
        assert_eq!(f.l(), Matrix::identity(2));
        assert_eq!(f.u(), Matrix::identity(2));
        assert_eq!(f.permutation(), &[0, 1]);
    }

    #[test]
    fn permutation_matrix_swaps_rows() {
        let f = LuFactors::factorize(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-10).unwrap();
        assert_eq!(f.permutation(), &[1, 0]);
        assert_eq!(f.l(), Matrix::identity(2));
        assert_eq!(f.u(), Matrix::identity(2));
    }

    #[test]
    fn rank_one_is_singular() {
        let r = LuFactors::factorize(&mat(&[&[1.0, 1.0], &[1.0, 1.0]]), 1e-10);
        assert_eq!(r.unwrap_err(), Error::SingularBasis(1));
    }

    #[test]
    fn solves_on_small_cases() {
        let i = LuFactors::factorize(&Matrix::<f64>::identity(2), 1e-10).unwrap();
        assert_eq!(i.solve_right(&[3.0, 4.0]), vec![3.0, 4.0]);
        assert_eq!(i.solve_left(&[1.0, -1.0]), vec![1.0, -1.0]);
        let g = LuFactors::factorize(&mat(&[&[2.0, 0.0], &[0.0, 4.0]]), 1e-10).unwrap();
        assert_eq!(g.solve_right(&[2.0, 4.0]), vec![1.0, 1.0]);
        assert_eq!(g.solve_left(&[2.0, 4.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn recovers_constructed_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 4);
        let x: Vec<f64> = vec![0.5, -1.25, 2.0, 3.5];
        let rhs = m.mul_vec(&x);
        let f = LuFactors::factorize(&m, 1e-10).unwrap();
        let got = f.solve_right(&rhs);
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9, "{got:?} vs {x:?}");
        }
        let y = vec![1.0, 2.0, -3.0, 0.25];
        let mm = f.solve_left(&y);
        let back = m.tr_mul_vec(&mm);
        let res: Vec<f64> = back.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(norm_inf(&res) <= 1e-9 * (1.0 + norm_inf(&y)));
    }

    #[test]
    fn factors_reconstruct_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=6 {
            let m = random_matrix(&mut rng, d);
            let f = LuFactors::factorize(&m, 1e-10).unwrap();
            let pm = m.select_rows(f.permutation());
            let lu = matmul(&f.l(), &f.u());
            let scale = m.rows().flatten().fold(0.0_f64, |a, &b| a.max(b.abs()));
            for i in 0..d {
                for j in 0..d {
                    assert!((pm[(i, j)] - lu[(i, j)]).abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn inverse_norm_exact_cases() {
        let f = LuFactors::factorize(&Matrix::<f64>::identity(3), 1e-10).unwrap();
        assert_eq!(f.inverse_norm_estimate(), 1.0);
        let g = LuFactors::factorize(&mat(&[&[2.0, 0.0], &[0.0, 0.5]]), 1e-10).unwrap();
        let est = g.inverse_norm_estimate();
        assert!((1.0..=4.0).contains(&est), "{est}");
    }

    /// Oracle: power iteration on the explicit Gram matrix of the inverse, run
    /// until the Rayleigh quotient stops moving.
    fn inverse_norm_oracle(m: &Matrix<f64>) -> f64 {
        let d = m.nrows();
        let f = LuFactors::factorize(m, 1e-14).unwrap();
        let mut inv = Matrix::zeros(d, d);
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            let col = f.solve_right(&e);
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        let mut gram = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                gram[(i, j)] = (0..d).map(|k| inv[(k, i)] * inv[(k, j)]).sum();
            }
        }
        let mut v = vec![1.0; d];
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let w = gram.mul_vec(&v);
            let n = norm2(&w);
            let next = crate::scalar::dot(&v, &w) / crate::scalar::dot(&v, &v);
            v = w.iter().map(|x| x / n).collect();
            if (next - lambda).abs() <= 1e-15 * next.abs() {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }

    #[test]
    fn inverse_norm_within_factor_two_of_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut m = random_matrix(&mut rng, 5);
        for i in 0..5 {
            m[(i, i)] += 3.0;
        }
        let est = LuFactors::factorize(&m, 1e-10).unwrap().inverse_norm_estimate();
        let truth = inverse_norm_oracle(&m);
        assert!(est <= truth * (1.0 + 1e-12) && est >= truth / 2.0, "{est} vs {truth}");
    }

    #[test]
    fn solves_in_single_precision() {
        let m = Matrix::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let f = LuFactors::factorize(&m, 1e-6).unwrap();
        let x = f.solve_right(&[3.0, 4.0]);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
    }
}
