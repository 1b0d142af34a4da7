//! Brute-force ground truth for small instances.
//!
//! Everything here enumerates all `d`-subsets of rows. It is deliberately naive
//! and only meant to check the simplex engine.

use crate::error::{Error, Result};
use crate::linalg::{LuFactors, DEFAULT_SINGULAR_TOL};
use crate::lp_model::FoldedLp;
use crate::scalar::{dot, norm_inf, Scalar};

/// Largest number of subsets any enumeration will visit.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;
/// Feasibility slack used when flagging basic solutions.
pub const CATALOG_FEAS_TOL: f64 = 1e-9;

/// `m choose k`, saturating.
pub fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((m - i) as u128) / (i as u128 + 1))
}

/// Lexicographic `k`-subsets of `0..m`.
pub(crate) struct Combinations {
    m: usize,
    cur: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(m: usize, k: usize) -> Self {
        Combinations {
            m,
            cur: (0..k).collect(),
            done: k > m,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let k = self.cur.len();
        match (0..k).rev().find(|&i| self.cur[i] < self.m - k + i) {
            Some(i) => {
                self.cur[i] += 1;
                for j in i + 1..k {
                    self.cur[j] = self.cur[j - 1] + 1;
                }
            }
            None => self.done = true,
        }
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry<T: Scalar> {
    /// Sorted row indices.
    pub basis: Vec<usize>,
    pub point: Vec<T>,
    pub feasible: bool,
    factors: LuFactors<T>,
}

impl<T: Scalar> CatalogEntry<T> {
    pub fn multipliers(&self, obj: &[T]) -> Vec<T> {
        self.factors.solve_left(obj)
    }
}

/// Every basic solution of a folded system.
#[derive(Debug, Clone)]
pub struct VertexCatalog<T: Scalar> {
    pub entries: Vec<CatalogEntry<T>>,
    pub n_rows: usize,
    pub d: usize,
    /// Subsets skipped because their submatrix is singular.
    pub singular: usize,
}

impl<T: Scalar> VertexCatalog<T> {
    pub fn feasible(&self) -> impl Iterator<Item = &CatalogEntry<T>> {
        self.entries.iter().filter(|e| e.feasible)
    }
}

/// Basic solutions of every nonsingular `d`-subset of the active rows.
pub fn enumerate_vertices<T: Scalar>(folded: &FoldedLp<T>) -> Result<VertexCatalog<T>> {
    let rows: Vec<usize> = (0..folded.num_rows()).filter(|&i| folded.active[i]).collect();
    let d = folded.d;
    let count = binomial(rows.len(), d);
    if count > ENUMERATION_BUDGET {
        return Err(Error::EnumerationTooLarge(count));
    }
    let tol = T::tol(CATALOG_FEAS_TOL);
    let mut entries = Vec::new();
    let mut singular = 0;
    for pick in Combinations::new(rows.len(), d) {
        let basis: Vec<usize> = pick.iter().map(|&p| rows[p]).collect();
        let sub = folded.matrix.select_rows(&basis);
        let factors = match LuFactors::factorize(&sub, T::tol(DEFAULT_SINGULAR_TOL)) {
            Ok(f) => f,
            Err(Error::SingularBasis(_)) => {
                singular += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let rhs: Vec<T> = basis.iter().map(|&i| folded.rhs[i]).collect();
        let point = factors.solve_right(&rhs);
        let feasible = folded.contains(&point, tol);
        entries.push(CatalogEntry {
            basis,
            point,
            feasible,
            factors,
        });
    }
    Ok(VertexCatalog {
        entries,
        n_rows: folded.num_rows(),
        d,
        singular,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedOptimum<T> {
    pub value: T,
    pub point: Vec<T>,
    pub basis: Vec<usize>,
}

/// Maximum of `obj` over the feasible vertices; near-ties keep the
/// lexicographically smallest basis.
pub fn solve_by_enumeration<T: Scalar>(folded: &FoldedLp<T>, obj: &[T]) -> Result<EnumeratedOptimum<T>> {
    best_in_catalog(&enumerate_vertices(folded)?, obj)
}

pub fn best_in_catalog<T: Scalar>(catalog: &VertexCatalog<T>, obj: &[T]) -> Result<EnumeratedOptimum<T>> {
    let mut best: Option<EnumeratedOptimum<T>> = None;
    for e in catalog.feasible() {
        let value = dot(obj, &e.point);
        let better = match &best {
            None => true,
            Some(b) => value > b.value + T::tol(1e-12) * (T::one() + b.value.abs()),
        };
        if better {
            best = Some(EnumeratedOptimum {
                value,
                point: e.point.clone(),
                basis: e.basis.clone(),
            });
        }
    }
    best.ok_or(Error::EmptyRegion)
}

fn scaled_min<T: Scalar>(mz: &[T], mc: &[T], t: T) -> (T, T) {
    let min = mz.iter().zip(mc).map(|(&a, &b)| a + t * b).fold(T::infinity(), T::min);
    let scale = T::one() + norm_inf(mz) + t * norm_inf(mc);
    (min, scale)
}

/// Reconstructs the shadow path by scanning normal cones.
///
/// Starting from the feasible basis whose cone strictly contains `z`, finds
/// where `z + t·c` leaves the current cone by bisection (to a relative width of
/// `1e-12`) and continues with the unvisited feasible basis that owns the
/// objectives just past that point.
pub fn exhaustive_shadow_path<T: Scalar>(
    folded: &FoldedLp<T>,
    z: &[T],
    c: &[T],
    t_stop: T,
) -> Result<Vec<Vec<usize>>> {
    let catalog = enumerate_vertices(folded)?;
    let cones: Vec<(&CatalogEntry<T>, Vec<T>, Vec<T>)> = catalog
        .feasible()
        .map(|e| (e, e.multipliers(z), e.multipliers(c)))
        .collect();
    let optimal_at = |k: usize, t: T| {
        let (min, scale) = scaled_min(&cones[k].1, &cones[k].2, t);
        min >= -T::tol(1e-9) * scale
    };
    let inside_at = |k: usize, t: T| {
        let (min, _) = scaled_min(&cones[k].1, &cones[k].2, t);
        min > T::tol(1e-9)
    };
    let owners = |t: T| (0..cones.len()).filter(|&k| inside_at(k, t)).collect::<Vec<_>>();

    let start = owners(T::zero());
    if start.len() > 1 {
        return Err(Error::AmbiguousCone(0.0));
    }
    let mut cur = *start.first().ok_or(Error::EmptyRegion)?;
    let mut visited = vec![cur];
    let mut t = T::zero();
    let two = T::lit(2.0);
    loop {
        let stays_forever = cones[cur].2.iter().all(|&m| m >= -T::tol(1e-9));
        if t_stop.is_finite() && optimal_at(cur, t_stop) || !t_stop.is_finite() && stays_forever {
            break;
        }
        // bracket the exit point
        let mut lo = t;
        let mut hi = if t_stop.is_finite() { t_stop } else { T::one().max(two * t) };
        while optimal_at(cur, hi) {
            lo = hi;
            hi = hi * two;
            if !hi.is_finite() {
                return Err(Error::NumericalBreakdown("cone exit not bracketed".into()));
            }
        }
        while hi - lo > T::tol(1e-12) * T::one().max(hi) {
            let mid = lo + (hi - lo) / two;
            if optimal_at(cur, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = t + (lo - t) / two;
        if lo > t && owners(mid).len() > 1 {
            return Err(Error::AmbiguousCone(mid.as_f64()));
        }
        // the successor owns the objectives just past the exit point
        let probe = hi + T::tol(1e-9) * T::one().max(hi);
        let next = (0..cones.len())
            .filter(|k| !visited.contains(k) && optimal_at(*k, hi))
            .map(|k| (k, scaled_min(&cones[k].1, &cones[k].2, probe).0))
            .fold(None, |best: Option<(usize, T)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((next, _)) = next else {
            return Err(Error::NumericalBreakdown(format!("no cone continues the path at t = {:e}", hi.as_f64())));
        };
        cur = next;
        visited.push(cur);
        t = hi;
    }
    Ok(visited.into_iter().map(|k| cones[k].0.basis.clone()).collect())
}
