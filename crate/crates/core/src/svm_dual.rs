//! Box-constrained SVM dual without offset, solved by dual coordinate ascent.
//!
//! Maximizes `G(α) = 1'α − ½ α'Qα` subject to `0 ≤ α_i ≤ C_i`. The matrix
//! `Q` is reached only through [`QuadraticOperator`], so the same solver
//! serves explicit Gram matrices and implicit linear-kernel operators.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_SWEEPS: usize = 200_000;

/// Access to a symmetric positive semidefinite `Q` for coordinate ascent.
///
/// `Cache` summarizes `Qα` for the current iterate; the solver keeps it
/// consistent through [`update`](QuadraticOperator::update).
pub trait QuadraticOperator {
    type Cache;

    fn dim(&self) -> usize;
    fn diagonal(&self, i: usize) -> f64;
    fn init_cache(&self, alpha: &[f64]) -> Self::Cache;
    /// `(Qα)_i` for the iterate summarized by `cache`.
    fn row_dot(&self, cache: &Self::Cache, i: usize) -> f64;
    /// Accounts for `α_i += delta`.
    fn update(&self, cache: &mut Self::Cache, i: usize, delta: f64);
    /// `Qv` computed from scratch.
    fn apply(&self, v: &[f64]) -> Vec<f64>;
    fn all_finite(&self) -> bool;
}

impl QuadraticOperator for GramMatrix {
    type Cache = Vec<f64>;

    fn dim(&self) -> usize {
        self.n()
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    fn init_cache(&self, alpha: &[f64]) -> Vec<f64> {
        self.mul_vec(alpha)
    }

    fn row_dot(&self, cache: &Vec<f64>, i: usize) -> f64 {
        cache[i]
    }

    fn update(&self, cache: &mut Vec<f64>, i: usize, delta: f64) {
        for (c, q) in cache.iter_mut().zip(self.row(i)) {
            *c += delta * q;
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.mul_vec(v)
    }

    fn all_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }
}

/// Per-example upper bounds `C_i`; every lower bound is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(upper: Vec<f64>) -> Result<Self> {
        if let Some(c) = upper.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::param(
                "C",
                format!("box bounds must be finite and positive, got {c}"),
            ));
        }
        Ok(BoxBounds { upper })
    }

    pub fn uniform(n: usize, c: f64) -> Result<Self> {
        Self::new(alloc::vec![c; n])
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn contains(&self, alpha: &[f64]) -> bool {
        alpha.len() == self.upper.len() && alpha.iter().zip(&self.upper).all(|(&a, &c)| (0.0..=c).contains(&a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub objective: f64,
    /// `||w_t||²` per working-set member; empty for a plain solve.
    pub per_candidate_norms: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after each full or shrunk sweep, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub record_history: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            record_history: false,
        }
    }
}

impl QpOptions {
    pub fn with_tol(tol: f64) -> Self {
        QpOptions { tol, ..Self::default() }
    }
}

/// `1'α − ½ α'Qα`.
pub fn dual_objective<Q: QuadraticOperator + ?Sized>(q: &Q, alpha: &[f64]) -> f64 {
    let qa = q.apply(alpha);
    let lin: f64 = alpha.iter().sum();
    lin - 0.5 * crate::linalg::dot(alpha, &qa)
}

/// Projected gradient of the maximization problem at `alpha`, given `Qα`.
pub fn projected_gradient(qalpha: &[f64], alpha: &[f64], bounds: &BoxBounds) -> Vec<f64> {
    alpha
        .iter()
        .zip(qalpha)
        .zip(bounds.upper())
        .map(|((&a, &qa), &c)| {
            let g = 1.0 - qa;
            if a <= 0.0 {
                g.max(0.0)
            } else if a >= c {
                g.min(0.0)
            } else {
                g
            }
        })
        .collect()
}

/// Largest projected-gradient magnitude at `alpha`.
pub fn kkt_violation<Q: QuadraticOperator + ?Sized>(q: &Q, alpha: &[f64], bounds: &BoxBounds) -> f64 {
    let qa = q.apply(alpha);
    projected_gradient(&qa, alpha, bounds)
        .into_iter()
        .map(libm::fabs)
        .fold(0.0, f64::max)
}

pub fn solve_box_qp<Q: QuadraticOperator + ?Sized>(
    q: &Q,
    bounds: &BoxBounds,
    alpha0: Option<&[f64]>,
    tol: f64,
) -> Result<DualState> {
    solve_box_qp_with(q, bounds, alpha0, &QpOptions::with_tol(tol))
}

/// Dual coordinate ascent in ascending index order with active-set shrinking.
///
/// Returns once every projected-gradient component is at most `opts.tol`,
/// verified on the full index set against a freshly computed `Qα`.
pub fn solve_box_qp_with<Q: QuadraticOperator + ?Sized>(
    q: &Q,
    bounds: &BoxBounds,
    alpha0: Option<&[f64]>,
    opts: &QpOptions,
) -> Result<DualState> {
    let n = q.dim();
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {}", opts.tol)));
    }
    if bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bounds.len(),
        });
    }
    if !q.all_finite() {
        return Err(Error::NonFinite("quadratic operator"));
    }
    let mut alpha = match alpha0 {
        Some(a) => {
            if a.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: a.len(),
                });
            }
            if !bounds.contains(a) {
                return Err(Error::param("alpha0", "warm start outside the box"));
            }
            a.to_vec()
        }
        None => alloc::vec![0.0; n],
    };
    let upper = bounds.upper();
    let diag: Vec<f64> = (0..n).map(|i| q.diagonal(i)).collect();
    let mut cache = q.init_cache(&alpha);
    let mut history = Vec::new();

    let mut active: Vec<usize> = (0..n).collect();
    let mut keep = alloc::vec![true; n];
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut sweeps = 0;
    let mut converged = n == 0;

    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &active {
            // gradient of the minimization form ½α'Qα − 1'α
            let g = q.row_dot(&cache, i) - 1.0;
            let c = upper[i];
            let mut pg = 0.0;
            if alpha[i] <= 0.0 {
                if g > pg_max_old {
                    keep[i] = false;
                    continue;
                }
                if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] >= c {
                if g < pg_min_old {
                    keep[i] = false;
                    continue;
                }
                if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if libm::fabs(pg) > 1e-14 {
                let new = if diag[i] > 0.0 {
                    (alpha[i] - g / diag[i]).clamp(0.0, c)
                } else if g < 0.0 {
                    c
                } else {
                    0.0
                };
                let delta = new - alpha[i];
                if delta != 0.0 {
                    alpha[i] = new;
                    q.update(&mut cache, i, delta);
                }
            }
        }
        let full = active.len() == n;
        active.retain(|&i| keep[i]);
        if opts.record_history {
            history.push(dual_objective(q, &alpha));
        }

        let viol = if pg_max.is_finite() { pg_max.max(-pg_min) } else { 0.0 };
        if viol <= opts.tol {
            if full && active.len() == n {
                // confirm against a fresh Qα; cached sums drift slightly
                cache = q.init_cache(&alpha);
                if kkt_violation(q, &alpha, bounds) <= opts.tol {
                    converged = true;
                    break;
                }
            }
            active = (0..n).collect();
            keep.iter_mut().for_each(|k| *k = true);
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }

    let objective = dual_objective(q, &alpha);
    Ok(DualState {
        alpha,
        objective,
        per_candidate_norms: Vec::new(),
        sweeps,
        converged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn gm(n: usize, v: &[f64]) -> GramMatrix {
        GramMatrix::from_row_major(n, v.to_vec()).unwrap()
    }

    #[test]
    fn rank_one_pair() {
        let q = gm(2, &[1.0, 1.0, 1.0, 1.0]);
        let b = BoxBounds::uniform(2, 10.0).unwrap();
        let s = solve_box_qp(&q, &b, None, 1e-8).unwrap();
        assert_eq!(s.alpha, vec![1.0, 0.0]);
        assert_eq!(s.objective, 0.5);
        assert!(s.converged);
    }

    #[test]
    fn zero_matrix_goes_to_upper_bounds() {
        let q = gm(3, &[0.0; 9]);
        let b = BoxBounds::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = solve_box_qp(&q, &b, None, 1e-6).unwrap();
        assert_eq!(s.alpha, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.objective, 6.0);
    }

    #[test]
    fn objective_examples() {
        let id = GramMatrix::identity(3);
        assert_eq!(dual_objective(&id, &[0.0; 3]), 0.0);
        assert_eq!(dual_objective(&id, &[1.0; 3]), 1.5);
    }

    #[test]
    fn errors() {
        let q = gm(1, &[1.0]);
        let b = BoxBounds::uniform(1, 1.0).unwrap();
        assert!(solve_box_qp(&q, &b, None, 0.0).is_err());
        assert!(solve_box_qp(&q, &b, None, -1.0).is_err());
        assert!(solve_box_qp(&q, &b, Some(&[2.0]), 1e-3).is_err());
        assert!(BoxBounds::new(vec![0.0]).is_err());
        assert!(BoxBounds::new(vec![f64::NAN]).is_err());
        let bad = GramMatrix::from_row_major(1, vec![f64::NAN]);
        assert!(bad.is_err());
    }

    #[test]
    fn identity_interior_solution() {
        // max Σα − ½Σα² with C = 2 → α = 1
        let q = GramMatrix::identity(4);
        let b = BoxBounds::uniform(4, 2.0).unwrap();
        let s = solve_box_qp(&q, &b, None, 1e-10).unwrap();
        assert!(s.alpha.iter().all(|&a| (a - 1.0).abs() < 1e-12));
        assert!((s.objective - 2.0).abs() < 1e-12);
    }
}
