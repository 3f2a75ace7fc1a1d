//! Violated-labeling generation by sorting and per-bag argmax.
//!
//! With `H = K ⊙ αα'` psd and `ȳ` the working-set member maximizing
//! `ŷ'Hŷ`, the labeling `y* = argmax_{ŷ ∈ B} ŷ'Hȳ` is a linear integer
//! program whose optimum is found by sorting `r = Hȳ`. If `ȳ'Hy* > ȳ'Hȳ`
//! then `y*'Hy* > ȳ'Hȳ`, so `y*` violates the current working set.
//! Multi-instance selectors use `r = Hs̄ + τ/2` and decouple per bag.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::kernel::InstanceKernel;

/// Absolute slack below which an improvement is not certified.
pub const CERTIFY_TOL: f64 = 1e-9;

/// The balance constraint defining the feasible labelings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceSpec {
    /// Known labels fixed; the number of negatives among the unlabeled rows is
    /// `⌈(N−l)(l − 1'y_L) / (2l)⌉`.
    Ssl { known: Vec<Option<Label>> },
    /// `|1'ŷ| ≤ beta`.
    Clustering { n: usize, beta: usize },
}

impl BalanceSpec {
    pub fn ssl(known: Vec<Option<Label>>) -> Result<Self> {
        let spec = BalanceSpec::Ssl { known };
        spec.ssl_negatives()?;
        Ok(spec)
    }

    pub fn clustering(n: usize, beta: usize) -> Result<Self> {
        let spec = BalanceSpec::Clustering { n, beta };
        spec.clustering_fixed_block()?;
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        match self {
            BalanceSpec::Ssl { known } => known.len(),
            BalanceSpec::Clustering { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of unlabeled rows that must be labeled `−1`.
    pub fn ssl_negatives(&self) -> Result<usize> {
        let BalanceSpec::Ssl { known } = self else {
            return Err(Error::param("balance", "not a semi-supervised balance"));
        };
        let l = known.iter().flatten().count();
        if l == 0 {
            return Err(Error::InfeasibleBalance("no labeled examples".into()));
        }
        for y in known.iter().flatten() {
            crate::data::check_label(*y)?;
        }
        let u = known.len() - l;
        let sum: i64 = known.iter().flatten().map(|&y| i64::from(y)).sum();
        // ⌈u (l − S) / (2l)⌉ with l − S ∈ [0, 2l]
        let num = u as i64 * (l as i64 - sum);
        let den = 2 * l as i64;
        let k = (num + den - 1) / den;
        if k < 0 || k as usize > u {
            return Err(Error::InfeasibleBalance(format!("{k} negatives among {u} rows")));
        }
        Ok(k as usize)
    }

    /// `(m, β')`: the sizes of the two sorted blocks fixed to `∓1`, and the
    /// effective bound with the parity of `n`.
    fn clustering_fixed_block(&self) -> Result<(usize, usize)> {
        let BalanceSpec::Clustering { n, beta } = *self else {
            return Err(Error::param("balance", "not a clustering balance"));
        };
        if beta > n {
            return Err(Error::param("beta", format!("beta {beta} exceeds n {n}")));
        }
        // 1'ŷ has the parity of n, so |1'ŷ| ≤ β ⇔ |1'ŷ| ≤ β' with n − β' even
        let eff = if (n - beta) % 2 == 0 {
            beta
        } else {
            beta.wrapping_sub(1)
        };
        if eff > n {
            return Err(Error::InfeasibleBalance(format!("beta = 0 with odd n = {n}")));
        }
        Ok(((n - eff) / 2, eff))
    }

    pub fn is_feasible(&self, y: &[Label]) -> bool {
        if y.len() != self.len() || y.iter().any(|&v| v != 1 && v != -1) {
            return false;
        }
        match self {
            BalanceSpec::Ssl { known } => {
                let Ok(k) = self.ssl_negatives() else {
                    return false;
                };
                let fixed_ok = known.iter().zip(y).all(|(k, &v)| k.is_none_or(|kv| kv == v));
                let negs = known.iter().zip(y).filter(|(k, &v)| k.is_none() && v == -1).count();
                fixed_ok && negs == k
            }
            BalanceSpec::Clustering { beta, .. } => {
                let s: i64 = y.iter().map(|&v| i64::from(v)).sum();
                s.unsigned_abs() as usize <= *beta
            }
        }
    }
}

/// Ascending by score, ties by index.
fn sorted_order(r: &[f64], idx: &mut [usize]) {
    idx.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
}

fn check_finite(r: &[f64]) -> Result<()> {
    if r.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("violation scores"))
    }
}

/// Maximizes `r'ŷ` over the semi-supervised feasible set.
///
/// `r` has one entry per example; entries at labeled positions are ignored.
/// The `k` smallest unlabeled scores get `−1`, the rest `+1`.
pub fn generate_ssl(r: &[f64], balance: &BalanceSpec) -> Result<Vec<Label>> {
    let BalanceSpec::Ssl { known } = balance else {
        return Err(Error::param("balance", "expected a semi-supervised balance"));
    };
    if r.len() != known.len() {
        return Err(Error::DimensionMismatch {
            expected: known.len(),
            actual: r.len(),
        });
    }
    check_finite(r)?;
    let k_neg = balance.ssl_negatives()?;
    let mut y: Vec<Label> = known.iter().map(|k| k.unwrap_or(1)).collect();
    let mut unl: Vec<usize> = (0..known.len()).filter(|&i| known[i].is_none()).collect();
    sorted_order(r, &mut unl);
    for &i in &unl[..k_neg] {
        y[i] = -1;
    }
    assert!(balance.is_feasible(&y), "semi-supervised candidate violates balance");
    Ok(y)
}

/// Maximizes `r'ŷ` subject to `|1'ŷ| ≤ β`.
///
/// After sorting ascending, the first `m` entries get `−1`, the last `m` get
/// `+1` and the middle follows the sign of `r` (zero counts as positive),
/// with `m = (N − β')/2` and `β'` the largest bound `≤ β` sharing the parity
/// of `N`.
pub fn generate_clustering(r: &[f64], beta: usize) -> Result<Vec<Label>> {
    let n = r.len();
    let balance = BalanceSpec::clustering(n, beta)?;
    check_finite(r)?;
    let (m, _) = balance.clustering_fixed_block()?;
    let mut order: Vec<usize> = (0..n).collect();
    sorted_order(r, &mut order);
    let mut y = alloc::vec![1 as Label; n];
    for (pos, &i) in order.iter().enumerate() {
        y[i] = if pos < m {
            -1
        } else if pos >= n - m || r[i] >= 0.0 {
            1
        } else {
            -1
        };
    }
    assert!(balance.is_feasible(&y), "clustering candidate violates balance");
    Ok(y)
}

/// Per positive bag, the instance with the largest score (ties → lowest index).
///
/// `r` is indexed by instance over the positive-bag block; returned entries are
/// those instance indices.
pub fn generate_mil(r: &[f64], bags: &[Range<usize>]) -> Result<Vec<usize>> {
    check_finite(r)?;
    bags.iter()
        .map(|b| {
            if b.is_empty() {
                return Err(Error::InvalidDataset("empty positive bag".into()));
            }
            if b.end > r.len() {
                return Err(Error::DimensionMismatch {
                    expected: b.end,
                    actual: r.len(),
                });
            }
            let mut best = b.start;
            for i in b.clone() {
                if r[i] > r[best] {
                    best = i;
                }
            }
            Ok(best)
        })
        .collect()
}

/// The psd form `H = W K W` over the first `m` instance rows, `W = diag(weights)`.
///
/// Semi-supervised and clustering use all rows with `weights = α`; bags use the
/// positive-bag instances with each instance weighted by its bag's `α`.
pub struct PairwiseForm<'a> {
    kernel: InstanceKernel<'a>,
    rows: Vec<usize>,
    weights: Vec<f64>,
}

impl<'a> PairwiseForm<'a> {
    pub fn new(kernel: InstanceKernel<'a>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() > kernel.n() {
            return Err(Error::DimensionMismatch {
                expected: kernel.n(),
                actual: weights.len(),
            });
        }
        Ok(PairwiseForm {
            kernel,
            rows: (0..weights.len()).collect(),
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn weighted(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.weights).map(|(a, b)| a * b).collect()
    }

    /// `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let kv = self.kernel.cross_mul(&self.rows, &self.rows, &self.weighted(v));
        kv.iter().zip(&self.weights).map(|(a, b)| a * b).collect()
    }

    /// `v'Hv`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        self.kernel.quad(&self.rows, &self.weighted(v))
    }
}

/// Scores of the linearized label search around an incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationProblem {
    /// `r = H v̄ + τ/2` (`τ = 0` outside multi-instance learning).
    pub r: Vec<f64>,
    /// `r'v̄ = v̄'Hv̄ + τ'v̄/2`.
    pub reference_value: f64,
}

impl ViolationProblem {
    pub fn new(form: &PairwiseForm<'_>, incumbent: &[f64], tau: Option<&[f64]>) -> Result<Self> {
        if incumbent.len() != form.dim() {
            return Err(Error::DimensionMismatch {
                expected: form.dim(),
                actual: incumbent.len(),
            });
        }
        let mut r = form.apply(incumbent);
        if let Some(t) = tau {
            if t.len() != r.len() {
                return Err(Error::DimensionMismatch {
                    expected: r.len(),
                    actual: t.len(),
                });
            }
            for (ri, ti) in r.iter_mut().zip(t) {
                *ri += 0.5 * ti;
            }
        }
        let reference_value = crate::linalg::dot(&r, incumbent);
        Ok(ViolationProblem { r, reference_value })
    }

    /// `r'v`.
    pub fn value(&self, v: &[f64]) -> f64 {
        crate::linalg::dot(&self.r, v)
    }

    /// Strict improvement of the linearized score over the incumbent.
    pub fn certify(&self, candidate: &[f64]) -> bool {
        self.value(candidate) > self.reference_value + CERTIFY_TOL
    }
}

/// Index of the candidate maximizing `v'Hv + τ'v`; earliest wins ties.
pub fn pick_incumbent(candidates: &[Vec<f64>], form: &PairwiseForm<'_>, tau: Option<&[f64]>) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("working set"));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, v) in candidates.iter().enumerate() {
        let mut s = form.quad(v);
        if let Some(t) = tau {
            s += crate::linalg::dot(t, v);
        }
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

/// Certifies `candidate` against `incumbent` under `H` (and `τ` for bags).
pub fn certify_violation(
    candidate: &[f64],
    incumbent: &[f64],
    form: &PairwiseForm<'_>,
    tau: Option<&[f64]>,
) -> Result<bool> {
    Ok(ViolationProblem::new(form, incumbent, tau)?.certify(candidate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::GramMatrix;
    use alloc::vec;

    #[test]
    fn ssl_ceiling_count() {
        // l = 4 with 1'y_L = 2, ten unlabeled → ⌈10 · 0.5 / 2⌉ = 3
        let mut known = vec![Some(1), Some(1), Some(1), Some(-1)];
        known.extend(vec![None; 10]);
        let b = BalanceSpec::ssl(known).unwrap();
        assert_eq!(b.ssl_negatives().unwrap(), 3);
        let mut r = vec![0.0; 4];
        r.extend([5.0, -1.0, 3.0, -4.0, 2.0, 0.5, -2.0, 7.0, 1.0, 6.0]);
        let y = generate_ssl(&r, &b).unwrap();
        let negs: Vec<usize> = (4..14).filter(|&i| y[i] == -1).collect();
        assert_eq!(negs, vec![5, 7, 10]);
        assert_eq!(&y[..4], &[1, 1, 1, -1]);
    }

    #[test]
    fn ssl_exact_integer_ceiling() {
        // u (l − S) / 2l exactly integral: 6 · 2 / 4 = 3
        let mut known = vec![Some(1), Some(-1)];
        known.extend(vec![None; 6]);
        assert_eq!(BalanceSpec::ssl(known).unwrap().ssl_negatives().unwrap(), 3);
    }

    #[test]
    fn ssl_equal_scores_use_index_order() {
        let mut known = vec![Some(1), Some(-1)];
        known.extend(vec![None; 4]);
        let b = BalanceSpec::ssl(known).unwrap();
        let y = generate_ssl(&[0.0; 6], &b).unwrap();
        assert_eq!(y, vec![1, -1, -1, -1, 1, 1]);
    }

    #[test]
    fn ssl_requires_labels() {
        assert!(BalanceSpec::ssl(vec![None, None]).is_err());
    }

    #[test]
    fn ssl_no_unlabeled_returns_known() {
        let b = BalanceSpec::ssl(vec![Some(1), Some(-1), Some(-1)]).unwrap();
        assert_eq!(generate_ssl(&[1.0, 2.0, 3.0], &b).unwrap(), vec![1, -1, -1]);
    }

    #[test]
    fn clustering_examples() {
        let y = generate_clustering(&[-3.0, -2.0, 0.5, 1.0, 4.0], 1).unwrap();
        assert_eq!(y, vec![-1, -1, 1, 1, 1]);
        let r = [0.2, -0.1, 0.0, 3.0, -5.0];
        assert_eq!(generate_clustering(&r, 5).unwrap(), vec![1, -1, 1, 1, -1]);
        let even = [0.3, 0.1, 0.2, 0.4, 0.5, 0.6];
        let y = generate_clustering(&even, 0).unwrap();
        assert_eq!(y.iter().filter(|&&v| v == 1).count(), 3);
        assert_eq!(y, vec![-1, -1, -1, 1, 1, 1]);
    }

    #[test]
    fn clustering_parity_mismatch_stays_feasible() {
        // n − β odd: every sign pattern of the middle block must respect β
        for n in 1..9usize {
            for beta in 0..=n {
                if n % 2 == 1 && beta == 0 {
                    assert!(generate_clustering(&vec![1.0; n], beta).is_err());
                    continue;
                }
                for pattern in 0u32..(1 << n) {
                    let r: Vec<f64> = (0..n)
                        .map(|i| {
                            if pattern >> i & 1 == 1 {
                                1.0 + i as f64
                            } else {
                                -1.0 - i as f64
                            }
                        })
                        .collect();
                    let y = generate_clustering(&r, beta).unwrap();
                    let s: i32 = y.iter().map(|&v| i32::from(v)).sum();
                    assert!(s.unsigned_abs() as usize <= beta);
                }
            }
        }
    }

    #[test]
    fn clustering_beta_too_large() {
        assert!(generate_clustering(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    #[allow(clippy::single_range_in_vec_init)]
    fn mil_examples() {
        assert_eq!(generate_mil(&[0.1, 0.9, 0.3], &[0..3usize]).unwrap(), vec![1]);
        assert_eq!(generate_mil(&[5.0, 1.0, 2.0, 2.0], &[0..2, 2..4]).unwrap(), vec![0, 2]);
        assert!(generate_mil(&[1.0], &[0..0usize]).is_err());
    }

    #[test]
    fn incumbent_ties_and_certification() {
        let k = GramMatrix::identity(3);
        let form = PairwiseForm::new(InstanceKernel::Gram(&k), vec![1.0; 3]).unwrap();
        let a = vec![1.0, -1.0, 1.0];
        let b = vec![-1.0, -1.0, 1.0];
        assert_eq!(pick_incumbent(&[a.clone(), b.clone()], &form, None).unwrap(), 0);
        assert_eq!(pick_incumbent(core::slice::from_ref(&a), &form, None).unwrap(), 0);
        assert!(!certify_violation(&a, &a, &form, None).unwrap());
        assert!(pick_incumbent(&[], &form, None).is_err());
    }
}
