//! Brute-force references for small instances.
//!
//! Exhaustive enumeration of feasible labelings, the mixed-integer optimum
//! `min_ŷ max_α G(α, ŷ)`, exhaustive linear-integer maximization, and a
//! projected-gradient box-QP solver independent of the coordinate method.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::labelgen::BalanceSpec;
use crate::learner::Problem;
use crate::linalg;
use crate::mlkl::LabelCandidate;
use crate::svm_dual::BoxBounds;

pub const ENUMERATION_LIMIT: u128 = 1 << 20;
pub const REFERENCE_QP_ITERS: usize = 100_000;

/// Which feasible set to enumerate.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSpec {
    Balance(BalanceSpec),
    /// One selected instance per positive bag.
    Bags(Vec<Range<usize>>),
}

impl FeasibleSpec {
    pub fn of_problem(problem: &Problem<'_>) -> Result<Self> {
        if let Some(b) = problem.balance() {
            return Ok(FeasibleSpec::Balance(b));
        }
        problem
            .positive_ranges()
            .map(|r| FeasibleSpec::Bags(r.to_vec()))
            .ok_or(Error::param("problem", "no feasible set"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedFeasibleSet {
    candidates: Vec<LabelCandidate>,
}

impl EnumeratedFeasibleSet {
    pub fn candidates(&self) -> &[LabelCandidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // rightmost position that can still advance
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        i -= 1;
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn guard(count: u128) -> Result<()> {
    if count > ENUMERATION_LIMIT {
        Err(Error::EnumerationTooLarge(count))
    } else {
        Ok(())
    }
}

pub fn enumerate_feasible(spec: &FeasibleSpec) -> Result<EnumeratedFeasibleSet> {
    let mut candidates = Vec::new();
    match spec {
        FeasibleSpec::Balance(b @ BalanceSpec::Ssl { known }) => {
            let k = b.ssl_negatives()?;
            let unl: Vec<usize> = (0..known.len()).filter(|&i| known[i].is_none()).collect();
            guard(binomial(unl.len(), k))?;
            let base: Vec<Label> = known.iter().map(|v| v.unwrap_or(1)).collect();
            for_each_combination(unl.len(), k, |neg| {
                let mut y = base.clone();
                for &j in neg {
                    y[unl[j]] = -1;
                }
                candidates.push(LabelCandidate::Assignment(y));
            });
        }
        FeasibleSpec::Balance(b @ BalanceSpec::Clustering { n, beta }) => {
            let n = *n;
            let counts: Vec<usize> = (0..=n).filter(|&k| (2 * k).abs_diff(n) <= *beta).collect();
            if counts.is_empty() {
                return Err(Error::InfeasibleBalance(format!(
                    "no labeling of {n} rows within {beta}"
                )));
            }
            guard(counts.iter().map(|&k| binomial(n, k)).sum())?;
            for k in counts {
                for_each_combination(n, k, |pos| {
                    let mut y = alloc::vec![-1 as Label; n];
                    for &j in pos {
                        y[j] = 1;
                    }
                    debug_assert!(b.is_feasible(&y));
                    candidates.push(LabelCandidate::Assignment(y));
                });
            }
        }
        FeasibleSpec::Bags(ranges) => {
            if ranges.iter().any(|r| r.is_empty()) {
                return Err(Error::InvalidDataset("empty positive bag".into()));
            }
            let count = ranges
                .iter()
                .try_fold(1u128, |acc, r| acc.checked_mul(r.len() as u128))
                .unwrap_or(u128::MAX);
            guard(count)?;
            let mut sel: Vec<usize> = ranges.iter().map(|r| r.start).collect();
            'outer: loop {
                candidates.push(LabelCandidate::Selector(sel.clone()));
                for b in (0..ranges.len()).rev() {
                    sel[b] += 1;
                    if sel[b] < ranges[b].end {
                        continue 'outer;
                    }
                    sel[b] = ranges[b].start;
                }
                break;
            }
        }
    }
    Ok(EnumeratedFeasibleSet { candidates })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub index: usize,
    pub candidate: LabelCandidate,
    /// `min_ŷ max_α G(α, ŷ)` over the enumeration.
    pub value: f64,
    pub values: Vec<f64>,
}

/// Solves the single-labeling SVM for every member and keeps the smallest
/// optimum; ties go to the earliest member.
pub fn mip_solve(problem: &Problem<'_>, feasible: &EnumeratedFeasibleSet, tol: f64) -> Result<MipSolution> {
    if feasible.is_empty() {
        return Err(Error::Empty("feasible set"));
    }
    let values: Vec<f64> = feasible
        .candidates
        .iter()
        .map(|c| problem.solve_candidate(c, tol).map(|s| s.objective))
        .collect::<Result<_>>()?;
    let mut index = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[index] {
            index = i;
        }
    }
    Ok(MipSolution {
        index,
        candidate: feasible.candidates[index].clone(),
        value: values[index],
        values,
    })
}

/// `argmax r'v` over the enumeration, `v` the candidate's ±1 or indicator
/// vector; ties go to the earliest member.
pub fn lp_solve_exhaustive(r: &[f64], feasible: &EnumeratedFeasibleSet) -> Result<(usize, f64)> {
    if feasible.is_empty() {
        return Err(Error::Empty("feasible set"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in feasible.candidates.iter().enumerate() {
        let v = linalg::dot(r, &c.domain_vector(r.len()));
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// Accelerated projected gradient for `max 1'α − ½α'Qα` over the box, with
/// step `1/trace(Q)` and an objective-based momentum restart.
pub fn reference_box_qp(q: &GramMatrix, bounds: &BoxBounds, iters: usize) -> Result<(Vec<f64>, f64)> {
    let n = q.n();
    if bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bounds.len(),
        });
    }
    let upper = bounds.upper();
    let trace: f64 = (0..n).map(|i| q.get(i, i)).sum();
    let objective = |a: &[f64]| a.iter().sum::<f64>() - 0.5 * linalg::dot(a, &q.mul_vec(a));
    if trace <= 0.0 {
        // a psd Q with zero trace is zero, so the upper corner is optimal
        let a = upper.to_vec();
        let f = objective(&a);
        return Ok((a, f));
    }
    let step = 1.0 / trace;
    let project = |v: f64, c: f64| v.clamp(0.0, c);
    let mut x = alloc::vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut fx = objective(&x);
    for _ in 0..iters {
        let qy = q.mul_vec(&y);
        let next: Vec<f64> = (0..n).map(|i| project(y[i] + step * (1.0 - qy[i]), upper[i])).collect();
        let fn_ = objective(&next);
        if fn_ < fx {
            // restart momentum from the last iterate
            y.clone_from(&x);
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
        let w = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = next[i] + w * (next[i] - x[i]);
        }
        x = next;
        fx = fn_;
        t = t_next;
    }
    Ok((x, fx))
}
