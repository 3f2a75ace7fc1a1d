//! Multiple label-kernel learning over a working set of labelings.
//!
//! Each candidate `t` induces a label kernel `Q_t` with entries
//! `d_ti d_tj k(x_{r_t(i)}, x_{r_t(j)})`: a sign vector `d_t` and a map `r_t`
//! from dual coordinates to instance rows. For single-instance tasks `r_t` is
//! the identity and `d_t = ŷ_t`; for bags `r_t` picks the key instance of each
//! positive bag and `d_t = [1_p; −1]`. The saddle problem
//! `min_μ max_α 1'α − ½ α'(Σ_t μ_t Q_t)α` is solved by alternating an SVM
//! solve with the closed-form weight update `μ_t ∝ ||w_t||`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Label, SparseVector};
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, InstanceKernel};
use crate::svm_dual::{self, BoxBounds, DualState, QpOptions, QuadraticOperator};

pub const DEFAULT_GAP_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_OUTER: usize = 100;
const MAX_EXTRAPOLATION: f64 = 1024.0;
const SIMPLEX_TOL: f64 = 1e-9;

/// One feasible labeling in the working set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelCandidate {
    /// `±1` label per example (semi-supervised and clustering).
    Assignment(Vec<Label>),
    /// Global instance index of the key instance of each positive bag.
    Selector(Vec<usize>),
}

impl LabelCandidate {
    pub fn as_assignment(&self) -> Option<&[Label]> {
        match self {
            LabelCandidate::Assignment(y) => Some(y),
            LabelCandidate::Selector(_) => None,
        }
    }

    pub fn as_selector(&self) -> Option<&[usize]> {
        match self {
            LabelCandidate::Selector(s) => Some(s),
            LabelCandidate::Assignment(_) => None,
        }
    }

    /// Vector form used by the quadratic scores: the `±1` labels, or the
    /// 0/1 indicator of selected instances over the first `domain` rows.
    pub fn domain_vector(&self, domain: usize) -> Vec<f64> {
        match self {
            LabelCandidate::Assignment(y) => y.iter().map(|&v| f64::from(v)).collect(),
            LabelCandidate::Selector(s) => {
                let mut v = alloc::vec![0.0; domain];
                for &i in s {
                    v[i] = 1.0;
                }
                v
            }
        }
    }
}

/// Ordered candidates with simplex weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingSet {
    candidates: Vec<LabelCandidate>,
    mu: Vec<f64>,
}

impl WorkingSet {
    pub fn new(first: LabelCandidate) -> Self {
        WorkingSet {
            candidates: alloc::vec![first],
            mu: alloc::vec![1.0],
        }
    }

    pub fn from_parts(candidates: Vec<LabelCandidate>, mu: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("working set"));
        }
        if candidates.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: candidates.len(),
                actual: mu.len(),
            });
        }
        for (i, c) in candidates.iter().enumerate() {
            if candidates[..i].contains(c) {
                return Err(Error::param("candidates", "duplicate candidate"));
            }
        }
        let mut ws = WorkingSet {
            candidates,
            mu: Vec::new(),
        };
        ws.set_mu(mu)?;
        Ok(ws)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[LabelCandidate] {
        &self.candidates
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn contains(&self, c: &LabelCandidate) -> bool {
        self.candidates.contains(c)
    }

    pub fn set_mu(&mut self, mu: Vec<f64>) -> Result<()> {
        if mu.len() != self.candidates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.candidates.len(),
                actual: mu.len(),
            });
        }
        if !is_on_simplex(&mu) {
            return Err(Error::param("mu", "weights must be nonnegative and sum to one"));
        }
        self.mu = mu;
        Ok(())
    }

    /// Appends a candidate with weight `1/|C|`, scaling the others by
    /// `(|C|−1)/|C|`. Returns `false` (and changes nothing) for a duplicate.
    pub fn push(&mut self, c: LabelCandidate) -> bool {
        if self.contains(&c) {
            return false;
        }
        self.candidates.push(c);
        let t = self.candidates.len() as f64;
        for m in &mut self.mu {
            *m *= (t - 1.0) / t;
        }
        self.mu.push(1.0 / t);
        true
    }

    /// Appends a candidate with zero weight, keeping the others unchanged.
    pub fn push_zero_weight(&mut self, c: LabelCandidate) -> bool {
        if self.contains(&c) {
            return false;
        }
        self.candidates.push(c);
        self.mu.push(0.0);
        true
    }
}

pub fn is_on_simplex(mu: &[f64]) -> bool {
    let s: f64 = mu.iter().sum();
    mu.iter().all(|&m| m >= 0.0 && m.is_finite()) && libm::fabs(s - 1.0) <= SIMPLEX_TOL
}

/// Label kernel of one candidate: `Q_ij = signs_i signs_j k(x_{rows_i}, x_{rows_j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelKernel {
    pub rows: Vec<usize>,
    pub signs: Vec<f64>,
}

impl LabelKernel {
    pub fn from_assignment(y: &[Label]) -> Self {
        LabelKernel {
            rows: (0..y.len()).collect(),
            signs: y.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// `α' Q_t α`.
    pub fn quad(&self, kernel: &InstanceKernel<'_>, alpha: &[f64]) -> f64 {
        let w: Vec<f64> = alpha.iter().zip(&self.signs).map(|(a, s)| a * s).collect();
        kernel.quad(&self.rows, &w)
    }

    fn is_identity_layout(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, &r)| i == r)
    }
}

/// `Σ_t μ_t Q_t` as an explicit matrix.
pub fn composite_matrix(gram: &GramMatrix, kernels: &[LabelKernel], mu: &[f64]) -> Result<GramMatrix> {
    let n = check_kernels(kernels, mu)?;
    let mut values = alloc::vec![0.0; n * n];
    if kernels.iter().all(LabelKernel::is_identity_layout) {
        // K ⊙ Σ_t μ_t ŷ_t ŷ_t', with the signs stored per row for a contiguous inner sum.
        let active: Vec<usize> = (0..kernels.len()).filter(|&t| mu[t] != 0.0).collect();
        let a = active.len();
        let mut signs = alloc::vec![0.0; n * a];
        let mut weighted = alloc::vec![0.0; n * a];
        for (c, &t) in active.iter().enumerate() {
            for i in 0..n {
                signs[i * a + c] = kernels[t].signs[i];
                weighted[i * a + c] = mu[t] * kernels[t].signs[i];
            }
        }
        for i in 0..n {
            let si = &signs[i * a..(i + 1) * a];
            let gi = gram.row(i);
            for j in i..n {
                let wj = &weighted[j * a..(j + 1) * a];
                let s: f64 = si.iter().zip(wj).map(|(x, y)| x * y).sum();
                let v = gi[j] * s;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
    } else {
        for (kt, &m) in kernels.iter().zip(mu) {
            if m == 0.0 {
                continue;
            }
            for i in 0..n {
                let gi = gram.row(kt.rows[i]);
                for j in 0..n {
                    values[i * n + j] += m * (kt.signs[i] * kt.signs[j]) * gi[kt.rows[j]];
                }
            }
        }
    }
    GramMatrix::from_row_major(n, values)
}

fn check_kernels(kernels: &[LabelKernel], mu: &[f64]) -> Result<usize> {
    if kernels.is_empty() {
        return Err(Error::Empty("label kernels"));
    }
    if kernels.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: kernels.len(),
            actual: mu.len(),
        });
    }
    let n = kernels[0].dim();
    if let Some(k) = kernels.iter().find(|k| k.dim() != n || k.signs.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.dim(),
        });
    }
    Ok(n)
}

/// Implicit `Σ_t μ_t D_t X_t X_t' D_t` for the linear kernel.
///
/// The cache holds `o_t = Σ_i α_i d_ti x_{r_t(i)}` for each weighted
/// candidate, so a coordinate step costs `O(T · nnz(x_i))`.
pub struct LinearComposite<'a> {
    rows: &'a [SparseVector],
    n_features: usize,
    kernels: &'a [LabelKernel],
    mu: Vec<f64>,
    active: Vec<usize>,
    diag: Vec<f64>,
}

impl<'a> LinearComposite<'a> {
    pub fn new(rows: &'a [SparseVector], n_features: usize, kernels: &'a [LabelKernel], mu: &[f64]) -> Result<Self> {
        let n = check_kernels(kernels, mu)?;
        let active: Vec<usize> = (0..kernels.len()).filter(|&t| mu[t] != 0.0).collect();
        let norms: Vec<f64> = rows.iter().map(SparseVector::norm_sq).collect();
        let diag = (0..n)
            .map(|i| active.iter().map(|&t| mu[t] * norms[kernels[t].rows[i]]).sum())
            .collect();
        Ok(LinearComposite {
            rows,
            n_features,
            kernels,
            mu: mu.to_vec(),
            active,
            diag,
        })
    }
}

impl QuadraticOperator for LinearComposite<'_> {
    type Cache = Vec<Vec<f64>>;

    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn init_cache(&self, alpha: &[f64]) -> Self::Cache {
        self.active
            .iter()
            .map(|&t| {
                let kt = &self.kernels[t];
                let mut o = alloc::vec![0.0; self.n_features];
                for (i, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        self.rows[kt.rows[i]].axpy_into(a * kt.signs[i], &mut o);
                    }
                }
                o
            })
            .collect()
    }

    fn row_dot(&self, cache: &Self::Cache, i: usize) -> f64 {
        self.active
            .iter()
            .zip(cache)
            .map(|(&t, o)| {
                let kt = &self.kernels[t];
                self.mu[t] * kt.signs[i] * self.rows[kt.rows[i]].dot_dense(o)
            })
            .sum()
    }

    fn update(&self, cache: &mut Self::Cache, i: usize, delta: f64) {
        for (&t, o) in self.active.iter().zip(cache.iter_mut()) {
            let kt = &self.kernels[t];
            self.rows[kt.rows[i]].axpy_into(delta * kt.signs[i], o);
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let cache = self.init_cache(v);
        (0..self.dim()).map(|i| self.row_dot(&cache, i)).collect()
    }

    fn all_finite(&self) -> bool {
        self.mu.iter().all(|m| m.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlklOptions {
    pub qp: QpOptions,
    /// Relative saddle gap at which the alternation stops.
    pub gap_tol: f64,
    /// Cap on SVM solves.
    pub max_outer: usize,
    /// Geometric extrapolation of the weight steps.
    pub accelerate: bool,
}

impl Default for MlklOptions {
    fn default() -> Self {
        MlklOptions {
            qp: QpOptions::default(),
            gap_tol: DEFAULT_GAP_TOL,
            max_outer: DEFAULT_MAX_OUTER,
            accelerate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlklResult {
    pub mu: Vec<f64>,
    /// Dual solution for `mu`; `per_candidate_norms` holds `||w_t||²`.
    pub state: DualState,
    pub converged: bool,
    /// Every `||w_t||` was zero, so `mu` could not be updated.
    pub degenerate: bool,
    pub iterations: usize,
    /// Objective after each SVM solve.
    pub history: Vec<f64>,
}

impl MlklResult {
    pub fn objective(&self) -> f64 {
        self.state.objective
    }
}

/// Closed-form weight step `μ_t = ||w_t|| / Σ_t' ||w_t'||`.
///
/// Returns `None` when every norm is zero.
pub fn update_weights(norms: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = norms.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    Some(norms.iter().map(|&w| w / total).collect())
}

/// `1'α − ½ Σ_t μ_t α'Q_tα`.
pub fn mlkl_objective(kernel: &InstanceKernel<'_>, kernels: &[LabelKernel], mu: &[f64], alpha: &[f64]) -> f64 {
    let lin: f64 = alpha.iter().sum();
    let quad: f64 = kernels
        .iter()
        .zip(mu)
        .filter(|(_, &m)| m != 0.0)
        .map(|(k, &m)| m * k.quad(kernel, alpha))
        .sum();
    lin - 0.5 * quad
}

fn solve_composite(
    kernel: &InstanceKernel<'_>,
    kernels: &[LabelKernel],
    mu: &[f64],
    bounds: &BoxBounds,
    alpha0: Option<&[f64]>,
    opts: &QpOptions,
) -> Result<DualState> {
    match *kernel {
        InstanceKernel::Gram(g) => {
            let q = composite_matrix(g, kernels, mu)?;
            svm_dual::solve_box_qp_with(&q, bounds, alpha0, opts)
        }
        InstanceKernel::Linear { rows, n_features } => {
            let q = LinearComposite::new(rows, n_features, kernels, mu)?;
            svm_dual::solve_box_qp_with(&q, bounds, alpha0, opts)
        }
    }
}

struct Evaluated {
    state: DualState,
    /// `G_t(α) = 1'α − ½ α'Q_tα` per candidate.
    per_candidate: Vec<f64>,
    norms: Vec<f64>,
}

fn evaluate(
    kernel: &InstanceKernel<'_>,
    kernels: &[LabelKernel],
    mu: &[f64],
    bounds: &BoxBounds,
    alpha0: Option<&[f64]>,
    opts: &QpOptions,
) -> Result<Evaluated> {
    let mut state = solve_composite(kernel, kernels, mu, bounds, alpha0, opts)?;
    let lin: f64 = state.alpha.iter().sum();
    let quads: Vec<f64> = kernels.iter().map(|k| k.quad(kernel, &state.alpha)).collect();
    state.per_candidate_norms = quads.iter().zip(mu).map(|(q, m)| m * m * q).collect();
    let norms = quads.iter().zip(mu).map(|(q, m)| m * libm::sqrt(q.max(0.0))).collect();
    Ok(Evaluated {
        per_candidate: quads.iter().map(|q| lin - 0.5 * q).collect(),
        state,
        norms,
    })
}

impl Evaluated {
    /// `Σ_t μ_t G_t(α) − min_t G_t(α)`, which bounds the distance to the saddle value.
    fn gap(&self) -> f64 {
        let min = self.per_candidate.iter().copied().fold(f64::INFINITY, f64::min);
        (self.state.objective - min).max(0.0)
    }
}

/// `μ^{1−ω} ν^ω`, normalized, on the support of `ν`.
fn extrapolate(mu: &[f64], next: &[f64], omega: f64) -> Option<Vec<f64>> {
    let logs: Vec<Option<f64>> = mu
        .iter()
        .zip(next)
        .map(|(&m, &n)| (m > 0.0 && n > 0.0).then(|| (1.0 - omega) * libm::log(m) + omega * libm::log(n)))
        .collect();
    let top = logs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let w: Vec<f64> = logs.iter().map(|l| l.map_or(0.0, |l| libm::exp(l - top))).collect();
    update_weights(&w)
}

/// Alternates the SVM solve for fixed `μ` with the closed-form `μ` update
/// until the relative gap `(Σ_t μ_t G_t(α) − min_t G_t(α)) / max(1, |obj|)`
/// is below `gap_tol`, or `max_outer` solves.
///
/// Successive closed-form steps are extrapolated geometrically in log space
/// when [`MlklOptions::accelerate`] is set; an extrapolated step is kept only
/// if it lowers the objective. Zero-norm candidates receive weight zero. At
/// the cap, the lowest-objective iterate is returned with `converged = false`.
pub fn mlkl_solve(
    kernel: &InstanceKernel<'_>,
    kernels: &[LabelKernel],
    mu0: &[f64],
    bounds: &BoxBounds,
    alpha0: Option<&[f64]>,
    opts: &MlklOptions,
) -> Result<MlklResult> {
    check_kernels(kernels, mu0)?;
    if !is_on_simplex(mu0) {
        return Err(Error::param("mu", "initial weights must lie on the simplex"));
    }
    if opts.max_outer == 0 {
        return Err(Error::param("max_outer", "must be at least 1"));
    }
    if !(opts.gap_tol.is_finite() && opts.gap_tol > 0.0) {
        return Err(Error::param("gap_tol", "must be finite and positive"));
    }
    let mut mu = mu0.to_vec();
    let mut cur = evaluate(kernel, kernels, &mu, bounds, alpha0, &opts.qp)?;
    let mut history = alloc::vec![cur.state.objective];
    let mut solves = 1;
    let mut omega = 2.0;
    let mut best: Option<(Vec<f64>, DualState)> = None;

    loop {
        let scale = libm::fabs(cur.state.objective).max(1.0);
        let next = update_weights(&cur.norms);
        let degenerate = next.is_none();
        if degenerate || cur.gap() <= opts.gap_tol * scale {
            return Ok(MlklResult {
                mu,
                state: cur.state,
                converged: true,
                degenerate,
                iterations: solves,
                history,
            });
        }
        if best.as_ref().is_none_or(|(_, b)| cur.state.objective < b.objective) {
            best = Some((mu.clone(), cur.state.clone()));
        }
        if solves >= opts.max_outer {
            break;
        }
        let base = next.expect("non-degenerate");
        let warm = cur.state.alpha.clone();
        let mut accepted = false;
        if opts.accelerate && solves + 1 < opts.max_outer {
            if let Some(ext) = extrapolate(&mu, &base, omega) {
                let trial = evaluate(kernel, kernels, &ext, bounds, Some(&warm), &opts.qp)?;
                solves += 1;
                history.push(trial.state.objective);
                if trial.state.objective < cur.state.objective {
                    mu = ext;
                    cur = trial;
                    omega = (2.0 * omega).min(MAX_EXTRAPOLATION);
                    accepted = true;
                } else {
                    omega = 2.0;
                }
            }
        }
        if !accepted {
            cur = evaluate(kernel, kernels, &base, bounds, Some(&warm), &opts.qp)?;
            solves += 1;
            history.push(cur.state.objective);
            mu = base;
        }
    }
    let (mu, state) = best.expect("at least one iterate");
    Ok(MlklResult {
        mu,
        state,
        converged: false,
        degenerate: false,
        iterations: solves,
        history,
    })
}
