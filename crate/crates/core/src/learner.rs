//! Cutting-plane training by label generation, and the trained model.
//!
//! Each outer iteration solves the multiple label-kernel problem on the
//! working set, generates a labeling by sorting around the incumbent, and
//! admits it when it lowers `G(α, ·)` below the working-set minimum by at
//! least `epsilon`. The loop also stops when the objective decrease falls
//! below `obj_decrease_threshold` or after `max_outer_iters` solves.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BagDataset, Dataset, Label, SparseVector};
use crate::error::{Error, Result};
use crate::kernel::{self, GramMatrix, InstanceKernel, KernelSpec};
use crate::labelgen::{self, BalanceSpec, PairwiseForm, ViolationProblem};
use crate::mlkl::{self, LabelCandidate, LabelKernel, MlklOptions, WorkingSet};
use crate::svm_dual::{self, BoxBounds, DualState, QpOptions};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_OBJ_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_MAX_OUTER_ITERS: usize = 50;
pub const DEFAULT_RANDOM_INITS: usize = 20;
pub const DEFAULT_SEARCH_RESTARTS: usize = 100;
pub const DEFAULT_SEARCH_PASSES: usize = 0;
const CERTIFYING_QP_TOL: f64 = 1e-8;
const CERTIFYING_GAP_TOL: f64 = 1e-9;
const CERTIFYING_SEARCH_PASSES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Task {
    Ssl { c1: f64, c2: f64 },
    Mil { c1: f64, c2: f64 },
    Clustering { c: f64, beta: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Ssl,
    Mil,
    Clustering,
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Ssl { .. } => TaskKind::Ssl,
            Task::Mil { .. } => TaskKind::Mil,
            Task::Clustering { .. } => TaskKind::Clustering,
        }
    }
}

/// Class-balance regime for clustering: `β = round(0.03 N)` or `round(0.3 N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaMode {
    Balanced,
    Imbalanced,
}

impl BetaMode {
    pub fn beta(self, n: usize) -> usize {
        let f = match self {
            BetaMode::Balanced => 0.03,
            BetaMode::Imbalanced => 0.3,
        };
        libm::round(f * n as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: Task,
    pub kernel: KernelSpec,
    pub epsilon: f64,
    pub obj_decrease_threshold: f64,
    pub max_outer_iters: usize,
    pub seed: u64,
    /// Projected-gradient tolerance of every inner SVM solve.
    pub qp_tol: f64,
    /// Relative saddle gap of the label-kernel solve.
    pub mkl_gap_tol: f64,
    pub mkl_max_iters: usize,
    /// Random balanced labelings tried by the clustering initializer.
    pub n_random_init: usize,
    /// Extra sorting passes, each re-linearized at the previous labeling.
    pub refine_steps: usize,
    /// Random starts of the fallback search; see [`Problem::generate_with`].
    pub search_restarts: usize,
    /// Sorting passes per fallback start; zero disables the fallback.
    pub search_passes: usize,
}

impl TaskConfig {
    pub fn new(task: Task, kernel: KernelSpec) -> Self {
        TaskConfig {
            task,
            kernel,
            epsilon: DEFAULT_EPSILON,
            obj_decrease_threshold: DEFAULT_OBJ_THRESHOLD,
            max_outer_iters: DEFAULT_MAX_OUTER_ITERS,
            seed: 0,
            qp_tol: svm_dual::DEFAULT_TOL,
            mkl_gap_tol: mlkl::DEFAULT_GAP_TOL,
            mkl_max_iters: mlkl::DEFAULT_MAX_OUTER,
            n_random_init: DEFAULT_RANDOM_INITS,
            refine_steps: 0,
            search_restarts: DEFAULT_SEARCH_RESTARTS,
            search_passes: DEFAULT_SEARCH_PASSES,
        }
    }

    /// Tight inner tolerances, no objective-decrease stop and the fallback
    /// search switched on, so that on small problems the loop ends only when
    /// no labeling violates the working set by more than `epsilon`.
    pub fn certifying(mut self) -> Self {
        self.obj_decrease_threshold = 0.0;
        self.qp_tol = CERTIFYING_QP_TOL;
        self.mkl_gap_tol = CERTIFYING_GAP_TOL;
        self.search_passes = CERTIFYING_SEARCH_PASSES;
        self.search_restarts = DEFAULT_SEARCH_RESTARTS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and positive, got {v}")))
            }
        };
        match self.task {
            Task::Ssl { c1, c2 } | Task::Mil { c1, c2 } => {
                positive("c1", c1)?;
                positive("c2", c2)?;
            }
            Task::Clustering { c, .. } => positive("c", c)?,
        }
        positive("epsilon", self.epsilon)?;
        positive("qp_tol", self.qp_tol)?;
        positive("mkl_gap_tol", self.mkl_gap_tol)?;
        if !(self.obj_decrease_threshold.is_finite() && self.obj_decrease_threshold >= 0.0) {
            return Err(Error::param("obj_decrease_threshold", "must be finite and nonnegative"));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::param("max_outer_iters", "must be at least 1"));
        }
        if self.mkl_max_iters == 0 {
            return Err(Error::param("mkl_max_iters", "must be at least 1"));
        }
        if self.n_random_init == 0 {
            return Err(Error::param("n_random_init", "must be at least 1"));
        }
        Ok(())
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            epsilon: self.epsilon,
            restarts: self.search_restarts,
            max_passes: self.search_passes,
            seed: self.seed,
        }
    }

    pub fn mlkl_options(&self) -> MlklOptions {
        MlklOptions {
            qp: QpOptions::with_tol(self.qp_tol),
            gap_tol: self.mkl_gap_tol,
            max_outer: self.mkl_max_iters,
            accelerate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Label-kernel objective after this iteration's solve.
    pub objective: f64,
    pub ws_size: usize,
    /// `min_{y ∈ C} G(α, y) − G(α, y*)` for the generated labeling `y*`.
    pub violation_margin: f64,
    pub seconds: f64,
}

/// Elapsed wall time for trace records. `NoClock` reports zero.
pub trait Clock {
    fn seconds(&self) -> f64;
}

pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

impl<F: Fn() -> f64> Clock for F {
    fn seconds(&self) -> f64 {
        self()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// One dual variable per example.
    Direct { n: usize },
    /// One per positive bag, then one per negative instance.
    Bags {
        p: usize,
        positive_instances: usize,
        n_instances: usize,
        ranges: Vec<Range<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Generator {
    Ssl(BalanceSpec),
    Clustering { beta: usize },
    Mil,
}

/// A training problem: rows, kernel access, dual layout, boxes and the feasible set.
pub struct Problem<'a> {
    rows: &'a [SparseVector],
    n_features: usize,
    kernel: KernelSpec,
    gram: Option<GramMatrix>,
    layout: Layout,
    bounds: BoxBounds,
    generator: Generator,
    kind: TaskKind,
    refine_steps: usize,
}

/// Output of one violated-label search.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub candidate: LabelCandidate,
    pub incumbent: usize,
    pub certified: bool,
    /// Found by the multi-start fallback rather than the single sorting step.
    pub searched: bool,
}

/// Fallback search settings for [`Problem::generate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub epsilon: f64,
    pub restarts: usize,
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    /// No fallback: the single sorting step only.
    fn default() -> Self {
        SearchOptions {
            epsilon: 0.0,
            restarts: 0,
            max_passes: 0,
            seed: 0,
        }
    }
}

/// `v'Hv + τ'v`.
fn score_of(form: &PairwiseForm<'_>, tau: Option<&[f64]>, v: &[f64]) -> f64 {
    form.quad(v) + tau.map_or(0.0, |t| crate::linalg::dot(t, v))
}

impl<'a> Problem<'a> {
    #[allow(clippy::too_many_arguments)]
    fn build(
        rows: &'a [SparseVector],
        n_features: usize,
        kernel: KernelSpec,
        layout: Layout,
        bounds: BoxBounds,
        generator: Generator,
        kind: TaskKind,
        refine_steps: usize,
    ) -> Self {
        let gram = (!kernel.is_linear()).then(|| kernel::gram(rows, &kernel));
        Problem {
            rows,
            n_features,
            kernel,
            gram,
            layout,
            bounds,
            generator,
            kind,
            refine_steps,
        }
    }

    pub fn ssl(d: &'a Dataset, cfg: &TaskConfig) -> Result<Self> {
        cfg.validate()?;
        let Task::Ssl { c1, c2 } = cfg.task else {
            return Err(Error::param("task", "expected a semi-supervised task"));
        };
        if d.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let balance = BalanceSpec::ssl(d.labels().to_vec())?;
        let bounds = BoxBounds::new(d.labels().iter().map(|y| if y.is_some() { c1 } else { c2 }).collect())?;
        Ok(Self::build(
            d.rows(),
            d.n_features(),
            cfg.kernel,
            Layout::Direct { n: d.len() },
            bounds,
            Generator::Ssl(balance),
            TaskKind::Ssl,
            cfg.refine_steps,
        ))
    }

    /// Labels, if any, are ignored.
    pub fn clustering(d: &'a Dataset, cfg: &TaskConfig) -> Result<Self> {
        cfg.validate()?;
        let Task::Clustering { c, beta } = cfg.task else {
            return Err(Error::param("task", "expected a clustering task"));
        };
        if d.len() < 2 {
            return Err(Error::InvalidDataset("clustering needs at least 2 rows".into()));
        }
        BalanceSpec::clustering(d.len(), beta)?;
        Ok(Self::build(
            d.rows(),
            d.n_features(),
            cfg.kernel,
            Layout::Direct { n: d.len() },
            BoxBounds::uniform(d.len(), c)?,
            Generator::Clustering { beta },
            TaskKind::Clustering,
            cfg.refine_steps,
        ))
    }

    pub fn mil(b: &'a BagDataset, cfg: &TaskConfig) -> Result<Self> {
        cfg.validate()?;
        let Task::Mil { c1, c2 } = cfg.task else {
            return Err(Error::param("task", "expected a multi-instance task"));
        };
        let p = b.n_positive();
        if p == 0 || b.n_negative() == 0 {
            return Err(Error::InvalidDataset(
                "multi-instance training needs positive and negative bags".into(),
            ));
        }
        let q = b.dual_size();
        let bounds = BoxBounds::new((0..q).map(|i| if i < p { c1 } else { c2 }).collect())?;
        Ok(Self::build(
            b.rows(),
            b.n_features(),
            cfg.kernel,
            Layout::Bags {
                p,
                positive_instances: b.positive_instance_count(),
                n_instances: b.n_instances(),
                ranges: b.positive_ranges(),
            },
            bounds,
            Generator::Mil,
            TaskKind::Mil,
            cfg.refine_steps,
        ))
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn rows(&self) -> &'a [SparseVector] {
        self.rows
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        self.kernel
    }

    pub fn instance_kernel(&self) -> InstanceKernel<'_> {
        match &self.gram {
            Some(g) => InstanceKernel::Gram(g),
            None => InstanceKernel::Linear {
                rows: self.rows,
                n_features: self.n_features,
            },
        }
    }

    pub fn gram(&self) -> Option<&GramMatrix> {
        self.gram.as_ref()
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn dual_dim(&self) -> usize {
        self.bounds.len()
    }

    /// The semi-supervised or clustering balance, when applicable.
    pub fn balance(&self) -> Option<BalanceSpec> {
        match &self.generator {
            Generator::Ssl(b) => Some(b.clone()),
            Generator::Clustering { beta } => {
                let Layout::Direct { n } = self.layout else { return None };
                BalanceSpec::clustering(n, *beta).ok()
            }
            Generator::Mil => None,
        }
    }

    pub fn positive_ranges(&self) -> Option<&[Range<usize>]> {
        match &self.layout {
            Layout::Bags { ranges, .. } => Some(ranges),
            Layout::Direct { .. } => None,
        }
    }

    /// Number of instance rows over which the quadratic scores are defined.
    fn score_domain(&self) -> usize {
        match self.layout {
            Layout::Direct { n } => n,
            Layout::Bags { positive_instances, .. } => positive_instances,
        }
    }

    pub fn is_feasible(&self, c: &LabelCandidate) -> bool {
        match (c, &self.generator, &self.layout) {
            (LabelCandidate::Assignment(y), Generator::Ssl(b), _) => b.is_feasible(y),
            (LabelCandidate::Assignment(y), Generator::Clustering { .. }, _) => {
                self.balance().is_some_and(|b| b.is_feasible(y))
            }
            (LabelCandidate::Selector(s), Generator::Mil, Layout::Bags { ranges, .. }) => {
                s.len() == ranges.len() && s.iter().zip(ranges).all(|(i, r)| r.contains(i))
            }
            _ => false,
        }
    }

    pub fn label_kernel(&self, c: &LabelCandidate) -> Result<LabelKernel> {
        if !self.is_feasible(c) {
            return Err(Error::param("candidate", "not in the feasible set of this task"));
        }
        Ok(match (c, &self.layout) {
            (LabelCandidate::Assignment(y), _) => LabelKernel::from_assignment(y),
            (
                LabelCandidate::Selector(s),
                Layout::Bags {
                    p,
                    positive_instances,
                    n_instances,
                    ..
                },
            ) => {
                let mut rows = s.clone();
                rows.extend(*positive_instances..*n_instances);
                let mut signs = alloc::vec![1.0; *p];
                signs.resize(rows.len(), -1.0);
                LabelKernel { rows, signs }
            }
            _ => unreachable!("feasibility checked"),
        })
    }

    /// `G(α, c) = 1'α − ½ α'Q_cα`.
    pub fn g_value(&self, alpha: &[f64], c: &LabelCandidate) -> Result<f64> {
        let lk = self.label_kernel(c)?;
        Ok(alpha.iter().sum::<f64>() - 0.5 * lk.quad(&self.instance_kernel(), alpha))
    }

    /// `max_α G(α, c)` for a single labeling.
    pub fn solve_candidate(&self, c: &LabelCandidate, tol: f64) -> Result<DualState> {
        let lk = [self.label_kernel(c)?];
        let opts = MlklOptions {
            qp: QpOptions::with_tol(tol),
            ..MlklOptions::default()
        };
        Ok(mlkl::mlkl_solve(&self.instance_kernel(), &lk, &[1.0], &self.bounds, None, &opts)?.state)
    }

    /// The quadratic form `H`, the linear term `τ` (bags only), and the
    /// candidates in score-domain form.
    fn score_form(&self, alpha: &[f64]) -> Result<(PairwiseForm<'_>, Option<Vec<f64>>)> {
        let ik = self.instance_kernel();
        match &self.layout {
            Layout::Direct { .. } => Ok((PairwiseForm::new(ik, alpha.to_vec())?, None)),
            Layout::Bags {
                p,
                positive_instances,
                n_instances,
                ranges,
            } => {
                let mut weights = alloc::vec![0.0; *positive_instances];
                for (bag, r) in ranges.iter().enumerate() {
                    for v in r.clone() {
                        weights[v] = alpha[bag];
                    }
                }
                let pos_rows: Vec<usize> = (0..*positive_instances).collect();
                let neg_rows: Vec<usize> = (*positive_instances..*n_instances).collect();
                let kn = ik.cross_mul(&pos_rows, &neg_rows, &alpha[*p..]);
                let tau: Vec<f64> = kn.iter().zip(&weights).map(|(k, w)| -2.0 * w * k).collect();
                Ok((PairwiseForm::new(ik, weights)?, Some(tau)))
            }
        }
    }

    /// Sorting-based violated-label search around the working-set incumbent.
    pub fn generate(&self, alpha: &[f64], ws: &WorkingSet) -> Result<Generated> {
        self.generate_with(alpha, ws, &SearchOptions::default())
    }

    /// [`Problem::generate`], then, when the sorted labeling is not certified
    /// or improves `G` by less than `opts.epsilon`, a multi-start local search
    /// from every working-set member and `opts.restarts` random labelings.
    pub fn generate_with(&self, alpha: &[f64], ws: &WorkingSet, opts: &SearchOptions) -> Result<Generated> {
        if alpha.len() != self.dual_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dual_dim(),
                actual: alpha.len(),
            });
        }
        let (form, tau) = self.score_form(alpha)?;
        let tau = tau.as_deref();
        let m = self.score_domain();
        let vecs: Vec<Vec<f64>> = ws.candidates().iter().map(|c| c.domain_vector(m)).collect();
        let incumbent = labelgen::pick_incumbent(&vecs, &form, tau)?;
        let vp = ViolationProblem::new(&form, &vecs[incumbent], tau)?;
        let mut candidate = self.maximize_linear(&vp.r)?;
        for _ in 0..self.refine_steps {
            let v = candidate.domain_vector(m);
            let next = self.maximize_linear(&ViolationProblem::new(&form, &v, tau)?.r)?;
            if next == candidate {
                break;
            }
            candidate = next;
        }
        let certified = vp.certify(&candidate.domain_vector(m));
        let score = |c: &LabelCandidate| score_of(&form, tau, &c.domain_vector(m));
        let inc_score = score(&ws.candidates()[incumbent]);
        // G decreases by half the score gain
        let weak = !certified || ws.contains(&candidate) || 0.5 * (score(&candidate) - inc_score) < opts.epsilon;
        if weak && opts.max_passes > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (ws.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut starts: Vec<LabelCandidate> = ws.candidates().to_vec();
            for _ in 0..opts.restarts {
                let r: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                starts.push(self.maximize_linear(&r)?);
            }
            let mut best: Option<(LabelCandidate, f64)> = None;
            for start in starts {
                let found = self.local_search(&form, tau, start, opts.max_passes)?;
                if best.as_ref().is_none_or(|(_, b)| found.1 > *b) {
                    best = Some(found);
                }
            }
            if let Some((c, sc)) = best {
                if sc > inc_score + labelgen::CERTIFY_TOL && !ws.contains(&c) && sc > score(&candidate) {
                    return Ok(Generated {
                        candidate: c,
                        incumbent,
                        certified: true,
                        searched: true,
                    });
                }
            }
        }
        Ok(Generated {
            candidate,
            incumbent,
            certified,
            searched: false,
        })
    }

    /// Repeated sorting passes from `start` while `v'Hv + τ'v` increases.
    fn local_search(
        &self,
        form: &PairwiseForm<'_>,
        tau: Option<&[f64]>,
        start: LabelCandidate,
        max_passes: usize,
    ) -> Result<(LabelCandidate, f64)> {
        let m = self.score_domain();
        let mut cur = start;
        let mut cur_score = score_of(form, tau, &cur.domain_vector(m));
        for _ in 0..max_passes {
            let r = ViolationProblem::new(form, &cur.domain_vector(m), tau)?.r;
            let next = self.maximize_linear(&r)?;
            let s = score_of(form, tau, &next.domain_vector(m));
            if s <= cur_score + labelgen::CERTIFY_TOL {
                break;
            }
            cur = next;
            cur_score = s;
        }
        Ok((cur, cur_score))
    }

    /// `argmax_{ŷ feasible} r'ŷ` by the task's sorting rule.
    fn maximize_linear(&self, r: &[f64]) -> Result<LabelCandidate> {
        Ok(match (&self.generator, &self.layout) {
            (Generator::Ssl(b), _) => LabelCandidate::Assignment(labelgen::generate_ssl(r, b)?),
            (Generator::Clustering { beta }, _) => LabelCandidate::Assignment(labelgen::generate_clustering(r, *beta)?),
            (Generator::Mil, Layout::Bags { ranges, .. }) => {
                LabelCandidate::Selector(labelgen::generate_mil(r, ranges)?)
            }
            (Generator::Mil, Layout::Direct { .. }) => unreachable!("bag generator with direct layout"),
        })
    }

    /// Prediction coefficients per instance row: `Σ_t μ_t Σ_i α_i d_ti [r_t(i) = row]`.
    fn row_coefficients(&self, kernels: &[LabelKernel], mu: &[f64], alpha: &[f64]) -> Vec<f64> {
        let mut coef = alloc::vec![0.0; self.rows.len()];
        for (k, &m) in kernels.iter().zip(mu) {
            if m == 0.0 {
                continue;
            }
            for (i, &a) in alpha.iter().enumerate() {
                coef[k.rows[i]] += m * a * k.signs[i];
            }
        }
        coef
    }
}

/// One admitted candidate past the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub iter: usize,
    pub certified: bool,
    pub searched: bool,
    /// `min_{y ∈ C} G(α, y) − G(α, y_new)` at admission.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuttingPlaneResult {
    pub working_set: WorkingSet,
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub trace: Vec<TraceRecord>,
    pub admissions: Vec<Admission>,
    pub converged: bool,
}

impl CuttingPlaneResult {
    /// `min_{y ∈ C} G(α, y)` at the returned `α`.
    pub fn working_set_min(&self, problem: &Problem<'_>) -> Result<f64> {
        self.working_set
            .candidates()
            .iter()
            .map(|c| problem.g_value(&self.alpha, c))
            .try_fold(f64::INFINITY, |m, g| g.map(|g| m.min(g)))
    }
}

/// Runs the cutting-plane loop from `init`.
pub fn cutting_plane(
    problem: &Problem<'_>,
    init: LabelCandidate,
    cfg: &TaskConfig,
    clock: &dyn Clock,
) -> Result<CuttingPlaneResult> {
    cfg.validate()?;
    let ik = problem.instance_kernel();
    let opts = cfg.mlkl_options();
    let search = cfg.search_options();
    let mut ws = WorkingSet::new(init);
    let mut kernels = alloc::vec![problem.label_kernel(&ws.candidates()[0])?];
    let mut alpha: Option<Vec<f64>> = None;
    let mut prev: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut admissions = Vec::new();
    let mut converged = false;
    let mut objective = 0.0;

    for iter in 1..=cfg.max_outer_iters {
        let res = mlkl::mlkl_solve(&ik, &kernels, ws.mu(), problem.bounds(), alpha.as_deref(), &opts)?;
        let (obj, mu, a) = match &prev {
            // the previous weights padded with zero reproduce the previous
            // solve exactly, so the working-set optimum never increases
            Some((p_obj, p_mu, p_alpha)) if res.objective() > *p_obj => {
                let mut mu = p_mu.clone();
                mu.resize(ws.len(), 0.0);
                (*p_obj, mu, p_alpha.clone())
            }
            _ => (res.objective(), res.mu.clone(), res.state.alpha.clone()),
        };
        ws.set_mu(mu)?;
        objective = obj;
        let decrease_stop = prev
            .as_ref()
            .is_some_and(|(p_obj, _, _)| p_obj - obj < cfg.obj_decrease_threshold);

        let g_ws = ws
            .candidates()
            .iter()
            .map(|c| problem.g_value(&a, c))
            .try_fold(f64::INFINITY, |m, g| g.map(|g| m.min(g)))?;
        let gen = problem.generate_with(&a, &ws, &search)?;
        let g_new = problem.g_value(&a, &gen.candidate)?;
        let margin = g_ws - g_new;
        trace.push(TraceRecord {
            iter,
            objective: obj,
            ws_size: ws.len(),
            violation_margin: margin,
            seconds: clock.seconds(),
        });
        alpha = Some(a.clone());

        let no_violation = !gen.certified || ws.contains(&gen.candidate) || margin < cfg.epsilon;
        if decrease_stop || no_violation {
            converged = true;
            break;
        }
        if iter == cfg.max_outer_iters {
            break;
        }
        let mu_before = ws.mu().to_vec();
        kernels.push(problem.label_kernel(&gen.candidate)?);
        ws.push(gen.candidate);
        admissions.push(Admission {
            iter,
            certified: gen.certified,
            searched: gen.searched,
            margin,
        });
        prev = Some((obj, mu_before, a));
    }

    Ok(CuttingPlaneResult {
        working_set: ws,
        alpha: alpha.unwrap_or_default(),
        objective,
        trace,
        admissions,
        converged,
    })
}

/// Everything needed to score new inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellsvmModel {
    pub task: TaskKind,
    pub kernel: KernelSpec,
    pub n_features: usize,
    /// Training rows with nonzero prediction weight, in row order.
    pub support: Vec<SparseVector>,
    /// `f(x) = Σ_j coefficients_j k(support_j, x)`.
    pub coefficients: Vec<f64>,
    /// Training row index of each support vector.
    pub support_rows: Vec<usize>,
    pub alpha: Vec<f64>,
    pub candidates: Vec<LabelCandidate>,
    pub mu: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// For bags: original input position of each stored bag.
    #[serde(default)]
    pub bag_order: Vec<usize>,
}

impl WellsvmModel {
    pub fn from_result(problem: &Problem<'_>, res: &CuttingPlaneResult, bag_order: Vec<usize>) -> Result<Self> {
        let kernels: Vec<LabelKernel> = res
            .working_set
            .candidates()
            .iter()
            .map(|c| problem.label_kernel(c))
            .collect::<Result<_>>()?;
        let coef = problem.row_coefficients(&kernels, res.working_set.mu(), &res.alpha);
        let mut support = Vec::new();
        let mut coefficients = Vec::new();
        let mut support_rows = Vec::new();
        for (row, &c) in coef.iter().enumerate() {
            if c != 0.0 {
                support.push(problem.rows[row].clone());
                coefficients.push(c);
                support_rows.push(row);
            }
        }
        Ok(WellsvmModel {
            task: problem.kind,
            kernel: problem.kernel,
            n_features: problem.n_features,
            support,
            coefficients,
            support_rows,
            alpha: res.alpha.clone(),
            candidates: res.working_set.candidates().to_vec(),
            mu: res.working_set.mu().to_vec(),
            objective: res.objective,
            converged: res.converged,
            iterations: res.trace.len(),
            bag_order,
        })
    }

    /// Decision value `Σ_t w_t'φ(x)`; its sign is the predicted class.
    pub fn predict(&self, x: &SparseVector) -> f64 {
        self.support
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, &c)| c * self.kernel.eval(sv, x))
            .sum()
    }

    pub fn predict_label(&self, x: &SparseVector) -> Label {
        if self.predict(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn predict_all(&self, rows: &[SparseVector]) -> Vec<f64> {
        rows.iter().map(|x| self.predict(x)).collect()
    }

    /// `max_j f(x_j)` over the bag's instances.
    pub fn bag_predict(&self, bag: &[SparseVector]) -> Result<f64> {
        mil_bag_predict(self, bag)
    }

    /// Index within `bag` of the instance with the largest decision value.
    pub fn key_instance(&self, bag: &[SparseVector]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, x) in bag.iter().enumerate() {
            let v = self.predict(x);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        best.map(|(j, _)| j)
    }
}

pub fn mil_bag_predict(model: &WellsvmModel, bag: &[SparseVector]) -> Result<f64> {
    if bag.is_empty() {
        return Err(Error::Empty("bag"));
    }
    Ok(bag.iter().map(|x| model.predict(x)).fold(f64::NEG_INFINITY, f64::max))
}

/// Plain SVM without offset on fully labeled data, as a single-candidate model.
pub fn train_supervised(d: &Dataset, kernel: KernelSpec, c: f64, qp_tol: f64) -> Result<WellsvmModel> {
    let y = d.full_labels()?;
    let mut cfg = TaskConfig::new(Task::Ssl { c1: c, c2: c }, kernel);
    cfg.qp_tol = qp_tol;
    let problem = Problem::ssl(d, &cfg)?;
    let cand = LabelCandidate::Assignment(y);
    let state = problem.solve_candidate(&cand, qp_tol)?;
    let res = CuttingPlaneResult {
        working_set: WorkingSet::new(cand),
        alpha: state.alpha,
        objective: state.objective,
        trace: Vec::new(),
        admissions: Vec::new(),
        converged: state.converged,
    };
    let mut model = WellsvmModel::from_result(&problem, &res, Vec::new())?;
    model.iterations = 1;
    Ok(model)
}

/// Supervised SVM on the labeled rows, its predictions on the unlabeled rows
/// projected onto the balance constraint.
pub fn initialize_ssl(d: &Dataset, cfg: &TaskConfig) -> Result<LabelCandidate> {
    let Task::Ssl { c1, .. } = cfg.task else {
        return Err(Error::param("task", "expected a semi-supervised task"));
    };
    let labeled = d.labeled_indices();
    let unlabeled = d.unlabeled_indices();
    let balance = BalanceSpec::ssl(d.labels().to_vec())?;
    let known: Vec<Label> = labeled.iter().map(|&i| d.labels()[i].expect("labeled")).collect();
    if !(known.contains(&1) && known.contains(&-1)) {
        return Err(Error::InvalidDataset("labeled rows must include both classes".into()));
    }
    if unlabeled.is_empty() {
        return Ok(LabelCandidate::Assignment(known));
    }
    let model = train_supervised(&d.subset(&labeled), cfg.kernel, c1, cfg.qp_tol)?;
    let mut r = alloc::vec![0.0; d.len()];
    for &i in &unlabeled {
        r[i] = model.predict(&d.rows()[i]);
    }
    Ok(LabelCandidate::Assignment(labelgen::generate_ssl(&r, &balance)?))
}

/// A uniformly random labeling with `|1'ŷ| ≤ beta`: the number of positives
/// is drawn among the feasible counts, then placed by a random permutation.
pub fn random_balanced_labels(n: usize, beta: usize, rng: &mut impl Rng) -> Result<Vec<Label>> {
    BalanceSpec::clustering(n, beta)?;
    let counts: Vec<usize> = (0..=n).filter(|&k| (2 * k).abs_diff(n) <= beta).collect();
    let k = counts[rng.random_range(0..counts.len())];
    let mut y: Vec<Label> = (0..n).map(|i| if i < k { 1 } else { -1 }).collect();
    y.shuffle(rng);
    Ok(y)
}

/// Best of `n_random` seeded balanced labelings by kernel alignment.
pub fn initialize_clustering(problem: &Problem<'_>, cfg: &TaskConfig) -> Result<LabelCandidate> {
    let Task::Clustering { beta, .. } = cfg.task else {
        return Err(Error::param("task", "expected a clustering task"));
    };
    let n = problem.rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ik = problem.instance_kernel();
    let all: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<Label>)> = None;
    for _ in 0..cfg.n_random_init {
        let y = random_balanced_labels(n, beta, &mut rng)?;
        let score = match problem.gram() {
            Some(g) => kernel::kernel_alignment(g, &y)?,
            // ||K||_F is the same for every candidate, so y'Ky ranks identically
            None => {
                let w: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
                ik.quad(&all, &w)
            }
        };
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, y));
        }
    }
    Ok(LabelCandidate::Assignment(best.expect("n_random_init ≥ 1").1))
}

/// Per positive bag, the instance farthest in feature space from the
/// centroid of all negative instances.
pub fn initialize_mil(problem: &Problem<'_>) -> Result<LabelCandidate> {
    let Layout::Bags {
        positive_instances,
        n_instances,
        ranges,
        ..
    } = &problem.layout
    else {
        return Err(Error::param("task", "expected a multi-instance problem"));
    };
    let ik = problem.instance_kernel();
    let n_neg = n_instances - positive_instances;
    if n_neg == 0 {
        return Err(Error::InvalidDataset("no negative instances".into()));
    }
    let pos: Vec<usize> = (0..*positive_instances).collect();
    let neg: Vec<usize> = (*positive_instances..*n_instances).collect();
    let mean_k = ik.cross_mul(&pos, &neg, &alloc::vec![1.0 / n_neg as f64; n_neg]);
    // ||φ(x) − m||² up to the constant ||m||²
    let dist: Vec<f64> = pos.iter().map(|&v| ik.entry(v, v) - 2.0 * mean_k[v]).collect();
    Ok(LabelCandidate::Selector(labelgen::generate_mil(&dist, ranges)?))
}

/// Full training outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: WellsvmModel,
    pub trace: Vec<TraceRecord>,
    pub admissions: Vec<Admission>,
}

pub fn train_ssl(d: &Dataset, cfg: &TaskConfig, clock: &dyn Clock) -> Result<Trained> {
    let problem = Problem::ssl(d, cfg)?;
    let init = initialize_ssl(d, cfg)?;
    finish(&problem, init, cfg, clock, Vec::new())
}

pub fn train_clustering(d: &Dataset, cfg: &TaskConfig, clock: &dyn Clock) -> Result<Trained> {
    let problem = Problem::clustering(d, cfg)?;
    let init = initialize_clustering(&problem, cfg)?;
    finish(&problem, init, cfg, clock, Vec::new())
}

pub fn train_mil(b: &BagDataset, cfg: &TaskConfig, clock: &dyn Clock) -> Result<Trained> {
    let problem = Problem::mil(b, cfg)?;
    let init = initialize_mil(&problem)?;
    finish(&problem, init, cfg, clock, b.original_order().to_vec())
}

fn finish(
    problem: &Problem<'_>,
    init: LabelCandidate,
    cfg: &TaskConfig,
    clock: &dyn Clock,
    bag_order: Vec<usize>,
) -> Result<Trained> {
    let res = cutting_plane(problem, init, cfg, clock)?;
    Ok(Trained {
        model: WellsvmModel::from_result(problem, &res, bag_order)?,
        trace: res.trace,
        admissions: res.admissions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pt(x: f64, y: f64) -> SparseVector {
        SparseVector::from_dense(&[x, y]).unwrap()
    }

    fn toy_ssl() -> Dataset {
        let rows = vec![
            pt(2.0, 0.1),
            pt(-2.0, -0.2),
            pt(1.5, 0.4),
            pt(2.2, -0.5),
            pt(-1.8, 0.3),
            pt(-2.5, 0.1),
        ];
        Dataset::new(rows, vec![Some(1), Some(-1), None, None, None, None], 2).unwrap()
    }

    #[test]
    fn beta_modes() {
        assert_eq!(BetaMode::Balanced.beta(200), 6);
        assert_eq!(BetaMode::Imbalanced.beta(200), 60);
        assert_eq!(BetaMode::Balanced.beta(10), 0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TaskConfig::new(Task::Ssl { c1: 1.0, c2: 0.1 }, KernelSpec::Linear);
        assert!(cfg.validate().is_ok());
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = TaskConfig::new(Task::Clustering { c: -1.0, beta: 0 }, KernelSpec::Linear);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fully_labeled_ssl_is_supervised_svm() {
        let d = toy_ssl();
        let full = Dataset::labeled(d.rows().to_vec(), vec![1, -1, 1, 1, -1, -1], 2).unwrap();
        let cfg = TaskConfig::new(Task::Ssl { c1: 1.0, c2: 0.1 }, KernelSpec::Linear);
        let t = train_ssl(&full, &cfg, &NoClock).unwrap();
        assert_eq!(t.trace.len(), 1);
        assert!(t.model.converged);
        let sup = train_supervised(&full, KernelSpec::Linear, 1.0, cfg.qp_tol).unwrap();
        assert_eq!(t.model.coefficients, sup.coefficients);
        assert_eq!(t.model.alpha, sup.alpha);
    }

    #[test]
    fn ssl_init_follows_supervised_predictions() {
        let d = toy_ssl();
        let cfg = TaskConfig::new(Task::Ssl { c1: 1.0, c2: 0.1 }, KernelSpec::Linear);
        let init = initialize_ssl(&d, &cfg).unwrap();
        assert_eq!(init, LabelCandidate::Assignment(vec![1, -1, 1, 1, -1, -1]));
    }

    #[test]
    fn ssl_init_zero_decisions_and_single_class() {
        // unlabeled rows orthogonal to the labeled ones → all decisions zero
        let rows = vec![pt(1.0, 0.0), pt(-1.0, 0.0), pt(0.0, 1.0), pt(0.0, 2.0)];
        let d = Dataset::new(rows.clone(), vec![Some(1), Some(-1), None, None], 2).unwrap();
        let cfg = TaskConfig::new(Task::Ssl { c1: 1.0, c2: 0.1 }, KernelSpec::Linear);
        let init = initialize_ssl(&d, &cfg).unwrap();
        assert_eq!(init, LabelCandidate::Assignment(vec![1, -1, -1, 1]));
        let one = Dataset::new(rows, vec![Some(1), Some(1), None, None], 2).unwrap();
        assert!(initialize_ssl(&one, &cfg).is_err());
    }

    #[test]
    fn mil_init_picks_far_instance() {
        // negatives near the origin; bag 0's second instance is far away
        let bags = vec![
            ("p".into(), vec![pt(0.1, 0.0), pt(3.0, 3.0), pt(0.0, 0.2)], 1),
            ("n".into(), vec![pt(0.0, 0.0), pt(0.1, 0.1)], -1),
        ];
        let b = BagDataset::new(bags, 2).unwrap();
        let cfg = TaskConfig::new(Task::Mil { c1: 1.0, c2: 1.0 }, KernelSpec::gaussian(1.0).unwrap());
        let p = Problem::mil(&b, &cfg).unwrap();
        assert_eq!(initialize_mil(&p).unwrap(), LabelCandidate::Selector(vec![1]));
        assert_eq!(initialize_mil(&p).unwrap(), initialize_mil(&p).unwrap());
    }

    #[test]
    fn mil_init_identical_instances_first_index() {
        let bags = vec![
            ("p".into(), vec![pt(1.0, 1.0), pt(1.0, 1.0)], 1),
            ("q".into(), vec![pt(1.0, 1.0), pt(1.0, 1.0), pt(1.0, 1.0)], 1),
            ("n".into(), vec![pt(1.0, 1.0)], -1),
        ];
        let b = BagDataset::new(bags, 2).unwrap();
        let cfg = TaskConfig::new(Task::Mil { c1: 1.0, c2: 1.0 }, KernelSpec::Linear);
        let p = Problem::mil(&b, &cfg).unwrap();
        assert_eq!(initialize_mil(&p).unwrap(), LabelCandidate::Selector(vec![0, 2]));
    }

    #[test]
    fn bag_predict_is_max() {
        let d = Dataset::labeled(vec![pt(1.0, 0.0), pt(-1.0, 0.0)], vec![1, -1], 2).unwrap();
        let m = train_supervised(&d, KernelSpec::Linear, 10.0, 1e-9).unwrap();
        let a = pt(0.5, 0.0);
        let b = pt(-0.3, 0.0);
        assert_eq!(mil_bag_predict(&m, core::slice::from_ref(&a)).unwrap(), m.predict(&a));
        let both = mil_bag_predict(&m, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(both, m.predict(&a).max(m.predict(&b)));
        assert!(mil_bag_predict(&m, &[]).is_err());
        assert_eq!(m.key_instance(&[b, a]), Some(1));
    }

    #[test]
    fn random_balanced_respects_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..12 {
            for beta in 0..=n {
                if n % 2 == 1 && beta == 0 {
                    continue;
                }
                let y = random_balanced_labels(n, beta, &mut rng).unwrap();
                let s: i32 = y.iter().map(|&v| i32::from(v)).sum();
                assert!(s.unsigned_abs() as usize <= beta);
            }
        }
    }
}
