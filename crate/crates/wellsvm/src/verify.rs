//! Brute-force checks on problems small enough to enumerate.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wellsvm_core::learner::{self, cutting_plane, CuttingPlaneResult, NoClock, Problem};
use wellsvm_core::oracle::{self, EnumeratedFeasibleSet, FeasibleSpec};
use wellsvm_core::{labelgen, BagDataset, BalanceSpec, Dataset, KernelSpec, Label, LabelCandidate, Result};
use wellsvm_core::{SparseVector, Task, TaskConfig};

/// Slack of the sandwich inequality `p* <= p_MIP`.
pub const SANDWICH_TOL: f64 = 1e-6;
/// Slack of the non-increase check on objective traces.
pub const MONOTONE_TOL: f64 = 1e-8;
/// Tolerance on the real score in the sorting check.
pub const SCORE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TinyData {
    Rows(Dataset),
    Bags(BagDataset),
}

/// A seeded problem with an enumerable feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyCase {
    pub data: TinyData,
    pub cfg: TaskConfig,
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<SparseVector> {
    (0..n)
        .map(|_| {
            SparseVector::from_dense(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).expect("finite draws")
        })
        .collect()
}

/// Case `index` cycles through SSL (10 unlabeled rows), clustering (10 rows,
/// `β ∈ {0, 2, 4}`) and multi-instance (3 positive bags of 3) problems,
/// alternating linear and unit-width Gaussian kernels.
pub fn tiny_case(index: u64, seed: u64) -> Result<TinyCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ index);
    let kernel = if index.is_multiple_of(2) {
        KernelSpec::Linear
    } else {
        KernelSpec::gaussian(1.0)?
    };
    let (data, task) = match index % 3 {
        0 => {
            let mut labels = vec![None; 12];
            labels[0] = Some(1);
            labels[1] = Some(-1);
            let d = Dataset::new(random_rows(&mut rng, 12), labels, 2)?;
            (TinyData::Rows(d), Task::Ssl { c1: 1.0, c2: 0.5 })
        }
        1 => {
            let d = Dataset::unlabeled(random_rows(&mut rng, 10), 2)?;
            let beta = (index / 3 % 3) as usize * 2;
            (TinyData::Rows(d), Task::Clustering { c: 0.5, beta })
        }
        _ => {
            let mut bags = Vec::new();
            for b in 0..3 {
                bags.push((format!("p{b}"), random_rows(&mut rng, 3), 1));
            }
            for b in 0..2 {
                bags.push((format!("n{b}"), random_rows(&mut rng, 2), -1));
            }
            (
                TinyData::Bags(BagDataset::new(bags, 2)?),
                Task::Mil { c1: 1.0, c2: 1.0 },
            )
        }
    };
    let mut cfg = TaskConfig::new(task, kernel).certifying();
    cfg.seed = seed ^ index;
    Ok(TinyCase { data, cfg })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyOutcome {
    pub result: CuttingPlaneResult,
    /// `min over B of max_α G(α, ŷ)`.
    pub p_mip: f64,
    /// `min over C of G(α, ŷ) − min over B of G(α, ŷ)` at the returned `α`.
    pub certificate_gap: f64,
    pub feasible_size: usize,
    pub epsilon: f64,
}

impl TinyOutcome {
    pub fn sandwich_holds(&self) -> bool {
        self.result.objective <= self.p_mip + SANDWICH_TOL
    }

    pub fn certificate_holds(&self) -> bool {
        self.certificate_gap <= self.epsilon
    }
}

impl TinyCase {
    pub fn with_problem<T>(&self, f: impl FnOnce(&Problem<'_>) -> Result<T>) -> Result<T> {
        match (&self.data, self.cfg.task) {
            (TinyData::Rows(d), Task::Ssl { .. }) => f(&Problem::ssl(d, &self.cfg)?),
            (TinyData::Rows(d), _) => f(&Problem::clustering(d, &self.cfg)?),
            (TinyData::Bags(b), _) => f(&Problem::mil(b, &self.cfg)?),
        }
    }

    fn initial(&self, p: &Problem<'_>) -> Result<LabelCandidate> {
        match (&self.data, self.cfg.task) {
            (TinyData::Rows(d), Task::Ssl { .. }) => learner::initialize_ssl(d, &self.cfg),
            (TinyData::Rows(_), _) => learner::initialize_clustering(p, &self.cfg),
            (TinyData::Bags(_), _) => learner::initialize_mil(p),
        }
    }

    /// Trains, then compares against the enumerated problem.
    pub fn run(&self) -> Result<TinyOutcome> {
        self.with_problem(|p| {
            let result = cutting_plane(p, self.initial(p)?, &self.cfg, &NoClock)?;
            let feasible = oracle::enumerate_feasible(&FeasibleSpec::of_problem(p)?)?;
            let mip = oracle::mip_solve(p, &feasible, self.cfg.qp_tol)?;
            let ws_min = result.working_set_min(p)?;
            let mut all_min = f64::INFINITY;
            for c in feasible.candidates() {
                all_min = all_min.min(p.g_value(&result.alpha, c)?);
            }
            Ok(TinyOutcome {
                p_mip: mip.value,
                certificate_gap: ws_min - all_min,
                feasible_size: feasible.len(),
                epsilon: self.cfg.epsilon,
                result,
            })
        })
    }
}

/// `p^(t+1) <= p^(t) + MONOTONE_TOL` at every step.
pub fn is_monotone(objectives: &[f64]) -> bool {
    objectives.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SortingInstance {
    Ssl { r: Vec<f64>, known: Vec<Option<Label>> },
    Clustering { r: Vec<f64>, beta: usize },
    Mil { r: Vec<f64>, bags: Vec<Range<usize>> },
}

/// Random linear scores over a random enumerable feasible set: up to 12
/// rows with up to 12 unlabeled (SSL), `N <= 12` with `β <= 2`
/// (clustering), or at most 3 positive bags of at most 4 instances.
pub fn sorting_instance(index: u64, seed: u64) -> SortingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    match index % 3 {
        0 => {
            let n = rng.random_range(2..=12);
            let n_lab = rng.random_range(1..=n.min(4));
            let mut known = vec![None; n];
            for k in known.iter_mut().take(n_lab) {
                *k = Some(if rng.random_bool(0.5) { 1 } else { -1 });
            }
            let r = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            SortingInstance::Ssl { r, known }
        }
        1 => {
            let n = rng.random_range(1..=12);
            let beta = rng.random_range(0..=2usize).min(n);
            // odd n admits no labeling with 1'y = 0
            let beta = if n % 2 == 1 && beta == 0 { 1 } else { beta };
            let r = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            SortingInstance::Clustering { r, beta }
        }
        _ => {
            let n_bags = rng.random_range(1..=3);
            let mut bags = Vec::new();
            let mut start = 0;
            for _ in 0..n_bags {
                let len = rng.random_range(1..=4);
                bags.push(start..start + len);
                start += len;
            }
            let r = (0..start).map(|_| rng.random_range(-1.0..1.0)).collect();
            SortingInstance::Mil { r, bags }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortingCheck {
    pub generated: LabelCandidate,
    pub generated_value: f64,
    pub exhaustive_value: f64,
    /// The enumerated argmax, when it beats every other member by more than
    /// the score tolerance.
    pub unique_argmax: Option<LabelCandidate>,
    pub feasible: bool,
}

impl SortingCheck {
    pub fn passes(&self) -> bool {
        self.feasible
            && (self.generated_value - self.exhaustive_value).abs() <= SCORE_TOL
            && self.unique_argmax.as_ref().is_none_or(|c| *c == self.generated)
    }
}

fn unique_best(r: &[f64], set: &EnumeratedFeasibleSet, best: f64) -> Option<LabelCandidate> {
    let mut near = set.candidates().iter().filter(|c| {
        let v: f64 = r.iter().zip(c.domain_vector(r.len())).map(|(a, b)| a * b).sum();
        v >= best - SCORE_TOL
    });
    let first = near.next()?.clone();
    near.next().is_none().then_some(first)
}

pub fn check_sorting(inst: &SortingInstance) -> Result<SortingCheck> {
    let (r, spec, generated) = match inst {
        SortingInstance::Ssl { r, known } => {
            let b = BalanceSpec::ssl(known.clone())?;
            let y = labelgen::generate_ssl(r, &b)?;
            (r, FeasibleSpec::Balance(b), LabelCandidate::Assignment(y))
        }
        SortingInstance::Clustering { r, beta } => {
            let y = labelgen::generate_clustering(r, *beta)?;
            let b = BalanceSpec::clustering(r.len(), *beta)?;
            (r, FeasibleSpec::Balance(b), LabelCandidate::Assignment(y))
        }
        SortingInstance::Mil { r, bags } => {
            let s = labelgen::generate_mil(r, bags)?;
            (r, FeasibleSpec::Bags(bags.clone()), LabelCandidate::Selector(s))
        }
    };
    let set = oracle::enumerate_feasible(&spec)?;
    let (_, exhaustive_value) = oracle::lp_solve_exhaustive(r, &set)?;
    let generated_value = r.iter().zip(generated.domain_vector(r.len())).map(|(a, b)| a * b).sum();
    Ok(SortingCheck {
        feasible: set.candidates().contains(&generated),
        unique_argmax: unique_best(r, &set, exhaustive_value),
        generated,
        generated_value,
        exhaustive_value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyResult {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Sorting exactness on `n_sorting` draws; sandwich, certificate and
/// monotonicity on `n_train` trained problems.
pub fn run_suite(n_sorting: u64, n_train: u64, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut sort_fail = 0;
    for i in 0..n_sorting {
        if !check_sorting(&sorting_instance(i, seed))?.passes() {
            sort_fail += 1;
        }
    }
    let mut sandwich_fail = 0;
    let mut cert_fail = 0;
    let mut mono_fail = 0;
    let mut worst_sandwich = f64::NEG_INFINITY;
    let mut worst_gap = f64::NEG_INFINITY;
    for i in 0..n_train {
        let out = tiny_case(i, seed)?.run()?;
        worst_sandwich = worst_sandwich.max(out.result.objective - out.p_mip);
        worst_gap = worst_gap.max(out.certificate_gap);
        sandwich_fail += usize::from(!out.sandwich_holds());
        cert_fail += usize::from(!out.certificate_holds());
        let objs: Vec<f64> = out.result.trace.iter().map(|t| t.objective).collect();
        mono_fail += usize::from(!is_monotone(&objs) || objs.len() > learner::DEFAULT_MAX_OUTER_ITERS);
    }
    Ok(vec![
        PropertyResult {
            name: "sorting exactness",
            passed: sort_fail == 0,
            detail: format!("{sort_fail} of {n_sorting} instances differ from enumeration"),
        },
        PropertyResult {
            name: "relaxation sandwich",
            passed: sandwich_fail == 0,
            detail: format!(
                "{sandwich_fail} of {n_train} violate p* <= p_MIP; worst p* - p_MIP = {worst_sandwich:.3e}"
            ),
        },
        PropertyResult {
            name: "termination certificate",
            passed: cert_fail == 0,
            detail: format!("{cert_fail} of {n_train} exceed epsilon; worst gap = {worst_gap:.3e}"),
        },
        PropertyResult {
            name: "monotone objective",
            passed: mono_fail == 0,
            detail: format!("{mono_fail} of {n_train} traces increase or run too long"),
        },
    ])
}
