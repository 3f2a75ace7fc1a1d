//! Training from command-line style settings.

use clap::{Args, ValueEnum};
use wellsvm_core::learner::{self, BetaMode, Clock, TaskKind, Trained};
use wellsvm_core::{kernel, BagDataset, Dataset, KernelSpec, Result, SparseVector, Task, TaskConfig};

use crate::model::ModelDocument;
use crate::scale::MinMaxScaler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskChoice {
    Ssl,
    Mil,
    Clustering,
}

impl From<TaskChoice> for TaskKind {
    fn from(t: TaskChoice) -> Self {
        match t {
            TaskChoice::Ssl => TaskKind::Ssl,
            TaskChoice::Mil => TaskKind::Mil,
            TaskChoice::Clustering => TaskKind::Clustering,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BetaChoice {
    Balanced,
    Imbalanced,
}

impl From<BetaChoice> for BetaMode {
    fn from(b: BetaChoice) -> Self {
        match b {
            BetaChoice::Balanced => BetaMode::Balanced,
            BetaChoice::Imbalanced => BetaMode::Imbalanced,
        }
    }
}

/// Learner settings shared by `train` and `benchmark`.
#[derive(Debug, Clone, PartialEq, Args)]
pub struct ModelFlags {
    #[arg(long, value_enum)]
    pub task: TaskChoice,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelChoice,
    /// Multiplier on the data-driven Gaussian width.
    #[arg(long, default_value_t = 1.0)]
    pub width_mult: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c2: f64,
    /// Clustering regularization.
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    #[arg(long, value_enum, default_value = "balanced")]
    pub beta_mode: BetaChoice,
    #[arg(long, default_value_t = learner::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = learner::DEFAULT_OBJ_THRESHOLD)]
    pub obj_threshold: f64,
    #[arg(long, default_value_t = learner::DEFAULT_MAX_OUTER_ITERS)]
    pub max_outer_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Min-max scale every feature to [0, 1] using the training rows.
    #[arg(long)]
    pub scale: bool,
}

impl ModelFlags {
    pub fn defaults(task: TaskChoice) -> Self {
        ModelFlags {
            task,
            kernel: KernelChoice::Gaussian,
            width_mult: 1.0,
            c1: 1.0,
            c2: 0.1,
            c: 0.1,
            beta_mode: BetaChoice::Balanced,
            epsilon: learner::DEFAULT_EPSILON,
            obj_threshold: learner::DEFAULT_OBJ_THRESHOLD,
            max_outer_iters: learner::DEFAULT_MAX_OUTER_ITERS,
            seed: 0,
            scale: false,
        }
    }

    pub fn kernel_spec(&self, rows: &[SparseVector]) -> Result<KernelSpec> {
        match self.kernel {
            KernelChoice::Linear => Ok(KernelSpec::Linear),
            KernelChoice::Gaussian => kernel::heuristic_gaussian(rows, self.width_mult, self.seed),
        }
    }

    /// Resolves the kernel width and `β` against the training rows.
    pub fn task_config(&self, rows: &[SparseVector]) -> Result<TaskConfig> {
        let task = match self.task {
            TaskChoice::Ssl => Task::Ssl {
                c1: self.c1,
                c2: self.c2,
            },
            TaskChoice::Mil => Task::Mil {
                c1: self.c1,
                c2: self.c2,
            },
            TaskChoice::Clustering => Task::Clustering {
                c: self.c,
                beta: BetaMode::from(self.beta_mode).beta(rows.len()),
            },
        };
        let mut cfg = TaskConfig::new(task, self.kernel_spec(rows)?);
        cfg.epsilon = self.epsilon;
        cfg.obj_decrease_threshold = self.obj_threshold;
        cfg.max_outer_iters = self.max_outer_iters;
        cfg.seed = self.seed;
        if self.task == TaskChoice::Clustering {
            cfg.refine_steps = CLUSTERING_REFINE_STEPS;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sorting passes per generation step for clustering runs.
pub const CLUSTERING_REFINE_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum TrainData {
    Rows(Dataset),
    Bags(BagDataset),
}

impl TrainData {
    pub fn rows(&self) -> &[SparseVector] {
        match self {
            TrainData::Rows(d) => d.rows(),
            TrainData::Bags(b) => b.rows(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainData::Rows(d) => d.n_features(),
            TrainData::Bags(b) => b.n_features(),
        }
    }
}

pub fn scale_bags(b: &BagDataset, s: &MinMaxScaler) -> Result<BagDataset> {
    let mut order: Vec<usize> = (0..b.bags().len()).collect();
    order.sort_by_key(|&i| b.original_order()[i]);
    let bags = order
        .into_iter()
        .map(|i| {
            let bag = &b.bags()[i];
            let xs = b.rows()[bag.range()]
                .iter()
                .map(|x| s.transform(x))
                .collect::<Result<Vec<_>>>()?;
            Ok((bag.id.clone(), xs, bag.label))
        })
        .collect::<Result<Vec<_>>>()?;
    BagDataset::new(bags, b.n_features())
}

pub struct Fitted {
    pub document: ModelDocument,
    pub trained: Trained,
    pub config: TaskConfig,
}

/// Scales (if asked), resolves the configuration and trains.
pub fn fit(flags: &ModelFlags, data: &TrainData, clock: &dyn Clock) -> Result<Fitted> {
    let scaler = flags.scale.then(|| MinMaxScaler::fit(data.rows(), data.n_features()));
    let scaled = match (&scaler, data) {
        (None, _) => None,
        (Some(s), TrainData::Rows(d)) => Some(TrainData::Rows(s.transform_dataset(d)?)),
        (Some(s), TrainData::Bags(b)) => Some(TrainData::Bags(scale_bags(b, s)?)),
    };
    let data = scaled.as_ref().unwrap_or(data);
    let cfg = flags.task_config(data.rows())?;
    let trained = match (flags.task, data) {
        (TaskChoice::Ssl, TrainData::Rows(d)) => learner::train_ssl(d, &cfg, clock)?,
        (TaskChoice::Clustering, TrainData::Rows(d)) => learner::train_clustering(&d.without_labels(), &cfg, clock)?,
        (TaskChoice::Mil, TrainData::Bags(b)) => learner::train_mil(b, &cfg, clock)?,
        _ => {
            return Err(wellsvm_core::Error::InvalidDataset(
                "multi-instance training needs a bag file and the other tasks a row file".into(),
            ))
        }
    };
    Ok(Fitted {
        document: ModelDocument::new(trained.model.clone(), scaler),
        trained,
        config: cfg,
    })
}

/// Applies the document's scaler, if any.
pub fn prepare(doc: &ModelDocument, x: &SparseVector) -> Result<SparseVector> {
    match &doc.scaler {
        Some(s) => s.transform(x),
        None => Ok(x.clone()),
    }
}

/// Trace CSV with header `iter,objective,ws_size,violation_margin,seconds`.
pub fn trace_csv(trace: &[wellsvm_core::TraceRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "objective", "ws_size", "violation_margin", "seconds"])
        .expect("in-memory write");
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            format!("{:?}", r.objective),
            r.ws_size.to_string(),
            format!("{:?}", r.violation_margin),
            format!("{:.6}", r.seconds),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
