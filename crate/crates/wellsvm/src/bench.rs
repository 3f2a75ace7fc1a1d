//! Repeated seeded comparisons against simple baselines.

use std::time::Instant;

use rayon::prelude::*;
use wellsvm_core::learner::{train_supervised, NoClock};
use wellsvm_core::metrics::{accuracy, clustering_accuracy, EvalReport};
use wellsvm_core::{BagDataset, Dataset, Error, Label, Result};

use crate::kmeans::{kmeans2, DEFAULT_RESTARTS};
use crate::scale::MinMaxScaler;
use crate::split::SplitSpec;
use crate::train::{fit, scale_bags, ModelFlags, TaskChoice, TrainData};

pub const TRAIN_FRAC: f64 = 0.75;
pub const THREADS_ENV: &str = "WELLSVM_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub flags: ModelFlags,
    pub repeats: usize,
    /// Semi-supervised only; one sweep point per value.
    pub labeled_fracs: Vec<f64>,
    /// Select `C₂` and the width by cross-validation in each repeat.
    pub cv: bool,
}

/// One value of one method in one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub labeled_frac: Option<f64>,
    pub repeat: usize,
    pub method: &'static str,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub report: EvalReport,
    pub runs: Vec<RunRecord>,
    /// `(labeled_frac, repeat, seconds)` per job, kept apart from the results.
    pub timings: Vec<(Option<f64>, usize, f64)>,
}

/// Worker count from `WELLSVM_THREADS`, else the machine's parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
}

fn repeat_flags(flags: &ModelFlags, repeat: usize) -> ModelFlags {
    let mut f = flags.clone();
    f.seed = flags.seed.wrapping_add(repeat as u64);
    f.scale = false;
    f
}

fn ssl_job(s: &BenchSettings, d: &Dataset, lf: f64, repeat: usize) -> Result<Vec<RunRecord>> {
    let mut flags = repeat_flags(&s.flags, repeat);
    let spec = SplitSpec {
        train_frac: TRAIN_FRAC,
        labeled_frac: lf,
        seed: flags.seed,
    };
    let (mut train, mut test) = spec.apply(d)?;
    if s.flags.scale {
        let sc = MinMaxScaler::fit(train.rows(), train.n_features());
        train = sc.transform_dataset(&train)?;
        test = sc.transform_dataset(&test)?;
    }
    if test.is_empty() {
        return Err(Error::InvalidDataset("benchmark split left no test rows".into()));
    }
    if s.cv {
        flags = crate::cv::select_ssl(&flags, &train, flags.seed)?.0;
    }
    let fitted = fit(&flags, &TrainData::Rows(train.clone()), &NoClock)?;
    let truth = test.full_labels()?;
    let well: Vec<Label> = test
        .rows()
        .iter()
        .map(|x| fitted.document.model.predict_label(x))
        .collect();
    let lab = train.subset(&train.labeled_indices());
    let base = train_supervised(&lab, fitted.config.kernel, flags.c1, fitted.config.qp_tol)?;
    let sup: Vec<Label> = test.rows().iter().map(|x| base.predict_label(x)).collect();
    let rec = |method, value| RunRecord {
        labeled_frac: Some(lf),
        repeat,
        method,
        metric: "accuracy",
        value,
    };
    Ok(vec![
        rec("wellsvm", accuracy(&well, &truth)?),
        rec("svm", accuracy(&sup, &truth)?),
    ])
}

fn clustering_job(s: &BenchSettings, d: &Dataset, repeat: usize) -> Result<Vec<RunRecord>> {
    let flags = repeat_flags(&s.flags, repeat);
    let truth = d.full_labels()?;
    let d = if s.flags.scale {
        MinMaxScaler::fit(d.rows(), d.n_features()).transform_dataset(d)?
    } else {
        d.clone()
    };
    let fitted = fit(&flags, &TrainData::Rows(d.clone()), &NoClock)?;
    let well: Vec<Label> = d
        .rows()
        .iter()
        .map(|x| fitted.document.model.predict_label(x))
        .collect();
    let km = kmeans2(d.rows(), d.n_features(), DEFAULT_RESTARTS, flags.seed)?;
    let rec = |method, value| RunRecord {
        labeled_frac: None,
        repeat,
        method,
        metric: "clustering_accuracy",
        value,
    };
    Ok(vec![
        rec("wellsvm", clustering_accuracy(&well, &truth)?),
        rec("kmeans", clustering_accuracy(&km.labels, &truth)?),
    ])
}

/// Bags listed by index, rebuilt in their original relative order.
pub fn bag_subset(b: &BagDataset, keep: &[usize]) -> Result<BagDataset> {
    let mut keep = keep.to_vec();
    keep.sort_by_key(|&i| b.original_order()[i]);
    let bags = keep
        .iter()
        .map(|&i| {
            let bag = &b.bags()[i];
            (bag.id.clone(), b.rows()[bag.range()].to_vec(), bag.label)
        })
        .collect();
    BagDataset::new(bags, b.n_features())
}

fn mil_job(s: &BenchSettings, b: &BagDataset, repeat: usize) -> Result<Vec<RunRecord>> {
    let flags = repeat_flags(&s.flags, repeat);
    let spec = SplitSpec {
        train_frac: TRAIN_FRAC,
        labeled_frac: 1.0,
        seed: flags.seed,
    };
    let split = spec.split(&b.bag_labels())?;
    let mut train = bag_subset(b, &split.train)?;
    let mut test = bag_subset(b, &split.test)?;
    if s.flags.scale {
        let sc = MinMaxScaler::fit(train.rows(), train.n_features());
        train = scale_bags(&train, &sc)?;
        test = scale_bags(&test, &sc)?;
    }
    let fitted = fit(&flags, &TrainData::Bags(train), &NoClock)?;
    let mut pred = Vec::new();
    for bag in test.bags() {
        let score = fitted.document.model.bag_predict(&test.rows()[bag.range()])?;
        pred.push(if score >= 0.0 { 1 } else { -1 });
    }
    Ok(vec![RunRecord {
        labeled_frac: None,
        repeat,
        method: "wellsvm",
        metric: "bag_accuracy",
        value: accuracy(&pred, &test.bag_labels())?,
    }])
}

/// Jobs run on a pool of [`worker_count`] threads; results are gathered in
/// job order, so the output does not depend on scheduling.
pub fn run_benchmark(s: &BenchSettings, data: &TrainData) -> Result<BenchOutput> {
    if s.repeats == 0 {
        return Err(Error::InvalidDataset("repeats must be at least 1".into()));
    }
    let jobs: Vec<(Option<f64>, usize)> = match s.flags.task {
        TaskChoice::Ssl => {
            if s.labeled_fracs.is_empty() {
                return Err(Error::InvalidDataset("no labeled fraction given".into()));
            }
            s.labeled_fracs
                .iter()
                .flat_map(|&lf| (0..s.repeats).map(move |r| (Some(lf), r)))
                .collect()
        }
        _ => (0..s.repeats).map(|r| (None, r)).collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::InvalidDataset(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<(Vec<RunRecord>, f64)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(lf, r)| {
                let t0 = Instant::now();
                let recs = match (s.flags.task, data, lf) {
                    (TaskChoice::Ssl, TrainData::Rows(d), Some(lf)) => ssl_job(s, d, lf, r),
                    (TaskChoice::Clustering, TrainData::Rows(d), _) => clustering_job(s, d, r),
                    (TaskChoice::Mil, TrainData::Bags(b), _) => mil_job(s, b, r),
                    _ => Err(Error::InvalidDataset("data form does not match the task".into())),
                }?;
                Ok((recs, t0.elapsed().as_secs_f64()))
            })
            .collect()
    });
    let mut runs = Vec::new();
    let mut timings = Vec::new();
    for (&(lf, r), out) in jobs.iter().zip(outcomes) {
        let (recs, secs) = out?;
        runs.extend(recs);
        timings.push((lf, r, secs));
    }
    let mut report = EvalReport::new(s.flags.task.into());
    let mut keys: Vec<(Option<f64>, &'static str, &'static str)> = Vec::new();
    for rec in &runs {
        let key = (rec.labeled_frac, rec.method, rec.metric);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (lf, method, metric) in keys {
        let values: Vec<f64> = runs
            .iter()
            .filter(|x| x.labeled_frac == lf && x.method == method && x.metric == metric)
            .map(|x| x.value)
            .collect();
        let name = match lf {
            Some(lf) => format!("{method}_{metric}@{lf}"),
            None => format!("{method}_{metric}"),
        };
        report.push(name, values)?;
    }
    Ok(BenchOutput { report, runs, timings })
}

/// Plot data: `labeled_frac,repeat,method,metric,value`.
pub fn runs_csv(runs: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["labeled_frac", "repeat", "method", "metric", "value"])
        .expect("in-memory write");
    for r in runs {
        w.write_record([
            r.labeled_frac.map(|v| v.to_string()).unwrap_or_default(),
            r.repeat.to_string(),
            r.method.to_string(),
            r.metric.to_string(),
            format!("{:?}", r.value),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn timings_csv(t: &[(Option<f64>, usize, f64)]) -> String {
    let mut out = String::from("labeled_frac,repeat,seconds\n");
    for (lf, r, s) in t {
        out.push_str(&format!(
            "{},{r},{s:.6}\n",
            lf.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    out
}
