//! Subcommands behind the `wellsvm` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wellsvm_core::learner::TaskKind;
use wellsvm_core::metrics::{accuracy, clustering_accuracy, EvalReport};
use wellsvm_core::{Dataset, Label};

use crate::bench::{run_benchmark, runs_csv, timings_csv, BenchSettings};
use crate::io::{read_bags, read_libsvm, write_bags, write_libsvm, write_text};
use crate::model::ModelDocument;
use crate::report;
use crate::synth::{PlantedBags, TwoGaussians};
use crate::train::{fit, prepare, trace_csv, ModelFlags, TaskChoice, TrainData};
use crate::verify;

/// Exit code for a training run stopped by the iteration cap.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wellsvm", version, about = "Weak-label SVM training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it with its objective trace.
    Train(TrainArgs),
    /// Score rows or bags with a saved model.
    Predict(PredictArgs),
    /// Score a labeled file and write an evaluation report.
    Eval(EvalArgs),
    /// Repeated seeded runs against a baseline.
    Benchmark(BenchmarkArgs),
    /// Brute-force checks on tiny problems.
    Verify(VerifyArgs),
    /// Write a synthetic data file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: ModelFlags,
    /// Row file (LIBSVM style) or, for `--task mil`, a bag file.
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Where to write the trace CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Report CSV; the text table always goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub flags: ModelFlags,
    /// Fully labeled row file or bag file; synthetic two-Gaussian data when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Labeled fractions of the training split (semi-supervised task).
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.03])]
    pub labeled_frac: Vec<f64>,
    /// Pick C2 and the kernel width by five-fold cross-validation.
    #[arg(long)]
    pub cv: bool,
    /// Output directory for report.csv, report.txt, runs.csv and timing.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trained tiny problems; sorting is checked on ten times as many draws.
    #[arg(long, default_value_t = 50)]
    pub repeats: u64,
    /// Optional file for the pass/fail lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub task: TaskChoice,
    /// Rows (ignored for bags).
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of rows keeping their label (semi-supervised task).
    #[arg(long, default_value_t = 1.0)]
    pub labeled_frac: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_rows(path: &Path) -> Result<Dataset> {
    read_libsvm(path).with_context(|| format!("reading {}", path.display()))
}

fn load_data(task: TaskChoice, path: &Path) -> Result<TrainData> {
    Ok(match task {
        TaskChoice::Mil => TrainData::Bags(read_bags(path).with_context(|| format!("reading {}", path.display()))?),
        _ => TrainData::Rows(load_rows(path)?),
    })
}

fn load_model(path: &Path) -> Result<ModelDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ModelDocument::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_text(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Returns 0, or [`EXIT_NOT_CONVERGED`] when the loop hit its cap.
pub fn cmd_train(a: &TrainArgs) -> Result<i32> {
    let data = load_data(a.flags.task, &a.data)?;
    let t0 = Instant::now();
    let clock = move || t0.elapsed().as_secs_f64();
    let fitted = fit(&a.flags, &data, &clock)?;
    write(&a.model, &fitted.document.to_json())?;
    if let Some(out) = &a.out {
        write(out, &trace_csv(&fitted.trained.trace))?;
    }
    if fitted.document.model.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: stopped after {} iterations without meeting the stopping rule",
            fitted.trained.trace.len()
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

pub fn cmd_predict(a: &PredictArgs) -> Result<i32> {
    let doc = load_model(&a.model)?;
    let model = &doc.model;
    let mut out = String::new();
    if model.task == TaskKind::Mil {
        let bags = read_bags(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
        let mut order: Vec<usize> = (0..bags.bags().len()).collect();
        order.sort_by_key(|&i| bags.original_order()[i]);
        out.push_str("bag,score,label,key_instance\n");
        for i in order {
            let bag = &bags.bags()[i];
            let xs = bags.rows()[bag.range()]
                .iter()
                .map(|x| prepare(&doc, x))
                .collect::<wellsvm_core::Result<Vec<_>>>()?;
            let score = model.bag_predict(&xs)?;
            let key = model.key_instance(&xs).expect("bags are nonempty");
            let _ = writeln!(out, "{},{score:?},{},{key}", bag.id, if score >= 0.0 { 1 } else { -1 });
        }
    } else {
        let d = load_rows(&a.data)?;
        out.push_str("row,decision,label\n");
        for (i, x) in d.rows().iter().enumerate() {
            let v = model.predict(&prepare(&doc, x)?);
            let _ = writeln!(out, "{i},{v:?},{}", if v >= 0.0 { 1 } else { -1 });
        }
    }
    match &a.out {
        Some(p) => write(p, &out)?,
        None => print!("{out}"),
    }
    Ok(0)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let doc = load_model(&a.model)?;
    let model = &doc.model;
    let mut report = EvalReport::new(model.task);
    match model.task {
        TaskKind::Mil => {
            let bags = read_bags(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
            let mut pred = Vec::new();
            for bag in bags.bags() {
                let xs = bags.rows()[bag.range()]
                    .iter()
                    .map(|x| prepare(&doc, x))
                    .collect::<wellsvm_core::Result<Vec<_>>>()?;
                pred.push(if model.bag_predict(&xs)? >= 0.0 { 1 } else { -1 });
            }
            report.push("bag_accuracy", vec![accuracy(&pred, &bags.bag_labels())?])?;
        }
        task => {
            let d = load_rows(&a.data)?;
            let truth = d.full_labels().context("evaluation needs every row labeled")?;
            let pred = d
                .rows()
                .iter()
                .map(|x| prepare(&doc, x).map(|x| model.predict_label(&x)))
                .collect::<wellsvm_core::Result<Vec<Label>>>()?;
            if task == TaskKind::Clustering {
                report.push("clustering_accuracy", vec![clustering_accuracy(&pred, &truth)?])?;
            } else {
                report.push("accuracy", vec![accuracy(&pred, &truth)?])?;
            }
        }
    }
    if let Some(p) = &a.out {
        write(p, &report::to_csv(&report))?;
    }
    print!("{}", report::to_text(&report));
    Ok(0)
}

/// Rows used for benchmark runs without a data file.
pub const SYNTH_SSL_ROWS: usize = 266;
pub const SYNTH_CLUSTER_ROWS: usize = 200;

fn synthetic(task: TaskChoice, seed: u64) -> Result<TrainData> {
    let g = TwoGaussians::default();
    Ok(match task {
        TaskChoice::Ssl => TrainData::Rows(g.dataset(SYNTH_SSL_ROWS, seed)?),
        TaskChoice::Clustering => TrainData::Rows(g.dataset(SYNTH_CLUSTER_ROWS, seed)?),
        TaskChoice::Mil => TrainData::Bags(PlantedBags::default().bag_dataset(seed)?),
    })
}

pub fn cmd_benchmark(a: &BenchmarkArgs) -> Result<i32> {
    if a.labeled_frac.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        bail!("--labeled-frac values must lie in (0, 1]");
    }
    let data = match &a.data {
        Some(p) => load_data(a.flags.task, p)?,
        None => synthetic(a.flags.task, a.flags.seed)?,
    };
    let settings = BenchSettings {
        flags: a.flags.clone(),
        repeats: a.repeats,
        labeled_fracs: a.labeled_frac.clone(),
        cv: a.cv,
    };
    let out = run_benchmark(&settings, &data)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let text = report::to_text(&out.report);
    write(&a.out.join("report.csv"), &report::to_csv(&out.report))?;
    write(&a.out.join("report.txt"), &text)?;
    write(&a.out.join("runs.csv"), &runs_csv(&out.runs))?;
    write(&a.out.join("timing.csv"), &timings_csv(&out.timings))?;
    print!("{text}");
    Ok(0)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let results = verify::run_suite(a.repeats * 10, a.repeats, a.seed)?;
    let mut text = String::new();
    for r in &results {
        text.push_str(&r.line());
        text.push('\n');
    }
    if let Some(p) = &a.out {
        write(p, &text)?;
    }
    print!("{text}");
    Ok(if results.iter().all(|r| r.passed) { 0 } else { 1 })
}

pub fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    if !(a.labeled_frac > 0.0 && a.labeled_frac <= 1.0) {
        bail!("--labeled-frac must lie in (0, 1]");
    }
    let text = match synthetic_for(a)? {
        TrainData::Rows(d) => write_libsvm(&d),
        TrainData::Bags(b) => write_bags(&b),
    };
    write(&a.out, &text)?;
    Ok(0)
}

fn synthetic_for(a: &SynthArgs) -> Result<TrainData> {
    let g = TwoGaussians::default();
    Ok(match a.task {
        TaskChoice::Mil => TrainData::Bags(PlantedBags::default().bag_dataset(a.seed)?),
        TaskChoice::Clustering => TrainData::Rows(g.dataset(a.n, a.seed)?.without_labels()),
        TaskChoice::Ssl => {
            let d = g.dataset(a.n, a.seed)?;
            if a.labeled_frac < 1.0 {
                let labels = d.full_labels()?;
                let split = crate::split::SplitSpec {
                    train_frac: 1.0,
                    labeled_frac: a.labeled_frac,
                    seed: a.seed,
                }
                .split(&labels)?;
                TrainData::Rows(d.with_labels_only_at(&split.labeled))
            } else {
                TrainData::Rows(d)
            }
        }
    })
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Parses `args` (program name first) and runs; usage and runtime errors
/// print to standard error and yield exit code 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
