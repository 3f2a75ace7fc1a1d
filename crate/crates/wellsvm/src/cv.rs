//! Five-fold selection of `C₂` and the Gaussian width for semi-supervised runs.

use wellsvm_core::kernel::WIDTH_MULTIPLIERS;
use wellsvm_core::learner::NoClock;
use wellsvm_core::metrics::accuracy;
use wellsvm_core::{Dataset, Label, Result};

use crate::split::kfold;
use crate::train::{fit, KernelChoice, ModelFlags, TrainData};

pub const FOLDS: usize = 5;
pub const C2_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CvScore {
    pub c2: f64,
    pub width_mult: f64,
    /// Mean held-out accuracy over the folds that could be trained.
    pub accuracy: f64,
}

/// Folds run over the labeled rows; a held-out fold keeps its rows as
/// unlabeled training data. Folds whose remaining labels miss a class are
/// skipped. The first best grid point wins.
pub fn select_ssl(flags: &ModelFlags, d: &Dataset, seed: u64) -> Result<(ModelFlags, Vec<CvScore>)> {
    let labeled = d.labeled_indices();
    let k = FOLDS.min(labeled.len());
    if k < 2 {
        return Ok((flags.clone(), Vec::new()));
    }
    let folds = kfold(labeled.len(), k, seed)?;
    let widths: &[f64] = match flags.kernel {
        KernelChoice::Linear => &[1.0],
        KernelChoice::Gaussian => &WIDTH_MULTIPLIERS,
    };
    let mut scores = Vec::new();
    let mut best: Option<(f64, ModelFlags)> = None;
    for &c2 in &C2_GRID {
        for &w in widths {
            let mut trial = flags.clone();
            trial.c2 = c2;
            trial.width_mult = w;
            let mut accs = Vec::new();
            for fold in &folds {
                let held: Vec<usize> = fold.iter().map(|&f| labeled[f]).collect();
                let keep: Vec<usize> = labeled.iter().copied().filter(|i| !held.contains(i)).collect();
                let train = d.with_labels_only_at(&keep);
                let Ok(fitted) = fit(&trial, &TrainData::Rows(train), &NoClock) else {
                    continue;
                };
                let truth: Vec<Label> = held.iter().map(|&i| d.labels()[i].expect("labeled row")).collect();
                let pred: Vec<Label> = held
                    .iter()
                    .map(|&i| fitted.document.model.predict_label(&d.rows()[i]))
                    .collect();
                accs.push(accuracy(&pred, &truth)?);
            }
            let mean = if accs.is_empty() {
                f64::NEG_INFINITY
            } else {
                accs.iter().sum::<f64>() / accs.len() as f64
            };
            scores.push(CvScore {
                c2,
                width_mult: w,
                accuracy: mean,
            });
            if best.as_ref().is_none_or(|(b, _)| mean > *b) {
                best = Some((mean, trial));
            }
        }
    }
    let (_, chosen) = best.expect("grid is nonempty");
    Ok((chosen, scores))
}
