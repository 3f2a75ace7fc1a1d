//! Accuracy, clustering accuracy, region-of-interest success rates and
//! repeated-trial summaries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::learner::TaskKind;

fn check_pair(pred: &[Label], truth: &[Label]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("label vector"));
    }
    Ok(())
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[Label], truth: &[Label]) -> Result<f64> {
    check_pair(pred, truth)?;
    let agree = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / truth.len() as f64)
}

/// Accuracy up to swapping the two cluster names.
pub fn clustering_accuracy(pred: &[Label], truth: &[Label]) -> Result<f64> {
    let a = accuracy(pred, truth)?;
    let agree = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    let flipped = (truth.len() - agree) as f64 / truth.len() as f64;
    Ok(a.max(flipped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiRates {
    /// successes / relevant images.
    pub rate_relevant: f64,
    /// successes / predicted relevant images.
    pub rate_roi: f64,
    /// `2 · successes / (relevant + predicted)`.
    pub success_rate: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// 0/0 counts as 0.
pub fn roi_success_rates(n_successes: usize, n_relevant: usize, n_predicted_relevant: usize) -> Result<RoiRates> {
    if n_successes > n_relevant.min(n_predicted_relevant) {
        return Err(Error::param(
            "n_successes",
            format!("{n_successes} exceeds min({n_relevant}, {n_predicted_relevant})"),
        ));
    }
    let s = n_successes as f64;
    Ok(RoiRates {
        rate_relevant: ratio(s, n_relevant as f64),
        rate_roi: ratio(s, n_predicted_relevant as f64),
        success_rate: ratio(2.0 * s, (n_relevant + n_predicted_relevant) as f64),
    })
}

/// Mean and sample standard deviation (`n − 1` denominator; zero for one value).
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, libm::sqrt(ss / (n - 1.0))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub runs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub metrics: Vec<MetricSummary>,
}

impl EvalReport {
    pub fn new(task: TaskKind) -> Self {
        EvalReport {
            task,
            metrics: Vec::new(),
        }
    }

    /// Adds a metric from per-run values, each in `[0, 1]`.
    pub fn push(&mut self, name: impl Into<String>, runs: Vec<f64>) -> Result<()> {
        if let Some(v) = runs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("metric", format!("value {v} outside [0, 1]")));
        }
        let (mean, std) = mean_std(&runs)?;
        self.metrics.push(MetricSummary {
            name: name.into(),
            runs,
            mean,
            std,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, -1, 1], &[1, -1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[-1, 1], &[1, -1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 1, 1, -1], &[1, 1, 1, 1]).unwrap(), 0.75);
        assert!(accuracy(&[1], &[1, 1]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn clustering_examples() {
        assert_eq!(clustering_accuracy(&[-1, 1, 1], &[1, -1, -1]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[1, 1, -1, -1], &[1, -1, 1, -1]).unwrap(), 0.5);
    }

    #[test]
    fn roi_examples() {
        let r = roi_success_rates(10, 20, 20).unwrap();
        assert_eq!((r.rate_relevant, r.rate_roi, r.success_rate), (0.5, 0.5, 0.5));
        let r = roi_success_rates(0, 5, 0).unwrap();
        assert_eq!((r.rate_relevant, r.rate_roi, r.success_rate), (0.0, 0.0, 0.0));
        assert!(roi_success_rates(3, 2, 5).is_err());
        assert_eq!(roi_success_rates(0, 0, 0).unwrap().success_rate, 0.0);
    }

    #[test]
    fn summary_stats() {
        assert_eq!(mean_std(&[2.0]).unwrap(), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - 1.290_994_448_735_805_6).abs() < 1e-15);
        let mut r = EvalReport::new(TaskKind::Ssl);
        r.push("accuracy", vec![0.9, 1.0]).unwrap();
        assert!(r.push("bad", vec![1.5]).is_err());
        assert_eq!(r.get("accuracy").unwrap().mean, 0.95);
    }
}
