//! Seeded train/test splits, labeled subsets and cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wellsvm_core::{Dataset, Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub labeled_frac: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Positions within `train` whose labels are kept.
    pub labeled: Vec<usize>,
}

fn check_frac(name: &'static str, f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDataset(format!("{name} must lie in (0, 1], got {f}")))
    }
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        check_frac("train fraction", self.train_frac)?;
        check_frac("labeled fraction", self.labeled_frac)
    }

    /// Splits a fully labeled set. Training indices are kept sorted. The
    /// labeled subset is stratified by class, with at least one label for
    /// every class present in the training part.
    pub fn split(&self, labels: &[Label]) -> Result<Split> {
        self.validate()?;
        let n = labels.len();
        if n < 2 {
            return Err(Error::InvalidDataset("need at least two rows to split".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let perm = shuffled(n, &mut rng);
        let n_train = ((self.train_frac * n as f64).round() as usize).clamp(1, n);
        let mut train = perm[..n_train].to_vec();
        let mut test = perm[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();

        // stratified: each class keeps its share of labels, at least one
        let order = shuffled(n_train, &mut rng);
        let mut labeled = Vec::new();
        for class in [1, -1] {
            let members: Vec<usize> = order.iter().copied().filter(|&p| labels[train[p]] == class).collect();
            if members.is_empty() {
                continue;
            }
            let k = ((self.labeled_frac * members.len() as f64).round() as usize).clamp(1, members.len());
            labeled.extend_from_slice(&members[..k]);
        }
        labeled.sort_unstable();
        Ok(Split { train, test, labeled })
    }

    /// The training rows with labels only at `split.labeled`, and the test rows.
    pub fn apply(&self, d: &Dataset) -> Result<(Dataset, Dataset)> {
        let split = self.split(&d.full_labels()?)?;
        let train = d.subset(&split.train).with_labels_only_at(&split.labeled);
        Ok((train, d.subset(&split.test)))
    }
}

/// `k` seeded folds of near-equal size; fold `f` is the test part of round `f`.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidDataset(format!("cannot make {k} folds of {n} rows")));
    }
    let perm = shuffled(n, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in perm.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_reproducible_and_partitions() {
        let labels: Vec<Label> = (0..40).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let spec = SplitSpec {
            train_frac: 0.75,
            labeled_frac: 0.1,
            seed: 9,
        };
        let a = spec.split(&labels).unwrap();
        assert_eq!(a, spec.split(&labels).unwrap());
        assert_eq!(a.train.len(), 30);
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert_eq!(a.labeled.len(), 3);
        let classes: Vec<Label> = a.labeled.iter().map(|&p| labels[a.train[p]]).collect();
        assert!(classes.contains(&1) && classes.contains(&-1));
        assert!(SplitSpec {
            labeled_frac: 0.0,
            ..spec
        }
        .split(&labels)
        .is_err());
    }

    #[test]
    fn folds_cover_once() {
        let f = kfold(11, 5, 3).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2, 2, 2, 2]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert!(kfold(3, 5, 0).is_err());
    }
}
