//! Seeded synthetic data: two isotropic Gaussians and planted-key bags.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wellsvm_core::{BagDataset, Dataset, Label, Result, SparseVector};

/// Mean separation giving Bayes accuracy 0.98 for unit-variance classes.
pub const SEPARATION_98: f64 = 4.107_497_821_263_645;

/// Class means sit at `±separation/2` along the first axis; unit covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoGaussians {
    pub separation: f64,
    pub dim: usize,
}

impl Default for TwoGaussians {
    fn default() -> Self {
        TwoGaussians {
            separation: SEPARATION_98,
            dim: 2,
        }
    }
}

impl TwoGaussians {
    pub fn sample(&self, label: Label, rng: &mut impl Rng) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        x[0] += f64::from(label) * self.separation / 2.0;
        x
    }

    /// `n` rows with exactly `n/2` positives (the extra row is negative), shuffled.
    pub fn dataset(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<Label> = (0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect();
        labels.shuffle(&mut rng);
        let rows = labels
            .iter()
            .map(|&y| SparseVector::from_dense(&self.sample(y, &mut rng)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::labeled(rows, labels, self.dim)
    }
}

/// Bags of `bag_size` instances. Negative bags hold negative-class draws only;
/// each positive bag hides one positive-class draw at a random position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedBags {
    pub gaussians: TwoGaussians,
    pub n_positive: usize,
    pub n_negative: usize,
    pub bag_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBag {
    pub id: String,
    pub instances: Vec<SparseVector>,
    pub label: Label,
    /// Position of the planted instance in a positive bag.
    pub key: Option<usize>,
}

impl Default for PlantedBags {
    fn default() -> Self {
        PlantedBags {
            gaussians: TwoGaussians::default(),
            n_positive: 20,
            n_negative: 20,
            bag_size: 5,
        }
    }
}

impl PlantedBags {
    pub fn bag_dataset(&self, seed: u64) -> Result<BagDataset> {
        let bags = self
            .bags(seed)?
            .into_iter()
            .map(|b| (b.id, b.instances, b.label))
            .collect();
        BagDataset::new(bags, self.gaussians.dim)
    }

    /// Positive and negative bags interleaved in generation order.
    pub fn bags(&self, seed: u64) -> Result<Vec<SyntheticBag>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<Label> = vec![1; self.n_positive];
        labels.resize(self.n_positive + self.n_negative, -1);
        labels.shuffle(&mut rng);
        labels
            .iter()
            .enumerate()
            .map(|(b, &y)| {
                let key = (y == 1).then(|| rng.random_range(0..self.bag_size));
                let instances = (0..self.bag_size)
                    .map(|j| {
                        let class = if key == Some(j) { 1 } else { -1 };
                        SparseVector::from_dense(&self.gaussians.sample(class, &mut rng))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SyntheticBag {
                    id: format!("bag{b}"),
                    instances,
                    label: y,
                    key,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_deterministic() {
        let g = TwoGaussians::default();
        let a = g.dataset(11, 4).unwrap();
        let b = g.dataset(11, 4).unwrap();
        assert_eq!(a, b);
        let y = a.full_labels().unwrap();
        assert_eq!(y.iter().filter(|&&v| v == 1).count(), 5);
    }

    #[test]
    fn separation_gives_bayes_rate() {
        // Φ(s/2) = 0.98
        let z = SEPARATION_98 / 2.0;
        let phi = 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
        assert!((phi - 0.98).abs() < 1e-9);
    }

    fn erf(x: f64) -> f64 {
        // series, adequate for |x| < 3
        let mut sum = 0.0;
        let mut term = x;
        for n in 0..200 {
            sum += term / (2 * n + 1) as f64;
            term *= -x * x / (n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn bags_have_one_key() {
        let bags = PlantedBags::default().bags(1).unwrap();
        assert_eq!(bags.len(), 40);
        assert_eq!(bags.iter().filter(|b| b.label == 1).count(), 20);
        assert!(bags.iter().all(|b| (b.label == 1) == b.key.is_some()));
    }
}
