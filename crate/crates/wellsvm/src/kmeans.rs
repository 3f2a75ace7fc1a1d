//! Seeded two-cluster Euclidean k-means, used as the clustering baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wellsvm_core::{Error, Label, Result, SparseVector};

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// `+1` for cluster 0, `-1` for cluster 1.
    pub labels: Vec<Label>,
    pub inertia: f64,
}

fn sq_dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// One Lloyd run from `k` distinct random rows as initial centres.
pub fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(Error::InvalidDataset(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    let dim = points[0].len();
    let mut centres: Vec<Vec<f64>> = rand::seq::index::sample(rng, n, k)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (i, x) in points.iter().enumerate() {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (c, m) in centres.iter().enumerate() {
                let d = sq_dist(x, m);
                if d < bd {
                    bd = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..k {
            // An emptied cluster keeps its previous centre.
            if counts[c] > 0 {
                centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points.iter().zip(&assign).map(|(x, &a)| sq_dist(x, &centres[a])).sum();
    Ok((assign, inertia))
}

/// Best of `restarts` seeded runs by inertia.
pub fn kmeans2(rows: &[SparseVector], n_features: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    let points: Vec<Vec<f64>> = rows.iter().map(|x| x.to_dense(n_features)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(&points, 2, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (assign, inertia) = best.expect("at least one run");
    Ok(KMeansFit {
        labels: assign.iter().map(|&a| if a == 0 { 1 } else { -1 }).collect(),
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use wellsvm_core::metrics::clustering_accuracy;

    #[test]
    fn separates_far_blobs() {
        let rows: Vec<SparseVector> = [0.0, 0.1, 0.2, 10.0, 10.1, 10.2]
            .iter()
            .map(|&v| SparseVector::from_dense(&[v]).unwrap())
            .collect();
        let fit = kmeans2(&rows, 1, DEFAULT_RESTARTS, 4).unwrap();
        let truth = [1, 1, 1, -1, -1, -1];
        assert_eq!(clustering_accuracy(&fit.labels, &truth).unwrap(), 1.0);
        assert!((fit.inertia - 0.04).abs() < 1e-12);
        assert_eq!(fit, kmeans2(&rows, 1, DEFAULT_RESTARTS, 4).unwrap());
    }
}
