//! Kernel functions, Gram matrices and label-kernel combinations.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Label, SparseVector};
use crate::error::{Error, Result};

/// Pairs are enumerated exactly up to this many rows; above it they are sampled.
pub const EXACT_PAIR_LIMIT: usize = 2000;
pub const SAMPLED_PAIRS: usize = 2_000_000;

/// Width multipliers applied to `sqrt(gamma)` in parameter sweeps.
pub const WIDTH_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `k(x, z) = exp(-||x - z||² / (2 width²))`
    Gaussian {
        width: f64,
    },
}

impl KernelSpec {
    pub fn gaussian(width: f64) -> Result<Self> {
        let k = KernelSpec::Gaussian { width };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { width } if width.is_finite() && width > 0.0 => Ok(()),
            KernelSpec::Gaussian { width } => Err(Error::param(
                "width",
                format!("gaussian width must be finite and positive, got {width}"),
            )),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, KernelSpec::Linear)
    }

    pub fn eval(&self, x: &SparseVector, z: &SparseVector) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(z),
            KernelSpec::Gaussian { width } => libm::exp(-x.dist_sq(z) / (2.0 * width * width)),
        }
    }
}

/// Dense symmetric kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
}

impl GramMatrix {
    pub fn from_row_major(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gram matrix"));
        }
        Ok(GramMatrix { n, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut values = alloc::vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        GramMatrix { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    /// `y = K x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        crate::linalg::symv(&self.values, self.n, x)
    }

    /// `x' K x` over a subset of rows: `Σ_ab w_a w_b K[rows_a, rows_b]`.
    pub fn weighted_quad(&self, rows: &[usize], w: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, &ra) in rows.iter().enumerate() {
            if w[a] == 0.0 {
                continue;
            }
            let row = self.row(ra);
            let inner: f64 = rows.iter().zip(w).map(|(&rb, &wb)| row[rb] * wb).sum();
            s += w[a] * inner;
        }
        s
    }
}

/// Kernel access over a fixed set of instance rows.
///
/// `Gram` reads a precomputed matrix; `Linear` works on the sparse rows
/// directly so no `N × N` matrix is ever formed.
#[derive(Debug, Clone, Copy)]
pub enum InstanceKernel<'a> {
    Gram(&'a GramMatrix),
    Linear {
        rows: &'a [SparseVector],
        n_features: usize,
    },
}

impl<'a> InstanceKernel<'a> {
    pub fn n(&self) -> usize {
        match self {
            InstanceKernel::Gram(k) => k.n(),
            InstanceKernel::Linear { rows, .. } => rows.len(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            InstanceKernel::Gram(k) => k.get(i, j),
            InstanceKernel::Linear { rows, .. } => rows[i].dot(&rows[j]),
        }
    }

    /// `Σ_a w_a φ(x_{rows_a})` as a dense feature vector (linear mode only).
    pub fn combine(&self, rows_idx: &[usize], w: &[f64]) -> Option<Vec<f64>> {
        match self {
            InstanceKernel::Gram(_) => None,
            InstanceKernel::Linear { rows, n_features } => {
                let mut o = alloc::vec![0.0; *n_features];
                for (&r, &wa) in rows_idx.iter().zip(w) {
                    if wa != 0.0 {
                        rows[r].axpy_into(wa, &mut o);
                    }
                }
                Some(o)
            }
        }
    }

    /// `||Σ_a w_a φ(x_{rows_a})||²`.
    pub fn quad(&self, rows_idx: &[usize], w: &[f64]) -> f64 {
        match self {
            InstanceKernel::Gram(k) => k.weighted_quad(rows_idx, w),
            InstanceKernel::Linear { .. } => {
                let o = self.combine(rows_idx, w).expect("linear");
                crate::linalg::dot(&o, &o)
            }
        }
    }

    /// `out_a = Σ_b k(x_{out_a}, x_{in_b}) w_b`.
    pub fn cross_mul(&self, out_rows: &[usize], in_rows: &[usize], w: &[f64]) -> Vec<f64> {
        match self {
            InstanceKernel::Gram(k) => out_rows
                .iter()
                .map(|&ra| {
                    let row = k.row(ra);
                    in_rows.iter().zip(w).map(|(&rb, &wb)| row[rb] * wb).sum()
                })
                .collect(),
            InstanceKernel::Linear { rows, .. } => {
                let o = self.combine(in_rows, w).expect("linear");
                out_rows.iter().map(|&ra| rows[ra].dot_dense(&o)).collect()
            }
        }
    }
}

/// Mean Euclidean distance over unordered pairs of rows.
///
/// Exact up to [`EXACT_PAIR_LIMIT`] rows, otherwise the mean over
/// [`SAMPLED_PAIRS`] uniformly drawn distinct pairs.
pub fn gamma_heuristic(rows: &[SparseVector], seed: u64) -> Result<f64> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "distance heuristic needs at least 2 rows, got {n}"
        )));
    }
    if n <= EXACT_PAIR_LIMIT {
        let mut sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += libm::sqrt(rows[i].dist_sq(&rows[j]));
            }
        }
        Ok(sum / ((n * (n - 1) / 2) as f64))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        for _ in 0..SAMPLED_PAIRS {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            sum += libm::sqrt(rows[i].dist_sq(&rows[j]));
        }
        Ok(sum / SAMPLED_PAIRS as f64)
    }
}

/// Gaussian kernel with width `multiplier * sqrt(gamma)`.
pub fn heuristic_gaussian(rows: &[SparseVector], multiplier: f64, seed: u64) -> Result<KernelSpec> {
    let gamma = gamma_heuristic(rows, seed)?;
    KernelSpec::gaussian(multiplier * libm::sqrt(gamma))
}

pub fn gram(rows: &[SparseVector], kernel: &KernelSpec) -> GramMatrix {
    let n = rows.len();
    let mut values = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&rows[i], &rows[j]);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    GramMatrix { n, values }
}

/// `Σ_t μ_t (K ⊙ ŷ_t ŷ_t')`.
pub fn composite_label_gram(k: &GramMatrix, candidates: &[Vec<Label>], mu: &[f64]) -> Result<GramMatrix> {
    if candidates.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: candidates.len(),
            actual: mu.len(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::Empty("label candidates"));
    }
    let n = k.n();
    if let Some(c) = candidates.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: c.len(),
        });
    }
    let mut values = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for (c, &m) in candidates.iter().zip(mu) {
                s += m * f64::from(c[i] * c[j]);
            }
            values[i * n + j] = k.get(i, j) * s;
        }
    }
    Ok(GramMatrix { n, values })
}

/// Normalized Frobenius alignment `y'Ky / (n ||K||_F)` between `K` and `yy'`.
pub fn kernel_alignment(k: &GramMatrix, y: &[Label]) -> Result<f64> {
    let n = k.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    let fro = k.frobenius_norm();
    if fro == 0.0 {
        return Err(Error::InvalidParameter {
            name: "gram",
            reason: "zero Frobenius norm".into(),
        });
    }
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let yky = crate::linalg::dot(&yf, &k.mul_vec(&yf));
    Ok(yky / (n as f64 * fro))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pt(x: f64) -> SparseVector {
        SparseVector::from_dense(&[x]).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let two = [
            SparseVector::from_dense(&[0.0, 0.0]).unwrap(),
            SparseVector::from_dense(&[3.0, 0.0]).unwrap(),
        ];
        assert_eq!(gamma_heuristic(&two, 0).unwrap(), 3.0);
        let three = [pt(0.0), pt(1.0), pt(2.0)];
        assert!((gamma_heuristic(&three, 0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let dup = [pt(1.0), pt(1.0), pt(1.0)];
        let g = gamma_heuristic(&dup, 0).unwrap();
        assert_eq!(g, 0.0);
        assert!(heuristic_gaussian(&dup, 1.0, 0).is_err());
        assert!(gamma_heuristic(&[pt(1.0)], 0).is_err());
    }

    #[test]
    fn sampled_gamma_close_to_exact() {
        // 2001 points on a line at 0..=2000: exact mean distance (n+1)/3
        let rows: Vec<SparseVector> = (0..=2000).map(|i| pt(i as f64)).collect();
        let exact = 2002.0 / 3.0;
        let est = gamma_heuristic(&rows, 7).unwrap();
        assert!((est - exact).abs() / exact < 0.01, "{est} vs {exact}");
        assert_eq!(est, gamma_heuristic(&rows, 7).unwrap());
    }

    #[test]
    fn gram_examples() {
        let rows = [
            SparseVector::from_dense(&[1.0, 0.0]).unwrap(),
            SparseVector::from_dense(&[0.0, 1.0]).unwrap(),
        ];
        let k = gram(&rows, &KernelSpec::Linear);
        assert_eq!(k.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        let g = gram(&rows, &KernelSpec::gaussian(1.0).unwrap());
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(1, 1), 1.0);
        // ||x1 - x2||² = 2, width 1 → exp(-1)
        assert!((g.get(0, 1) - libm::exp(-1.0)).abs() < 1e-15);
        assert!((g.get(0, 1) - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn invalid_widths() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
        assert!(KernelSpec::gaussian(f64::INFINITY).is_err());
    }

    #[test]
    fn composite_examples() {
        let rows = [pt(1.0), pt(2.0), pt(-1.0)];
        let k = gram(&rows, &KernelSpec::Linear);
        let y = vec![1, -1, 1];
        let single = composite_label_gram(&k, core::slice::from_ref(&y), &[1.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(single.get(i, j), k.get(i, j) * f64::from(y[i] * y[j]));
            }
        }
        let ones = composite_label_gram(&k, &[vec![1, 1, 1]], &[1.0]).unwrap();
        assert_eq!(ones, k);
        let neg: Vec<Label> = y.iter().map(|v| -v).collect();
        let both = composite_label_gram(&k, &[y.clone(), neg], &[0.5, 0.5]).unwrap();
        assert_eq!(both, single);
        assert!(composite_label_gram(&k, &[y], &[0.5, 0.5]).is_err());
        assert!(composite_label_gram(&k, &[vec![1, 1]], &[1.0]).is_err());
    }

    #[test]
    fn alignment_examples() {
        let y: Vec<Label> = vec![1, -1, -1, 1];
        let id = GramMatrix::identity(4);
        assert!((kernel_alignment(&id, &y).unwrap() - 0.5).abs() < 1e-15);
        let yy: Vec<f64> = (0..16).map(|p| f64::from(y[p / 4] * y[p % 4])).collect();
        let k = GramMatrix::from_row_major(4, yy).unwrap();
        assert!((kernel_alignment(&k, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<Label> = y.iter().map(|v| -v).collect();
        assert_eq!(kernel_alignment(&k, &y).unwrap(), kernel_alignment(&k, &neg).unwrap());
        let zero = GramMatrix::from_row_major(2, vec![0.0; 4]).unwrap();
        assert!(kernel_alignment(&zero, &[1, 1]).is_err());
    }
}
