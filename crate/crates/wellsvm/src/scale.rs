//! Optional per-feature min-max scaling to `[0, 1]`.

use serde::{Deserialize, Serialize};
use wellsvm_core::{Dataset, Result, SparseVector};

/// Fitted on training rows; constant features map to 0.
///
/// Sparse zeros are treated as observed values, so a feature absent from
/// some row has `min <= 0 <= max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[SparseVector], n_features: usize) -> Self {
        let mut min = vec![f64::INFINITY; n_features];
        let mut max = vec![f64::NEG_INFINITY; n_features];
        let mut seen = vec![0usize; n_features];
        for x in rows {
            for (i, v) in x.entries() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
                seen[i] += 1;
            }
        }
        for i in 0..n_features {
            if seen[i] < rows.len() {
                min[i] = min[i].min(0.0);
                max[i] = max[i].max(0.0);
            }
            if seen[i] == 0 {
                min[i] = 0.0;
                max[i] = 0.0;
            }
        }
        MinMaxScaler { min, max }
    }

    /// Features beyond the fitted width, and values outside the fitted range,
    /// are mapped with the same affine rule (no clipping).
    pub fn transform(&self, x: &SparseVector) -> Result<SparseVector> {
        let dense: Vec<f64> = (0..self.min.len().max(x.dim_hint()))
            .map(|i| {
                let v = x.get(i);
                match (self.min.get(i), self.max.get(i)) {
                    (Some(&lo), Some(&hi)) if hi > lo => (v - lo) / (hi - lo),
                    (Some(_), Some(_)) => 0.0,
                    _ => v,
                }
            })
            .collect();
        SparseVector::from_dense(&dense)
    }

    pub fn transform_dataset(&self, d: &Dataset) -> Result<Dataset> {
        let rows = d.rows().iter().map(|x| self.transform(x)).collect::<Result<Vec<_>>>()?;
        let n = rows
            .iter()
            .map(SparseVector::dim_hint)
            .max()
            .unwrap_or(0)
            .max(d.n_features());
        Dataset::new(rows, d.labels().to_vec(), n)
    }
}
