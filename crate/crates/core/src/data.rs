//! Sparse rows, partially labeled datasets and multi-instance bags.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary class label, always `+1` or `-1`.
pub type Label = i8;

pub(crate) fn check_label(y: Label) -> Result<()> {
    if y == 1 || y == -1 {
        Ok(())
    } else {
        Err(Error::InvalidDataset(format!("label {y} is not +1 or -1")))
    }
}

/// Sparse feature vector with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SparseRepr", into = "SparseRepr")]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SparseRepr {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<SparseRepr> for SparseVector {
    type Error = Error;
    fn try_from(r: SparseRepr) -> Result<Self> {
        SparseVector::new(r.indices, r.values)
    }
}

impl From<SparseVector> for SparseRepr {
    fn from(v: SparseVector) -> Self {
        SparseRepr {
            indices: v.indices,
            values: v.values,
        }
    }
}

impl SparseVector {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::InvalidVector(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidVector(format!(
                    "indices not strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidVector(format!("non-finite value {v}")));
        }
        Ok(SparseVector { indices, values })
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let (indices, values) = pairs.iter().copied().unzip();
        Self::new(indices, values)
    }

    /// Builds a sparse row from a dense slice, dropping exact zeros.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(i);
                values.push(v);
            }
        }
        Self::new(indices, values)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// One past the largest stored index (0 for an empty row).
    pub fn dim_hint(&self) -> usize {
        self.indices.last().map_or(0, |&i| i + 1)
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; n];
        for (i, v) in self.entries() {
            if i < n {
                out[i] = v;
            }
        }
        out
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut s = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                core::cmp::Ordering::Less => a += 1,
                core::cmp::Ordering::Greater => b += 1,
                core::cmp::Ordering::Equal => {
                    s += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        s
    }

    /// `x' w` against a dense vector; indices beyond `w` count as zero.
    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries()
            .filter(|&(i, _)| i < w.len())
            .map(|(i, v)| v * w[i])
            .sum()
    }

    /// `w += scale * x`, growing nothing: indices beyond `w` are ignored.
    pub fn axpy_into(&self, scale: f64, w: &mut [f64]) {
        for (i, v) in self.entries() {
            if i < w.len() {
                w[i] += scale * v;
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Squared Euclidean distance, computed by merging so it is never negative.
    pub fn dist_sq(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut s = 0.0;
        while a < self.indices.len() || b < other.indices.len() {
            let ia = self.indices.get(a).copied().unwrap_or(usize::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(usize::MAX);
            let d = match ia.cmp(&ib) {
                core::cmp::Ordering::Less => {
                    a += 1;
                    self.values[a - 1]
                }
                core::cmp::Ordering::Greater => {
                    b += 1;
                    other.values[b - 1]
                }
                core::cmp::Ordering::Equal => {
                    a += 1;
                    b += 1;
                    self.values[a - 1] - other.values[b - 1]
                }
            };
            s += d * d;
        }
        s
    }

    /// Applies `f(index, value)` to every stored entry, dropping results that are zero.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for (i, v) in self.entries() {
            let nv = f(i, v);
            if nv != 0.0 {
                indices.push(i);
                values.push(nv);
            }
        }
        Self::new(indices, values)
    }
}

/// Rows with optional `±1` labels. Labeled and unlabeled rows may interleave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<SparseVector>,
    labels: Vec<Option<Label>>,
    n_features: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseVector>, labels: Vec<Option<Label>>, n_features: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        for y in labels.iter().flatten() {
            check_label(*y)?;
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.dim_hint() > n_features) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has index {} but n_features is {n_features}",
                r.dim_hint() - 1
            )));
        }
        Ok(Dataset {
            rows,
            labels,
            n_features,
        })
    }

    /// All rows labeled.
    pub fn labeled(rows: Vec<SparseVector>, labels: Vec<Label>, n_features: usize) -> Result<Self> {
        Self::new(rows, labels.into_iter().map(Some).collect(), n_features)
    }

    /// No row labeled.
    pub fn unlabeled(rows: Vec<SparseVector>, n_features: usize) -> Result<Self> {
        let n = rows.len();
        Self::new(rows, alloc::vec![None; n], n_features)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_some()).collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_none()).collect()
    }

    /// Labels of every row, failing if any row is unlabeled.
    pub fn full_labels(&self) -> Result<Vec<Label>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, y)| y.ok_or_else(|| Error::InvalidDataset(format!("row {i} is unlabeled"))))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
        }
    }

    /// Same rows with every label removed.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            rows: self.rows.clone(),
            labels: alloc::vec![None; self.len()],
            n_features: self.n_features,
        }
    }

    /// Same rows; labels kept only at `keep` positions.
    pub fn with_labels_only_at(&self, keep: &[usize]) -> Dataset {
        let mut labels = alloc::vec![None; self.len()];
        for &i in keep {
            labels[i] = self.labels[i];
        }
        Dataset {
            rows: self.rows.clone(),
            labels,
            n_features: self.n_features,
        }
    }

    pub fn into_parts(self) -> (Vec<SparseVector>, Vec<Option<Label>>, usize) {
        (self.rows, self.labels, self.n_features)
    }
}

/// One bag: a contiguous block of instances sharing a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bag {
    pub id: String,
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

impl Bag {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Multi-instance data with all positive bags stored before negative bags.
///
/// Instances are laid out bag by bag, so the first `J_p` instances belong to
/// positive bags. `original_order[k]` is the position bag `k` had in the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagDataset {
    instances: Dataset,
    bags: Vec<Bag>,
    original_order: Vec<usize>,
}

impl BagDataset {
    /// Builds from bags given in input order, each as `(id, instances, label)`.
    /// Positive bags are stably moved to the front.
    pub fn new(bags_in: Vec<(String, Vec<SparseVector>, Label)>, n_features: usize) -> Result<Self> {
        if bags_in.is_empty() {
            return Err(Error::Empty("bag dataset"));
        }
        for (id, inst, y) in &bags_in {
            check_label(*y)?;
            if inst.is_empty() {
                return Err(Error::InvalidDataset(format!("bag `{id}` is empty")));
            }
        }
        let mut order: Vec<usize> = (0..bags_in.len()).collect();
        // stable: positives first, input order within each class
        order.sort_by_key(|&k| if bags_in[k].2 == 1 { 0 } else { 1 });

        let mut slots: Vec<Option<(String, Vec<SparseVector>, Label)>> = bags_in.into_iter().map(Some).collect();
        let mut rows = Vec::new();
        let mut bags = Vec::with_capacity(order.len());
        for &k in &order {
            let (id, inst, label) = slots[k].take().expect("each bag taken once");
            let start = rows.len();
            rows.extend(inst);
            bags.push(Bag {
                id,
                start,
                end: rows.len(),
                label,
            });
        }
        let instances = Dataset::unlabeled(rows, n_features)?;
        Ok(BagDataset {
            instances,
            bags,
            original_order: order,
        })
    }

    pub fn instances(&self) -> &Dataset {
        &self.instances
    }

    pub fn rows(&self) -> &[SparseVector] {
        self.instances.rows()
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn original_order(&self) -> &[usize] {
        &self.original_order
    }

    pub fn n_features(&self) -> usize {
        self.instances.n_features()
    }

    /// Number of positive bags `p`.
    pub fn n_positive(&self) -> usize {
        self.bags.iter().take_while(|b| b.label == 1).count()
    }

    pub fn n_negative(&self) -> usize {
        self.bags.len() - self.n_positive()
    }

    /// `J_p`: number of instances in positive bags.
    pub fn positive_instance_count(&self) -> usize {
        let p = self.n_positive();
        if p == 0 {
            0
        } else {
            self.bags[p - 1].end
        }
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    /// Dual dimension `q = N - J_p + p`: one variable per positive bag plus one
    /// per negative instance.
    pub fn dual_size(&self) -> usize {
        self.n_instances() - self.positive_instance_count() + self.n_positive()
    }

    /// Dual slot (0-based) of instance `j` of negative bag `bag`.
    pub fn negative_slot(&self, bag: usize, j: usize) -> Option<usize> {
        let p = self.n_positive();
        let b = self.bags.get(bag)?;
        if bag < p || j >= b.len() {
            return None;
        }
        Some(p + b.start - self.positive_instance_count() + j)
    }

    /// Instance index occupying a dual slot.
    pub fn slot_instance(&self, slot: usize) -> Option<usize> {
        let p = self.n_positive();
        if slot < p || slot >= self.dual_size() {
            return None;
        }
        Some(slot - p + self.positive_instance_count())
    }

    pub fn positive_ranges(&self) -> Vec<Range<usize>> {
        self.bags[..self.n_positive()].iter().map(Bag::range).collect()
    }

    /// Bag labels in stored (positives-first) order.
    pub fn bag_labels(&self) -> Vec<Label> {
        self.bags.iter().map(|b| b.label).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sv(p: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_pairs(p).unwrap()
    }

    #[test]
    fn rejects_unsorted_and_non_finite() {
        assert!(SparseVector::new(vec![2, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseVector::new(vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseVector::new(vec![0], vec![f64::NAN]).is_err());
        assert!(SparseVector::new(vec![0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn dot_and_distance() {
        let a = sv(&[(0, 1.0), (2, 2.0)]);
        let b = sv(&[(1, 3.0), (2, 4.0)]);
        assert_eq!(a.dot(&b), 8.0);
        assert_eq!(a.dist_sq(&b), 1.0 + 9.0 + 4.0);
        assert_eq!(a.dist_sq(&a), 0.0);
        assert_eq!(a.dot_dense(&[1.0, 1.0]), 1.0);
    }

    #[test]
    fn dataset_validates_labels_and_width() {
        let rows = vec![sv(&[(0, 1.0)]), sv(&[(3, 1.0)])];
        assert!(Dataset::new(rows.clone(), vec![Some(1), Some(2)], 4).is_err());
        assert!(Dataset::new(rows.clone(), vec![Some(1), None], 3).is_err());
        let d = Dataset::new(rows, vec![Some(1), None], 4).unwrap();
        assert_eq!(d.labeled_indices(), vec![0]);
        assert_eq!(d.unlabeled_indices(), vec![1]);
    }

    fn toy_bags() -> BagDataset {
        BagDataset::new(
            vec![
                ("n1".into(), vec![sv(&[(0, 1.0)]), sv(&[(0, 2.0)])], -1),
                ("p1".into(), vec![sv(&[(0, 3.0)])], 1),
                ("n2".into(), vec![sv(&[(0, 4.0)]), sv(&[(0, 5.0)]), sv(&[(0, 6.0)])], -1),
                ("p2".into(), vec![sv(&[(0, 7.0)]), sv(&[(0, 8.0)])], 1),
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn bags_reordered_positive_first() {
        let b = toy_bags();
        let ids: Vec<&str> = b.bags().iter().map(|b| b.id.as_str()).collect();
        assert_eq!(ids, vec!["p1", "p2", "n1", "n2"]);
        assert_eq!(b.original_order(), &[1, 3, 0, 2]);
        assert_eq!(b.n_positive(), 2);
        assert_eq!(b.positive_instance_count(), 3);
        assert_eq!(b.rows()[0].get(0), 3.0);
        assert_eq!(b.rows()[3].get(0), 1.0);
    }

    #[test]
    fn negative_slot_map_is_bijection() {
        let b = toy_bags();
        let p = b.n_positive();
        let q = b.dual_size();
        assert_eq!(q, 8 - 3 + 2);
        let mut seen = vec![false; q];
        for (k, bag) in b.bags().iter().enumerate().skip(p) {
            for j in 0..bag.len() {
                let s = b.negative_slot(k, j).unwrap();
                assert!(s >= p && s < q);
                assert!(!seen[s]);
                seen[s] = true;
                assert_eq!(b.slot_instance(s), Some(bag.start + j));
            }
        }
        assert!(seen[p..].iter().all(|&x| x));
        assert_eq!(b.negative_slot(0, 0), None);
    }

    #[test]
    fn empty_bag_rejected() {
        let r = BagDataset::new(vec![("x".into(), vec![], 1)], 1);
        assert!(r.is_err());
    }
}
