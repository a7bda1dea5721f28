//! Sample containers, the LIBSVM reader/writer, synthetic generators and
//! i.i.d. streaming sources.

mod libsvm;
pub mod manifest;
mod stream;
mod synthetic;

pub use libsvm::{parse_libsvm, parse_libsvm_str, read_libsvm_file, write_libsvm, ParseError};
pub use stream::{StreamKind, StreamSource};
pub use synthetic::{generate_synthetic_binary, generate_synthetic_multiclass};

use crate::error::{invalid, Result};

/// One labeled sparse observation. Indices are 0-based and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub label: f64,
}

impl SparseExample {
    pub fn new(indices: Vec<u32>, values: Vec<f64>, label: f64) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self {
            indices,
            values,
            label,
        }
    }

    pub fn from_dense(dense: &[f64], label: f64) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (j, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(j as u32);
                values.push(v);
            }
        }
        Self {
            indices,
            values,
            label,
        }
    }

    /// `⟨a, x⟩` over the stored entries; entries beyond `x.len()` are ignored.
    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter()
            .filter(|(j, _)| *j < x.len())
            .map(|(j, v)| v * x[j])
            .sum()
    }

    /// `out += alpha * a`
    #[inline]
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (j, v) in self.iter() {
            if j < out.len() {
                out[j] += alpha * v;
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.axpy_into(1.0, &mut out);
        out
    }
}

/// Record of a `{0, 1} -> {-1, +1}` label rewrite, kept so it can be undone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryLabelMap {
    pub negative_from: f64,
    pub positive_from: f64,
}

/// A finite collection of examples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<SparseExample>,
    pub n_features: usize,
    pub label_map: Option<BinaryLabelMap>,
}

impl Dataset {
    pub fn new(examples: Vec<SparseExample>, n_features: usize) -> Self {
        let needed = examples
            .iter()
            .filter_map(|e| e.indices.last().map(|&j| j as usize + 1))
            .max()
            .unwrap_or(0);
        Self {
            examples,
            n_features: n_features.max(needed),
            label_map: None,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Sorted distinct labels.
    pub fn distinct_labels(&self) -> Vec<f64> {
        let mut labels: Vec<f64> = self.examples.iter().map(|e| e.label).collect();
        labels.sort_by(f64::total_cmp);
        labels.dedup();
        labels
    }

    pub fn n_classes(&self) -> usize {
        self.distinct_labels().len()
    }

    pub fn max_sq_norm(&self) -> f64 {
        self.examples
            .iter()
            .map(SparseExample::norm_sq)
            .fold(0.0, f64::max)
    }

    /// Checks that labels are `±1`, rewriting a `{0, 1}` labelling in place.
    /// Returns the applied mapping, if any.
    pub fn ensure_binary_labels(&mut self) -> Result<Option<BinaryLabelMap>> {
        let labels = self.distinct_labels();
        if labels.iter().all(|&l| l == -1.0 || l == 1.0) {
            return Ok(None);
        }
        if labels.iter().all(|&l| l == 0.0 || l == 1.0) {
            let map = BinaryLabelMap {
                negative_from: 0.0,
                positive_from: 1.0,
            };
            for e in &mut self.examples {
                e.label = if e.label == 1.0 { 1.0 } else { -1.0 };
            }
            log::info!("mapped binary labels {{0, 1}} to {{-1, +1}}");
            self.label_map = Some(map);
            return Ok(Some(map));
        }
        Err(invalid(
            "labels",
            format!("binary problems need labels in {{-1, +1}} or {{0, 1}}, found {labels:?}"),
        ))
    }

    /// Undo a previous [`Dataset::ensure_binary_labels`] rewrite.
    pub fn restore_labels(&mut self) {
        if let Some(map) = self.label_map.take() {
            for e in &mut self.examples {
                e.label = if e.label > 0.0 {
                    map.positive_from
                } else {
                    map.negative_from
                };
            }
        }
    }

    /// Validates a `{1..c}` multi-class labelling and returns `c`.
    pub fn multiclass_count(&self) -> Result<usize> {
        let mut c = 0usize;
        for (i, e) in self.examples.iter().enumerate() {
            let l = e.label;
            if l < 1.0 || l.fract() != 0.0 || !l.is_finite() {
                return Err(invalid(
                    "labels",
                    format!("example {i}: multi-class labels must be integers in 1..c, got {l}"),
                ));
            }
            c = c.max(l as usize);
        }
        Ok(c)
    }

    /// Per-feature max-abs scaling. Returns the divisors that were applied.
    pub fn normalize_max_abs(&mut self) -> Vec<f64> {
        let mut scale = vec![0.0f64; self.n_features];
        for e in &self.examples {
            for (j, v) in e.iter() {
                scale[j] = scale[j].max(v.abs());
            }
        }
        for s in &mut scale {
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        for e in &mut self.examples {
            for (j, v) in e.indices.iter().zip(e.values.iter_mut()) {
                *v /= scale[*j as usize];
            }
        }
        scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_one_labels_map_and_restore() {
        let mut ds = Dataset::new(
            vec![
                SparseExample::new(vec![0], vec![1.0], 0.0),
                SparseExample::new(vec![1], vec![1.0], 1.0),
            ],
            0,
        );
        let original = ds.clone();
        let map = ds.ensure_binary_labels().unwrap();
        assert!(map.is_some());
        assert_eq!(ds.examples[0].label, -1.0);
        assert_eq!(ds.examples[1].label, 1.0);
        ds.restore_labels();
        assert_eq!(ds, original);
    }

    #[test]
    fn rejects_three_binary_labels() {
        let mut ds = Dataset::new(
            vec![
                SparseExample::new(vec![], vec![], 0.0),
                SparseExample::new(vec![], vec![], 1.0),
                SparseExample::new(vec![], vec![], 2.0),
            ],
            0,
        );
        assert!(ds.ensure_binary_labels().is_err());
        assert!(ds.multiclass_count().is_err());
    }

    #[test]
    fn normalize_scales_to_unit_max() {
        let mut ds = Dataset::new(
            vec![
                SparseExample::new(vec![0, 1], vec![2.0, -4.0], 1.0),
                SparseExample::new(vec![0], vec![-1.0], -1.0),
            ],
            3,
        );
        let s = ds.normalize_max_abs();
        assert_eq!(s, vec![2.0, 4.0, 1.0]);
        assert_eq!(ds.examples[0].values, vec![1.0, -1.0]);
        assert_eq!(ds.examples[1].values, vec![-0.5]);
    }
}
