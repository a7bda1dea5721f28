use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, SparseExample};
use crate::error::{invalid, Result};

fn check_common(n: usize, d: usize, sparsity: f64, noise: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(invalid("sparsity", format!("{sparsity} is outside (0, 1]")));
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(invalid("noise", format!("{noise} is outside [0, 1)")));
    }
    Ok(())
}

/// A sparse Gaussian row: each coordinate is kept with probability `sparsity`.
pub(crate) fn sparse_gaussian_row<R: Rng>(rng: &mut R, d: usize, sparsity: f64) -> (Vec<u32>, Vec<f64>) {
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for j in 0..d {
        // always draw both so the stream layout does not depend on `sparsity == 1`
        let keep: f64 = rng.random();
        let v: f64 = rng.sample(StandardNormal);
        if keep < sparsity {
            indices.push(j as u32);
            values.push(v);
        }
    }
    (indices, values)
}

/// Binary classification data with labels `sign(⟨a_i, w*⟩)` flipped with
/// probability `noise`. Returns the dataset and the planted `w*`.
pub fn generate_synthetic_binary(
    n: usize,
    d: usize,
    sparsity: f64,
    noise: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    check_common(n, d, sparsity, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let (indices, values) = sparse_gaussian_row(&mut rng, d, sparsity);
        let example = SparseExample::new(indices, values, 0.0);
        let margin = example.dot(&planted);
        let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
        let flip: f64 = rng.random();
        if flip < noise {
            label = -label;
        }
        examples.push(SparseExample { label, ..example });
    }
    Ok((Dataset::new(examples, d), planted))
}

/// Multi-class data with labels `1 + argmax_k ⟨a_i, W*_k⟩`, replaced by a
/// uniform label with probability `noise`. `W*` is returned class-major
/// (column `k` occupies `k*d .. (k+1)*d`).
pub fn generate_synthetic_multiclass(
    n: usize,
    d: usize,
    classes: usize,
    sparsity: f64,
    noise: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    check_common(n, d, sparsity, noise)?;
    if classes < 2 {
        return Err(invalid("classes", "need at least 2 classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..d * classes).map(|_| rng.sample(StandardNormal)).collect();
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let (indices, values) = sparse_gaussian_row(&mut rng, d, sparsity);
        let example = SparseExample::new(indices, values, 0.0);
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..classes {
            let score = example.dot(&planted[k * d..(k + 1) * d]);
            if score > best_score {
                best_score = score;
                best = k;
            }
        }
        let flip: f64 = rng.random();
        let uniform = rng.random_range(0..classes);
        let class = if flip < noise { uniform } else { best };
        examples.push(SparseExample {
            label: (class + 1) as f64,
            ..example
        });
    }
    Ok((Dataset::new(examples, d), planted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_determinism() {
        let a = generate_synthetic_binary(50, 7, 0.4, 0.1, 3).unwrap();
        let b = generate_synthetic_binary(50, 7, 0.4, 0.1, 3).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_binary(50, 7, 0.4, 0.1, 4).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn dense_when_sparsity_one() {
        let (ds, _) = generate_synthetic_binary(20, 6, 1.0, 0.0, 1).unwrap();
        assert!(ds.examples.iter().all(|e| e.indices.len() == 6));
    }

    #[test]
    fn planted_weights_classify_noise_free_data() {
        let (ds, w) = generate_synthetic_binary(500, 10, 0.5, 0.0, 11).unwrap();
        let mut correct = 0usize;
        let mut zero_margin = 0usize;
        for e in &ds.examples {
            let m = e.dot(&w);
            if m == 0.0 {
                zero_margin += 1;
            } else if m.signum() == e.label {
                correct += 1;
            }
        }
        assert_eq!(correct + zero_margin, ds.len());
    }

    #[test]
    fn invalid_ranges() {
        assert!(generate_synthetic_binary(0, 3, 0.5, 0.0, 0).is_err());
        assert!(generate_synthetic_binary(3, 0, 0.5, 0.0, 0).is_err());
        assert!(generate_synthetic_binary(3, 3, 0.0, 0.0, 0).is_err());
        assert!(generate_synthetic_binary(3, 3, 1.5, 0.0, 0).is_err());
        assert!(generate_synthetic_binary(3, 3, 0.5, 1.0, 0).is_err());
        assert!(generate_synthetic_multiclass(3, 3, 1, 0.5, 0.0, 0).is_err());
    }

    #[test]
    fn multiclass_labels_in_range() {
        let (ds, w) = generate_synthetic_multiclass(100, 5, 3, 0.8, 0.0, 2).unwrap();
        assert_eq!(w.len(), 15);
        assert_eq!(ds.multiclass_count().unwrap(), 3);
    }
}
