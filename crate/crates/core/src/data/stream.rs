use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::synthetic::sparse_gaussian_row;
use super::SparseExample;
use crate::error::{invalid, Result};

/// Largest value of `|d/dz (1 - sigmoid(z))^2|`, attained at `sigmoid(-z) = 2/3`.
pub(crate) const SIGMOID_SQ_LOSS_MAX_SLOPE: f64 = 8.0 / 27.0;

/// Distribution behind a [`StreamSource`].
#[derive(Debug, Clone)]
pub enum StreamKind {
    /// Sparse Gaussian directions rescaled to norm `radius`, labelled by a
    /// planted weight vector with label noise.
    BinaryLogistic {
        planted: Vec<f64>,
        sparsity: f64,
        noise: f64,
        radius: f64,
    },
    /// Diagonal-quadratic components `κ‖x‖²/2 - ⟨c, x⟩` with `c ~ N(mean, std² I)`.
    /// Samples are laid out as `[κ; n | c]` over `2n` features.
    GaussianQuadratic {
        curvature: f64,
        mean: Vec<f64>,
        std: f64,
    },
}

/// Seeded i.i.d. sample source for the online setting.
#[derive(Debug, Clone)]
pub struct StreamSource {
    kind: StreamKind,
    rng: ChaCha8Rng,
    seed: u64,
    sigma_sq: Option<f64>,
    sigma_sq_exact: bool,
    window: VecDeque<SparseExample>,
    window_cap: usize,
    drawn: u64,
}

const DEFAULT_WINDOW: usize = 1024;

impl StreamSource {
    pub fn binary_logistic(
        planted: Vec<f64>,
        sparsity: f64,
        noise: f64,
        radius: f64,
        seed: u64,
    ) -> Result<Self> {
        if planted.is_empty() {
            return Err(invalid("planted", "empty weight vector"));
        }
        if !(sparsity > 0.0 && sparsity <= 1.0) {
            return Err(invalid("sparsity", format!("{sparsity} is outside (0, 1]")));
        }
        if !(0.0..1.0).contains(&noise) {
            return Err(invalid("noise", format!("{noise} is outside [0, 1)")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", "must be positive"));
        }
        // E‖∇φ_ζ - E∇φ‖² <= E‖∇φ_ζ‖² <= (max |φ'|)² radius²
        let bound = (SIGMOID_SQ_LOSS_MAX_SLOPE * radius).powi(2);
        Ok(Self::with_kind(
            StreamKind::BinaryLogistic {
                planted,
                sparsity,
                noise,
                radius,
            },
            seed,
            Some(bound),
            false,
        ))
    }

    pub fn gaussian_quadratic(curvature: f64, mean: Vec<f64>, std: f64, seed: u64) -> Result<Self> {
        if mean.is_empty() {
            return Err(invalid("mean", "empty mean vector"));
        }
        if !(curvature > 0.0) {
            return Err(invalid("curvature", "must be positive"));
        }
        if !(std >= 0.0) {
            return Err(invalid("std", "must be nonnegative"));
        }
        let sigma_sq = mean.len() as f64 * std * std;
        Ok(Self::with_kind(
            StreamKind::GaussianQuadratic {
                curvature,
                mean,
                std,
            },
            seed,
            Some(sigma_sq),
            true,
        ))
    }

    fn with_kind(kind: StreamKind, seed: u64, sigma_sq: Option<f64>, exact: bool) -> Self {
        Self {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            sigma_sq,
            sigma_sq_exact: exact,
            window: VecDeque::new(),
            window_cap: DEFAULT_WINDOW,
            drawn: 0,
        }
    }

    pub fn kind(&self) -> &StreamKind {
        &self.kind
    }

    /// Dimension of the decision variable the samples act on.
    pub fn decision_dim(&self) -> usize {
        match &self.kind {
            StreamKind::BinaryLogistic { planted, .. } => planted.len(),
            StreamKind::GaussianQuadratic { mean, .. } => mean.len(),
        }
    }

    /// Variance constant of the stream: exact for the Gaussian quadratic
    /// family, an analytic upper bound for the logistic family.
    pub fn true_sigma_sq(&self) -> Option<f64> {
        self.sigma_sq
    }

    pub fn sigma_sq_is_exact(&self) -> bool {
        self.sigma_sq_exact
    }

    pub fn draws(&self) -> u64 {
        self.drawn
    }

    /// Restart the stream from a new seed, clearing the window.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.seed = seed;
        self.window.clear();
        self.drawn = 0;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_window(&mut self, cap: usize) {
        self.window_cap = cap;
        while self.window.len() > cap {
            self.window.pop_front();
        }
    }

    /// The most recent samples (at most the window capacity).
    pub fn window(&self) -> &VecDeque<SparseExample> {
        &self.window
    }

    pub fn sample(&mut self) -> SparseExample {
        let example = match &self.kind {
            StreamKind::BinaryLogistic {
                planted,
                sparsity,
                noise,
                radius,
            } => loop {
                let (indices, mut values) = sparse_gaussian_row(&mut self.rng, planted.len(), *sparsity);
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                for v in &mut values {
                    *v *= radius / norm;
                }
                let e = SparseExample::new(indices, values, 0.0);
                let mut label = if e.dot(planted) >= 0.0 { 1.0 } else { -1.0 };
                let flip: f64 = self.rng.random();
                if flip < *noise {
                    label = -label;
                }
                break SparseExample { label, ..e };
            },
            StreamKind::GaussianQuadratic {
                curvature,
                mean,
                std,
            } => {
                let n = mean.len();
                let mut values = vec![*curvature; 2 * n];
                for (j, m) in mean.iter().enumerate() {
                    let z: f64 = self.rng.sample(StandardNormal);
                    values[n + j] = m + std * z;
                }
                SparseExample::new((0..2 * n as u32).collect(), values, 0.0)
            }
        };
        self.drawn += 1;
        if self.window_cap > 0 {
            if self.window.len() == self.window_cap {
                self.window.pop_front();
            }
            self.window.push_back(example.clone());
        }
        example
    }

    /// `k` i.i.d. draws.
    pub fn stream_sample(&mut self, k: usize) -> Vec<SparseExample> {
        (0..k).map(|_| self.sample()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_and_shape() {
        let mut a = StreamSource::binary_logistic(vec![1.0, -1.0, 0.5], 0.7, 0.1, 2.0, 9).unwrap();
        let mut b = a.clone();
        let xa = a.stream_sample(20);
        let xb = b.stream_sample(20);
        assert_eq!(xa, xb);
        for e in &xa {
            assert!((e.norm_sq() - 4.0).abs() < 1e-12);
            assert!(e.label == 1.0 || e.label == -1.0);
        }
        let more = a.stream_sample(20);
        assert_ne!(xa, more);
        a.reseed(9);
        assert_eq!(a.stream_sample(20), xa);
    }

    #[test]
    fn quadratic_layout() {
        let mut s = StreamSource::gaussian_quadratic(2.0, vec![1.0, 2.0], 0.5, 1).unwrap();
        let e = s.sample();
        assert_eq!(e.indices, vec![0, 1, 2, 3]);
        assert_eq!(&e.values[..2], &[2.0, 2.0]);
        assert_eq!(s.true_sigma_sq(), Some(0.5));
        assert!(s.sigma_sq_is_exact());
    }

    #[test]
    fn window_is_bounded() {
        let mut s = StreamSource::gaussian_quadratic(1.0, vec![0.0], 1.0, 1).unwrap();
        s.set_window(8);
        s.stream_sample(30);
        assert_eq!(s.window().len(), 8);
        assert_eq!(s.draws(), 30);
    }
}
