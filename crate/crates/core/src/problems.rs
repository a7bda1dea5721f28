//! Ready-made DC programs.
//!
//! The logistic problems minimise `(1/n) Σ φ_i(w) + r(w)` with a smooth
//! nonconvex loss and the exponential regularizer
//! `r(w) = Σ_j λ(1 - exp(-α|w_j|))`, rewritten as
//!
//! ```text
//! G(w)   = L‖w‖²/2
//! h_i(w) = L‖w‖²/2 - φ_i(w)
//! r1(w)  = λα‖w‖₁
//! r2(w)  = λα‖w‖₁ - r(w)
//! ```
//!
//! so every subproblem is a closed-form shrinkage. The multi-class variant
//! uses row norms of `W` in place of `|w_j|`.

use std::sync::Arc;

use crate::data::{Dataset, SparseExample};
use crate::error::{invalid, DcError, Result};
use crate::linalg::{axpy, norm_sq};
use crate::metrics::SubdifferentialModel;
use crate::problem::{Component, Constants, DcProgram};
use crate::subproblem::SubproblemSpec;

/// `(39 + 55√33) / 2304`: smoothness of `z ↦ (1 - sigmoid(z))²` per unit `‖a‖²`.
pub fn sigmoid_loss_smoothness_factor() -> f64 {
    (39.0 + 55.0 * 33f64.sqrt()) / 2304.0
}

/// `1 - 1 / (1 + e^{-z}) = 1 / (1 + e^{z})`
#[inline]
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `φ(z) = (1 - sigmoid(z))²`
#[inline]
pub fn sigmoid_sq_loss(z: f64) -> f64 {
    let s = sigmoid_neg(z);
    s * s
}

/// `φ'(z) = -2 (1 - sigmoid(z))² sigmoid(z)`
#[inline]
pub fn sigmoid_sq_loss_deriv(z: f64) -> f64 {
    let s = sigmoid_neg(z);
    -2.0 * s * s * (1.0 - s)
}

/// `ψ(t) = λαt - λ(1 - e^{-αt})` for `t ≥ 0`.
#[inline]
fn exp_reg_concave_gap(lambda: f64, alpha: f64, t: f64) -> f64 {
    lambda * alpha * t + lambda * (-alpha * t).exp_m1()
}

/// `ψ'(t) = λα(1 - e^{-αt})`
#[inline]
fn exp_reg_concave_gap_deriv(lambda: f64, alpha: f64, t: f64) -> f64 {
    -lambda * alpha * (-alpha * t).exp_m1()
}

/// The exponential regularizer `Σ_j λ(1 - e^{-α|w_j|})`.
pub fn exponential_regularizer(lambda: f64, alpha: f64, w: &[f64]) -> f64 {
    w.iter().map(|v| -lambda * (-alpha * v.abs()).exp_m1()).sum()
}

fn check_reg(lambda: f64, alpha: f64, eta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("{lambda} must be > 0")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("{alpha} must be > 0")));
    }
    if !(eta >= 0.0) {
        return Err(invalid("eta_shift", format!("{eta} must be >= 0")));
    }
    Ok(())
}

/// `h(w; a, b) = L‖w‖²/2 - φ(b⟨a, w⟩)`.
#[derive(Debug, Clone, Copy)]
pub struct BinaryLogisticComponent {
    pub smoothness: f64,
}

impl BinaryLogisticComponent {
    pub fn loss(sample: &SparseExample, w: &[f64]) -> f64 {
        sigmoid_sq_loss(sample.label * sample.dot(w))
    }

    /// `out += scale * ∇φ(b⟨a, w⟩)`
    pub fn add_loss_grad(sample: &SparseExample, w: &[f64], scale: f64, out: &mut [f64]) {
        let z = sample.label * sample.dot(w);
        sample.axpy_into(scale * sigmoid_sq_loss_deriv(z) * sample.label, out);
    }
}

impl Component for BinaryLogisticComponent {
    fn value(&self, sample: &SparseExample, w: &[f64]) -> f64 {
        0.5 * self.smoothness * norm_sq(w) - Self::loss(sample, w)
    }

    fn add_grad(&self, sample: &SparseExample, w: &[f64], scale: f64, out: &mut [f64]) {
        axpy(scale * self.smoothness, w, out);
        Self::add_loss_grad(sample, w, -scale, out);
    }
}

/// Softmax cross-entropy component on a class-major `d × c` weight matrix.
#[derive(Debug, Clone, Copy)]
pub struct MultiClassLogisticComponent {
    pub smoothness: f64,
    pub features: usize,
    pub classes: usize,
}

impl MultiClassLogisticComponent {
    fn scores(&self, sample: &SparseExample, w: &[f64]) -> Vec<f64> {
        let d = self.features;
        (0..self.classes)
            .map(|k| sample.dot(&w[k * d..(k + 1) * d]))
            .collect()
    }

    fn label_index(sample: &SparseExample) -> usize {
        (sample.label as usize).saturating_sub(1)
    }

    /// `log Σ_k exp(⟨a, W_k⟩) - ⟨a, W_b⟩`, evaluated with max subtraction.
    pub fn loss(&self, sample: &SparseExample, w: &[f64]) -> f64 {
        let s = self.scores(sample, w);
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        lse - s[Self::label_index(sample)]
    }

    pub fn add_loss_grad(&self, sample: &SparseExample, w: &[f64], scale: f64, out: &mut [f64]) {
        let s = self.scores(sample, w);
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        let b = Self::label_index(sample);
        let d = self.features;
        for k in 0..self.classes {
            let coeff = exps[k] / total - if k == b { 1.0 } else { 0.0 };
            sample.axpy_into(scale * coeff, &mut out[k * d..(k + 1) * d]);
        }
    }
}

impl Component for MultiClassLogisticComponent {
    fn value(&self, sample: &SparseExample, w: &[f64]) -> f64 {
        0.5 * self.smoothness * norm_sq(w) - self.loss(sample, w)
    }

    fn add_grad(&self, sample: &SparseExample, w: &[f64], scale: f64, out: &mut [f64]) {
        axpy(scale * self.smoothness, w, out);
        self.add_loss_grad(sample, w, -scale, out);
    }
}

/// `h(x; ζ) = Σ_j (d_j x_j²/2 - c_j x_j)` with the sample laid out as
/// `[d_1..d_n | c_1..c_n]` over `2n` feature slots.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalQuadraticComponent {
    pub dim: usize,
}

impl Component for DiagonalQuadraticComponent {
    fn value(&self, sample: &SparseExample, x: &[f64]) -> f64 {
        let n = self.dim;
        sample
            .iter()
            .map(|(j, v)| if j < n { 0.5 * v * x[j] * x[j] } else { -v * x[j - n] })
            .sum()
    }

    fn add_grad(&self, sample: &SparseExample, x: &[f64], scale: f64, out: &mut [f64]) {
        let n = self.dim;
        for (j, v) in sample.iter() {
            if j < n {
                out[j] += scale * v * x[j];
            } else {
                out[j - n] -= scale * v;
            }
        }
    }
}

/// Binary logistic problem description.
#[derive(Debug, Clone)]
pub struct BinaryLogisticSpec {
    /// Training set (finite sum) or evaluation snapshot (online).
    pub dataset: Option<Arc<Dataset>>,
    pub dim: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub eta_shift: f64,
    /// Bound on `max ‖a‖²`; taken from the dataset when absent.
    pub sq_norm_bound: Option<f64>,
}

impl BinaryLogisticSpec {
    pub fn finite(dataset: Arc<Dataset>, lambda: f64, alpha: f64) -> Self {
        Self {
            dim: dataset.n_features,
            dataset: Some(dataset),
            lambda,
            alpha,
            eta_shift: 0.0,
            sq_norm_bound: None,
        }
    }

    /// For streams whose feature vectors satisfy `‖a‖ ≤ radius`.
    pub fn online(dim: usize, radius: f64, lambda: f64, alpha: f64, snapshot: Option<Arc<Dataset>>) -> Self {
        Self {
            dataset: snapshot,
            dim,
            lambda,
            alpha,
            eta_shift: 0.0,
            sq_norm_bound: Some(radius * radius),
        }
    }

    pub fn smoothness(&self) -> Result<f64> {
        let sq = match (self.sq_norm_bound, &self.dataset) {
            (Some(b), _) => b,
            (None, Some(d)) => d.max_sq_norm(),
            (None, None) => return Err(invalid("dataset", "need a dataset or a feature norm bound")),
        };
        let l = sigmoid_loss_smoothness_factor() * sq;
        if !(l > 0.0) {
            return Err(DcError::DegenerateSmoothness);
        }
        Ok(l)
    }
}

/// Default `λ = 1/n` for a training set of size `n`.
pub fn default_lambda(n: usize) -> f64 {
    1.0 / n.max(1) as f64
}

pub const DEFAULT_ALPHA: f64 = 5.0;

fn l1_exp_regularizer_parts(lambda: f64, alpha: f64) -> (crate::subproblem::ValueFn, crate::subproblem::ValueFn, crate::subproblem::GradFn) {
    let weight = lambda * alpha;
    let r1: crate::subproblem::ValueFn = Arc::new(move |w: &[f64]| weight * w.iter().map(|v| v.abs()).sum::<f64>());
    let r2: crate::subproblem::ValueFn = Arc::new(move |w: &[f64]| {
        w.iter().map(|v| exp_reg_concave_gap(lambda, alpha, v.abs())).sum()
    });
    let r2_grad: crate::subproblem::GradFn = Arc::new(move |w: &[f64], out: &mut [f64]| {
        for (o, &v) in out.iter_mut().zip(w) {
            *o = if v == 0.0 {
                0.0
            } else {
                v.signum() * exp_reg_concave_gap_deriv(lambda, alpha, v.abs())
            };
        }
    });
    (r1, r2, r2_grad)
}

fn quadratic_g(q: f64) -> (crate::subproblem::ValueFn, crate::subproblem::GradFn) {
    (
        Arc::new(move |x: &[f64]| 0.5 * q * norm_sq(x)),
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = q * xi;
            }
        }),
    )
}

/// Builds the DC form of the binary problem.
///
/// `L_avg` is set to `2L`: `∇²h_i = L I - ∇²φ_i` has spectrum in `[0, 2L]`.
pub fn build_binary_dc(spec: &BinaryLogisticSpec) -> Result<DcProgram> {
    check_reg(spec.lambda, spec.alpha, spec.eta_shift)?;
    if let Some(d) = &spec.dataset {
        if d.is_empty() && spec.sq_norm_bound.is_none() {
            return Err(invalid("dataset", "empty dataset"));
        }
        if let Some(bad) = d.examples.iter().find(|e| e.label != 1.0 && e.label != -1.0) {
            return Err(invalid("labels", format!("binary labels must be ±1, found {}", bad.label)));
        }
    }
    if spec.dim == 0 {
        return Err(invalid("dim", "problem dimension is zero"));
    }
    let l = spec.smoothness()?;
    let (g_value, g_grad) = quadratic_g(l);
    let (r1, r2, r2_grad) = l1_exp_regularizer_parts(spec.lambda, spec.alpha);
    let weight = spec.lambda * spec.alpha;
    let mut builder = DcProgram::builder(spec.dim)
        .name("binary-logistic")
        .g(g_value, g_grad)
        .component(Arc::new(BinaryLogisticComponent { smoothness: l }))
        .r1(r1)
        .r2(r2, r2_grad)
        .subproblem(SubproblemSpec::QuadraticL1 {
            quad_coeff: l,
            l1_weight: weight,
        })
        .subdifferential(SubdifferentialModel::QuadraticPlusL1 {
            quad_coeff: l,
            l1_weight: weight,
        })
        .constants(Constants {
            rho_g_r1: l,
            rho_h_r2: 0.0,
            l_avg: 2.0 * l,
            l_r2: spec.lambda * spec.alpha * spec.alpha,
            sigma_sq: None,
        });
    if let Some(d) = &spec.dataset {
        builder = builder.components(d.clone());
    }
    builder.build().apply_rho_shift(spec.eta_shift)
}

/// Multi-class problem description. The decision variable is the class-major
/// flattening of `W ∈ R^{d×c}`: column `k` occupies `k*d .. (k+1)*d`.
#[derive(Debug, Clone)]
pub struct MultiClassLogisticSpec {
    pub dataset: Option<Arc<Dataset>>,
    pub features: usize,
    pub classes: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub eta_shift: f64,
    pub sq_norm_bound: Option<f64>,
}

impl MultiClassLogisticSpec {
    pub fn finite(dataset: Arc<Dataset>, lambda: f64, alpha: f64) -> Result<Self> {
        let classes = dataset.multiclass_count()?;
        Ok(Self {
            features: dataset.n_features,
            classes,
            dataset: Some(dataset),
            lambda,
            alpha,
            eta_shift: 0.0,
            sq_norm_bound: None,
        })
    }

    pub fn smoothness(&self) -> Result<f64> {
        let sq = match (self.sq_norm_bound, &self.dataset) {
            (Some(b), _) => b,
            (None, Some(d)) => d.max_sq_norm(),
            (None, None) => return Err(invalid("dataset", "need a dataset or a feature norm bound")),
        };
        let c = self.classes as f64;
        let l = (c - 1.0) / c * sq;
        if !(l > 0.0) {
            return Err(DcError::DegenerateSmoothness);
        }
        Ok(l)
    }
}

pub fn build_multiclass_dc(spec: &MultiClassLogisticSpec) -> Result<DcProgram> {
    check_reg(spec.lambda, spec.alpha, spec.eta_shift)?;
    if spec.classes < 2 {
        return Err(invalid("classes", format!("need at least 2 classes, got {}", spec.classes)));
    }
    if spec.features == 0 {
        return Err(invalid("features", "problem dimension is zero"));
    }
    if let Some(d) = &spec.dataset {
        if d.is_empty() && spec.sq_norm_bound.is_none() {
            return Err(invalid("dataset", "empty dataset"));
        }
        if d.multiclass_count()? > spec.classes {
            return Err(invalid("labels", "label exceeds the class count"));
        }
    }
    let l = spec.smoothness()?;
    let (rows, cols) = (spec.features, spec.classes);
    let (lambda, alpha) = (spec.lambda, spec.alpha);
    let weight = lambda * alpha;
    let (g_value, g_grad) = quadratic_g(l);
    let row_norm = move |w: &[f64], j: usize| (0..cols).map(|k| w[k * rows + j].powi(2)).sum::<f64>().sqrt();
    let r1: crate::subproblem::ValueFn = Arc::new(move |w: &[f64]| weight * (0..rows).map(|j| row_norm(w, j)).sum::<f64>());
    let r2: crate::subproblem::ValueFn = Arc::new(move |w: &[f64]| {
        (0..rows).map(|j| exp_reg_concave_gap(lambda, alpha, row_norm(w, j))).sum()
    });
    let r2_grad: crate::subproblem::GradFn = Arc::new(move |w: &[f64], out: &mut [f64]| {
        for j in 0..rows {
            let t = row_norm(w, j);
            let factor = if t == 0.0 {
                0.0
            } else {
                exp_reg_concave_gap_deriv(lambda, alpha, t) / t
            };
            for k in 0..cols {
                out[k * rows + j] = factor * w[k * rows + j];
            }
        }
    });
    let mut builder = DcProgram::builder(rows * cols)
        .name("multiclass-logistic")
        .g(g_value, g_grad)
        .component(Arc::new(MultiClassLogisticComponent {
            smoothness: l,
            features: rows,
            classes: cols,
        }))
        .r1(r1)
        .r2(r2, r2_grad)
        .subproblem(SubproblemSpec::QuadraticGroupL2 {
            quad_coeff: l,
            group_weight: weight,
            rows,
            cols,
        })
        .subdifferential(SubdifferentialModel::QuadraticPlusGroupL2 {
            quad_coeff: l,
            group_weight: weight,
            rows,
            cols,
        })
        .constants(Constants {
            rho_g_r1: l,
            rho_h_r2: 0.0,
            l_avg: 2.0 * l,
            l_r2: lambda * alpha * alpha,
            sigma_sq: None,
        });
    if let Some(d) = &spec.dataset {
        builder = builder.components(d.clone());
    }
    builder.build().apply_rho_shift(spec.eta_shift)
}

/// `min |x|` over the reals: `G = |x|`, `H = r1 = r2 = 0`.
pub fn abs_value_program() -> DcProgram {
    let data = Arc::new(Dataset::new(vec![SparseExample::new(vec![], vec![], 0.0)], 1));
    DcProgram::builder(1)
        .name("abs-value")
        .g(
            Arc::new(|x: &[f64]| x[0].abs()),
            Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0].signum() * (x[0] != 0.0) as u8 as f64),
        )
        .components(data)
        .subproblem(SubproblemSpec::L1Only { weight: 1.0 })
        .subdifferential(SubdifferentialModel::QuadraticPlusL1 {
            quad_coeff: 0.0,
            l1_weight: 1.0,
        })
        .constants(Constants {
            rho_g_r1: 0.0,
            rho_h_r2: 0.0,
            l_avg: 0.0,
            l_r2: 0.0,
            sigma_sq: None,
        })
        .build()
}

fn diagonal_quadratic_example(diag: &[f64], center: &[f64]) -> SparseExample {
    let n = diag.len();
    let mut values = diag.to_vec();
    values.extend_from_slice(center);
    SparseExample::new((0..2 * n as u32).collect(), values, 0.0)
}

/// Finite sum of diagonal quadratics `h_i(x) = Σ_j d_ij x_j²/2 - c_ij x_j`
/// with `G = q‖x‖²/2`, `r1 = λ‖x‖₁` and `r2 = 0`.
pub fn diagonal_quadratic_program(diags: &[Vec<f64>], centers: &[Vec<f64>], quad_coeff: f64, l1_weight: f64) -> DcProgram {
    let n = diags[0].len();
    let examples: Vec<SparseExample> = diags
        .iter()
        .zip(centers)
        .map(|(d, c)| diagonal_quadratic_example(d, c))
        .collect();
    let count = examples.len() as f64;
    let mut mean_sq = vec![0.0f64; n];
    let mut mean = vec![0.0f64; n];
    for d in diags {
        for j in 0..n {
            mean_sq[j] += d[j] * d[j] / count;
            mean[j] += d[j] / count;
        }
    }
    let l_avg = mean_sq.iter().cloned().fold(0.0, f64::max).sqrt();
    let rho_h = mean.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let (g_value, g_grad) = quadratic_g(quad_coeff);
    DcProgram::builder(n)
        .name("diagonal-quadratic")
        .g(g_value, g_grad)
        .component(Arc::new(DiagonalQuadraticComponent { dim: n }))
        .components(Arc::new(Dataset::new(examples, 2 * n)))
        .r1(Arc::new(move |x: &[f64]| l1_weight * x.iter().map(|v| v.abs()).sum::<f64>()))
        .subproblem(SubproblemSpec::QuadraticL1 {
            quad_coeff,
            l1_weight,
        })
        .subdifferential(SubdifferentialModel::QuadraticPlusL1 {
            quad_coeff,
            l1_weight,
        })
        .constants(Constants {
            rho_g_r1: quad_coeff,
            rho_h_r2: rho_h,
            l_avg,
            l_r2: 0.0,
            sigma_sq: None,
        })
        .build()
}

/// Online counterpart of [`diagonal_quadratic_program`] for a
/// [`crate::data::StreamKind::GaussianQuadratic`] stream with curvature `κ`.
pub fn quadratic_stream_program(dim: usize, curvature: f64, sigma_sq: f64, quad_coeff: f64, l1_weight: f64) -> DcProgram {
    let (g_value, g_grad) = quadratic_g(quad_coeff);
    DcProgram::builder(dim)
        .name("gaussian-quadratic-stream")
        .g(g_value, g_grad)
        .component(Arc::new(DiagonalQuadraticComponent { dim }))
        .r1(Arc::new(move |x: &[f64]| l1_weight * x.iter().map(|v| v.abs()).sum::<f64>()))
        .subproblem(SubproblemSpec::QuadraticL1 {
            quad_coeff,
            l1_weight,
        })
        .subdifferential(SubdifferentialModel::QuadraticPlusL1 {
            quad_coeff,
            l1_weight,
        })
        .constants(Constants {
            rho_g_r1: quad_coeff,
            rho_h_r2: curvature,
            l_avg: curvature,
            l_r2: 0.0,
            sigma_sq: Some(sigma_sq),
        })
        .build()
}
