//! Stochastic estimators of `∇H`.
//!
//! All estimators share the [`GradientEstimator`] interface: `init` at the
//! starting point, then one `step` per new iterate. Minibatches are drawn
//! i.i.d. uniformly with replacement. Randomness comes from the estimator's
//! own seeded substreams (finite sum) or from the stream source (online).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, SparseExample, StreamSource};
use crate::error::{invalid, DcError, Result};
use crate::linalg::axpy;
use crate::problem::DcProgram;

pub(crate) const BERNOULLI_STREAM: u64 = 0;
pub(crate) const INDEX_STREAM: u64 = 1;

pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Where component samples come from.
pub enum SampleSource<'a> {
    FiniteSum(&'a Dataset),
    Online(&'a mut StreamSource),
}

impl SampleSource<'_> {
    pub fn is_online(&self) -> bool {
        matches!(self, SampleSource::Online(_))
    }

    fn finite(&self) -> Result<&Dataset> {
        match self {
            SampleSource::FiniteSum(d) => Ok(d),
            SampleSource::Online(_) => Err(DcError::RequiresFiniteSum),
        }
    }
}

/// How a correction step that touches `b'` indices at two points is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostConvention {
    /// `b'` per correction step.
    #[default]
    Samples,
    /// One unit per component-gradient evaluation (`2b'` per correction).
    Evaluations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Refresh,
    Correction,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Refresh => "refresh",
            Branch::Correction => "correction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    /// Gradients charged under the estimator's cost convention.
    pub used: u64,
    /// Component-gradient evaluations actually performed.
    pub evaluations: u64,
    pub branch: Branch,
}

pub trait GradientEstimator {
    fn init(&mut self, prog: &DcProgram, x0: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome>;
    fn step(&mut self, prog: &DcProgram, x_new: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome>;
    fn estimate(&self) -> &[f64];
}

/// Shifted gradient of one component.
pub(crate) fn sample_grad(prog: &DcProgram, sample: &SparseExample, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    prog.add_raw_grad(sample, x, out);
    if prog.rho_shift() != 0.0 {
        axpy(prog.rho_shift(), x, out);
    }
}

/// `out = Σ_i (∇h_i(x_new) - ∇h_i(x_old))` without the shift.
fn add_difference(prog: &DcProgram, sample: &SparseExample, x_new: &[f64], x_old: &[f64], out: &mut [f64]) {
    prog.add_raw_grad_scaled(sample, x_new, 1.0, out);
    prog.add_raw_grad_scaled(sample, x_old, -1.0, out);
}

fn draw_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|_| rng.random_range(0..n)).collect()
}

fn check_point(prog: &DcProgram, x: &[f64]) -> Result<()> {
    prog.check_dim(x)?;
    if !crate::linalg::all_finite(x) {
        return Err(DcError::NonFinite("iterate"));
    }
    Ok(())
}

/// Mean gradient over a minibatch of size `b`: all components in index order
/// when `b = N` on a finite sum, otherwise `b` i.i.d. draws.
fn batch_mean(
    prog: &DcProgram,
    x: &[f64],
    b: usize,
    rng: &mut ChaCha8Rng,
    source: &mut SampleSource<'_>,
) -> Result<(Vec<f64>, u64)> {
    match source {
        SampleSource::FiniteSum(data) => {
            let n = data.len();
            if b > n {
                return Err(invalid("b", format!("batch {b} exceeds the number of components {n}")));
            }
            if b == n {
                return Ok((prog.grad_h_full(x)?, n as u64));
            }
            let mut sum = vec![0.0; x.len()];
            for i in draw_indices(rng, n, b) {
                prog.add_raw_grad(&data.examples[i], x, &mut sum);
            }
            prog.finish_mean(&mut sum, b, x);
            Ok((sum, b as u64))
        }
        SampleSource::Online(stream) => {
            let mut sum = vec![0.0; x.len()];
            for _ in 0..b {
                let e = stream.sample();
                prog.add_raw_grad(&e, x, &mut sum);
            }
            prog.finish_mean(&mut sum, b, x);
            Ok((sum, b as u64))
        }
    }
}

/// `(1/b') Σ_{i∈I'} (∇h_i(x_new) - ∇h_i(x_old))` including the shift.
fn correction_mean(
    prog: &DcProgram,
    x_new: &[f64],
    x_old: &[f64],
    b_small: usize,
    rng: &mut ChaCha8Rng,
    source: &mut SampleSource<'_>,
) -> Vec<f64> {
    let mut sum = vec![0.0; x_new.len()];
    match source {
        SampleSource::FiniteSum(data) => {
            for i in draw_indices(rng, data.len(), b_small) {
                add_difference(prog, &data.examples[i], x_new, x_old, &mut sum);
            }
        }
        SampleSource::Online(stream) => {
            for _ in 0..b_small {
                let e = stream.sample();
                add_difference(prog, &e, x_new, x_old, &mut sum);
            }
        }
    }
    let inv = 1.0 / b_small as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    let eta = prog.rho_shift();
    if eta != 0.0 {
        for ((s, a), b) in sum.iter_mut().zip(x_new).zip(x_old) {
            *s += eta * (a - b);
        }
    }
    sum
}

fn correction_cost(convention: CostConvention, b_small: usize) -> u64 {
    match convention {
        CostConvention::Samples => b_small as u64,
        CostConvention::Evaluations => 2 * b_small as u64,
    }
}

/// Probabilistic gradient estimator: a fresh size-`b` minibatch with
/// probability `p`, otherwise the previous estimate corrected by a size-`b'`
/// minibatch of gradient differences.
#[derive(Debug, Clone)]
pub struct PageEstimator {
    g: Vec<f64>,
    x_prev: Vec<f64>,
    p: f64,
    b: usize,
    b_small: usize,
    convention: CostConvention,
    bernoulli: ChaCha8Rng,
    index: ChaCha8Rng,
}

impl PageEstimator {
    pub fn new(p: f64, b: usize, b_small: usize, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(invalid("p", format!("{p} not in (0, 1]")));
        }
        if b == 0 || b_small == 0 {
            return Err(invalid("b", "batch sizes must be >= 1"));
        }
        if b_small >= b && !(b == 1 && b_small == 1) {
            return Err(invalid("b_small", format!("{b_small} must be smaller than b = {b}")));
        }
        Ok(Self {
            g: Vec::new(),
            x_prev: Vec::new(),
            p,
            b,
            b_small,
            convention: CostConvention::Samples,
            bernoulli: substream(seed, BERNOULLI_STREAM),
            index: substream(seed, INDEX_STREAM),
        })
    }

    pub fn with_convention(mut self, convention: CostConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn batch_sizes(&self) -> (usize, usize) {
        (self.b, self.b_small)
    }

    pub fn anchor(&self) -> &[f64] {
        &self.x_prev
    }

    /// Overrides the current estimate and anchor point.
    pub fn set_state(&mut self, g: Vec<f64>, x_prev: Vec<f64>) {
        self.g = g;
        self.x_prev = x_prev;
    }

    fn refresh(&mut self, prog: &DcProgram, x: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        let (g, used) = batch_mean(prog, x, self.b, &mut self.index, source)?;
        self.g = g;
        self.x_prev = x.to_vec();
        Ok(StepOutcome {
            used,
            evaluations: used,
            branch: Branch::Refresh,
        })
    }
}

impl GradientEstimator for PageEstimator {
    fn init(&mut self, prog: &DcProgram, x0: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x0)?;
        self.refresh(prog, x0, source)
    }

    fn step(&mut self, prog: &DcProgram, x_new: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x_new)?;
        let coin: f64 = self.bernoulli.random();
        if coin < self.p {
            return self.refresh(prog, x_new, source);
        }
        let delta = correction_mean(prog, x_new, &self.x_prev, self.b_small, &mut self.index, source);
        axpy(1.0, &delta, &mut self.g);
        self.x_prev = x_new.to_vec();
        Ok(StepOutcome {
            used: correction_cost(self.convention, self.b_small),
            evaluations: 2 * self.b_small as u64,
            branch: Branch::Correction,
        })
    }

    fn estimate(&self) -> &[f64] {
        &self.g
    }
}

/// Exact `∇H` every step.
#[derive(Debug, Clone, Default)]
pub struct FullGradient {
    g: Vec<f64>,
}

impl FullGradient {
    pub fn new() -> Self {
        Self::default()
    }
}

impl GradientEstimator for FullGradient {
    fn init(&mut self, prog: &DcProgram, x0: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        self.step(prog, x0, source)
    }

    fn step(&mut self, prog: &DcProgram, x: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x)?;
        let n = source.finite()?.len() as u64;
        self.g = prog.grad_h_full(x)?;
        Ok(StepOutcome {
            used: n,
            evaluations: n,
            branch: Branch::Refresh,
        })
    }

    fn estimate(&self) -> &[f64] {
        &self.g
    }
}

/// Snapshot-based variance reduction: `∇H(x̃) + mean(∇h_i(x) - ∇h_i(x̃))`,
/// with the snapshot refreshed every `epoch` steps.
#[derive(Debug, Clone)]
pub struct SvrgEstimator {
    g: Vec<f64>,
    snapshot: Vec<f64>,
    full_grad: Vec<f64>,
    b_small: usize,
    epoch: usize,
    since_snapshot: usize,
    convention: CostConvention,
    index: ChaCha8Rng,
}

impl SvrgEstimator {
    pub fn new(b_small: usize, epoch: usize, seed: u64) -> Result<Self> {
        if b_small == 0 || epoch == 0 {
            return Err(invalid("b_small", "batch size and epoch length must be >= 1"));
        }
        Ok(Self {
            g: Vec::new(),
            snapshot: Vec::new(),
            full_grad: Vec::new(),
            b_small,
            epoch,
            since_snapshot: 0,
            convention: CostConvention::Samples,
            index: substream(seed, INDEX_STREAM),
        })
    }

    pub fn with_convention(mut self, convention: CostConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn snapshot(&self) -> &[f64] {
        &self.snapshot
    }

    fn take_snapshot(&mut self, prog: &DcProgram, x: &[f64], n: usize) -> Result<StepOutcome> {
        self.full_grad = prog.grad_h_full(x)?;
        self.snapshot = x.to_vec();
        self.g = self.full_grad.clone();
        self.since_snapshot = 0;
        Ok(StepOutcome {
            used: n as u64,
            evaluations: n as u64,
            branch: Branch::Refresh,
        })
    }
}

impl GradientEstimator for SvrgEstimator {
    fn init(&mut self, prog: &DcProgram, x0: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x0)?;
        let n = source.finite()?.len();
        self.take_snapshot(prog, x0, n)
    }

    fn step(&mut self, prog: &DcProgram, x_new: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x_new)?;
        let n = source.finite()?.len();
        self.since_snapshot += 1;
        if self.since_snapshot >= self.epoch {
            return self.take_snapshot(prog, x_new, n);
        }
        let delta = correction_mean(prog, x_new, &self.snapshot, self.b_small, &mut self.index, source);
        self.g.clone_from(&self.full_grad);
        axpy(1.0, &delta, &mut self.g);
        Ok(StepOutcome {
            used: correction_cost(self.convention, self.b_small),
            evaluations: 2 * self.b_small as u64,
            branch: Branch::Correction,
        })
    }

    fn estimate(&self) -> &[f64] {
        &self.g
    }
}

/// Table of the last gradient seen for every component plus its running mean.
#[derive(Debug, Clone)]
pub struct GradientTable {
    dim: usize,
    table: Vec<f64>,
    average: Vec<f64>,
}

impl GradientTable {
    fn fill(prog: &DcProgram, data: &Dataset, x: &[f64]) -> Self {
        let dim = x.len();
        let n = data.len();
        let mut table = vec![0.0; n * dim];
        for (i, e) in data.examples.iter().enumerate() {
            sample_grad(prog, e, x, &mut table[i * dim..(i + 1) * dim]);
        }
        let mut average = vec![0.0; dim];
        for row in table.chunks_exact(dim) {
            axpy(1.0, row, &mut average);
        }
        let inv = 1.0 / n as f64;
        average.iter_mut().for_each(|v| *v *= inv);
        Self { dim, table, average }
    }

    pub fn len(&self) -> usize {
        self.table.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.table[i * self.dim..(i + 1) * self.dim]
    }

    pub fn average(&self) -> &[f64] {
        &self.average
    }

    /// Mean of the stored rows, recomputed from scratch.
    pub fn recomputed_average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.dim];
        for row in self.table.chunks_exact(self.dim) {
            axpy(1.0, row, &mut avg);
        }
        let inv = 1.0 / self.len() as f64;
        avg.iter_mut().for_each(|v| *v *= inv);
        avg
    }

    fn replace(&mut self, i: usize, new_row: &[f64]) {
        let inv = 1.0 / self.len() as f64;
        let row = &mut self.table[i * self.dim..(i + 1) * self.dim];
        for ((slot, avg), &new) in row.iter_mut().zip(self.average.iter_mut()).zip(new_row) {
            *avg += (new - *slot) * inv;
            *slot = new;
        }
    }
}

/// Unbiased table estimator: `mean(∇h_j(x) - table_j) + average(table)`.
#[derive(Debug, Clone)]
pub struct SagaEstimator {
    g: Vec<f64>,
    table: Option<GradientTable>,
    b_small: usize,
    index: ChaCha8Rng,
}

impl SagaEstimator {
    pub fn new(b_small: usize, seed: u64) -> Result<Self> {
        if b_small == 0 {
            return Err(invalid("b_small", "batch size must be >= 1"));
        }
        Ok(Self {
            g: Vec::new(),
            table: None,
            b_small,
            index: substream(seed, INDEX_STREAM),
        })
    }

    pub fn table(&self) -> Option<&GradientTable> {
        self.table.as_ref()
    }
}

fn table_step(
    table: &mut GradientTable,
    prog: &DcProgram,
    data: &Dataset,
    x: &[f64],
    indices: &[usize],
) -> Vec<f64> {
    let dim = x.len();
    let mut fresh = vec![0.0; dim];
    let mut correction = vec![0.0; dim];
    let mut new_rows = Vec::with_capacity(indices.len());
    for &j in indices {
        sample_grad(prog, &data.examples[j], x, &mut fresh);
        for ((c, f), old) in correction.iter_mut().zip(&fresh).zip(table.row(j)) {
            *c += f - old;
        }
        new_rows.push((j, fresh.clone()));
    }
    for (j, row) in new_rows {
        table.replace(j, &row);
    }
    correction
}

impl GradientEstimator for SagaEstimator {
    fn init(&mut self, prog: &DcProgram, x0: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x0)?;
        let data = source.finite()?;
        let table = GradientTable::fill(prog, data, x0);
        self.g = table.average().to_vec();
        self.table = Some(table);
        Ok(StepOutcome {
            used: data.len() as u64,
            evaluations: data.len() as u64,
            branch: Branch::Refresh,
        })
    }

    fn step(&mut self, prog: &DcProgram, x_new: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x_new)?;
        let data = source.finite()?;
        let table = self.table.as_mut().ok_or(invalid("estimator", "step before init"))?;
        let indices = draw_indices(&mut self.index, data.len(), self.b_small);
        let mut g = table.average().to_vec();
        let correction = table_step(table, prog, data, x_new, &indices);
        axpy(1.0 / self.b_small as f64, &correction, &mut g);
        self.g = g;
        Ok(StepOutcome {
            used: self.b_small as u64,
            evaluations: self.b_small as u64,
            branch: Branch::Correction,
        })
    }

    fn estimate(&self) -> &[f64] {
        &self.g
    }
}

/// Biased table estimator: the table average after refreshing the sampled rows.
#[derive(Debug, Clone)]
pub struct SagEstimator {
    inner: SagaEstimator,
}

impl SagEstimator {
    pub fn new(b_small: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            inner: SagaEstimator::new(b_small, seed)?,
        })
    }

    pub fn table(&self) -> Option<&GradientTable> {
        self.inner.table()
    }
}

impl GradientEstimator for SagEstimator {
    fn init(&mut self, prog: &DcProgram, x0: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        self.inner.init(prog, x0, source)
    }

    fn step(&mut self, prog: &DcProgram, x_new: &[f64], source: &mut SampleSource<'_>) -> Result<StepOutcome> {
        check_point(prog, x_new)?;
        let data = source.finite()?;
        let inner = &mut self.inner;
        let table = inner.table.as_mut().ok_or(invalid("estimator", "step before init"))?;
        let indices = draw_indices(&mut inner.index, data.len(), inner.b_small);
        table_step(table, prog, data, x_new, &indices);
        inner.g = table.average().to_vec();
        Ok(StepOutcome {
            used: inner.b_small as u64,
            evaluations: inner.b_small as u64,
            branch: Branch::Correction,
        })
    }

    fn estimate(&self) -> &[f64] {
        &self.inner.g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::diagonal_quadratic_program;

    fn toy(n_comp: usize, dim: usize, seed: u64) -> DcProgram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let diags: Vec<Vec<f64>> = (0..n_comp)
            .map(|_| (0..dim).map(|_| rng.random_range(0.5..2.0)).collect())
            .collect();
        let centers: Vec<Vec<f64>> = (0..n_comp)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        diagonal_quadratic_program(&diags, &centers, 4.0, 0.1)
    }

    fn data(prog: &DcProgram) -> std::sync::Arc<Dataset> {
        prog.dataset().unwrap().clone()
    }

    #[test]
    fn full_batch_init_is_exact() {
        let prog = toy(7, 3, 1);
        let d = data(&prog);
        let x = [0.3, -0.2, 1.0];
        let mut est = PageEstimator::new(0.5, 7, 2, 3).unwrap();
        let out = est.init(&prog, &x, &mut SampleSource::FiniteSum(&d)).unwrap();
        assert_eq!(out.used, 7);
        assert_eq!(est.estimate(), prog.grad_h_full(&x).unwrap().as_slice());
    }

    #[test]
    fn batch_larger_than_n_rejected() {
        let prog = toy(4, 2, 1);
        let d = data(&prog);
        let mut est = PageEstimator::new(0.5, 5, 2, 3).unwrap();
        assert!(est.init(&prog, &[0.0, 0.0], &mut SampleSource::FiniteSum(&d)).is_err());
        assert!(PageEstimator::new(0.5, 4, 4, 0).is_err());
        assert!(PageEstimator::new(0.0, 4, 2, 0).is_err());
    }

    #[test]
    fn correction_at_same_point_keeps_estimate() {
        let prog = toy(10, 2, 5);
        let d = data(&prog);
        let x = [0.5, 0.5];
        let mut est = PageEstimator::new(0.01, 10, 3, 3).unwrap();
        est.init(&prog, &x, &mut SampleSource::FiniteSum(&d)).unwrap();
        let g0 = est.estimate().to_vec();
        for _ in 0..20 {
            let o = est.step(&prog, &x, &mut SampleSource::FiniteSum(&d)).unwrap();
            if o.branch == Branch::Correction {
                assert_eq!(o.used, 3);
                assert_eq!(o.evaluations, 6);
                for (a, b) in est.estimate().iter().zip(&g0) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn p_one_always_refreshes() {
        let prog = toy(6, 2, 9);
        let d = data(&prog);
        let mut est = PageEstimator::new(1.0, 6, 2, 3).unwrap();
        est.init(&prog, &[0.0, 0.0], &mut SampleSource::FiniteSum(&d)).unwrap();
        for k in 0..10 {
            let x = [k as f64 * 0.1, -0.2];
            let o = est.step(&prog, &x, &mut SampleSource::FiniteSum(&d)).unwrap();
            assert_eq!(o.branch, Branch::Refresh);
            assert_eq!(est.estimate(), prog.grad_h_full(&x).unwrap().as_slice());
        }
    }

    #[test]
    fn evaluation_convention_doubles_correction_cost() {
        let prog = toy(9, 2, 9);
        let d = data(&prog);
        let mut est = PageEstimator::new(1e-9, 9, 3, 3)
            .unwrap()
            .with_convention(CostConvention::Evaluations);
        est.init(&prog, &[0.0, 0.0], &mut SampleSource::FiniteSum(&d)).unwrap();
        let o = est.step(&prog, &[0.1, 0.0], &mut SampleSource::FiniteSum(&d)).unwrap();
        assert_eq!((o.used, o.branch), (6, Branch::Correction));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let prog = toy(12, 3, 2);
        let d = data(&prog);
        let run = |seed| {
            let mut est = PageEstimator::new(0.3, 12, 3, seed).unwrap();
            est.init(&prog, &[0.0; 3], &mut SampleSource::FiniteSum(&d)).unwrap();
            let mut out = Vec::new();
            for k in 0..30 {
                let x = [k as f64 * 0.01, 0.2, -0.1];
                est.step(&prog, &x, &mut SampleSource::FiniteSum(&d)).unwrap();
                out.extend_from_slice(est.estimate());
            }
            out
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn svrg_at_snapshot_is_exact_and_refreshes_on_schedule() {
        let prog = toy(8, 2, 4);
        let d = data(&prog);
        let x0 = [0.2, 0.4];
        let mut est = SvrgEstimator::new(2, 3, 1).unwrap();
        let o = est.init(&prog, &x0, &mut SampleSource::FiniteSum(&d)).unwrap();
        assert_eq!(o.used, 8);
        est.step(&prog, &x0, &mut SampleSource::FiniteSum(&d)).unwrap();
        for (a, b) in est.estimate().iter().zip(prog.grad_h_full(&x0).unwrap()) {
            assert!((a - b).abs() < 1e-14);
        }
        let branches: Vec<Branch> = (0..5)
            .map(|_| est.step(&prog, &[0.1, 0.1], &mut SampleSource::FiniteSum(&d)).unwrap().branch)
            .collect();
        assert_eq!(
            branches,
            vec![
                Branch::Correction,
                Branch::Refresh,
                Branch::Correction,
                Branch::Correction,
                Branch::Refresh
            ]
        );
    }

    #[test]
    fn saga_average_tracks_table() {
        let prog = toy(15, 4, 6).apply_rho_shift(0.3).unwrap();
        let d = data(&prog);
        let mut est = SagaEstimator::new(3, 2).unwrap();
        est.init(&prog, &[0.0; 4], &mut SampleSource::FiniteSum(&d)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            est.step(&prog, &x, &mut SampleSource::FiniteSum(&d)).unwrap();
        }
        let t = est.table().unwrap();
        for (a, b) in t.average().iter().zip(t.recomputed_average()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn saga_saturates_at_fixed_point() {
        let prog = toy(5, 2, 8);
        let d = data(&prog);
        let x = [0.7, -0.4];
        let mut est = SagEstimator::new(2, 1).unwrap();
        est.init(&prog, &[0.0, 0.0], &mut SampleSource::FiniteSum(&d)).unwrap();
        for _ in 0..200 {
            est.step(&prog, &x, &mut SampleSource::FiniteSum(&d)).unwrap();
        }
        for (a, b) in est.estimate().iter().zip(prog.grad_h_full(&x).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn table_methods_refuse_streams() {
        let prog = toy(5, 2, 8);
        let mut stream = StreamSource::gaussian_quadratic(1.0, vec![0.0, 0.0], 1.0, 0).unwrap();
        let mut src = SampleSource::Online(&mut stream);
        assert!(matches!(
            SagaEstimator::new(2, 0).unwrap().init(&prog, &[0.0, 0.0], &mut src),
            Err(DcError::RequiresFiniteSum)
        ));
        assert!(matches!(
            SvrgEstimator::new(2, 3, 0).unwrap().init(&prog, &[0.0, 0.0], &mut src),
            Err(DcError::RequiresFiniteSum)
        ));
        let mut page = PageEstimator::new(0.5, 4, 2, 0).unwrap();
        assert!(page.init(&prog, &[0.0, 0.0], &mut src).is_ok());
    }
}
