//! Optimization drivers and default parameter selection.
//!
//! Every method shares one loop: form the estimate `g^t` of `∇H(x^t)`, take
//! `w^t = ∇r2(x^t)`, and solve `x^{t+1} = argmin G + r1 - ⟨g^t + w^t, ·⟩`.
//! With `max_iters = T` the loop performs `T` estimator steps after the
//! initial batch, producing `x^1 .. x^{T+1}`; the returned point `x̂` is
//! uniform over `x^1 .. x^T`.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, StreamSource};
use crate::error::{invalid, DcError, Result};
use crate::estimators::{
    sample_grad, substream, Branch, CostConvention, FullGradient, GradientEstimator, PageEstimator,
    SagEstimator, SagaEstimator, SampleSource, SvrgEstimator,
};
use crate::linalg::{axpy, dist, norm_sq};
use crate::metrics::{concave_linearization, critical_distance, critical_distance_given, gap_function};
use crate::problem::{Constants, DcProgram};

pub(crate) const OUTPUT_STREAM: u64 = 2;
pub const DEFAULT_PILOT_BATCH: usize = 512;
pub const PILOT_INFLATION: f64 = 2.0;
/// Store every iterate for the final uniform draw only below this many scalars.
pub const CHECKPOINT_SCALAR_LIMIT: usize = 10_000_000;

/// `⌈√n⌉` computed exactly.
pub fn ceil_sqrt(n: usize) -> usize {
    let mut s = (n as f64).sqrt().ceil() as usize;
    while s > 0 && (s - 1) * (s - 1) >= n {
        s -= 1;
    }
    while s * s < n {
        s += 1;
    }
    s
}

/// `⌈n^{2/3}⌉` computed exactly.
pub fn ceil_two_thirds(n: usize) -> usize {
    let mut s = (n as f64).powf(2.0 / 3.0).ceil() as usize;
    let n = n as u128;
    while s > 0 && ((s - 1) as u128).pow(3) >= n * n {
        s -= 1;
    }
    while (s as u128).pow(3) < n * n {
        s += 1;
    }
    s
}

/// Ceiling that ignores floating-point excess of a few ulps above an integer.
fn snapped_ceil(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-12 * v.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConstants {
    /// `(L + L_{r2})² + L²`
    pub c: f64,
    /// `ρL / (4(4C + ρL))`
    pub alpha: f64,
    /// `L √((1-p)/(p b'))`
    pub gamma: f64,
}

/// Batch sizes, probability and complexity predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterChoice {
    pub b: usize,
    pub b_small: usize,
    pub p: f64,
    /// Whether `L/ρ ≤ √(p b' / (4(1-p)))` holds for the unshifted constants.
    pub feasible: bool,
    /// Smallest shift `η` with `L/(ρ + 2η)` inside the window (0 if feasible).
    pub suggested_eta: f64,
    /// `ρ + 2·suggested_eta`, used by the predictions.
    pub rho: f64,
    pub predicted_t: Option<f64>,
    pub predicted_budget: Option<f64>,
    pub online: Option<OnlineConstants>,
}

fn check_constants(constants: &Constants, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", format!("{epsilon} must be > 0")));
    }
    if !(constants.l_avg > 0.0) {
        return Err(invalid("l_avg", "average smoothness must be > 0"));
    }
    let rho = constants.rho();
    if !(rho > 0.0) {
        return Err(invalid("rho", "strong convexity is zero; apply a shift first"));
    }
    Ok(rho)
}

/// `(feasible, suggested η)` for the window `b' ≥ 4(1-p)L²/(pρ²)`.
fn feasibility(l: f64, rho: f64, p: f64, b_small: usize) -> (bool, f64) {
    if p >= 1.0 {
        return (true, 0.0);
    }
    let threshold = (p * b_small as f64 / (4.0 * (1.0 - p))).sqrt();
    if l / rho <= threshold {
        (true, 0.0)
    } else {
        (false, ((l / threshold - rho) / 2.0).max(0.0))
    }
}

fn predicted_budget(b: usize, b_small: usize, p: f64, t: f64) -> f64 {
    b as f64 + t * (p * b as f64 + (1.0 - p) * b_small as f64)
}

/// Defaults for a finite sum of `n` components: `b = N`, `b' = ⌈√N⌉`
/// (kept below `N`), `p = 1/⌈√N⌉`.
pub fn finite_sum_parameters(n: usize, constants: &Constants, epsilon: f64, delta0: Option<f64>) -> Result<ParameterChoice> {
    if n == 0 {
        return Err(invalid("n", "no components"));
    }
    let rho = check_constants(constants, epsilon)?;
    let s = ceil_sqrt(n);
    let b = n;
    let b_small = s.min(n.saturating_sub(1)).max(1);
    let p = 1.0 / s as f64;
    let l = constants.l_avg;
    let (feasible, eta) = feasibility(l, rho, p, b_small);
    let rho_eff = rho + 2.0 * eta;
    let predicted_t = delta0.map(|d0| {
        let lr = l + constants.l_r2;
        8.0 * d0 / (epsilon * epsilon * rho_eff) * (lr * lr + (1.0 - p) * l * l / (p * b_small as f64))
    });
    Ok(ParameterChoice {
        b,
        b_small,
        p,
        feasible,
        suggested_eta: eta,
        rho: rho_eff,
        predicted_budget: predicted_t.map(|t| predicted_budget(b, b_small, p, t)),
        predicted_t,
        online: None,
    })
}

/// Defaults for a stream with gradient variance `σ²`:
/// `b = ⌈σ²/(αε²)⌉`, `b' = ⌈√b⌉`, `p = 1/⌈√b⌉`.
pub fn online_parameters(sigma_sq: f64, constants: &Constants, epsilon: f64, delta0: Option<f64>) -> Result<ParameterChoice> {
    if !(sigma_sq >= 0.0 && sigma_sq.is_finite()) {
        return Err(invalid("sigma_sq", format!("{sigma_sq} must be finite and >= 0")));
    }
    let rho = check_constants(constants, epsilon)?;
    let l = constants.l_avg;
    let lr = l + constants.l_r2;
    let c = lr * lr + l * l;
    let alpha = rho * l / (4.0 * (4.0 * c + rho * l));
    let b = (snapped_ceil(sigma_sq / (alpha * epsilon * epsilon)) as usize).max(1);
    let s = ceil_sqrt(b);
    let b_small = if b == 1 { 1 } else { s.min(b - 1) };
    let p = 1.0 / s as f64;
    let gamma = l * ((1.0 - p) / (p * b_small as f64)).sqrt();
    let (feasible, eta) = feasibility(l, rho, p, b_small);
    let rho_eff = rho + 2.0 * eta;
    let predicted_t = delta0.map(|d0| {
        16.0 * c * d0 / (epsilon * epsilon * rho_eff) + 2.0 * c / (p * (2.0 * c + rho_eff * gamma))
    });
    Ok(ParameterChoice {
        b,
        b_small,
        p,
        feasible,
        suggested_eta: eta,
        rho: rho_eff,
        predicted_budget: predicted_t.map(|t| predicted_budget(b, b_small, p, t)),
        predicted_t,
        online: Some(OnlineConstants { c, alpha, gamma }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    DcaPage,
    StandardDca,
    DcaSvrg,
    DcaSaga,
    Sdca,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::DcaPage,
        Method::StandardDca,
        Method::DcaSvrg,
        Method::DcaSaga,
        Method::Sdca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DcaPage => "dca-page",
            Method::StandardDca => "dca",
            Method::DcaSvrg => "dca-svrg",
            Method::DcaSaga => "dca-saga",
            Method::Sdca => "sdca",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSqSource {
    Provided(f64),
    /// Sample variance of component gradients at `x⁰`, inflated by [`PILOT_INFLATION`].
    PilotEstimate { batch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Large batch; default when absent.
    pub b: Option<usize>,
    /// Small (correction) batch; method default when absent.
    pub b_small: Option<usize>,
    pub p: Option<f64>,
    /// Snapshot period for the SVRG baseline; `⌈N/b'⌉` when absent.
    pub epoch: Option<usize>,
    pub eta_shift: f64,
    /// Add the suggested shift when the batch-size window is empty.
    pub auto_eta: bool,
    pub epsilon: f64,
    pub max_iters: usize,
    pub budget_cap: Option<u64>,
    pub seed: u64,
    pub subproblem_tolerance: f64,
    pub sigma_sq_source: SigmaSqSource,
    pub early_stop: bool,
    /// Metric checkpoint period; `⌈√N⌉` (or `⌈√b⌉` online) when absent, 1 for standard DCA.
    pub metric_every: Option<usize>,
    pub record_gap: bool,
    pub cost_convention: CostConvention,
    /// Lower bound on `F` used for `Δ₀ = F(x⁰) - bound`.
    pub f_lower_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            b: None,
            b_small: None,
            p: None,
            epoch: None,
            eta_shift: 0.0,
            auto_eta: false,
            epsilon: 1e-3,
            max_iters: 1000,
            budget_cap: None,
            seed: 0,
            subproblem_tolerance: crate::subproblem::DEFAULT_TOLERANCE,
            sigma_sq_source: SigmaSqSource::PilotEstimate {
                batch: DEFAULT_PILOT_BATCH,
            },
            early_stop: false,
            metric_every: None,
            record_gap: false,
            cost_convention: CostConvention::Samples,
            f_lower_bound: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// Exact `F(x^t)` on a finite sum, a snapshot or window estimate online.
    pub f_value: Option<f64>,
    /// Gradients charged so far under the run's cost convention.
    pub grad_count: u64,
    /// Component-gradient evaluations so far.
    pub grad_evals: u64,
    pub d_value: Option<f64>,
    /// Gap at `x^t` with the exact linearization at `x^{t-1}`.
    pub gap_value: Option<f64>,
    pub step_norm: f64,
    /// Branch of the estimate that produced `x^t`.
    pub branch: Branch,
    pub subproblem_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    Budget,
    Tolerance,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxIters => "max-iters",
            StopReason::Budget => "budget",
            StopReason::Tolerance => "tolerance",
        }
    }
}

/// Parameters a run actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParameters {
    pub b: usize,
    pub b_small: usize,
    pub p: f64,
    pub epoch: Option<usize>,
    pub eta_shift: f64,
    pub metric_every: usize,
    pub sigma_sq: Option<f64>,
    /// Stream draws spent on the σ² pilot (not charged to the budget).
    pub pilot_draws: u64,
    pub choice: Option<ParameterChoice>,
    pub cost_convention: CostConvention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub method: Method,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    /// Index `k` of the returned point `x^k`.
    pub output_index: usize,
    pub output: Vec<f64>,
    pub last: Vec<f64>,
    pub stop: StopReason,
    pub params: RunParameters,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl Trace {
    pub const CSV_HEADER: &'static str = "t,grad_count,grad_evals,F,d,gap,step_norm,branch,residual";

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace has at least one record")
    }

    pub fn final_grad_count(&self) -> u64 {
        self.final_record().grad_count
    }

    /// Lowest recorded `F`.
    pub fn best_f(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.f_value).reduce(f64::min)
    }

    /// CSV with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.grad_count,
                r.grad_evals,
                fmt_opt(r.f_value),
                fmt_opt(r.d_value),
                fmt_opt(r.gap_value),
                r.step_norm,
                r.branch.as_str(),
                r.subproblem_residual
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Plug-in estimate of `σ²`: sample variance of `batch` stream gradients at
/// `x`, times [`PILOT_INFLATION`].
pub fn estimate_sigma_sq(prog: &DcProgram, stream: &mut StreamSource, x: &[f64], batch: usize) -> Result<f64> {
    if batch < 2 {
        return Err(invalid("pilot batch", "needs at least 2 samples"));
    }
    prog.check_dim(x)?;
    let dim = x.len();
    let mut grads = vec![0.0; batch * dim];
    for row in grads.chunks_exact_mut(dim) {
        let e = stream.sample();
        sample_grad(prog, &e, x, row);
    }
    let mut mean = vec![0.0; dim];
    for row in grads.chunks_exact(dim) {
        axpy(1.0 / batch as f64, row, &mut mean);
    }
    let ss: f64 = grads.chunks_exact(dim).map(|row| crate::linalg::dist_sq(row, &mean)).sum();
    Ok(PILOT_INFLATION * ss / (batch - 1) as f64)
}

/// Uniform choice among `x^1 .. x^K` for a `K` unknown in advance.
enum OutputSelector {
    Stored(Vec<Vec<f64>>),
    Reservoir { held: Vec<f64>, index: usize, seen: usize },
}

impl OutputSelector {
    fn new(dim: usize, max_iters: usize) -> Self {
        if dim.saturating_mul(max_iters) <= CHECKPOINT_SCALAR_LIMIT {
            OutputSelector::Stored(Vec::with_capacity(max_iters.min(1 << 16)))
        } else {
            OutputSelector::Reservoir {
                held: Vec::new(),
                index: 0,
                seen: 0,
            }
        }
    }

    fn offer(&mut self, x: &[f64], k: usize, rng: &mut ChaCha8Rng) {
        match self {
            OutputSelector::Stored(v) => v.push(x.to_vec()),
            OutputSelector::Reservoir { held, index, seen } => {
                *seen += 1;
                if rng.random_range(0..*seen) == 0 {
                    *held = x.to_vec();
                    *index = k;
                }
            }
        }
    }

    fn finish(self, rng: &mut ChaCha8Rng) -> (usize, Vec<f64>) {
        match self {
            OutputSelector::Stored(mut v) => {
                let i = rng.random_range(0..v.len());
                (i + 1, v.swap_remove(i))
            }
            OutputSelector::Reservoir { held, index, .. } => (index, held),
        }
    }
}

struct Metrics {
    f: Option<f64>,
    d: Option<f64>,
    gap: Option<f64>,
}

/// `F` and `∇H` averaged over a stream's recent samples.
fn window_estimates(prog: &DcProgram, stream: &StreamSource, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    let window = stream.window();
    if window.is_empty() {
        return None;
    }
    let mut h = 0.0;
    let mut grad = vec![0.0; x.len()];
    for e in window {
        h += prog.value_sample(e, x) - 0.5 * prog.rho_shift() * norm_sq(x);
        prog.add_raw_grad(e, x, &mut grad);
    }
    h /= window.len() as f64;
    prog.finish_mean(&mut grad, window.len(), x);
    let h = h + 0.5 * prog.rho_shift() * norm_sq(x);
    let f = prog.value_g(x) - h + prog.value_r1(x) - prog.value_r2(x);
    Some((f, grad))
}

fn evaluate_metrics(
    prog: &DcProgram,
    source: &SampleSource<'_>,
    x: &[f64],
    prev: Option<&[f64]>,
    want_gap: bool,
) -> Metrics {
    let exact = prog.n_components().is_some();
    if exact {
        let gap = match (want_gap, prev) {
            (true, Some(p)) => concave_linearization(prog, p)
                .and_then(|lin| gap_function(prog, x, &lin))
                .ok(),
            _ => None,
        };
        return Metrics {
            f: prog.evaluate_f(x).ok(),
            d: critical_distance(prog, x).ok(),
            gap,
        };
    }
    match source {
        SampleSource::Online(stream) => match window_estimates(prog, stream, x) {
            Some((f, grad)) => Metrics {
                f: Some(f),
                d: critical_distance_given(prog, x, &grad).ok(),
                gap: None,
            },
            None => Metrics {
                f: None,
                d: None,
                gap: None,
            },
        },
        SampleSource::FiniteSum(_) => Metrics {
            f: None,
            d: None,
            gap: None,
        },
    }
}

fn same_dataset(a: &Dataset, b: Option<&std::sync::Arc<Dataset>>) -> bool {
    match b {
        Some(b) => std::ptr::eq(a, &**b) || a == &**b,
        None => false,
    }
}

/// Runs `method` from `x0`. On a finite sum the source must hold the
/// program's own components.
pub fn run(method: Method, prog: &DcProgram, mut source: SampleSource<'_>, cfg: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    if !(cfg.epsilon > 0.0) {
        return Err(invalid("epsilon", format!("{} must be > 0", cfg.epsilon)));
    }
    if cfg.max_iters == 0 {
        return Err(invalid("max_iters", "must be >= 1"));
    }
    prog.check_dim(x0)?;
    if !crate::linalg::all_finite(x0) {
        return Err(DcError::NonFinite("starting point"));
    }
    let online = source.is_online();
    if online && method != Method::DcaPage {
        return Err(DcError::RequiresFiniteSum);
    }
    let n = match &source {
        SampleSource::FiniteSum(d) => {
            if !same_dataset(d, prog.dataset()) {
                return Err(invalid("source", "finite-sum source differs from the program's components"));
            }
            if d.is_empty() {
                return Err(invalid("source", "no components"));
            }
            d.len()
        }
        SampleSource::Online(_) => 0,
    };

    let mut prog = prog.with_subproblem_tolerance(cfg.subproblem_tolerance);
    let (sigma_sq, pilot_draws) = match (&mut source, cfg.sigma_sq_source) {
        (SampleSource::Online(_), SigmaSqSource::Provided(s)) => (Some(s), 0),
        (SampleSource::Online(stream), SigmaSqSource::PilotEstimate { batch }) => {
            (Some(estimate_sigma_sq(&prog, stream, x0, batch)?), batch as u64)
        }
        (SampleSource::FiniteSum(_), _) => (None, 0),
    };

    let delta0 = evaluate_metrics(&prog, &source, x0, None, false)
        .f
        .map(|f| (f - cfg.f_lower_bound).max(0.0));
    let choose = |prog: &DcProgram| -> Result<ParameterChoice> {
        match sigma_sq {
            Some(s) => online_parameters(s, prog.constants(), cfg.epsilon, delta0),
            None => finite_sum_parameters(n, prog.constants(), cfg.epsilon, delta0),
        }
    };
    let explicit = cfg.b.is_some() && cfg.b_small.is_some() && cfg.p.is_some();
    let mut eta = cfg.eta_shift;
    let mut choice = None;
    if method == Method::DcaPage {
        let shifted = prog.apply_rho_shift(eta)?;
        match choose(&shifted) {
            Ok(c) => {
                if !c.feasible && cfg.auto_eta {
                    eta += c.suggested_eta;
                    choice = choose(&prog.apply_rho_shift(eta)?).ok();
                } else {
                    choice = Some(c);
                }
            }
            Err(e) if !explicit => return Err(e),
            Err(_) => {}
        }
    }
    prog = prog.apply_rho_shift(eta)?;

    let ceil_n_sqrt = ceil_sqrt(n.max(1));
    let (mut estimator, b, b_small, p, epoch): (Box<dyn GradientEstimator>, usize, usize, f64, Option<usize>) =
        match method {
            Method::DcaPage => {
                let c = choice.as_ref();
                let b = cfg.b.or(c.map(|c| c.b)).expect("choice or explicit b");
                let b_small = cfg.b_small.or(c.map(|c| c.b_small)).expect("choice or explicit b'");
                let p = cfg.p.or(c.map(|c| c.p)).expect("choice or explicit p");
                let est = PageEstimator::new(p, b, b_small, cfg.seed)?.with_convention(cfg.cost_convention);
                (Box::new(est), b, b_small, p, None)
            }
            Method::StandardDca => (Box::new(FullGradient::new()), n, n, 1.0, None),
            Method::DcaSvrg => {
                let b_small = cfg.b_small.unwrap_or_else(|| ceil_two_thirds(n)).max(1);
                let epoch = cfg.epoch.unwrap_or(n.div_ceil(b_small)).max(1);
                let est = SvrgEstimator::new(b_small, epoch, cfg.seed)?.with_convention(cfg.cost_convention);
                (Box::new(est), n, b_small, 1.0 / epoch as f64, Some(epoch))
            }
            Method::DcaSaga => {
                let b_small = cfg.b_small.unwrap_or_else(|| ceil_two_thirds(n)).max(1);
                (Box::new(SagaEstimator::new(b_small, cfg.seed)?), n, b_small, 0.0, None)
            }
            Method::Sdca => {
                let b_small = cfg.b_small.unwrap_or(ceil_n_sqrt).max(1);
                (Box::new(SagEstimator::new(b_small, cfg.seed)?), n, b_small, 0.0, None)
            }
        };
    let metric_every = cfg.metric_every.unwrap_or(match method {
        Method::StandardDca => 1,
        _ if online => ceil_sqrt(b),
        _ => ceil_n_sqrt,
    });
    if metric_every == 0 {
        return Err(invalid("metric_every", "must be >= 1"));
    }

    let dim = prog.dim();
    let mut output_rng = substream(cfg.seed, OUTPUT_STREAM);
    let mut selector = OutputSelector::new(dim, cfg.max_iters);
    let mut x = x0.to_vec();
    let mut grad_count = 0u64;
    let mut grad_evals = 0u64;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;
    let mut w = vec![0.0; dim];

    let mut outcome = estimator.init(&prog, &x, &mut source)?;
    if let Some(cap) = cfg.budget_cap {
        if outcome.used > cap {
            return Err(DcError::BudgetExhausted {
                budget: cap,
                needed: outcome.used,
            });
        }
    }
    let m0 = evaluate_metrics(&prog, &source, &x, None, false);
    records.push(IterationRecord {
        t: 0,
        f_value: m0.f,
        grad_count: 0,
        grad_evals: 0,
        d_value: m0.d,
        gap_value: None,
        step_norm: 0.0,
        branch: Branch::Refresh,
        subproblem_residual: 0.0,
    });

    for t in 0..=cfg.max_iters {
        if t > 0 {
            outcome = estimator.step(&prog, &x, &mut source)?;
        }
        grad_count += outcome.used;
        grad_evals += outcome.evaluations;

        prog.subgrad_r2(&x, &mut w);
        let mut c = estimator.estimate().to_vec();
        axpy(1.0, &w, &mut c);
        let sol = prog.solve_subproblem(&c)?;
        if !crate::linalg::all_finite(&sol.x) {
            return Err(DcError::NonFinite("iterate"));
        }
        let k = t + 1;
        if k <= cfg.max_iters {
            selector.offer(&sol.x, k, &mut output_rng);
        }
        let step_norm = dist(&sol.x, &x);
        let prev = std::mem::replace(&mut x, sol.x);

        let budget_hit = cfg.budget_cap.is_some_and(|cap| grad_count >= cap);
        let last = k == cfg.max_iters + 1 || budget_hit;
        let m = if k % metric_every == 0 || last {
            evaluate_metrics(&prog, &source, &x, Some(&prev), cfg.record_gap)
        } else {
            Metrics {
                f: None,
                d: None,
                gap: None,
            }
        };
        let converged = cfg.early_stop && m.d.is_some_and(|d| d <= cfg.epsilon);
        records.push(IterationRecord {
            t: k,
            f_value: m.f,
            grad_count,
            grad_evals,
            d_value: m.d,
            gap_value: m.gap,
            step_norm,
            branch: outcome.branch,
            subproblem_residual: sol.residual,
        });
        if converged {
            stop = StopReason::Tolerance;
            break;
        }
        if budget_hit {
            stop = StopReason::Budget;
            break;
        }
    }

    if let OutputSelector::Stored(v) = &selector {
        if v.is_empty() {
            selector.offer(&x, 1, &mut output_rng);
        }
    }
    let (output_index, output) = selector.finish(&mut output_rng);
    Ok(Trace {
        method,
        seed: cfg.seed,
        records,
        output_index,
        output,
        last: x,
        stop,
        params: RunParameters {
            b,
            b_small,
            p,
            epoch,
            eta_shift: eta,
            metric_every,
            sigma_sq,
            pilot_draws,
            choice,
            cost_convention: cfg.cost_convention,
        },
    })
}

pub fn run_dca_page(prog: &DcProgram, source: SampleSource<'_>, cfg: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    run(Method::DcaPage, prog, source, cfg, x0)
}

/// Deterministic DCA with the exact linearization `∇H + ∇r2`.
pub fn run_standard_dca(prog: &DcProgram, cfg: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    let data = prog.dataset().ok_or(DcError::RequiresFiniteSum)?.clone();
    run(Method::StandardDca, prog, SampleSource::FiniteSum(&data), cfg, x0)
}

pub fn run_dca_svrg(prog: &DcProgram, source: SampleSource<'_>, cfg: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    run(Method::DcaSvrg, prog, source, cfg, x0)
}

pub fn run_dca_saga(prog: &DcProgram, source: SampleSource<'_>, cfg: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    run(Method::DcaSaga, prog, source, cfg, x0)
}

pub fn run_sdca(prog: &DcProgram, source: SampleSource<'_>, cfg: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    run(Method::Sdca, prog, source, cfg, x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::diagonal_quadratic_program;

    fn consts(l: f64, l_r2: f64, rho: f64) -> Constants {
        Constants {
            rho_g_r1: rho,
            rho_h_r2: 0.0,
            l_avg: l,
            l_r2,
            sigma_sq: None,
        }
    }

    #[test]
    fn integer_roots() {
        assert_eq!(ceil_sqrt(10_000), 100);
        assert_eq!(ceil_sqrt(10_001), 101);
        assert_eq!(ceil_sqrt(1), 1);
        assert_eq!(ceil_two_thirds(1000), 100);
        assert_eq!(ceil_two_thirds(1001), 101);
        assert_eq!(ceil_two_thirds(8), 4);
    }

    #[test]
    fn finite_defaults() {
        let c = finite_sum_parameters(10_000, &consts(0.5, 0.0, 1.0), 0.1, None).unwrap();
        assert_eq!((c.b, c.b_small, c.p), (10_000, 100, 0.01));
        assert!(c.feasible);
        assert!(!finite_sum_parameters(10_000, &consts(1.0, 0.0, 1.0), 0.1, None).unwrap().feasible);
        assert_eq!(c.suggested_eta, 0.0);
    }

    #[test]
    fn infeasible_ratio_suggests_shift() {
        let c = finite_sum_parameters(100, &consts(10.0, 0.0, 1.0), 0.1, Some(1.0)).unwrap();
        assert!(!c.feasible);
        let threshold = (0.1f64 * 10.0 / (4.0 * 0.9)).sqrt();
        assert!(c.suggested_eta > 0.0);
        assert!((10.0 / (1.0 + 2.0 * c.suggested_eta) - threshold).abs() < 1e-12);
        assert!(c.predicted_t.unwrap() > 0.0);
    }

    #[test]
    fn zero_rho_rejected() {
        assert!(finite_sum_parameters(100, &consts(1.0, 0.0, 0.0), 0.1, None).is_err());
    }

    #[test]
    fn online_example() {
        let c = online_parameters(1.0, &consts(1.0, 0.0, 1.0), 0.1, Some(1.0)).unwrap();
        let oc = c.online.unwrap();
        assert_eq!(oc.c, 2.0);
        assert!((oc.alpha - 1.0 / 36.0).abs() < 1e-15);
        assert_eq!((c.b, c.b_small), (3600, 60));
        assert!((c.p - 1.0 / 60.0).abs() < 1e-15);
    }

    fn toy() -> DcProgram {
        let diags = vec![vec![1.0, 0.5], vec![0.5, 1.5], vec![1.0, 1.0], vec![2.0, 0.2]];
        let centers = vec![vec![0.3, -0.1], vec![1.0, 0.5], vec![-0.4, 0.2], vec![0.1, 0.1]];
        diagonal_quadratic_program(&diags, &centers, 3.0, 0.05)
    }

    #[test]
    fn budget_and_record_shape() {
        let prog = toy();
        let data = prog.dataset().unwrap().clone();
        let cfg = SolverConfig {
            max_iters: 20,
            seed: 3,
            ..Default::default()
        };
        let tr = run_dca_page(&prog, SampleSource::FiniteSum(&data), &cfg, &[0.0, 0.0]).unwrap();
        assert_eq!(tr.records.len(), 22);
        assert!((1..=20).contains(&tr.output_index));
        assert_eq!(tr.records[1].grad_count, 4);
        let mut expected = 4;
        for r in &tr.records[2..] {
            expected += match r.branch {
                Branch::Refresh => 4,
                Branch::Correction => tr.params.b_small as u64,
            };
            assert_eq!(r.grad_count, expected);
        }
        let again = run_dca_page(&prog, SampleSource::FiniteSum(&data), &cfg, &[0.0, 0.0]).unwrap();
        assert_eq!(tr.to_csv(), again.to_csv());
        assert_eq!(tr.output, again.output);
    }

    #[test]
    fn budget_cap_stops_and_rejects_tiny_budgets() {
        let prog = toy();
        let data = prog.dataset().unwrap().clone();
        let cfg = SolverConfig {
            max_iters: 1000,
            budget_cap: Some(30),
            ..Default::default()
        };
        let tr = run_standard_dca(&prog, &cfg, &[0.0, 0.0]).unwrap();
        assert_eq!(tr.stop, StopReason::Budget);
        assert!(tr.final_grad_count() >= 30);
        let tiny = SolverConfig {
            budget_cap: Some(3),
            ..cfg
        };
        assert!(matches!(
            run_dca_saga(&prog, SampleSource::FiniteSum(&data), &tiny, &[0.0, 0.0]),
            Err(DcError::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn early_stop_reports_small_distance() {
        let prog = toy();
        let cfg = SolverConfig {
            max_iters: 500,
            early_stop: true,
            epsilon: 1e-6,
            ..Default::default()
        };
        let tr = run_standard_dca(&prog, &cfg, &[1.0, 1.0]).unwrap();
        assert_eq!(tr.stop, StopReason::Tolerance);
        assert!(tr.final_record().d_value.unwrap() <= 1e-6);
    }

    #[test]
    fn reservoir_is_uniform() {
        let mut counts = [0usize; 5];
        for seed in 0..20_000 {
            let mut rng = substream(seed, OUTPUT_STREAM);
            let mut sel = OutputSelector::Reservoir {
                held: Vec::new(),
                index: 0,
                seen: 0,
            };
            for k in 1..=5 {
                sel.offer(&[k as f64], k, &mut rng);
            }
            let (i, x) = sel.finish(&mut rng);
            assert_eq!(x[0], i as f64);
            counts[i - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 - 4000.0).abs() < 250.0, "{counts:?}");
        }
    }

    #[test]
    fn baselines_refuse_streams() {
        let prog = toy();
        let mut stream = StreamSource::gaussian_quadratic(1.0, vec![0.0, 0.0], 1.0, 0).unwrap();
        for m in [Method::DcaSvrg, Method::DcaSaga, Method::Sdca, Method::StandardDca] {
            let r = run(m, &prog, SampleSource::Online(&mut stream), &SolverConfig::default(), &[0.0, 0.0]);
            assert!(matches!(r, Err(DcError::RequiresFiniteSum)));
        }
    }
}
