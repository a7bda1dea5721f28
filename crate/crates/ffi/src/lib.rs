//! C interface to the `dcpage` solvers.
//!
//! Objects are opaque heap handles created by `dcp_*_new`-style constructors
//! and released with the matching `dcp_*_free`. Every fallible call returns a
//! [`DcpStatus`]; on failure a description is available from
//! [`dcp_last_error_message`] on the same thread until the next failing call.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use dcpage::algorithms::{self, Method, ParameterChoice, SigmaSqSource, SolverConfig, Trace};
use dcpage::data::{self, Dataset};
use dcpage::estimators::{Branch, CostConvention, SampleSource};
use dcpage::metrics;
use dcpage::problem::{Constants, DcProgram};
use dcpage::problems::{self, BinaryLogisticSpec, MultiClassLogisticSpec};
use dcpage::DcError;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    DimensionMismatch = 5,
    RequiresFiniteSum = 6,
    BudgetExhausted = 7,
    Numerical = 8,
    Unavailable = 9,
    Panic = 10,
}

/// Optimization method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcpMethod {
    Page = 0,
    Dca = 1,
    Svrg = 2,
    Saga = 3,
    Sdca = 4,
}

impl From<DcpMethod> for Method {
    fn from(m: DcpMethod) -> Self {
        match m {
            DcpMethod::Page => Method::DcaPage,
            DcpMethod::Dca => Method::StandardDca,
            DcpMethod::Svrg => Method::DcaSvrg,
            DcpMethod::Saga => Method::DcaSaga,
            DcpMethod::Sdca => Method::Sdca,
        }
    }
}

/// Solver settings. Zero batch sizes, a non-positive `p` and a zero
/// `metric_every` select the defaults; a zero `budget_cap` means no cap.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcpSolverConfig {
    pub b: u64,
    pub b_small: u64,
    pub p: f64,
    pub epoch: u64,
    pub eta_shift: f64,
    pub epsilon: f64,
    pub max_iters: u64,
    pub budget_cap: u64,
    pub seed: u64,
    pub early_stop: bool,
    pub metric_every: u64,
    pub record_gap: bool,
    /// Charge `2b'` per correction step instead of `b'`.
    pub count_evaluations: bool,
}

/// One iteration record; absent metrics are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcpRecord {
    pub t: u64,
    pub grad_count: u64,
    pub grad_evals: u64,
    pub f_value: f64,
    pub d_value: f64,
    pub gap_value: f64,
    pub step_norm: f64,
    /// 0 for a large-batch refresh, 1 for a correction step.
    pub branch: i32,
    pub subproblem_residual: f64,
}

/// Default batch sizes and complexity predictions; absent predictions are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcpParameters {
    pub b: u64,
    pub b_small: u64,
    pub p: f64,
    pub feasible: bool,
    pub suggested_eta: f64,
    pub predicted_t: f64,
    pub predicted_budget: f64,
}

pub struct DcpDataset {
    inner: Dataset,
}

pub struct DcpProblem {
    inner: DcProgram,
}

pub struct DcpTrace {
    inner: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &DcError) -> DcpStatus {
    match e {
        DcError::DimensionMismatch { .. } => DcpStatus::DimensionMismatch,
        DcError::ExactObjectiveUnavailable | DcError::MissingSubdifferentialModel => DcpStatus::Unavailable,
        DcError::InvalidParameter { .. } | DcError::DegenerateSmoothness => DcpStatus::InvalidArgument,
        DcError::RequiresFiniteSum => DcpStatus::RequiresFiniteSum,
        DcError::BudgetExhausted { .. } => DcpStatus::BudgetExhausted,
        DcError::Parse(_) => DcpStatus::Parse,
        DcError::Io(_) => DcpStatus::Io,
        _ => DcpStatus::Numerical,
    }
}

fn fail(e: DcError) -> DcpStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn guard(f: impl FnOnce() -> DcpStatus) -> DcpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            DcpStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("`", stringify!($p), "` is null"));
            return DcpStatus::NullPointer;
        })+
    };
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> DcpStatus {
    *out = Box::into_raw(Box::new(value));
    DcpStatus::Ok
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dcp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dcp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn dcp_solver_config_default() -> DcpSolverConfig {
    let d = SolverConfig::default();
    DcpSolverConfig {
        b: 0,
        b_small: 0,
        p: 0.0,
        epoch: 0,
        eta_shift: d.eta_shift,
        epsilon: d.epsilon,
        max_iters: d.max_iters as u64,
        budget_cap: 0,
        seed: d.seed,
        early_stop: d.early_stop,
        metric_every: 0,
        record_gap: d.record_gap,
        count_evaluations: false,
    }
}

fn nonzero(v: u64) -> Option<usize> {
    (v > 0).then_some(v as usize)
}

impl DcpSolverConfig {
    fn to_solver(self) -> SolverConfig {
        SolverConfig {
            b: nonzero(self.b),
            b_small: nonzero(self.b_small),
            p: (self.p > 0.0).then_some(self.p),
            epoch: nonzero(self.epoch),
            eta_shift: self.eta_shift,
            epsilon: self.epsilon,
            max_iters: self.max_iters as usize,
            budget_cap: (self.budget_cap > 0).then_some(self.budget_cap),
            seed: self.seed,
            early_stop: self.early_stop,
            metric_every: nonzero(self.metric_every),
            record_gap: self.record_gap,
            cost_convention: if self.count_evaluations {
                CostConvention::Evaluations
            } else {
                CostConvention::Samples
            },
            sigma_sq_source: SigmaSqSource::PilotEstimate {
                batch: algorithms::DEFAULT_PILOT_BATCH,
            },
            ..SolverConfig::default()
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, DcpStatus> {
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        DcpStatus::InvalidArgument
    })
}

/// Reads a LIBSVM file.
#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_read_libsvm(path: *const c_char, out: *mut *mut DcpDataset) -> DcpStatus {
    non_null!(path, out);
    guard(|| {
        let path = match c_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match data::read_libsvm_file(path) {
            Ok(inner) => store(out, DcpDataset { inner }),
            Err(e) => fail(e),
        }
    })
}

/// Parses LIBSVM text.
#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_parse_libsvm(text: *const c_char, out: *mut *mut DcpDataset) -> DcpStatus {
    non_null!(text, out);
    guard(|| {
        let text = match c_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match data::parse_libsvm_str(text) {
            Ok(inner) => store(out, DcpDataset { inner }),
            Err(e) => fail(e.into()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_synthetic_binary(
    n: usize,
    d: usize,
    sparsity: f64,
    noise: f64,
    seed: u64,
    out: *mut *mut DcpDataset,
) -> DcpStatus {
    non_null!(out);
    guard(|| match data::generate_synthetic_binary(n, d, sparsity, noise, seed) {
        Ok((inner, _)) => store(out, DcpDataset { inner }),
        Err(e) => fail(e),
    })
}

#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_synthetic_multiclass(
    n: usize,
    d: usize,
    classes: usize,
    sparsity: f64,
    noise: f64,
    seed: u64,
    out: *mut *mut DcpDataset,
) -> DcpStatus {
    non_null!(out);
    guard(
        || match data::generate_synthetic_multiclass(n, d, classes, sparsity, noise, seed) {
            Ok((inner, _)) => store(out, DcpDataset { inner }),
            Err(e) => fail(e),
        },
    )
}

/// Number of examples (0 for a null handle).
#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_len(ds: *const DcpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_features(ds: *const DcpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_features)
}

/// Scales every feature to unit maximum magnitude.
#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_normalize(ds: *mut DcpDataset) -> DcpStatus {
    non_null!(ds);
    (*ds).inner.normalize_max_abs();
    DcpStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn dcp_dataset_free(ds: *mut DcpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Binary problem over a copy of `ds`; labels {0,1} are mapped to {-1,+1}.
/// A non-positive `lambda` selects `1/n`.
#[no_mangle]
pub unsafe extern "C" fn dcp_problem_binary(
    ds: *const DcpDataset,
    lambda: f64,
    alpha: f64,
    eta_shift: f64,
    out: *mut *mut DcpProblem,
) -> DcpStatus {
    non_null!(ds, out);
    guard(|| {
        let mut data = (*ds).inner.clone();
        if let Err(e) = data.ensure_binary_labels() {
            return fail(e);
        }
        let lambda = if lambda > 0.0 { lambda } else { problems::default_lambda(data.len()) };
        let mut spec = BinaryLogisticSpec::finite(Arc::new(data), lambda, alpha);
        spec.eta_shift = eta_shift;
        match problems::build_binary_dc(&spec) {
            Ok(inner) => store(out, DcpProblem { inner }),
            Err(e) => fail(e),
        }
    })
}

/// Multi-class problem over a copy of `ds` with labels `1..=c`.
#[no_mangle]
pub unsafe extern "C" fn dcp_problem_multiclass(
    ds: *const DcpDataset,
    lambda: f64,
    alpha: f64,
    eta_shift: f64,
    out: *mut *mut DcpProblem,
) -> DcpStatus {
    non_null!(ds, out);
    guard(|| {
        let data = (*ds).inner.clone();
        let lambda = if lambda > 0.0 { lambda } else { problems::default_lambda(data.len()) };
        let built = MultiClassLogisticSpec::finite(Arc::new(data), lambda, alpha).and_then(|mut spec| {
            spec.eta_shift = eta_shift;
            problems::build_multiclass_dc(&spec)
        });
        match built {
            Ok(inner) => store(out, DcpProblem { inner }),
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dcp_problem_dim(prob: *const DcpProblem) -> usize {
    prob.as_ref().map_or(0, |p| p.inner.dim())
}

unsafe fn slice<'a>(x: *const f64, len: usize) -> &'a [f64] {
    if len == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(x, len)
    }
}

/// `F(x)`.
#[no_mangle]
pub unsafe extern "C" fn dcp_problem_objective(prob: *const DcpProblem, x: *const f64, len: usize, out: *mut f64) -> DcpStatus {
    non_null!(prob, x, out);
    guard(|| match (*prob).inner.evaluate_f(slice(x, len)) {
        Ok(v) => {
            *out = v;
            DcpStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Distance from `∇H(x) + ∇r2(x)` to `∂(G + r1)(x)`.
#[no_mangle]
pub unsafe extern "C" fn dcp_problem_critical_distance(
    prob: *const DcpProblem,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> DcpStatus {
    non_null!(prob, x, out);
    guard(|| match metrics::critical_distance(&(*prob).inner, slice(x, len)) {
        Ok(v) => {
            *out = v;
            DcpStatus::Ok
        }
        Err(e) => fail(e),
    })
}

#[no_mangle]
pub unsafe extern "C" fn dcp_problem_free(prob: *mut DcpProblem) {
    if !prob.is_null() {
        drop(Box::from_raw(prob));
    }
}

/// Runs `method` from `x0` (zeros when `x0` is null).
#[no_mangle]
pub unsafe extern "C" fn dcp_solve(
    prob: *const DcpProblem,
    method: DcpMethod,
    config: *const DcpSolverConfig,
    x0: *const f64,
    len: usize,
    out: *mut *mut DcpTrace,
) -> DcpStatus {
    non_null!(prob, config, out);
    guard(|| {
        let prog = &(*prob).inner;
        let start = if x0.is_null() {
            vec![0.0; prog.dim()]
        } else {
            slice(x0, len).to_vec()
        };
        let Some(data) = prog.dataset().cloned() else {
            return fail(DcError::RequiresFiniteSum);
        };
        let cfg = (*config).to_solver();
        match algorithms::run(method.into(), prog, SampleSource::FiniteSum(&data), &cfg, &start) {
            Ok(inner) => store(out, DcpTrace { inner }),
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dcp_trace_len(trace: *const DcpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.records.len())
}

#[no_mangle]
pub unsafe extern "C" fn dcp_trace_record(trace: *const DcpTrace, index: usize, out: *mut DcpRecord) -> DcpStatus {
    non_null!(trace, out);
    let trace = &*trace;
    let Some(r) = trace.inner.records.get(index) else {
        set_error(format!("record {index} out of range"));
        return DcpStatus::InvalidArgument;
    };
    *out = DcpRecord {
        t: r.t as u64,
        grad_count: r.grad_count,
        grad_evals: r.grad_evals,
        f_value: r.f_value.unwrap_or(f64::NAN),
        d_value: r.d_value.unwrap_or(f64::NAN),
        gap_value: r.gap_value.unwrap_or(f64::NAN),
        step_norm: r.step_norm,
        branch: match r.branch {
            Branch::Refresh => 0,
            Branch::Correction => 1,
        },
        subproblem_residual: r.subproblem_residual,
    };
    DcpStatus::Ok
}

/// Copies the returned point into `buf` (which must hold `dim` values) and
/// its iterate index into `index` (may be null).
#[no_mangle]
pub unsafe extern "C" fn dcp_trace_output(trace: *const DcpTrace, buf: *mut f64, len: usize, index: *mut u64) -> DcpStatus {
    non_null!(trace, buf);
    let t = &(*trace).inner;
    if len != t.output.len() {
        return fail(DcError::DimensionMismatch {
            expected: t.output.len(),
            got: len,
        });
    }
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&t.output);
    if !index.is_null() {
        *index = t.output_index as u64;
    }
    DcpStatus::Ok
}

/// Trace as CSV text. Free the result with [`dcp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dcp_trace_csv(trace: *const DcpTrace) -> *mut c_char {
    match trace.as_ref() {
        Some(t) => CString::new(t.inner.to_csv()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

#[no_mangle]
pub unsafe extern "C" fn dcp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn dcp_trace_free(trace: *mut DcpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

fn write_choice(c: ParameterChoice, out: &mut DcpParameters) {
    *out = DcpParameters {
        b: c.b as u64,
        b_small: c.b_small as u64,
        p: c.p,
        feasible: c.feasible,
        suggested_eta: c.suggested_eta,
        predicted_t: c.predicted_t.unwrap_or(f64::NAN),
        predicted_budget: c.predicted_budget.unwrap_or(f64::NAN),
    };
}

fn constants(l_avg: f64, rho: f64, l_r2: f64) -> Constants {
    Constants {
        rho_g_r1: rho,
        rho_h_r2: 0.0,
        l_avg,
        l_r2,
        sigma_sq: None,
    }
}

/// Finite-sum defaults; pass NaN for `delta0` to skip the predictions.
#[no_mangle]
pub unsafe extern "C" fn dcp_finite_sum_parameters(
    n: usize,
    l_avg: f64,
    rho: f64,
    l_r2: f64,
    epsilon: f64,
    delta0: f64,
    out: *mut DcpParameters,
) -> DcpStatus {
    non_null!(out);
    let d0 = (!delta0.is_nan()).then_some(delta0);
    match algorithms::finite_sum_parameters(n, &constants(l_avg, rho, l_r2), epsilon, d0) {
        Ok(c) => {
            write_choice(c, &mut *out);
            DcpStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Online defaults for gradient variance `sigma_sq`.
#[no_mangle]
pub unsafe extern "C" fn dcp_online_parameters(
    sigma_sq: f64,
    l_avg: f64,
    rho: f64,
    l_r2: f64,
    epsilon: f64,
    delta0: f64,
    out: *mut DcpParameters,
) -> DcpStatus {
    non_null!(out);
    let d0 = (!delta0.is_nan()).then_some(delta0);
    match algorithms::online_parameters(sigma_sq, &constants(l_avg, rho, l_r2), epsilon, d0) {
        Ok(c) => {
            write_choice(c, &mut *out);
            DcpStatus::Ok
        }
        Err(e) => fail(e),
    }
}
