//! Runs every (method, seed) cell of a configuration and writes CSV artifacts.
//!
//! Layout under `out_dir`:
//!
//! ```text
//! traces/<method>_seed<seed>.csv     one trace per cell
//! traces/<method>_seed<seed>.params  parameters the cell used
//! summary.csv                        per-bucket median / quartiles
//! metadata.toml                      timestamps and cell counts
//! ```
//!
//! Cells whose trace already exists are skipped, so an interrupted run can be
//! resumed by invoking the same command again.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{Config, ConfigError, ProblemKind, RunMode};
use super::summary::{read_trace_csv, summarize, write_summary_csv, Curve, DEFAULT_BUCKETS};
use crate::algorithms::{run, Method, Trace};
use crate::data::{
    generate_synthetic_binary, generate_synthetic_multiclass, read_libsvm_file, Dataset, StreamSource,
};
use crate::estimators::substream;
use crate::problem::DcProgram;
use crate::problems::{
    build_binary_dc, build_multiclass_dc, default_lambda, quadratic_stream_program, BinaryLogisticSpec,
    MultiClassLogisticSpec,
};
use crate::DcError;

const STREAM_SEED_STREAM: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl From<DcError> for HarnessError {
    fn from(e: DcError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl HarnessError {
    /// 2 for schema violations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}

/// A built problem plus its data source.
pub struct Experiment {
    pub prog: DcProgram,
    pub stream: Option<StreamSource>,
    pub x0: Vec<f64>,
}

impl Experiment {
    pub fn mode(&self) -> RunMode {
        if self.stream.is_some() {
            RunMode::Online
        } else {
            RunMode::FiniteSum
        }
    }
}

fn load_dataset(cfg: &Config) -> Result<Dataset, HarnessError> {
    let p = &cfg.problem;
    let mut ds = if let Some(path) = &p.data {
        read_libsvm_file(path).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?
    } else {
        let s = p.synthetic.as_ref().expect("validated");
        match p.kind {
            ProblemKind::Multiclass => {
                generate_synthetic_multiclass(s.n, s.d, s.classes.unwrap_or(2), s.sparsity, s.noise, s.seed)?.0
            }
            _ => generate_synthetic_binary(s.n, s.d, s.sparsity, s.noise, s.seed)?.0,
        }
    };
    if p.normalize {
        ds.normalize_max_abs();
    }
    Ok(ds)
}

fn gaussian_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn snapshot_from(template: &StreamSource, size: usize, seed: u64, n_features: usize) -> Dataset {
    let mut s = template.clone();
    s.reseed(seed);
    s.set_window(0);
    Dataset::new(s.stream_sample(size), n_features)
}

pub fn build_experiment(cfg: &Config) -> Result<Experiment, HarnessError> {
    cfg.validate()?;
    let p = &cfg.problem;
    match cfg.run.mode {
        RunMode::FiniteSum => {
            let mut ds = load_dataset(cfg)?;
            let lambda = p.lambda.unwrap_or_else(|| default_lambda(ds.len()));
            let prog = match p.kind {
                ProblemKind::Binary => {
                    ds.ensure_binary_labels()?;
                    let mut spec = BinaryLogisticSpec::finite(Arc::new(ds), lambda, p.alpha);
                    spec.eta_shift = p.eta_shift;
                    build_binary_dc(&spec)?
                }
                ProblemKind::Multiclass => {
                    let declared = p.synthetic.as_ref().and_then(|s| s.classes).unwrap_or(0);
                    let mut spec = MultiClassLogisticSpec::finite(Arc::new(ds), lambda, p.alpha)?;
                    spec.classes = spec.classes.max(declared);
                    spec.eta_shift = p.eta_shift;
                    build_multiclass_dc(&spec)?
                }
                ProblemKind::Quadratic => unreachable!("validated"),
            };
            let x0 = vec![0.0; prog.dim()];
            Ok(Experiment { prog, stream: None, x0 })
        }
        RunMode::Online => {
            let s = cfg.stream.as_ref().expect("validated");
            let dim = s.dim.or(p.synthetic.as_ref().map(|s| s.d)).expect("validated");
            let (prog, template) = match p.kind {
                ProblemKind::Binary => {
                    let planted = gaussian_vector(dim, s.planted_seed);
                    let template = StreamSource::binary_logistic(planted, s.sparsity, s.noise, s.radius, 0)?;
                    let snapshot = s
                        .snapshot
                        .map(|k| Arc::new(snapshot_from(&template, k, s.planted_seed.wrapping_add(1), dim)));
                    let lambda = p.lambda.unwrap_or_else(|| default_lambda(s.snapshot.unwrap_or(1000)));
                    let mut spec = BinaryLogisticSpec::online(dim, s.radius, lambda, p.alpha, snapshot);
                    spec.eta_shift = p.eta_shift;
                    (build_binary_dc(&spec)?, template)
                }
                ProblemKind::Quadratic => {
                    let mean = gaussian_vector(dim, s.planted_seed);
                    let template = StreamSource::gaussian_quadratic(s.curvature, mean, s.std, 0)?;
                    let sigma_sq = template.true_sigma_sq().expect("exact for this stream");
                    let q = s.quad_coeff.unwrap_or(2.0 * s.curvature);
                    let prog = quadratic_stream_program(dim, s.curvature, sigma_sq, q, s.l1_weight);
                    let prog = match s.snapshot {
                        Some(k) => prog.with_components(Some(Arc::new(snapshot_from(
                            &template,
                            k,
                            s.planted_seed.wrapping_add(1),
                            2 * dim,
                        )))),
                        None => prog,
                    }
                    .apply_rho_shift(p.eta_shift)?;
                    (prog, template)
                }
                ProblemKind::Multiclass => unreachable!("validated"),
            };
            let x0 = vec![0.0; prog.dim()];
            Ok(Experiment {
                prog,
                stream: Some(template),
                x0,
            })
        }
    }
}

/// Seed of the sample stream used by the cell with run seed `seed`.
pub fn stream_seed(seed: u64) -> u64 {
    substream(seed, STREAM_SEED_STREAM).random()
}

pub fn run_cell(exp: &Experiment, cfg: &Config, method: Method, seed: u64) -> Result<Trace, DcError> {
    let solver = cfg.solver_config(seed);
    match &exp.stream {
        Some(template) => {
            let mut stream = template.clone();
            stream.reseed(stream_seed(seed));
            run(
                method,
                &exp.prog,
                crate::estimators::SampleSource::Online(&mut stream),
                &solver,
                &exp.x0,
            )
        }
        None => {
            let data = exp.prog.dataset().expect("finite-sum program has components").clone();
            run(
                method,
                &exp.prog,
                crate::estimators::SampleSource::FiniteSum(&data),
                &solver,
                &exp.x0,
            )
        }
    }
}

pub fn trace_path(out_dir: &Path, method: Method, seed: u64) -> PathBuf {
    out_dir.join("traces").join(format!("{}_seed{}.csv", method.name(), seed))
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Parameters of a finished cell as `key = value` lines.
pub fn params_text(trace: &Trace) -> String {
    let p = &trace.params;
    let mut s = String::new();
    let _ = writeln!(s, "method = \"{}\"", trace.method.name());
    let _ = writeln!(s, "seed = {}", trace.seed);
    let _ = writeln!(s, "b = {}", p.b);
    let _ = writeln!(s, "b_small = {}", p.b_small);
    let _ = writeln!(s, "p = {}", p.p);
    if let Some(e) = p.epoch {
        let _ = writeln!(s, "epoch = {e}");
    }
    let _ = writeln!(s, "eta_shift = {}", p.eta_shift);
    let _ = writeln!(s, "metric_every = {}", p.metric_every);
    if let Some(v) = p.sigma_sq {
        let _ = writeln!(s, "sigma_sq = {v}");
    }
    let _ = writeln!(s, "pilot_draws = {}", p.pilot_draws);
    if let Some(c) = &p.choice {
        let _ = writeln!(s, "feasible = {}", c.feasible);
        let _ = writeln!(s, "suggested_eta = {}", c.suggested_eta);
        if let Some(t) = c.predicted_t {
            let _ = writeln!(s, "predicted_t = {t}");
        }
        if let Some(b) = c.predicted_budget {
            let _ = writeln!(s, "predicted_budget = {b}");
        }
    }
    let _ = writeln!(s, "output_index = {}", trace.output_index);
    let _ = writeln!(s, "stop = \"{}\"", trace.stop.as_str());
    let _ = writeln!(s, "final_grad_count = {}", trace.final_grad_count());
    let _ = writeln!(s, "best_f = \"{}\"", fmt_opt(trace.best_f()));
    s
}

fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunReport {
    pub ran: usize,
    pub skipped: usize,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs all missing cells, then rewrites the summary from every trace on disk.
pub fn run_experiment(cfg: &Config) -> Result<RunReport, HarnessError> {
    let started = unix_now();
    let exp = build_experiment(cfg)?;
    let out_dir = &cfg.run.out_dir;
    fs::create_dir_all(out_dir.join("traces"))?;

    let cells: Vec<(Method, u64)> = cfg
        .methods()
        .into_iter()
        .flat_map(|m| cfg.run.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pending: Vec<(Method, u64)> = cells
        .iter()
        .copied()
        .filter(|&(m, s)| !trace_path(out_dir, m, s).exists())
        .collect();
    let skipped = cells.len() - pending.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let results: Vec<Result<(), HarnessError>> = pool.install(|| {
        pending
            .par_iter()
            .map(|&(method, seed)| {
                let trace = run_cell(&exp, cfg, method, seed)
                    .map_err(|e| HarnessError::Runtime(format!("{} seed {seed}: {e}", method.name())))?;
                let path = trace_path(out_dir, method, seed);
                write_atomic(&path.with_extension("params"), params_text(&trace).as_bytes())?;
                write_atomic(&path, trace.to_csv().as_bytes())?;
                log::info!("{} seed {seed}: {} records", method.name(), trace.records.len());
                Ok(())
            })
            .collect()
    });
    for r in results {
        r?;
    }

    let mut curves: Vec<(String, Curve)> = Vec::with_capacity(cells.len());
    for &(m, s) in &cells {
        let path = trace_path(out_dir, m, s);
        let text = fs::read_to_string(&path)?;
        let curve = read_trace_csv(&text).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?;
        curves.push((m.name().to_string(), curve));
    }
    let rows = summarize(&curves, DEFAULT_BUCKETS);
    let mut buf = Vec::new();
    write_summary_csv(&rows, &mut buf)?;
    write_atomic(&out_dir.join("summary.csv"), &buf)?;

    let report = RunReport {
        ran: pending.len(),
        skipped,
    };
    let meta = format!(
        "started_unix = {started}\nfinished_unix = {}\nversion = \"{}\"\ncells = {}\nran = {}\nskipped = {}\n",
        unix_now(),
        env!("CARGO_PKG_VERSION"),
        cells.len(),
        report.ran,
        report.skipped
    );
    write_atomic(&out_dir.join("metadata.toml"), meta.as_bytes())?;
    Ok(report)
}
