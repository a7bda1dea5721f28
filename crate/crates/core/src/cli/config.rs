//! Experiment configuration (TOML).
//!
//! ```toml
//! [problem]
//! kind = "binary"          # binary | multiclass | quadratic
//! data = "a9a.txt"         # LIBSVM file, relative to the config file
//! lambda = 1e-4            # default 1/n
//! alpha = 5.0
//! normalize = false
//!
//! [problem.synthetic]      # used when `data` is absent
//! n = 2000
//! d = 50
//! classes = 3              # multiclass only
//! sparsity = 0.3
//! noise = 0.1
//! seed = 7
//!
//! [stream]                 # online mode only
//! radius = 1.0
//! snapshot = 2000
//!
//! [run]
//! methods = ["dca-page", "dca-svrg", "dca-saga", "sdca"]
//! mode = "finite-sum"      # finite-sum | online
//! seeds = [0, 1, 2]
//! epsilon = 1e-3
//! max_iters = 100000
//! budget = 40000
//! out_dir = "results"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::algorithms::{Method, SigmaSqSource, SolverConfig, DEFAULT_PILOT_BATCH};
use crate::estimators::CostConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Binary,
    Multiclass,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    FiniteSum,
    Online,
}

impl RunMode {
    pub fn parse(s: &str) -> Option<RunMode> {
        match s {
            "finite-sum" => Some(RunMode::FiniteSum),
            "online" => Some(RunMode::Online),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    #[default]
    Samples,
    Evaluations,
}

impl From<Accounting> for CostConvention {
    fn from(a: Accounting) -> Self {
        match a {
            Accounting::Samples => CostConvention::Samples,
            Accounting::Evaluations => CostConvention::Evaluations,
        }
    }
}

fn default_alpha() -> f64 {
    crate::problems::DEFAULT_ALPHA
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub classes: Option<usize>,
    #[serde(default = "default_one")]
    pub sparsity: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub data: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
    pub lambda: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub eta_shift: f64,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    /// Decision dimension; defaults to `problem.synthetic.d`.
    pub dim: Option<usize>,
    #[serde(default = "default_one")]
    pub radius: f64,
    #[serde(default = "default_one")]
    pub sparsity: f64,
    #[serde(default)]
    pub noise: f64,
    /// Seed of the planted model / quadratic centre.
    #[serde(default)]
    pub planted_seed: u64,
    /// Size of a fixed evaluation sample used for `F` and `d`.
    pub snapshot: Option<usize>,
    #[serde(default = "default_one")]
    pub curvature: f64,
    #[serde(default = "default_one")]
    pub std: f64,
    /// Quadratic `G` coefficient; defaults to twice the curvature.
    pub quad_coeff: Option<f64>,
    #[serde(default)]
    pub l1_weight: f64,
}

fn default_methods() -> Vec<String> {
    vec!["dca-page".into()]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_max_iters() -> usize {
    1000
}

fn default_pilot() -> usize {
    DEFAULT_PILOT_BATCH
}

fn default_tolerance() -> f64 {
    crate::subproblem::DEFAULT_TOLERANCE
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    pub budget: Option<u64>,
    pub b: Option<usize>,
    pub b_small: Option<usize>,
    pub p: Option<f64>,
    pub epoch: Option<usize>,
    #[serde(default)]
    pub auto_eta: bool,
    pub metric_every: Option<usize>,
    #[serde(default)]
    pub record_gap: bool,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default)]
    pub accounting: Accounting,
    pub sigma_sq: Option<f64>,
    #[serde(default = "default_pilot")]
    pub pilot_batch: usize,
    #[serde(default)]
    pub f_lower_bound: f64,
    #[serde(default = "default_tolerance")]
    pub subproblem_tolerance: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Concurrent (method, seed) cells; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("all run fields have defaults")
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemConfig,
    pub stream: Option<StreamConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

/// A schema violation; the CLI exits with status 2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Command-line overrides applied on top of a file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub mode: Option<String>,
    pub epsilon: Option<f64>,
    pub budget: Option<u64>,
    pub normalize: bool,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(data), Some(dir)) = (&cfg.problem.data, path.parent()) {
            if data.is_relative() {
                cfg.problem.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.run.seeds = vec![s];
        }
        if let Some(m) = &o.method {
            self.run.methods = vec![m.clone()];
        }
        if let Some(m) = &o.mode {
            self.run.mode = RunMode::parse(m).ok_or_else(|| bad(format!("unknown mode `{m}`")))?;
        }
        if let Some(e) = o.epsilon {
            self.run.epsilon = e;
        }
        if let Some(b) = o.budget {
            self.run.budget = Some(b);
        }
        if o.normalize {
            self.problem.normalize = true;
        }
        if let Some(w) = o.workers {
            self.run.workers = w;
        }
        if let Some(d) = &o.out_dir {
            self.run.out_dir = d.clone();
        }
        self.validate()
    }

    pub fn methods(&self) -> Vec<Method> {
        self.run
            .methods
            .iter()
            .map(|m| Method::parse(m).expect("validated"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        if r.methods.is_empty() {
            return Err(bad("run.methods is empty"));
        }
        for m in &r.methods {
            let method = Method::parse(m).ok_or_else(|| {
                bad(format!(
                    "unknown method `{m}` (expected one of dca-page, dca, dca-svrg, dca-saga, sdca)"
                ))
            })?;
            if r.mode == RunMode::Online && method != Method::DcaPage {
                return Err(bad(format!("method `{m}` requires a finite sum")));
            }
        }
        if r.seeds.is_empty() {
            return Err(bad("run.seeds is empty"));
        }
        if !(r.epsilon > 0.0) {
            return Err(bad("run.epsilon must be > 0"));
        }
        if r.max_iters == 0 {
            return Err(bad("run.max_iters must be >= 1"));
        }
        if let Some(p) = r.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(bad("run.p must lie in (0, 1]"));
            }
        }
        if r.metric_every == Some(0) {
            return Err(bad("run.metric_every must be >= 1"));
        }
        let p = &self.problem;
        match (p.data.is_some(), p.synthetic.is_some()) {
            (true, true) => return Err(bad("problem.data and problem.synthetic are exclusive")),
            (false, false) if r.mode == RunMode::FiniteSum => {
                return Err(bad("finite-sum mode needs problem.data or problem.synthetic"))
            }
            _ => {}
        }
        if let Some(l) = p.lambda {
            if !(l > 0.0) {
                return Err(bad("problem.lambda must be > 0"));
            }
        }
        if !(p.alpha > 0.0) {
            return Err(bad("problem.alpha must be > 0"));
        }
        if !(p.eta_shift >= 0.0) {
            return Err(bad("problem.eta_shift must be >= 0"));
        }
        match (p.kind, r.mode) {
            (ProblemKind::Multiclass, RunMode::Online) => {
                return Err(bad("the multiclass problem has no stream; use finite-sum mode"))
            }
            (ProblemKind::Quadratic, RunMode::FiniteSum) => {
                return Err(bad("the quadratic problem is a stream; use online mode"))
            }
            (ProblemKind::Multiclass, _) => {
                if let Some(s) = &p.synthetic {
                    if s.classes.unwrap_or(0) < 2 {
                        return Err(bad("problem.synthetic.classes must be >= 2"));
                    }
                }
            }
            _ => {}
        }
        if r.mode == RunMode::Online {
            let s = self
                .stream
                .as_ref()
                .ok_or_else(|| bad("online mode needs a [stream] section"))?;
            if s.dim.or(p.synthetic.as_ref().map(|s| s.d)).is_none() {
                return Err(bad("stream.dim is required"));
            }
            if !(s.radius > 0.0) || !(s.curvature > 0.0) || !(s.std >= 0.0) {
                return Err(bad("stream.radius and stream.curvature must be > 0, stream.std >= 0"));
            }
            if r.sigma_sq.is_none() && r.pilot_batch < 2 {
                return Err(bad("run.pilot_batch must be >= 2"));
            }
        }
        Ok(())
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        let r = &self.run;
        SolverConfig {
            b: r.b,
            b_small: r.b_small,
            p: r.p,
            epoch: r.epoch,
            eta_shift: 0.0,
            auto_eta: r.auto_eta,
            epsilon: r.epsilon,
            max_iters: r.max_iters,
            budget_cap: r.budget,
            seed,
            subproblem_tolerance: r.subproblem_tolerance,
            sigma_sq_source: match r.sigma_sq {
                Some(s) => SigmaSqSource::Provided(s),
                None => SigmaSqSource::PilotEstimate { batch: r.pilot_batch },
            },
            early_stop: r.early_stop,
            metric_every: r.metric_every,
            record_gap: r.record_gap,
            cost_convention: r.accounting.into(),
            f_lower_bound: r.f_lower_bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[problem]\nkind = \"binary\"\n[problem.synthetic]\nn = 10\nd = 3\n";

    #[test]
    fn minimal_config_defaults() {
        let cfg = Config::parse(MINIMAL).unwrap();
        assert_eq!(cfg.run.methods, vec!["dca-page"]);
        assert_eq!(cfg.run.seeds, vec![0]);
        assert_eq!(cfg.problem.alpha, 5.0);
    }

    #[test]
    fn unknown_keys_and_methods_rejected() {
        assert!(Config::parse(&format!("{MINIMAL}bogus = 1\n")).is_err());
        let e = Config::parse(&format!("{MINIMAL}[run]\nmethods = [\"sgd\"]\n")).unwrap_err();
        assert!(e.0.contains("unknown method"));
    }

    #[test]
    fn online_baselines_rejected() {
        let text = format!("{MINIMAL}[stream]\n[run]\nmode = \"online\"\nmethods = [\"dca-saga\"]\n");
        assert!(Config::parse(&text).unwrap_err().0.contains("finite sum"));
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = Config::parse(MINIMAL).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            method: Some("sdca".into()),
            budget: Some(100),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.run.seeds, vec![9]);
        assert_eq!(cfg.methods(), vec![Method::Sdca]);
        assert_eq!(cfg.solver_config(9).budget_cap, Some(100));
        assert!(cfg
            .apply(&Overrides {
                mode: Some("batch".into()),
                ..Default::default()
            })
            .is_err());
    }
}
