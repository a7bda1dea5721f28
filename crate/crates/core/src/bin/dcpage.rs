use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dcpage::algorithms::{finite_sum_parameters, online_parameters, ParameterChoice};
use dcpage::cli::checks::{run_suite, SUITES};
use dcpage::cli::config::{Config, Overrides, RunMode};
use dcpage::cli::harness::{build_experiment, run_experiment, HarnessError};
use dcpage::data::manifest::{fetch_all, FetchStatus, Manifest};
use dcpage::problem::Constants;

#[derive(Parser)]
#[command(name = "dcpage", version, about = "Stochastic DC programming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, seed) cell of a configuration.
    Run(RunArgs),
    /// Run a verification suite (all suites when none is named).
    Check { suite: Option<String> },
    /// Print the default batch sizes, probability and predicted cost.
    Params(ParamsArgs),
    /// Download and verify the datasets listed in a manifest.
    Fetch {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            method: self.method.clone(),
            mode: self.mode.clone(),
            epsilon: self.epsilon,
            budget: self.budget,
            normalize: self.normalize,
            workers: self.workers,
            out_dir: self.out_dir.clone(),
        }
    }
}

#[derive(Args)]
struct ParamsArgs {
    /// Take N, σ² and the constants from a configured problem.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of components (finite sum).
    #[arg(long)]
    n: Option<usize>,
    /// Gradient variance (online).
    #[arg(long)]
    sigma_sq: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    l_avg: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    l_r2: f64,
    /// Initial optimality gap used for the iteration prediction.
    #[arg(long)]
    delta0: Option<f64>,
}

fn print_choice(choice: &ParameterChoice) {
    println!("{:<18}{}", "b", choice.b);
    println!("{:<18}{}", "b_small", choice.b_small);
    println!("{:<18}{}", "p", choice.p);
    println!("{:<18}{}", "feasible", choice.feasible);
    println!("{:<18}{}", "suggested_eta", choice.suggested_eta);
    if let Some(o) = &choice.online {
        println!("{:<18}{}", "C", o.c);
        println!("{:<18}{}", "alpha", o.alpha);
        println!("{:<18}{}", "gamma", o.gamma);
    }
    if let Some(t) = choice.predicted_t {
        println!("{:<18}{}", "predicted_T", t);
    }
    if let Some(b) = choice.predicted_budget {
        println!("{:<18}{}", "predicted_budget", b);
    }
}

fn cmd_params(args: &ParamsArgs) -> Result<(), HarnessError> {
    let runtime = |e: dcpage::DcError| HarnessError::Runtime(e.to_string());
    if let Some(path) = &args.config {
        let mut cfg = Config::load(path)?;
        cfg.apply(&Overrides {
            mode: args.mode.clone(),
            epsilon: args.epsilon,
            ..Default::default()
        })?;
        let exp = build_experiment(&cfg)?;
        let delta0 = args
            .delta0
            .or_else(|| exp.prog.evaluate_f(&exp.x0).ok().map(|f| (f - cfg.run.f_lower_bound).max(0.0)));
        let choice = match &exp.stream {
            Some(stream) => {
                let sigma = cfg
                    .run
                    .sigma_sq
                    .or(stream.true_sigma_sq())
                    .ok_or_else(|| HarnessError::Runtime("sigma_sq unknown".into()))?;
                online_parameters(sigma, exp.prog.constants(), cfg.run.epsilon, delta0)
            }
            None => finite_sum_parameters(
                exp.prog.n_components().unwrap_or(0),
                exp.prog.constants(),
                cfg.run.epsilon,
                delta0,
            ),
        }
        .map_err(runtime)?;
        print_choice(&choice);
        return Ok(());
    }
    let constants = Constants {
        rho_g_r1: args.rho,
        rho_h_r2: 0.0,
        l_avg: args.l_avg,
        l_r2: args.l_r2,
        sigma_sq: args.sigma_sq,
    };
    let epsilon = args.epsilon.unwrap_or(1e-3);
    let mode = match args.mode.as_deref() {
        Some(m) => RunMode::parse(m).ok_or_else(|| HarnessError::Config(dcpage::cli::config::ConfigError(format!("unknown mode `{m}`"))))?,
        None if args.sigma_sq.is_some() && args.n.is_none() => RunMode::Online,
        None => RunMode::FiniteSum,
    };
    let missing = |what: &str| HarnessError::Config(dcpage::cli::config::ConfigError(format!("--{what} is required")));
    let choice = match mode {
        RunMode::FiniteSum => finite_sum_parameters(args.n.ok_or_else(|| missing("n"))?, &constants, epsilon, args.delta0),
        RunMode::Online => online_parameters(args.sigma_sq.ok_or_else(|| missing("sigma-sq"))?, &constants, epsilon, args.delta0),
    }
    .map_err(runtime)?;
    print_choice(&choice);
    Ok(())
}

fn cmd_check(suite: Option<&str>) -> Result<bool, HarnessError> {
    let names: Vec<&str> = match suite {
        Some(s) if s != "all" => vec![s],
        _ => SUITES.to_vec(),
    };
    let mut all = true;
    for name in names {
        let report = run_suite(name).ok_or_else(|| {
            HarnessError::Config(dcpage::cli::config::ConfigError(format!(
                "unknown suite `{name}` (expected one of {})",
                SUITES.join(", ")
            )))
        })?;
        println!("{report}");
        all &= report.passed;
    }
    Ok(all)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => Config::load(&args.config)
            .map_err(HarnessError::from)
            .and_then(|mut cfg| {
                cfg.apply(&args.overrides())?;
                run_experiment(&cfg)
            })
            .map(|report| {
                println!("ran {} cells, skipped {} existing", report.ran, report.skipped);
                true
            }),
        Command::Check { suite } => cmd_check(suite.as_deref()),
        Command::Params(args) => cmd_params(args).map(|_| true),
        Command::Fetch { manifest, out_dir } => Manifest::load(manifest)
            .and_then(|m| fetch_all(&m, out_dir))
            .map(|statuses| {
                for s in statuses {
                    match s {
                        FetchStatus::Downloaded(p) => println!("downloaded {}", p.display()),
                        FetchStatus::AlreadyPresent(p) => println!("present    {}", p.display()),
                    }
                }
                true
            })
            .map_err(|e| HarnessError::Runtime(e.to_string())),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
