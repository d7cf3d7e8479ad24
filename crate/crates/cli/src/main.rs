use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use blowuplab_core::artifacts::{self, FitArtifact};
use blowuplab_core::functionals::{verification_report, DEFAULT_COERCIVITY_ONSET};
use blowuplab_core::lifespan::{compare_to_theory, fit_for_bound, sweep, SweepConfig, Verdict};
use blowuplab_core::specfun::verification_table;
use blowuplab_core::{
    classify, lifespan_exponent, run, thresholds, BesselEvalConfig, Error, ModelParams,
    SimConfig, TestFunctionContext,
};

#[derive(Debug, Parser)]
#[command(name = "blowuplab", version, about = "Blow-up lab for scale-invariant damped wave equations")]
struct Cli {
    /// Output directory for run and sweep artifacts.
    #[arg(long, global = true, env = "BLOWUPLAB_OUT", default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Only print results and errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical exponents, region and lifespan rate for a parameter set.
    Classify {
        /// JSON with `N, mu, p, q, a, b`, or any config containing `params`.
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the special functions against their defining identities.
    SpecfunCheck {
        /// Optional JSON overriding the Bessel quadrature settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// One run; writes monitors.csv and manifest.json under <out>/<hash>/.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Functional checks on an existing run directory.
    Verify {
        run_dir: PathBuf,
        /// Start of the coercivity window.
        #[arg(long, default_value_t = DEFAULT_COERCIVITY_ONSET)]
        onset: f64,
    },
    /// Lifespan sweep over eps with a scaling-law fit.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Verdict tolerance; overrides the config value.
        #[arg(long)]
        tau: Option<f64>,
        /// Grid levels per eps; overrides the config value.
        #[arg(long)]
        refine: Option<u32>,
    },
    /// Merge every manifest under <out> into <out>/summary.csv.
    Report,
}

/// Exit 2: unreadable or invalid input. Exit 1: a check or fit failed.
enum Failure {
    Config(anyhow::Error),
    Check(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidParams(_)
            | Error::Json(_)
            | Error::Domain(_)
            | Error::NoTheorem => Failure::Config(e.into()),
            other => Failure::Check(other.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(Failure::Config)?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))
        .map_err(Failure::Config)
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

/// Accepts bare parameters, a run config (`params`) or a sweep config (`base.params`).
fn params_from(value: Value) -> Result<ModelParams, Failure> {
    let candidate = if value.get("params").is_some() {
        value["params"].clone()
    } else if let Some(base) = value.get("base") {
        base.get("params").cloned().unwrap_or(Value::Null)
    } else {
        value
    };
    serde_json::from_value(candidate)
        .context("config does not describe model parameters")
        .map_err(Failure::Config)
}

fn cmd_classify(config: &Path) -> CmdResult {
    let params = params_from(read_config(config)?)?;
    let classification = classify(&params)?;
    let bound = lifespan_exponent(&params).ok();
    print_json(&serde_json::json!({
        "params": params,
        "classification": classification,
        "thresholds": thresholds(&params),
        "lifespan": bound,
    }));
    Ok(())
}

fn cmd_specfun_check(config: Option<&Path>) -> CmdResult {
    let cfg: BesselEvalConfig = match config {
        Some(path) => read_config(path)?,
        None => BesselEvalConfig::default(),
    };
    cfg.validate()?;
    let rows = verification_table(&cfg)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    for r in &rows {
        println!(
            "{:<5} {:<28} {:<32} error={:.3e} tol={:.0e}",
            if r.pass { "ok" } else { "FAIL" },
            r.check,
            r.case,
            r.error,
            r.tolerance
        );
    }
    println!("{} checks, {} failed", rows.len(), failed);
    if failed > 0 {
        return Err(Failure::Check(anyhow!("{failed} special-function checks failed")));
    }
    Ok(())
}

fn cmd_solve(config: &Path, out: &Path) -> CmdResult {
    let cfg: SimConfig = read_config(config)?;
    cfg.validate()?;
    let start = Instant::now();
    let result = run(&cfg)?;
    let dir = artifacts::write_run(out, &cfg, &result)?;
    artifacts::write_timing(&dir, start.elapsed().as_secs_f64())?;
    log::info!("{} after {} steps", result.outcome.tag(), result.grid.steps);
    print_json(&serde_json::json!({
        "run_dir": dir,
        "outcome": result.outcome,
    }));
    Ok(())
}

fn cmd_verify(run_dir: &Path, onset: f64) -> CmdResult {
    let (manifest, series) = artifacts::read_run(run_dir).map_err(|e| Failure::Config(e.into()))?;
    let cfg = &manifest.config;
    let prm = cfg.params;
    let ctx = TestFunctionContext::new(prm.n, prm.mu, cfg.profile.support_radius)?;
    let report = verification_report(&series, &ctx, &prm, cfg.eps, onset)?;
    artifacts::write_verification(run_dir, &report)?;
    print_json(&report);
    if !report.pass {
        return Err(Failure::Check(anyhow!("functional verification failed")));
    }
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, tau: Option<f64>, refine: Option<u32>) -> CmdResult {
    let mut cfg: SweepConfig = read_config(config)?;
    if let Some(tau) = tau {
        cfg.tau = tau;
    }
    if let Some(refine) = refine {
        cfg.refine = refine;
    }
    cfg.validate()?;
    let start = Instant::now();
    let result = sweep(&cfg)?;
    let fit = fit_for_bound(&result);
    let artifact = match &fit {
        Ok(fit) => Some(FitArtifact {
            fit: fit.clone(),
            bound: result.bound.clone(),
            verdict: compare_to_theory(fit, &result.bound, cfg.tau).ok(),
        }),
        Err(_) => None,
    };
    let dir = artifacts::write_sweep(out, &cfg, &result, artifact.as_ref())?;
    artifacts::write_timing(&dir, start.elapsed().as_secs_f64())?;
    for r in &result.rows {
        log::info!("eps = {}: {} T = {:?}", r.eps, r.outcome, r.t_est);
    }
    print_json(&serde_json::json!({
        "sweep_dir": dir,
        "fit": artifact,
    }));
    match (fit, artifact.and_then(|a| a.verdict)) {
        (Err(e), _) => Err(Failure::Check(anyhow!("fit failed: {e}"))),
        (Ok(_), Some(v)) if v.verdict == Verdict::Inconsistent => {
            Err(Failure::Check(anyhow!("measured exponent is inconsistent with the bound")))
        }
        _ => Ok(()),
    }
}

fn cmd_report(out: &Path) -> CmdResult {
    let rows = artifacts::collect_summary(out).map_err(|e| Failure::Config(e.into()))?;
    let path = artifacts::write_summary(out, &rows)?;
    print!("{}", fs::read_to_string(&path).map_err(|e| Failure::Check(e.into()))?);
    Ok(())
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Classify { config } => cmd_classify(config),
        Command::SpecfunCheck { config } => cmd_specfun_check(config.as_deref()),
        Command::Solve { config } => cmd_solve(config, &cli.out),
        Command::Verify { run_dir, onset } => cmd_verify(run_dir, *onset),
        Command::Sweep { config, tau, refine } => cmd_sweep(config, &cli.out, *tau, *refine),
        Command::Report => cmd_report(&cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
