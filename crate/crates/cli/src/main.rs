use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curvkit::functional::init_threads;
use curvkit::models::{Model, ModelParams};
use curvkit::suites::{functional_suite, invariants_table, run_suite, Suite, SuiteConfig};
use curvkit::{Error, VerificationReport};
use serde_json::{json, Value};

/// Numerical verification of curvature identities on model metrics.
#[derive(Parser, Debug)]
#[command(name = "curvkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pointwise invariants, conformal data and rigidity certificates of a model.
    Invariants(Opts),
    /// Run verification suites.
    Verify(Opts),
    /// Integral checks on a periodic model.
    Functional(Opts),
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Model name (sphere, hyperbolic, flat, flat-torus, perturbed-torus, conformally-flat, lovelock, product).
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Sectional curvature of space-form models.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    mass: f64,
    /// Grid points per axis for functional checks.
    #[arg(long, default_value_t = 8)]
    res: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// algebra, curvature, linearization, functional or all.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Multiplier applied to every tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Reduced sample counts and grids.
    #[arg(long)]
    quick: bool,
    /// Report path (JSON); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::StyleMismatch { .. } | Error::Horizon { .. } | Error::StepSchedule => {
                Failure::Config(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

fn config(opts: &Opts, default_model: &str) -> Result<SuiteConfig, Failure> {
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(Failure::Config(format!("--tol-scale must be positive, got {}", opts.tol_scale)));
    }
    if opts.res == 0 {
        return Err(Failure::Config("--res must be positive".into()));
    }
    let params = ModelParams {
        n: opts.n,
        k: opts.k,
        mu: opts.mu,
        eps: opts.eps,
        mass: opts.mass,
        seed: opts.seed,
        ..ModelParams::default()
    };
    let model = opts.model.clone().unwrap_or_else(|| default_model.to_string());
    // "flat" doubles as the flat torus for integral checks
    Model::named(&model, &params)?;
    Ok(SuiteConfig {
        model,
        params,
        res: opts.res,
        quick: opts.quick,
        tol_scale: opts.tol_scale,
    })
}

fn run_description(command: &str, opts: &Opts, cfg: &SuiteConfig) -> Value {
    json!({
        "command": command,
        "model": cfg.model,
        "n": cfg.params.n,
        "k": cfg.params.k,
        "mu": cfg.params.mu,
        "eps": cfg.params.eps,
        "mass": cfg.params.mass,
        "res": cfg.res,
        "seed": cfg.params.seed,
        "suite": opts.suite,
        "tol_scale": cfg.tol_scale,
        "quick": cfg.quick,
    })
}

fn execute(cli: &Cli) -> Result<(Value, Vec<VerificationReport>), Failure> {
    match &cli.command {
        Command::Invariants(o) => {
            let cfg = config(o, "sphere")?;
            let (table, records) = invariants_table(&cfg)?;
            let table = serde_json::to_value(&table).map_err(|e| Failure::Run(e.to_string()))?;
            Ok((json!({ "run": run_description("invariants", o, &cfg), "invariants": table }), records))
        }
        Command::Verify(o) => {
            let suite: Suite = o.suite.parse()?;
            let cfg = config(o, "sphere")?;
            let records = run_suite(suite, &cfg)?;
            Ok((json!({ "run": run_description("verify", o, &cfg) }), records))
        }
        Command::Functional(o) => {
            let cfg = config(o, "perturbed-torus")?;
            let records = functional_suite(&cfg)?;
            Ok((json!({ "run": run_description("functional", o, &cfg) }), records))
        }
    }
}

fn out_path(cli: &Cli) -> Option<&PathBuf> {
    match &cli.command {
        Command::Invariants(o) | Command::Verify(o) | Command::Functional(o) => o.out.as_ref(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let (mut doc, records) = match execute(&cli) {
        Ok(v) => v,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    for r in &records {
        eprintln!("{}", r.line());
    }
    let failed = records.iter().filter(|r| !r.pass).count();
    eprintln!("{} checks, {} failed", records.len(), failed);
    doc["records"] = match serde_json::to_value(&records) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    match out_path(&cli) {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text + "\n") {
                eprintln!("cannot write {}: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{text}"),
    }
    if failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
