//! Command-line harness: classify | simulate | ensemble | verify |
//! explosion | sweep, with flat-file configuration and CSV/JSON output.
//!
//! Precedence: command-line flags > config file > defaults.
//! Exit codes: 0 success, 1 usage, 2 invalid parameters, 3 verification
//! failure, 4 I/O. TIDLAB_THREADS caps the worker count (0 or unset = auto).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tidlab::engine::simulate;
use tidlab::error::Error;
use tidlab::experiment::{
    apply_config_map, classify_text, ensemble_csv, parse_config_file, path_csv, run_sweep,
    run_verify, ExperimentConfig, OutputFormat,
};
use tidlab::model::{classify, Params};
use tidlab::stats::{
    explosion_prob_direct, explosion_prob_girsanov, run_ensemble, EnsembleSpec, Functional,
};

#[derive(Parser)]
#[command(
    name = "tidlab",
    about = "Phase classification and Monte Carlo verification for a Brownian \
             particle with power-law drift rho sgn(x)|x|^alpha / t^beta",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonOpts {
    /// Drift strength rho.
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Space exponent alpha.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Time exponent beta.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Initial position (>= 0); the initial time is fixed at 1.
    #[arg(long)]
    x0: Option<f64>,
    /// Number of paths.
    #[arg(long)]
    n: Option<u64>,
    /// Simulation horizon (> 1).
    #[arg(long)]
    horizon: Option<f64>,
    /// Base time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Master seed; path i uses the (seed, i) stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv | json.
    #[arg(long)]
    format: Option<String>,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the phase-diagram verdict for a parameter triple.
    Classify(CommonOpts),
    /// Simulate one path and emit its grid.
    Simulate(CommonOpts),
    /// Run an ensemble and emit one functional value per path.
    Ensemble(EnsembleOpts),
    /// Run the regime's verification bundle and emit a report.
    Verify(CommonOpts),
    /// Estimate the explosion probability (direct and, where defined,
    /// Girsanov-weighted).
    Explosion(CommonOpts),
    /// Classify a parameter grid and emit one CSV row per triple.
    Sweep(SweepOpts),
}

#[derive(Args)]
struct EnsembleOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Functional: terminal-raw | terminal-normalized | explosion-indicator
    /// | girsanov-weight.
    #[arg(long, default_value = "terminal-normalized")]
    functional: String,
}

#[derive(Args)]
struct SweepOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Comma-separated rho grid.
    #[arg(long, allow_hyphen_values = true)]
    rho_list: Option<String>,
    /// Comma-separated alpha grid.
    #[arg(long, allow_hyphen_values = true)]
    alpha_list: Option<String>,
    /// Comma-separated beta grid.
    #[arg(long, allow_hyphen_values = true)]
    beta_list: Option<String>,
    /// Run the verification bundle per cell (slow).
    #[arg(long)]
    quick: bool,
}

fn parse_list_flag(name: &str, v: &str) -> Result<Vec<f64>, Error> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameters(format!("--{name}: bad number '{s}'")))
        })
        .collect()
}

/// Builds the effective config: defaults, then file, then flags.
fn resolve_config(opts: &CommonOpts) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let map = parse_config_file(&text)?;
        apply_config_map(&mut cfg, &map)?;
    }
    if let Some(v) = opts.rho {
        cfg.params.rho = v;
    }
    if let Some(v) = opts.alpha {
        cfg.params.alpha = v;
    }
    if let Some(v) = opts.beta {
        cfg.params.beta = v;
    }
    if let Some(v) = opts.x0 {
        cfg.params.x0 = v;
    }
    if let Some(v) = opts.n {
        cfg.n_paths = v;
    }
    if let Some(v) = opts.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = opts.dt {
        cfg.sim.dt = v;
        cfg.sim.blowup_refine_floor = v * 1e-6;
    }
    if let Some(v) = opts.seed {
        cfg.sim.seed = v;
    }
    if let Some(f) = &opts.format {
        cfg.format = match f.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(Error::InvalidParameters(format!(
                    "--format: expected csv|json, got '{other}'"
                )))
            }
        };
    }
    // re-validate the assembled triple
    cfg.params = Params::new(
        cfg.params.rho,
        cfg.params.alpha,
        cfg.params.beta,
        cfg.params.x0,
    )?;
    Ok(cfg)
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), Error> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}

fn cmd_classify(opts: &CommonOpts) -> Result<ExitCode, Error> {
    let cfg = resolve_config(opts)?;
    let regime = classify(&cfg.params)?;
    let content = match cfg.format {
        OutputFormat::Json => to_json(&serde_json::json!({
            "params": cfg.params,
            "regime": regime,
        }))?,
        OutputFormat::Csv => classify_text(&cfg.params, &regime),
    };
    write_output(opts.out.as_deref(), &content)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(opts: &CommonOpts) -> Result<ExitCode, Error> {
    let cfg = resolve_config(opts)?;
    let (path, report) = simulate(&cfg.params, &cfg.sim, cfg.horizon)?;
    let content = match cfg.format {
        OutputFormat::Csv => {
            eprintln!(
                "exploded={} tau_e={:?} crossing={:?} last={} censored_at={}",
                report.exploded,
                report.tau_e_estimate,
                report.threshold_crossing,
                report.last_value,
                report.censored_at
            );
            path_csv(&path)
        }
        OutputFormat::Json => to_json(&serde_json::json!({
            "config": cfg,
            "report": report,
            "path": path,
        }))?,
    };
    write_output(opts.out.as_deref(), &content)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_ensemble(opts: &EnsembleOpts) -> Result<ExitCode, Error> {
    let cfg = resolve_config(&opts.common)?;
    let functional = match opts.functional.as_str() {
        "terminal-raw" => Functional::TerminalRaw,
        "terminal-normalized" => {
            let regime = classify(&cfg.params)?;
            let (norm, _) = tidlab::laws::limit_package(&regime)?;
            Functional::TerminalNormalized(norm)
        }
        "explosion-indicator" => Functional::ExplosionIndicator,
        "girsanov-weight" => {
            let tc = tidlab::time_change::TimeChange::power(cfg.params.alpha, cfg.params.beta)?;
            Functional::GirsanovWeight {
                eps_cut: tidlab::engine::default_eps_cut(&tc),
            }
        }
        other => {
            return Err(Error::InvalidParameters(format!(
                "--functional: unknown '{other}'"
            )))
        }
    };
    let spec = EnsembleSpec {
        params: cfg.params,
        cfg: cfg.sim,
        n_paths: cfg.n_paths,
        horizon: cfg.horizon,
        functional,
    };
    let outcome = run_ensemble(&spec);
    let content = match cfg.format {
        OutputFormat::Csv => ensemble_csv(&outcome.samples),
        OutputFormat::Json => to_json(&serde_json::json!({
            "spec": spec,
            "outcome": outcome,
        }))?,
    };
    write_output(opts.common.out.as_deref(), &content)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(opts: &CommonOpts) -> Result<ExitCode, Error> {
    let cfg = resolve_config(opts)?;
    let report = run_verify(&cfg)?;
    for c in &report.checks {
        let status = if c.pass {
            "PASS"
        } else if c.warning_only {
            "WARN"
        } else {
            "FAIL"
        };
        eprintln!(
            "{status} {} observed={:.6} tolerance={:.6} predicted={:.6}",
            c.name, c.observed, c.tolerance, c.predicted
        );
    }
    let content = to_json(&report)?;
    write_output(opts.out.as_deref(), &content)?;
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn cmd_explosion(opts: &CommonOpts) -> Result<ExitCode, Error> {
    let cfg = resolve_config(opts)?;
    let direct = explosion_prob_direct(&cfg.params, &cfg.sim, cfg.n_paths, cfg.horizon)?;
    let girsanov = if 2.0 * cfg.params.beta > cfg.params.alpha + 1.0 {
        Some(explosion_prob_girsanov(&cfg.params, &cfg.sim, cfg.n_paths)?)
    } else {
        None
    };
    let content = to_json(&serde_json::json!({
        "params": cfg.params,
        "seed": cfg.sim.seed,
        "direct": direct,
        "girsanov": girsanov,
    }))?;
    write_output(opts.out.as_deref(), &content)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(opts: &SweepOpts) -> Result<ExitCode, Error> {
    let mut cfg = resolve_config(&opts.common)?;
    if let Some(v) = &opts.rho_list {
        cfg.rho_list = parse_list_flag("rho-list", v)?;
    }
    if let Some(v) = &opts.alpha_list {
        cfg.alpha_list = parse_list_flag("alpha-list", v)?;
    }
    if let Some(v) = &opts.beta_list {
        cfg.beta_list = parse_list_flag("beta-list", v)?;
    }
    let csv = run_sweep(&cfg, opts.quick)?;
    write_output(opts.common.out.as_deref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() {
    let threads = std::env::var("TIDLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Io(_) => ExitCode::from(4),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let result = match &cli.command {
        Command::Classify(o) => cmd_classify(o),
        Command::Simulate(o) => cmd_simulate(o),
        Command::Ensemble(o) => cmd_ensemble(o),
        Command::Verify(o) => cmd_verify(o),
        Command::Explosion(o) => cmd_explosion(o),
        Command::Sweep(o) => cmd_sweep(o),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
