//! Library half of the `cope` binary: configuration, result files, figure
//! tables and the subcommand drivers.

pub mod config;
pub mod figures;
pub mod output;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use cope_core::cost::CostModel;
use cope_core::sim::run_experiment;
use cope_core::verify::{run_suite, Suite, VerifyOptions, VerifyReport};

use config::{CostName, ExperimentConfig, OutputFormat};
use output::{rows, write_csv, write_json, write_manifest, Manifest};

/// Environment variable read for the default worker count.
pub const THREADS_ENV: &str = "COPE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("solver: {0}")]
    Solver(#[from] cope_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} check(s) failed")]
    Verification(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) | CliError::Verification(_) => 1,
        }
    }
}

/// Worker count: explicit value, else the environment variable, else all cores.
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn cmd_run(config_path: &Path, threads: usize) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    // Relative output paths resolve against the config file's directory.
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out_path = base.join(&cfg.output.path);
    let manifest_path = base.join(&cfg.output.manifest);
    let plan = cfg.plan(threads)?;

    let started_at = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let total = plan.costs.len() * plan.n_values.len() * plan.mechanisms.len();
    let mut done = 0;
    let results = run_experiment(&plan, |r| {
        done += 1;
        let td = r.theta_dagger.map(|t| format!(" theta_dagger={t}")).unwrap_or_default();
        eprintln!("[{done}/{total}] {} {} N={}{td}", r.mechanism, r.cost, r.n_agents);
    })?;
    let table = rows(&results);
    let file = std::fs::File::create(&out_path)?;
    match cfg.output.format {
        OutputFormat::Csv => write_csv(std::io::BufWriter::new(file), &table)?,
        OutputFormat::Json => write_json(std::io::BufWriter::new(file), &table)?,
    }
    write_manifest(
        &manifest_path,
        &Manifest {
            config: &cfg,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            started_at,
            elapsed_s: clock.elapsed().as_secs_f64(),
        },
    )?;
    Ok(())
}

pub fn verify_costs(names: &[CostName]) -> Vec<CostModel> {
    names.iter().map(|c| c.model()).collect()
}

/// Prints the check table; fails with the number of failing checks.
pub fn cmd_verify(suite: Suite, opts: &VerifyOptions, out: &mut impl Write) -> Result<VerifyReport, CliError> {
    let report = run_suite(suite, opts)?;
    writeln!(out, "{:<13} {:<28} {:>12} {:>12} {:<6} {:>20}  instance", "suite", "check", "measured", "tolerance", "result", "seed")?;
    for c in &report.checks {
        writeln!(
            out,
            "{:<13} {:<28} {:>12.3e} {:>12.3e} {:<6} {:>20}  {}",
            c.suite,
            c.name,
            c.measured,
            c.tolerance,
            if c.pass { "pass" } else { "FAIL" },
            c.seed,
            c.instance
        )?;
    }
    let failed = report.failures().count();
    writeln!(out, "{}: {} of {} checks passed", suite.name(), report.checks.len() - failed, report.checks.len())?;
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(report)
}

pub fn cmd_figures(results: &Path, out_dir: &Path) -> Result<(), CliError> {
    let table = output::read_csv(results)?;
    let out = figures::write_figures(&table, out_dir)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for f in &out.files {
        println!("{}", f.display());
    }
    Ok(())
}
