//! Result tables and the run manifest.

use std::io::Write;
use std::path::Path;

use cope_core::sim::ExperimentResult;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const HEADER: [&str; 8] = ["mechanism", "cost", "N", "theta_dagger", "metric", "mean", "se", "n_trials"];

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub mechanism: String,
    pub cost: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub theta_dagger: Option<f64>,
    pub metric: String,
    pub mean: f64,
    pub se: f64,
    pub n_trials: usize,
}

/// Shortest round-trip form would vary in width; 17 significant digits is
/// lossless for every double and stable across platforms.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn rows(results: &[ExperimentResult]) -> Vec<Row> {
    results
        .iter()
        .flat_map(|r| {
            r.metrics.iter().map(|m| Row {
                mechanism: r.mechanism.clone(),
                cost: r.cost.clone(),
                n: r.n_agents,
                theta_dagger: r.theta_dagger,
                metric: m.name.clone(),
                mean: m.mean,
                se: m.se,
                n_trials: r.n_trials,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.mechanism.clone(),
            r.cost.clone(),
            r.n.to_string(),
            r.theta_dagger.map(fmt_f64).unwrap_or_default(),
            r.metric.clone(),
            fmt_f64(r.mean),
            fmt_f64(r.se),
            r.n_trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, rows: &[Row]) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a results CSV; any structural problem is a [`CliError::Input`].
pub fn read_csv(path: &Path) -> Result<Vec<Row>, CliError> {
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(HEADER) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let rows: Vec<Row> = rd.deserialize().collect::<Result<_, _>>().map_err(|e| bad(e.to_string()))?;
    if rows.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub version: &'static str,
    pub started_at: String,
    pub elapsed_s: f64,
}

pub fn write_manifest(path: &Path, m: &Manifest<'_>) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, m)?;
    f.write_all(b"\n")?;
    Ok(())
}
