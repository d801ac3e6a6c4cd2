//! Tidy per-figure tables derived from a results CSV.
//!
//! figure2a/2b: normalized principal payoff against N (linear/quadratic),
//! one series for COPE and one per θ†. figure3a/3b: normalized network
//! profit against N, COPE and the homogeneous variants plus the centralized
//! benchmark, with COPE's gap to centralized.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::output::{fmt_f64, Row};
use crate::CliError;

pub const FIGURES: [(&str, &str, &str); 4] = [
    ("figure2a", "linear", "principal_payoff"),
    ("figure2b", "quadratic", "principal_payoff"),
    ("figure3a", "linear", "network_profit"),
    ("figure3b", "quadratic", "network_profit"),
];

fn series(r: &Row) -> String {
    match r.theta_dagger {
        Some(t) => format!("{}(theta_dagger={t})", r.mechanism),
        None => r.mechanism.clone(),
    }
}

/// Relative gap of COPE below centralized, measured above the −1 baseline.
pub fn gap(cope: f64, centralized: f64) -> f64 {
    (centralized - cope) / (centralized + 1.0)
}

pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes the four figure files into `dir`.
pub fn write_figures(rows: &[Row], dir: &Path) -> Result<FigureOutput, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for (name, cost, metric) in FIGURES {
        let sel: Vec<&Row> = rows
            .iter()
            .filter(|r| r.cost == cost && r.metric == metric)
            .filter(|r| metric == "network_profit" || r.mechanism != "centralized")
            .collect();
        if sel.is_empty() {
            warnings.push(format!("{name}: no {cost} rows for {metric}; file has a header only"));
        }
        let mut out = String::from("N,series,mean,se,gap_to_centralized\n");
        let central: BTreeMap<usize, f64> =
            sel.iter().filter(|r| r.mechanism == "centralized").map(|r| (r.n, r.mean)).collect();
        if metric == "network_profit" && !sel.is_empty() && central.is_empty() {
            warnings.push(format!("{name}: gap: no centralized rows for {cost}; benchmark series and gaps left empty"));
        }
        let mut sorted = sel;
        sorted.sort_by(|a, b| a.n.cmp(&b.n).then_with(|| series(a).cmp(&series(b))));
        for r in sorted {
            let g = match (metric, r.mechanism.as_str(), central.get(&r.n)) {
                ("network_profit", "cope", Some(&c)) => fmt_f64(gap(r.mean, c)),
                _ => String::new(),
            };
            out.push_str(&format!("{},{},{},{},{}\n", r.n, series(r), fmt_f64(r.mean), fmt_f64(r.se), g));
        }
        let path = dir.join(format!("{name}.csv"));
        std::fs::File::create(&path)?.write_all(out.as_bytes())?;
        files.push(path);
    }
    Ok(FigureOutput { files, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mech: &str, cost: &str, n: usize, td: Option<f64>, metric: &str, mean: f64) -> Row {
        Row { mechanism: mech.into(), cost: cost.into(), n, theta_dagger: td, metric: metric.into(), mean, se: 0.0, n_trials: 1 }
    }

    #[test]
    fn gap_convention() {
        assert_eq!(gap(-0.5, -0.5), 0.0);
        assert!((gap(-0.6, -0.5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn missing_centralized_warns() {
        let rows = vec![
            row("cope", "linear", 3, None, "network_profit", -0.4),
            row("homogeneous", "linear", 3, Some(0.2), "network_profit", -0.5),
        ];
        let dir = tempfile::tempdir().unwrap();
        let out = write_figures(&rows, dir.path()).unwrap();
        assert_eq!(out.files.len(), 4);
        assert!(out.warnings.iter().any(|w| w.starts_with("figure3a: gap")));
        let text = std::fs::read_to_string(dir.path().join("figure3a.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("homogeneous(theta_dagger=0.2)"));
    }
}
