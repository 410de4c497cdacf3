//! Multi-method comparison tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{run, Metrics};
use crate::error::{GadError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub method: String,
    /// Dataset label → metrics, in first-seen order.
    pub results: Vec<(String, Option<Metrics>)>,
}

/// Config files (`.toml` / `.json`) of a directory, sorted by name.
pub fn load_suite_dir(dir: &Path) -> Result<Vec<ExperimentConfig>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("toml") || e.eq_ignore_ascii_case("json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(GadError::InvalidConfig(format!("no configs in {}", dir.display())));
    }
    paths.iter().map(|p| ExperimentConfig::load(p)).collect()
}

/// Runs every config into `out/<label>/<method>` and writes `table.csv` (or
/// `table.json`) with one row per method and one metric pair per dataset.
pub fn run_suite(cfgs: &[ExperimentConfig], out: &Path, json: bool) -> Result<Vec<SuiteRow>> {
    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<SuiteRow> = Vec::new();
    for cfg in cfgs {
        let label = cfg.label();
        let report = run(cfg, &out.join(&label).join(cfg.method.name()))?;
        if !labels.contains(&label) {
            labels.push(label.clone());
        }
        let idx = match rows.iter().position(|r| r.method == report.method) {
            Some(i) => i,
            None => {
                rows.push(SuiteRow {
                    method: report.method.clone(),
                    results: Vec::new(),
                });
                rows.len() - 1
            }
        };
        rows[idx].results.push((label, report.metrics));
    }
    fs::create_dir_all(out)?;
    if json {
        let text = serde_json::to_string_pretty(&rows).map_err(|e| GadError::Serde(e.to_string()))?;
        fs::write(out.join("table.json"), text)?;
    } else {
        let mut w = fs::File::create(out.join("table.csv"))?;
        let mut header = vec!["method".to_string()];
        for l in &labels {
            header.push(format!("{l}_auprc"));
            header.push(format!("{l}_auroc"));
        }
        writeln!(w, "{}", header.join(","))?;
        for row in &rows {
            let mut cells = vec![row.method.clone()];
            for l in &labels {
                match row.results.iter().find(|(rl, _)| rl == l).and_then(|(_, m)| *m) {
                    Some(m) => {
                        cells.push(format!("{:.4}", m.auprc));
                        cells.push(format!("{:.4}", m.auroc));
                    }
                    None => {
                        cells.push(String::new());
                        cells.push(String::new());
                    }
                }
            }
            writeln!(w, "{}", cells.join(","))?;
        }
    }
    Ok(rows)
}
