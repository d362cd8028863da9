use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use crate::error::{CliError, Result};
use crate::summary::Summary;

/// `mean±std` of fractions, as percentages with two decimals.
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{:.2}±{:.2}", mean * 100.0, std * 100.0)
}

pub fn read_summary(dir: &std::path::Path) -> Result<Summary> {
    let path = dir.join("summary.json");
    let bytes = fs::read(&path).map_err(CliError::io(&path))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))
}

/// Comparison table: one row per algorithm, one column per scenario,
/// both in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub algorithms: Vec<String>,
    pub scenarios: Vec<String>,
    pub cells: BTreeMap<(String, String), String>,
}

impl Table {
    pub fn from_summaries(items: &[(PathBuf, Summary)]) -> Result<Self> {
        if items.is_empty() {
            return Err(CliError::Report("no summaries given".into()));
        }
        let mut algorithms: Vec<String> = Vec::new();
        let mut scenarios: Vec<String> = Vec::new();
        let mut fingerprints: BTreeMap<&str, (&str, &PathBuf)> = BTreeMap::new();
        let mut cells = BTreeMap::new();
        for (dir, s) in items {
            if let Some((fp, first)) = fingerprints.get(s.scenario.as_str()) {
                if *fp != s.scenario_fingerprint {
                    return Err(CliError::Report(format!(
                        "scenario `{}` in {} and {} was generated from different data",
                        s.scenario,
                        first.display(),
                        dir.display()
                    )));
                }
            } else {
                fingerprints.insert(&s.scenario, (&s.scenario_fingerprint, dir));
            }
            if !algorithms.contains(&s.algo) {
                algorithms.push(s.algo.clone());
            }
            if !scenarios.contains(&s.scenario) {
                scenarios.push(s.scenario.clone());
            }
            let key = (s.algo.clone(), s.scenario.clone());
            if cells.insert(key, format_cell(s.final_acc_mean, s.final_acc_std)).is_some() {
                return Err(CliError::Report(format!(
                    "{} on `{}` appears more than once (again in {})",
                    s.algo,
                    s.scenario,
                    dir.display()
                )));
            }
        }
        Ok(Self {
            algorithms,
            scenarios,
            cells,
        })
    }

    /// Markdown rendering; missing cells show `-`.
    pub fn render(&self) -> String {
        let mut out = String::from("| algorithm |");
        for s in &self.scenarios {
            out.push_str(&format!(" {s} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.scenarios.len()));
        out.push('\n');
        for a in &self.algorithms {
            out.push_str(&format!("| {a} |"));
            for s in &self.scenarios {
                let cell = self.cells.get(&(a.clone(), s.clone())).map_or("-", String::as_str);
                out.push_str(&format!(" {cell} |"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn cmd_report(dirs: &[PathBuf]) -> Result<Table> {
    let items = dirs
        .iter()
        .map(|d| Ok((d.clone(), read_summary(d)?)))
        .collect::<Result<Vec<_>>>()?;
    Table::from_summaries(&items)
}
