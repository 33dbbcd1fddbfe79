//! Experiment report: AUROC grid, verdicts, per-cell aggregates, and the
//! on-disk layout written by [`emit_report`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::TrainTrace;
use crate::error::{LabError, Result};
use crate::format::sig6;
use crate::linalg::Vector;
use crate::spaces::DecompositionSummary;
use crate::verdict::VerificationVerdict;

pub const RESULTS_FILE: &str = "results.csv";
pub const VERDICTS_FILE: &str = "verdicts.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub suite: String,
    pub scenario: String,
    pub detector: String,
    pub seed: u64,
    pub auroc: f64,
}

/// Geometry of one OOD scenario, measured in the unscrambled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub suite: String,
    pub label: String,
    pub ood_semantic: Vector,
    pub ood_covariate: Vector,
    /// `min_i ‖μ_o − μ_i‖²` over the ID means.
    pub min_sq_distance: f64,
    /// `min_i ‖s_o − s_i‖²` in the semantic space.
    pub delta_sq: f64,
    pub delta_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDecomposition {
    pub seed: u64,
    pub frame: String,
    pub decomposition: DecompositionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub suite: String,
    pub scenario: String,
    pub detector: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds; absent for a single seed.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
    pub scenarios: Vec<ScenarioInfo>,
    pub decompositions: Vec<SeedDecomposition>,
    pub all_verdicts_pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub verdicts: Vec<VerificationVerdict>,
    pub scenarios: Vec<ScenarioInfo>,
    pub decompositions: Vec<SeedDecomposition>,
    /// Training traces keyed by seed, exported as `trace_<seed>.csv`.
    pub traces: Vec<(u64, TrainTrace)>,
}

impl ExperimentReport {
    pub fn all_verdicts_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn merge(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
        self.verdicts.extend(other.verdicts);
        self.scenarios.extend(other.scenarios);
        self.decompositions.extend(other.decompositions);
        self.traces.extend(other.traces);
    }

    /// Rows matching a (suite, scenario, detector) cell, in seed order.
    pub fn cell(&self, suite: &str, scenario: &str, detector: &str) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.suite == suite && r.scenario == scenario && r.detector == detector)
            .collect()
    }

    /// Mean and sample standard deviation per cell, in first-seen order.
    pub fn aggregate(&self) -> Vec<SummaryCell> {
        let mut order: Vec<(String, String, String)> = Vec::new();
        let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.suite.clone(), r.scenario.clone(), r.detector.clone());
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(r.auroc);
        }
        order
            .into_iter()
            .map(|key| {
                let values = &groups[&key];
                let n = values.len();
                let mean = values.iter().sum::<f64>() / n as f64;
                let std = (n > 1).then(|| {
                    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                });
                SummaryCell {
                    suite: key.0,
                    scenario: key.1,
                    detector: key.2,
                    n,
                    mean,
                    std,
                }
            })
            .collect()
    }

    pub fn summary(&self) -> Summary {
        Summary {
            cells: self.aggregate(),
            scenarios: self.scenarios.clone(),
            decompositions: self.decompositions.clone(),
            all_verdicts_pass: self.all_verdicts_pass(),
        }
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from("suite,scenario,detector,seed,auroc\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.suite, r.scenario, r.detector, r.seed, sig6(r.auroc));
        }
        out
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| LabError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T, path: &Path) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| LabError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    Ok(text)
}

/// Write `results.csv`, `verdicts.json`, `summary.json` and one
/// `trace_<seed>.csv` per training run. Returns the paths written.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = vec![write_file(dir.join(RESULTS_FILE), &report.results_csv())?];

    let verdicts_path = dir.join(VERDICTS_FILE);
    let verdicts = to_json(&report.verdicts, &verdicts_path)?;
    written.push(write_file(verdicts_path, &verdicts)?);

    let summary_path = dir.join(SUMMARY_FILE);
    let summary = to_json(&report.summary(), &summary_path)?;
    written.push(write_file(summary_path, &summary)?);

    for (seed, trace) in &report.traces {
        written.push(write_file(dir.join(format!("trace_{seed}.csv")), &trace.to_csv())?);
    }
    Ok(written)
}

pub fn load_summary(dir: &Path) -> Result<Summary> {
    load_json(&dir.join(SUMMARY_FILE))
}

pub fn load_verdicts(dir: &Path) -> Result<Vec<VerificationVerdict>> {
    load_json(&dir.join(VERDICTS_FILE))
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| LabError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Human-readable tables: one block per suite, detectors as rows,
/// scenarios as columns, AUROC in percent.
pub fn render_summary(summary: &Summary, verdicts: &[VerificationVerdict]) -> String {
    let mut out = String::new();
    let mut suites: Vec<&str> = Vec::new();
    for c in &summary.cells {
        if !suites.contains(&c.suite.as_str()) {
            suites.push(&c.suite);
        }
    }
    for suite in suites {
        let cells: Vec<&SummaryCell> = summary.cells.iter().filter(|c| c.suite == suite).collect();
        let mut scenarios: Vec<&str> = Vec::new();
        let mut detectors: Vec<&str> = Vec::new();
        for c in &cells {
            if !scenarios.contains(&c.scenario.as_str()) {
                scenarios.push(&c.scenario);
            }
            if !detectors.contains(&c.detector.as_str()) {
                detectors.push(&c.detector);
            }
        }
        let width = scenarios.iter().map(|s| s.len()).max().unwrap_or(0).max(14);
        let _ = writeln!(out, "== {suite} (AUROC %, mean ± std over seeds) ==");
        let _ = write!(out, "{:<10}", "detector");
        for s in &scenarios {
            let _ = write!(out, " {s:>width$}");
        }
        out.push('\n');
        for d in &detectors {
            let _ = write!(out, "{d:<10}");
            for s in &scenarios {
                let text = cells
                    .iter()
                    .find(|c| c.scenario == *s && c.detector == *d)
                    .map(|c| match c.std {
                        Some(std) => format!("{:.1} ± {:.1}", 100.0 * c.mean, 100.0 * std),
                        None => format!("{:.1}", 100.0 * c.mean),
                    })
                    .unwrap_or_default();
                let _ = write!(out, " {text:>width$}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    if !verdicts.is_empty() {
        let passed = verdicts.iter().filter(|v| v.pass).count();
        let _ = writeln!(out, "== verdicts: {passed}/{} pass ==", verdicts.len());
        for v in verdicts {
            let _ = writeln!(out, "{v}");
        }
    }
    out
}
