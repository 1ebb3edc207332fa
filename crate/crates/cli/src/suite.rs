//! Several presets in one go, with an aggregate pass/fail table.

use std::path::Path;

use anyhow::Result;
use degen_core::presets::ELL_SWEEP;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiments::run;
use crate::output::{num, write_json, Table};

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub label: String,
    pub config: ExperimentConfig,
}

/// One entry per preset name, copying the overrides of `base`. With
/// `ell_sweep`, `test8` and `test9` expand into one entry per sweep value.
pub fn expand(names: &[String], base: &ExperimentConfig, ell_sweep: bool) -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for name in names {
        let cfg = ExperimentConfig {
            preset: name.clone(),
            ..base.clone()
        };
        if ell_sweep && (name == "test8" || name == "test9") {
            for ell in ELL_SWEEP {
                out.push(SuiteEntry {
                    label: format!("{name}_ell{ell}"),
                    config: ExperimentConfig {
                        ell: Some(ell),
                        ..cfg.clone()
                    },
                });
            }
        } else {
            out.push(SuiteEntry {
                label: name.clone(),
                config: cfg,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub label: String,
    pub preset: String,
    pub ell: Option<f64>,
    pub params: Vec<f64>,
    pub cost: Option<f64>,
    pub iterations: Option<usize>,
    /// `None` when the preset has no reference or the run failed.
    pub pass: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn success(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.pass != Some(false) && !r.detail.starts_with("error"))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "label",
            "preset",
            "ell",
            "cost",
            "iterations",
            "params",
            "pass",
            "detail",
        ]);
        for r in &self.rows {
            let params: Vec<String> = r.params.iter().map(|&p| num(p)).collect();
            t.push(vec![
                r.label.clone(),
                r.preset.clone(),
                r.ell.map(num).unwrap_or_default(),
                r.cost.map(num).unwrap_or_default(),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                params.join(" "),
                r.pass.map(|p| p.to_string()).unwrap_or_else(|| "n/a".into()),
                r.detail.clone(),
            ]);
        }
        t
    }
}

fn run_entry(entry: &SuiteEntry, root: &Path) -> SuiteRow {
    let cfg = ExperimentConfig {
        out: root.join(&entry.label),
        ..entry.config.clone()
    };
    match run(&cfg) {
        Ok(s) => {
            let row = s.noiseless().or(s.rows.first());
            SuiteRow {
                label: entry.label.clone(),
                preset: s.preset.clone(),
                ell: Some(s.ell),
                params: row.map(|r| r.params.clone()).unwrap_or_default(),
                cost: row.map(|r| r.cost),
                iterations: row.map(|r| r.iterations),
                pass: s.check.as_ref().map(|c| c.pass),
                detail: s.check.map(|c| c.detail).unwrap_or_else(|| "no reference".into()),
            }
        }
        Err(e) => SuiteRow {
            label: entry.label.clone(),
            preset: entry.config.preset.clone(),
            ell: entry.config.ell,
            params: Vec::new(),
            cost: None,
            iterations: None,
            pass: Some(false),
            detail: format!("error: {e:#}"),
        },
    }
}

/// Runs every entry into `root/<label>` and writes `root/suite.csv` and
/// `root/suite.json`. Entries run one after another unless `jobs > 1`;
/// a failing entry is recorded and the rest still run.
pub fn run_suite(entries: &[SuiteEntry], root: &Path, jobs: usize) -> Result<SuiteReport> {
    let rows = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| entries.par_iter().map(|e| run_entry(e, root)).collect())
    } else {
        entries.iter().map(|e| run_entry(e, root)).collect()
    };
    let report = SuiteReport { rows };
    report.table().write(&root.join("suite.csv"))?;
    write_json(&root.join("suite.json"), &report)?;
    Ok(report)
}
