//! Summaries of a results directory: segment-count groups with boxplot
//! statistics, and a per-dataset table closed by Mean and STD rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use graphseg_core::eval::{group_by_segments, mean, std_dev, EvalRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::write_csv;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub method: String,
    pub num_segments: usize,
    pub runs: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: usize,
}

/// One dataset (or the Mean / STD summary) for one method, averaged over
/// seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub dataset: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub groups: Vec<GroupRow>,
    pub table: Vec<TableRow>,
}

fn by_method(records: &[EvalRecord]) -> BTreeMap<String, Vec<EvalRecord>> {
    let mut out: BTreeMap<String, Vec<EvalRecord>> = BTreeMap::new();
    for r in records {
        let key = if r.transform == "window" { r.method.clone() } else { format!("{}+{}", r.method, r.transform) };
        out.entry(key).or_default().push(r.clone());
    }
    out
}

pub fn build(records: &[EvalRecord]) -> Report {
    let mut report = Report::default();
    for (method, recs) in by_method(records) {
        for g in group_by_segments(&recs) {
            report.groups.push(GroupRow {
                method: method.clone(),
                num_segments: g.num_segments,
                runs: g.count,
                mean_f1: g.mean_f1,
                std_f1: g.std_f1,
                median: g.boxplot.median,
                q1: g.boxplot.q1,
                q3: g.boxplot.q3,
                whisker_low: g.boxplot.whisker_low,
                whisker_high: g.boxplot.whisker_high,
                outliers: g.boxplot.outliers.len(),
            });
        }
        // datasets in first-seen order
        let mut order: Vec<&str> = Vec::new();
        let mut per: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
        for r in &recs {
            if !per.contains_key(r.dataset.as_str()) {
                order.push(&r.dataset);
            }
            per.entry(&r.dataset).or_default().push(r);
        }
        let rows: Vec<TableRow> = order
            .iter()
            .map(|d| {
                let rs = &per[d];
                let avg = |f: fn(&EvalRecord) -> f64| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
                TableRow {
                    method: method.clone(),
                    dataset: d.to_string(),
                    precision: avg(|r| r.metrics.weighted.precision),
                    recall: avg(|r| r.metrics.weighted.recall),
                    f1: avg(|r| r.metrics.weighted.f1),
                }
            })
            .collect();
        let col = |f: fn(&TableRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        let (p, r, f) = (col(|t| t.precision), col(|t| t.recall), col(|t| t.f1));
        let summary = |name: &str, g: fn(&[f64]) -> f64| TableRow {
            method: method.clone(),
            dataset: name.into(),
            precision: g(&p),
            recall: g(&r),
            f1: g(&f),
        };
        let (m, s) = (summary("Mean", mean), summary("STD", std_dev));
        report.table.extend(rows);
        report.table.push(m);
        report.table.push(s);
    }
    report
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Fixed-width text rendering of the per-dataset table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for row in &self.table {
            if row.method != current {
                current = &row.method;
                let _ = writeln!(out, "\n{current}\n{:<32} {:>9} {:>9} {:>9}", "Dataset", "Precision", "Recall", "F1");
            }
            let _ = writeln!(out, "{:<32} {:>9.5} {:>9.5} {:>9.5}", row.dataset, row.precision, row.recall, row.f1);
        }
        out
    }
}

/// Reads `records.json` from `dir` and writes `groups.csv` and `table.csv`
/// next to it. A missing or empty record file gives an empty report.
pub fn report_dir(dir: &Path) -> Result<Report> {
    let path = dir.join("records.json");
    if !path.exists() {
        log::warn!("{}: no records.json, nothing to report", dir.display());
        return Ok(Report::default());
    }
    let bytes = fs::read(&path).map_err(Error::io(&path))?;
    let records: Vec<EvalRecord> = serde_json::from_slice(&bytes)?;
    if records.is_empty() {
        log::warn!("{}: no records, nothing to report", path.display());
    }
    let report = build(&records);
    write_csv(&dir.join("groups.csv"), &report.groups)?;
    write_csv(&dir.join("table.csv"), &report.table)?;
    Ok(report)
}
