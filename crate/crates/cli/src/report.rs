//! Output artifacts: report.json, coefficients.csv, and per-characteristic
//! plot CSVs.

use std::path::{Path, PathBuf};

use liquid_scorecard::scorecard::{FitResult, PlotSeries};
use serde::{Deserialize, Serialize};

use crate::error::CmdError;

#[derive(Debug, Serialize, Deserialize)]
pub struct Report {
    pub p: usize,
    pub n_dev: usize,
    pub n_val: usize,
    pub beta: f64,
    pub dev_divergence: f64,
    pub val_divergence: Option<f64>,
    pub qp: QpBlock,
    pub kkt: KktBlock,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QpBlock {
    pub status: String,
    pub iterations: usize,
    pub objective: f64,
}

/// KKT residuals of the raw-coefficient solution; `eq_residual` and
/// `ineq_residual` are the constraint residual maxima.
#[derive(Debug, Serialize, Deserialize)]
pub struct KktBlock {
    pub eq_residual: f64,
    pub ineq_residual: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub active: Vec<usize>,
}

pub fn build(fit: &FitResult, n_dev: usize, n_val: usize) -> Report {
    Report {
        p: fit.columns.len(),
        n_dev,
        n_val,
        beta: fit.beta,
        dev_divergence: fit.dev_divergence,
        val_divergence: fit.val_divergence,
        qp: QpBlock {
            status: fit.qp.status.to_string(),
            iterations: fit.qp.iterations,
            objective: fit.qp.objective,
        },
        kkt: KktBlock {
            eq_residual: fit.kkt.eq_residual,
            ineq_residual: fit.kkt.ineq_residual,
            stationarity: fit.kkt.stationarity,
            complementarity: fit.kkt.complementarity,
            active: fit.kkt.active.clone(),
        },
    }
}

pub fn write_report(path: &Path, report: &Report) -> Result<(), CmdError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CmdError::numerical(format!("serializing report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))
}

pub fn write_coefficients(path: &Path, fit: &FitResult) -> Result<(), CmdError> {
    let io_err = |e: csv::Error| CmdError::numerical(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record(["index", "characteristic", "label", "raw", "woe"])
        .map_err(io_err)?;
    for (i, col) in fit.columns.iter().enumerate() {
        writer
            .write_record([
                format!("{}", i + 1),
                col.characteristic.clone(),
                col.label.clone(),
                format!("{}", fit.coeffs_raw[i]),
                format!("{}", fit.coeffs_woe[i]),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct CoeffRow {
    pub index: usize,
    pub characteristic: String,
    pub label: String,
    pub raw: f64,
    pub woe: f64,
}

pub fn read_coefficients(path: &Path) -> Result<Vec<CoeffRow>, CmdError> {
    let usage = |msg: String| CmdError::usage(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| usage(e.to_string()))?;
    let headers = reader.headers().map_err(|e| usage(e.to_string()))?.clone();
    let expected = ["index", "characteristic", "label", "raw", "woe"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(usage(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| usage(e.to_string()))?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let parse_f = |j: usize| -> Result<f64, CmdError> {
            field(j)
                .parse()
                .map_err(|_| usage(format!("row {}: bad number '{}'", i + 2, field(j))))
        };
        rows.push(CoeffRow {
            index: field(0)
                .parse()
                .map_err(|_| usage(format!("row {}: bad index '{}'", i + 2, field(0))))?,
            characteristic: field(1).to_string(),
            label: field(2).to_string(),
            raw: parse_f(3)?,
            woe: parse_f(4)?,
        });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.index != i + 1 {
            return Err(usage(format!(
                "coefficient indices must run 1..p in order, found {} at row {}",
                row.index,
                i + 2
            )));
        }
    }
    Ok(rows)
}

pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

pub fn plot_path(dir: &Path, characteristic: &str) -> PathBuf {
    dir.join(format!("plot_{}.csv", sanitize(characteristic)))
}

pub fn write_plot_csv(path: &Path, series: &PlotSeries) -> Result<(), CmdError> {
    let io_err = |e: csv::Error| CmdError::numerical(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record(["x_step", "y_step", "x_liquid", "y_liquid"])
        .map_err(io_err)?;
    for i in 0..series.x_step.len() {
        writer
            .write_record([
                format!("{}", series.x_step[i]),
                format!("{}", series.y_step[i]),
                format!("{}", series.x_liquid[i]),
                format!("{}", series.y_liquid[i]),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))
}
