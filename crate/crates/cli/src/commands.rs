//! Command implementations. Logging goes to standard error; data goes to
//! files or standard output.

use std::path::Path;

use liquid_scorecard::divstats;
use liquid_scorecard::scorecard::{self, ColumnKind, DataSet, ScorecardSpec};
use liquid_scorecard::splines::{self, KnotVector, SplineOrder};
use liquid_scorecard::DVector;
use serde_json::json;

use crate::error::CmdError;
use crate::report::{self, CoeffRow};
use crate::spec_file;
use crate::synth;

fn split_counts(spec: &ScorecardSpec, data: &DataSet) -> Result<(Vec<usize>, Vec<usize>), CmdError> {
    match &spec.split {
        Some(rule) => scorecard::split(data, rule).map_err(CmdError::from_core),
        None => Ok(((0..data.n()).collect(), Vec::new())),
    }
}

pub fn cmd_fit(
    spec_path: &Path,
    data_path: &Path,
    out_dir: &Path,
    json: bool,
) -> Result<(), CmdError> {
    let (spec, labels_cfg) = spec_file::load(spec_path)?.into_spec()?;
    let data = crate::data::read_data(data_path)?;
    let labels = crate::data::labels_from(&data, &labels_cfg)?;
    let fit = scorecard::fit(&spec, &data, &labels).map_err(CmdError::from_core)?;
    let (dev_rows, val_rows) = split_counts(&spec, &data)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CmdError::numerical(format!("{}: {e}", out_dir.display())))?;
    report::write_coefficients(&out_dir.join("coefficients.csv"), &fit)?;
    let rep = report::build(&fit, dev_rows.len(), val_rows.len());
    report::write_report(&out_dir.join("report.json"), &rep)?;
    for plot in &fit.plot_series {
        report::write_plot_csv(&report::plot_path(out_dir, &plot.characteristic), &plot.series)?;
    }

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rep)
                .map_err(|e| CmdError::numerical(format!("serializing report: {e}")))?
        );
    } else {
        eprintln!(
            "fit: {} coefficients, dev divergence {:.6}, qp {} in {} iterations",
            rep.p, rep.dev_divergence, rep.qp.status, rep.qp.iterations
        );
        if let Some(v) = rep.val_divergence {
            eprintln!("fit: validation divergence {v:.6} on {} records", rep.n_val);
        }
        eprintln!("fit: artifacts in {}", out_dir.display());
    }
    if rep.qp.status != "OPTIMAL" {
        return Err(CmdError::numerical(format!(
            "qp_solve: finished with status {} after {} iterations; \
             artifacts were written for diagnosis",
            rep.qp.status, rep.qp.iterations
        )));
    }
    Ok(())
}

/// Checks a stored coefficient file against the spec's column layout.
fn align_coefficients(
    rows: &[CoeffRow],
    columns: &[scorecard::ColumnInfo],
    path: &Path,
) -> Result<DVector<f64>, CmdError> {
    if rows.len() != columns.len() {
        return Err(CmdError::usage(format!(
            "{}: {} coefficients for a spec with p = {}",
            path.display(),
            rows.len(),
            columns.len()
        )));
    }
    for (row, col) in rows.iter().zip(columns) {
        if row.characteristic != col.characteristic || row.label != col.label {
            return Err(CmdError::usage(format!(
                "{}: coefficient {} is ({}, {}), spec expects ({}, {})",
                path.display(),
                row.index,
                row.characteristic,
                row.label,
                col.characteristic,
                col.label
            )));
        }
    }
    Ok(DVector::from_iterator(rows.len(), rows.iter().map(|r| r.woe)))
}

pub fn cmd_validate(
    spec_path: &Path,
    data_path: &Path,
    coeffs_path: &Path,
    json: bool,
) -> Result<(), CmdError> {
    let (spec, labels_cfg) = spec_file::load(spec_path)?.into_spec()?;
    let data = crate::data::read_data(data_path)?;
    let labels = crate::data::labels_from(&data, &labels_cfg)?;
    let design = scorecard::build_design_matrix(&spec, &data).map_err(CmdError::from_core)?;
    let rows = report::read_coefficients(coeffs_path)?;
    let s = align_coefficients(&rows, &design.columns, coeffs_path)?;

    let (dev_rows, val_rows) = split_counts(&spec, &data)?;
    let divergence_on = |selected: &[usize]| -> Result<f64, CmdError> {
        let x = design.values.select_rows(selected.iter());
        let y: Vec<bool> = selected.iter().map(|&r| labels[r]).collect();
        divstats::score_divergence(&s, &x, &y).map_err(CmdError::from_core)
    };
    let dev = divergence_on(&dev_rows)?;
    let val = if val_rows.is_empty() { None } else { Some(divergence_on(&val_rows)?) };

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "dev_divergence": dev,
                "val_divergence": val,
                "n_dev": dev_rows.len(),
                "n_val": val_rows.len(),
            }))
            .map_err(|e| CmdError::numerical(format!("serializing: {e}")))?
        );
    } else {
        println!("dev_divergence {dev}");
        match val {
            Some(v) => println!("val_divergence {v}"),
            None => println!("val_divergence none"),
        }
    }
    Ok(())
}

pub fn cmd_plot(
    spec_path: &Path,
    coeffs_path: &Path,
    out_dir: &Path,
    points: usize,
) -> Result<(), CmdError> {
    let (spec, _) = spec_file::load(spec_path)?.into_spec()?;
    scorecard::validate_spec(&spec).map_err(CmdError::from_core)?;
    let columns = scorecard::design_columns(&spec);
    let rows = report::read_coefficients(coeffs_path)?;
    align_coefficients(&rows, &columns, coeffs_path)?;

    let liquid_chars: Vec<_> = spec
        .characteristics
        .iter()
        .filter(|ch| ch.liquid.is_some())
        .collect();
    if liquid_chars.is_empty() {
        eprintln!("plot: no liquid characteristics in spec; nothing to do");
        return Ok(());
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CmdError::numerical(format!("{}: {e}", out_dir.display())))?;
    for ch in liquid_chars {
        let start = columns
            .iter()
            .position(|c| c.characteristic == ch.name && c.kind == ColumnKind::Basis)
            .expect("liquid characteristic has basis columns");
        let len = columns[start..]
            .iter()
            .take_while(|c| c.characteristic == ch.name && c.kind == ColumnKind::Basis)
            .count();
        let coeffs: Vec<f64> = rows[start..start + len].iter().map(|r| r.woe).collect();
        let weights = ch.liquid.as_ref().and_then(|l| l.comparison_weights.as_deref());
        let series =
            scorecard::plot_series(ch, weights, &coeffs, points).map_err(CmdError::from_core)?;
        let path = report::plot_path(out_dir, &ch.name);
        report::write_plot_csv(&path, &series)?;
        eprintln!("plot: wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_basis(
    knots_arg: &str,
    order_raw: u8,
    points: usize,
    out: Option<&Path>,
    json: bool,
) -> Result<(), CmdError> {
    let mut values = Vec::new();
    for token in knots_arg.split(',') {
        let v: f64 = token
            .trim()
            .parse()
            .map_err(|_| CmdError::usage(format!("bad knot value '{}'", token.trim())))?;
        values.push(v);
    }
    let knots = KnotVector::new(values).map_err(CmdError::from_core)?;
    let order = SplineOrder::try_from(order_raw).map_err(CmdError::from_core)?;
    let xs = scorecard::axis_points(false, points, &knots).map_err(CmdError::from_core)?;
    let block = splines::basis_block(&xs, &knots, order).map_err(CmdError::from_core)?;
    let q = block.values.ncols();

    if json {
        let basis: Vec<Vec<f64>> = (0..xs.len())
            .map(|i| block.values.row(i).iter().cloned().collect())
            .collect();
        let doc = json!({
            "knots": knots.as_slice(),
            "order": order.as_usize(),
            "x": xs,
            "basis": basis,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc)
                .map_err(|e| CmdError::numerical(format!("serializing: {e}")))?
        );
        return Ok(());
    }

    let mut text = String::from("x");
    for j in 0..q {
        text.push_str(&format!(",b{}", j + 1));
    }
    text.push('\n');
    for (i, x) in xs.iter().enumerate() {
        text.push_str(&format!("{x}"));
        for j in 0..q {
            text.push_str(&format!(",{}", block.values[(i, j)]));
        }
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_gen(config_path: &Path, out: &Path) -> Result<(), CmdError> {
    let cfg = synth::load_config(config_path)?;
    let synthetic = synth::generate(&cfg)?;
    synth::write(&synthetic, out)?;
    eprintln!(
        "gen: wrote {} records, {} columns to {}",
        synthetic.rows.len(),
        synthetic.headers.len(),
        out.display()
    );
    Ok(())
}
