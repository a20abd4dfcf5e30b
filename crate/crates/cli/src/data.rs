//! CSV ingestion and emission. Comma separated, mandatory header row,
//! plain numerals with `.` decimal point; sentinel codes are ordinary
//! numbers.

use std::path::Path;

use liquid_scorecard::scorecard::DataSet;
use liquid_scorecard::DMatrix;

use crate::error::CmdError;
use crate::spec_file::LabelsSpec;

pub fn read_data(path: &Path) -> Result<DataSet, CmdError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(CmdError::usage(format!("{}: no columns", path.display())));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CmdError::usage(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(CmdError::usage(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 2,
                record.len(),
                headers.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CmdError::usage(format!(
                    "{}: row {}, column '{}': not a number: '{field}'",
                    path.display(),
                    i + 2,
                    headers[j]
                ))
            })?;
            rows.push(v);
        }
        n += 1;
    }
    let values = DMatrix::from_row_slice(n, headers.len(), &rows);
    DataSet::new(headers, values).map_err(CmdError::from_core)
}

/// Good/bad labels from the configured column: a record is Good when its
/// label value equals one of `good_values`.
pub fn labels_from(data: &DataSet, labels: &LabelsSpec) -> Result<Vec<bool>, CmdError> {
    let col = data
        .column_index(&labels.column)
        .map_err(CmdError::from_core)?;
    Ok((0..data.n())
        .map(|r| labels.good_values.contains(&data.value(r, col)))
        .collect())
}

/// Writes rows with shortest round-trip float formatting.
pub fn write_csv(path: &Path, headers: &[String], rows: &[Vec<f64>]) -> Result<(), CmdError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))?;
    writer
        .write_record(headers)
        .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))?;
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writer
            .write_record(&fields)
            .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CmdError::numerical(format!("{}: {e}", path.display())))
}
