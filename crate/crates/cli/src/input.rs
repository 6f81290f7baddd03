//! CSV readers for datasets, null pools, null tables and e-value panels.

use std::path::Path;

use claw_core::{Covariate, Dataset, TestUnit};
use csv::{ReaderBuilder, StringRecord};

use crate::error::{CliError, CliResult};

fn reader(path: &Path, headers: bool) -> CliResult<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Parse {
        file: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn records(path: &Path, headers: bool) -> CliResult<(Option<StringRecord>, Vec<StringRecord>)> {
    let mut rdr = reader(path, headers)?;
    let header = if headers {
        Some(rdr.headers().map_err(|e| csv_error(path, e))?.clone())
    } else {
        None
    };
    let rows = rdr
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok((header, rows))
}

fn number(path: &Path, rec: &StringRecord, col: usize, name: &str) -> CliResult<f64> {
    let cell = rec.get(col).unwrap_or("");
    cell.parse::<f64>().map_err(|_| CliError::Parse {
        file: path.to_path_buf(),
        line: line_of(rec),
        message: format!("column `{name}`: cannot parse `{cell}` as a number"),
    })
}

fn check_width(path: &Path, rec: &StringRecord, expected: usize) -> CliResult<()> {
    if rec.len() != expected {
        return Err(CliError::RaggedRow {
            file: path.to_path_buf(),
            line: line_of(rec),
            expected,
            found: rec.len(),
        });
    }
    Ok(())
}

fn is_numeric_row(rec: &StringRecord) -> bool {
    rec.iter().all(|c| c.parse::<f64>().is_ok())
}

/// Reads `t`, `t_cal` and either a categorical `s` column or real `s1..sd`.
/// Other columns are ignored. Without `t_cal` (allowed when
/// `require_t_cal` is false) calibration values are set to zero.
pub fn read_dataset(path: &Path, require_t_cal: bool) -> CliResult<Dataset> {
    let (header, rows) = records(path, true)?;
    let header = header.unwrap_or_default();
    let find = |name: &str| header.iter().position(|h| h == name);
    let missing = |column: &str| CliError::MissingColumn {
        file: path.to_path_buf(),
        column: column.to_string(),
    };
    let t_col = find("t").ok_or_else(|| missing("t"))?;
    let cal_col = match find("t_cal") {
        Some(c) => Some(c),
        None if require_t_cal => return Err(missing("t_cal")),
        None => None,
    };
    let label_col = find("s");
    let mut real_cols = Vec::new();
    while let Some(c) = find(&format!("s{}", real_cols.len() + 1)) {
        real_cols.push(c);
    }
    if label_col.is_none() && real_cols.is_empty() {
        return Err(missing("s"));
    }

    let mut units = Vec::with_capacity(rows.len());
    for rec in &rows {
        check_width(path, rec, header.len())?;
        let t = number(path, rec, t_col, "t")?;
        let t_cal = match cal_col {
            Some(c) => number(path, rec, c, "t_cal")?,
            None => 0.0,
        };
        let s = match label_col {
            Some(c) => Covariate::label(rec.get(c).unwrap_or("")),
            None => Covariate::Real(
                real_cols
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| number(path, rec, c, &format!("s{}", k + 1)))
                    .collect::<CliResult<_>>()?,
            ),
        };
        units.push(TestUnit::new(t, s, t_cal));
    }
    Ok(Dataset::new(units))
}

/// All-numeric CSV with an optional header row (detected when the first row
/// does not parse as numbers).
fn numeric_table(path: &Path) -> CliResult<Vec<(u64, Vec<f64>)>> {
    let (_, rows) = records(path, false)?;
    let skip = usize::from(rows.first().is_some_and(|r| !is_numeric_row(r)));
    let width = rows.get(skip).map_or(0, |r| r.len());
    rows[skip..]
        .iter()
        .map(|rec| {
            check_width(path, rec, width)?;
            let values = (0..rec.len())
                .map(|c| number(path, rec, c, &format!("#{}", c + 1)))
                .collect::<CliResult<Vec<_>>>()?;
            Ok((line_of(rec), values))
        })
        .collect()
}

/// A single column of reals.
pub fn read_column(path: &Path) -> CliResult<Vec<f64>> {
    let rows = numeric_table(path)?;
    if let Some((line, r)) = rows.iter().find(|(_, r)| r.len() != 1) {
        return Err(CliError::RaggedRow {
            file: path.to_path_buf(),
            line: *line,
            expected: 1,
            found: r.len(),
        });
    }
    Ok(rows.into_iter().map(|(_, r)| r[0]).collect())
}

/// One row per hypothesis, one column per source; returns the panel by source.
pub fn read_panel(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let rows = numeric_table(path)?;
    let k = rows.first().map_or(0, |(_, r)| r.len());
    Ok((0..k)
        .map(|j| rows.iter().map(|(_, r)| r[j]).collect())
        .collect())
}

/// Knots `(t, cdf, pdf)` from a CSV with those three named columns.
pub fn read_null_table(path: &Path) -> CliResult<Vec<(f64, f64, f64)>> {
    let (header, rows) = records(path, true)?;
    let header = header.unwrap_or_default();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn {
                file: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let (t, c, d) = (col("t")?, col("cdf")?, col("pdf")?);
    rows.iter()
        .map(|rec| {
            Ok((
                number(path, rec, t, "t")?,
                number(path, rec, c, "cdf")?,
                number(path, rec, d, "pdf")?,
            ))
        })
        .collect()
}
