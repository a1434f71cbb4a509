//! UCI Adult census income files (`adult.data`, `adult.test`).

use std::path::{Path, PathBuf};

use fairtrip_core::dataset::{ColumnKind, ColumnSpec, RawTable, Value};

use super::csv_table::{parse_number, read_records, Header};
use crate::error::{data_error, Error, Result};

pub const TARGET: &str = "income";

/// Column names and kinds in file order.
pub const SCHEMA: [(&str, ColumnKind); 15] = [
    ("age", ColumnKind::Numeric),
    ("workclass", ColumnKind::Categorical),
    ("fnlwgt", ColumnKind::Numeric),
    ("education", ColumnKind::Categorical),
    ("education-num", ColumnKind::Numeric),
    ("marital-status", ColumnKind::Categorical),
    ("occupation", ColumnKind::Categorical),
    ("relationship", ColumnKind::Categorical),
    ("race", ColumnKind::Categorical),
    ("sex", ColumnKind::Categorical),
    ("capital-gain", ColumnKind::Numeric),
    ("capital-loss", ColumnKind::Numeric),
    ("hours-per-week", ColumnKind::Numeric),
    ("native-country", ColumnKind::Categorical),
    (TARGET, ColumnKind::Categorical),
];

/// Files making up the dataset at `path`: a directory holding `adult.data`
/// (and optionally `adult.test`), or a single file.
pub fn adult_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        if !path.exists() {
            return Err(Error::Data(format!("{}: no such file or directory", path.display())));
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let train = path.join("adult.data");
    if !train.exists() {
        return Err(Error::Data(format!("{}: adult.data not found", path.display())));
    }
    let test = path.join("adult.test");
    Ok(if test.exists() { vec![train, test] } else { vec![train] })
}

/// `s = 1` marks the group the probes try to recover: women for `sex`,
/// non-white people for `race`.
fn sensitive_bit(column: &str, value: &str) -> Option<f64> {
    match (column, value) {
        ("sex", "Female") => Some(1.0),
        ("sex", "Male") => Some(0.0),
        ("race", "White") => Some(0.0),
        ("race", _) => Some(1.0),
        _ => None,
    }
}

fn income_bit(value: &str) -> Option<f64> {
    match value.trim_end_matches('.') {
        ">50K" => Some(1.0),
        "<=50K" => Some(0.0),
        _ => None,
    }
}

/// Loads Adult with `sensitive` (`sex` or `race`) as the sensitive column.
///
/// Lines starting with `|` are skipped, a header line is detected and
/// ignored, and rows holding a `?` are dropped and counted.
pub fn load_adult(path: &Path, sensitive: &str) -> Result<RawTable> {
    if !matches!(sensitive, "sex" | "race") {
        return Err(Error::Config(format!(
            "unknown sensitive column `{sensitive}` for adult (expected sex or race)"
        )));
    }
    let mut rows = Vec::new();
    let mut dropped = 0;
    for file in adult_files(path)? {
        let (_, records) = read_records(&file, Header::Detect, Some(b'|'))?;
        'rows: for rec in records {
            if rec.fields.len() != SCHEMA.len() {
                return Err(Error::Data(format!(
                    "{}:{}: expected {} fields, found {}",
                    file.display(),
                    rec.line,
                    SCHEMA.len(),
                    rec.fields.len()
                )));
            }
            let mut row = Vec::with_capacity(SCHEMA.len());
            for ((name, kind), field) in SCHEMA.iter().zip(&rec.fields) {
                if field == "?" {
                    dropped += 1;
                    continue 'rows;
                }
                let bad = || Error::Data(format!("{}:{}: unexpected {name} `{field}`", file.display(), rec.line));
                let value = if *name == TARGET {
                    Value::Num(income_bit(field).ok_or_else(bad)?)
                } else if *name == sensitive {
                    Value::Num(sensitive_bit(name, field).ok_or_else(bad)?)
                } else if *kind == ColumnKind::Numeric {
                    Value::Num(parse_number(field, &file, rec.line, name)?)
                } else {
                    Value::Cat(field.clone())
                };
                row.push(value);
            }
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no usable rows", path.display())));
    }
    let columns = SCHEMA
        .iter()
        .map(|&(name, kind)| {
            if name == TARGET || name == sensitive || kind == ColumnKind::Numeric {
                ColumnSpec::numeric(name)
            } else {
                ColumnSpec::categorical(name)
            }
        })
        .collect();
    let mut table = RawTable::new(columns, rows, TARGET, sensitive).map_err(data_error)?;
    table.dropped_rows = dropped;
    Ok(table)
}
