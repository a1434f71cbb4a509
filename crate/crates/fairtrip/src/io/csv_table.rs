//! Plain record reading shared by the dataset loaders.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// One parsed line: 1-based line number and trimmed fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub line: u64,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Header {
    Present,
    Absent,
    /// A header is present when the first field of the first line is not a number.
    Detect,
}

/// Reads comma-separated records, trimming whitespace around fields and
/// skipping blank lines and lines starting with `comment`.
pub fn read_records(path: &Path, header: Header, comment: Option<u8>) -> Result<(Option<Vec<String>>, Vec<Record>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(comment)
        .from_reader(file);
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        let line = row.position().map_or(0, |p| p.line());
        records.push(Record {
            line,
            fields: row.iter().map(str::to_owned).collect(),
        });
    }
    let has_header = match header {
        Header::Present => true,
        Header::Absent => false,
        Header::Detect => records
            .first()
            .and_then(|r| r.fields.first())
            .is_some_and(|f| f.parse::<f64>().is_err()),
    };
    let names = if has_header && !records.is_empty() {
        Some(records.remove(0).fields)
    } else {
        None
    };
    Ok((names, records))
}

/// Markers treated as a missing value.
pub fn is_missing(field: &str) -> bool {
    matches!(field, "" | "?" | "NA" | "na" | "N/A" | "nan" | "NaN" | ".")
}

pub fn parse_number(field: &str, path: &Path, line: u64, column: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Data(format!(
            "{}:{line}: column `{column}`: `{field}` is not a number",
            path.display()
        ))),
    }
}
