//! LSAC bar-passage data as CSV with a header row (see `convert-stata` for
//! the original Stata export).
//!
//! Column names vary between exports, so the target and the two
//! demographic columns are looked up through aliases. Every other column is
//! numeric when all its values parse as numbers and categorical otherwise.

use std::path::Path;

use fairtrip_core::dataset::{ColumnSpec, RawTable, Value};

use super::csv_table::{is_missing, read_records, Header};
use crate::error::{data_error, Error, Result};

const TARGET_ALIASES: [&str; 4] = ["pass_bar", "bar_passed", "bar_pass", "bar"];
const RACE_ALIASES: [&str; 4] = ["race", "race1", "white", "ethnicity"];
const SEX_ALIASES: [&str; 4] = ["male", "sex", "gender", "female"];

fn find(names: &[String], aliases: &[&str]) -> Option<usize> {
    aliases
        .iter()
        .find_map(|a| names.iter().position(|n| n.eq_ignore_ascii_case(a)))
}

fn truthy(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" | "passed" | "pass" => Some(true),
        "0" | "0.0" | "false" | "no" | "failed" | "fail" => Some(false),
        _ => None,
    }
}

/// Non-white people get `s = 1`. Text values compare against "white";
/// a `white` indicator column is inverted; other numeric codes follow the
/// LSAC coding where 7 is white.
fn race_bit(column: &str, value: &str) -> Option<f64> {
    if column.eq_ignore_ascii_case("white") {
        return truthy(value).map(|w| f64::from(u8::from(!w)));
    }
    match value.parse::<f64>() {
        Ok(code) if code.is_finite() => Some(f64::from(u8::from(code != 7.0))),
        _ => Some(f64::from(u8::from(!value.eq_ignore_ascii_case("white")))),
    }
}

/// Women get `s = 1`.
fn sex_bit(column: &str, value: &str) -> Option<f64> {
    let lower = value.to_ascii_lowercase();
    let female = match lower.as_str() {
        "female" | "f" | "woman" => Some(true),
        "male" | "m" | "man" => Some(false),
        _ if column.eq_ignore_ascii_case("male") => truthy(value).map(|m| !m),
        _ if column.eq_ignore_ascii_case("female") => truthy(value),
        _ => None,
    }?;
    Some(f64::from(u8::from(female)))
}

/// Loads the bar-passage CSV with `sensitive` (`race` or `sex`) as the
/// sensitive column. Rows with missing values are dropped and counted.
pub fn load_law_school(path: &Path, sensitive: &str) -> Result<RawTable> {
    let aliases: &[&str] = match sensitive {
        "race" => &RACE_ALIASES,
        "sex" => &SEX_ALIASES,
        other => {
            return Err(Error::Config(format!(
                "unknown sensitive column `{other}` for law_school (expected race or sex)"
            )))
        }
    };
    if !path.exists() {
        return Err(Error::Data(format!("{}: no such file", path.display())));
    }
    let (names, records) = read_records(path, Header::Present, None)?;
    let names = names.ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let target = find(&names, &TARGET_ALIASES)
        .ok_or_else(|| Error::Data(format!("{}: no bar-passage column ({TARGET_ALIASES:?})", path.display())))?;
    let sens = find(&names, aliases)
        .ok_or_else(|| Error::Data(format!("{}: no {sensitive} column ({aliases:?})", path.display())))?;

    let mut dropped = 0;
    let mut kept = Vec::new();
    for rec in records {
        if rec.fields.len() != names.len() {
            return Err(Error::Data(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                rec.line,
                names.len(),
                rec.fields.len()
            )));
        }
        if rec.fields.iter().any(|f| is_missing(f)) {
            dropped += 1;
        } else {
            kept.push(rec);
        }
    }
    if kept.is_empty() {
        return Err(Error::Data(format!("{}: no usable rows", path.display())));
    }
    let numeric: Vec<bool> = (0..names.len())
        .map(|c| kept.iter().all(|r| r.fields[c].parse::<f64>().is_ok_and(f64::is_finite)))
        .collect();

    let mut rows = Vec::with_capacity(kept.len());
    for rec in &kept {
        let mut row = Vec::with_capacity(names.len());
        for (c, field) in rec.fields.iter().enumerate() {
            let bad = |what: &str| Error::Data(format!("{}:{}: unexpected {what} `{field}`", path.display(), rec.line));
            row.push(if c == target {
                Value::Num(f64::from(u8::from(truthy(field).ok_or_else(|| bad("bar-passage value"))?)))
            } else if c == sens {
                let bit = if sensitive == "race" { race_bit(&names[c], field) } else { sex_bit(&names[c], field) };
                Value::Num(bit.ok_or_else(|| bad(sensitive))?)
            } else if numeric[c] {
                Value::Num(field.parse().expect("checked numeric"))
            } else {
                Value::Cat(field.clone())
            });
        }
        rows.push(row);
    }
    let columns = names
        .iter()
        .enumerate()
        .map(|(c, n)| {
            if c == target || c == sens || numeric[c] {
                ColumnSpec::numeric(n.as_str())
            } else {
                ColumnSpec::categorical(n.as_str())
            }
        })
        .collect();
    let mut table = RawTable::new(columns, rows, &names[target], &names[sens]).map_err(data_error)?;
    table.dropped_rows = dropped;
    Ok(table)
}
