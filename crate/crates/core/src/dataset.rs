//! In-memory tabular data: raw typed tables, their numeric encoding, the
//! counterfactual flip of the sensitive column and stratified splitting.
//!
//! Parsing files into a [`RawTable`] happens in the `fairtrip` crate; by the
//! time a table reaches this module the target and sensitive columns are
//! already canonicalized to numeric 0/1.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::matrix::Matrix;
use crate::{math, seeded_rng, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
}

/// A typed table with a designated binary target and binary sensitive column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<Value>>,
    target: usize,
    sensitive: usize,
    /// Rows discarded by the loader because of missing values.
    pub dropped_rows: usize,
}

impl RawTable {
    /// Validates the schema and every row.
    ///
    /// The target and sensitive columns must be numeric and hold only 0 or 1.
    pub fn new(
        columns: Vec<ColumnSpec>,
        rows: Vec<Vec<Value>>,
        target_column: &str,
        sensitive_column: &str,
    ) -> Result<Self, Error> {
        let find = |name: &str| {
            columns
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown column `{name}`")))
        };
        let target = find(target_column)?;
        let sensitive = find(sensitive_column)?;
        if target == sensitive {
            return Err(Error::InvalidArgument(
                "target and sensitive column must differ".into(),
            ));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    what: "table row",
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (spec, value) in columns.iter().zip(row) {
                match (spec.kind, value) {
                    (ColumnKind::Numeric, Value::Num(v)) if v.is_finite() => {}
                    (ColumnKind::Categorical, Value::Cat(_)) => {}
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "row {r}: value {value:?} does not match column `{}` ({:?})",
                            spec.name, spec.kind
                        )))
                    }
                }
            }
        }
        for idx in [target, sensitive] {
            let spec = &columns[idx];
            if spec.kind != ColumnKind::Numeric {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` must be canonicalized to numeric 0/1",
                    spec.name
                )));
            }
            for row in &rows {
                if let Value::Num(v) = row[idx] {
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::NotBinary {
                            column: spec.name.clone(),
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(RawTable {
            columns,
            rows,
            target,
            sensitive,
            dropped_rows: 0,
        })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn target_column(&self) -> &str {
        &self.columns[self.target].name
    }

    pub fn sensitive_column(&self) -> &str {
        &self.columns[self.sensitive].name
    }

    fn binary(&self, row: usize, col: usize) -> u8 {
        match self.rows[row][col] {
            Value::Num(1.0) => 1,
            _ => 0,
        }
    }

    /// Target labels as 0/1.
    pub fn target_values(&self) -> Vec<u8> {
        (0..self.len()).map(|r| self.binary(r, self.target)).collect()
    }

    /// Sensitive attribute as 0/1.
    pub fn sensitive_values(&self) -> Vec<u8> {
        (0..self.len()).map(|r| self.binary(r, self.sensitive)).collect()
    }
}

/// Numeric view of a table: features in `[0, 1]`, labels, sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub features: Matrix,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    /// Column of `features` holding `s`.
    pub sensitive_index: usize,
    pub column_names: Vec<String>,
}

impl EncodedDataset {
    /// Checks shapes and the `[0, 1]` / binary invariants.
    pub fn new(
        features: Matrix,
        y: Vec<u8>,
        s: Vec<u8>,
        sensitive_index: usize,
        column_names: Vec<String>,
    ) -> Result<Self, Error> {
        let n = features.rows();
        if n == 0 || features.cols() == 0 {
            return Err(Error::TooFewSamples { needed: 1, found: n });
        }
        for (what, len) in [("labels", y.len()), ("sensitive values", s.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: len,
                });
            }
        }
        if column_names.len() != features.cols() {
            return Err(Error::DimensionMismatch {
                what: "column names",
                expected: features.cols(),
                found: column_names.len(),
            });
        }
        if sensitive_index >= features.cols() {
            return Err(Error::InvalidArgument(format!(
                "sensitive index {sensitive_index} out of range"
            )));
        }
        if let Some(&v) = features.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "feature value {v} outside [0, 1]"
            )));
        }
        for (i, row) in features.iter_rows().enumerate() {
            if y[i] > 1 || s[i] > 1 || row[sensitive_index] != f64::from(s[i]) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: labels must be 0/1 and the sensitive column must equal s"
                )));
            }
        }
        Ok(EncodedDataset {
            features,
            y,
            s,
            sensitive_index,
            column_names,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of input features `K`.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Rows at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            features: self.features.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            s: indices.iter().map(|&i| self.s[i]).collect(),
            sensitive_index: self.sensitive_index,
            column_names: self.column_names.clone(),
        }
    }
}

/// One-hot encodes categoricals, min-max scales numerics and drops the target.
///
/// Columns follow schema order; one-hot categories are sorted
/// lexicographically and named `{column}_{category}`. The sensitive column
/// stays a single 0/1 column. A numeric column whose minimum equals its
/// maximum encodes to 0.
pub fn encode(raw: &RawTable) -> Result<EncodedDataset, Error> {
    if raw.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }

    enum Plan {
        Scale { col: usize, min: f64, range: f64 },
        OneHot { col: usize, categories: Vec<String> },
        Passthrough { col: usize },
    }

    let mut plans = Vec::new();
    let mut names = Vec::new();
    let mut sensitive_index = 0;
    for (col, spec) in raw.columns.iter().enumerate() {
        if col == raw.target {
            continue;
        }
        if col == raw.sensitive {
            sensitive_index = names.len();
            names.push(spec.name.clone());
            plans.push(Plan::Passthrough { col });
            continue;
        }
        match spec.kind {
            ColumnKind::Numeric => {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for row in &raw.rows {
                    if let Value::Num(v) = row[col] {
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
                names.push(spec.name.clone());
                plans.push(Plan::Scale {
                    col,
                    min,
                    range: max - min,
                });
            }
            ColumnKind::Categorical => {
                let set: BTreeSet<&str> = raw
                    .rows
                    .iter()
                    .filter_map(|row| match &row[col] {
                        Value::Cat(c) => Some(c.as_str()),
                        Value::Num(_) => None,
                    })
                    .collect();
                let categories: Vec<String> = set.into_iter().map(String::from).collect();
                names.extend(categories.iter().map(|c| format!("{}_{}", spec.name, c)));
                plans.push(Plan::OneHot { col, categories });
            }
        }
    }

    let width = names.len();
    if width == 0 {
        return Err(Error::InvalidArgument("no feature columns".into()));
    }
    let mut features = Matrix::zeros(raw.len(), width);
    for (r, row) in raw.rows.iter().enumerate() {
        let out = features.row_mut(r);
        let mut at = 0;
        for plan in &plans {
            match plan {
                Plan::Scale { col, min, range } => {
                    let Value::Num(v) = row[*col] else {
                        unreachable!("validated numeric column")
                    };
                    out[at] = if *range > 0.0 { (v - min) / range } else { 0.0 };
                    at += 1;
                }
                Plan::Passthrough { col } => {
                    let Value::Num(v) = row[*col] else {
                        unreachable!("validated numeric column")
                    };
                    out[at] = v;
                    at += 1;
                }
                Plan::OneHot { col, categories } => {
                    if let Value::Cat(c) = &row[*col] {
                        // categories came from this very column, so the search succeeds
                        if let Ok(k) = categories.binary_search(c) {
                            out[at + k] = 1.0;
                        }
                    }
                    at += categories.len();
                }
            }
        }
    }

    EncodedDataset::new(
        features,
        raw.target_values(),
        raw.sensitive_values(),
        sensitive_index,
        names,
    )
}

/// Returns `row` with only the sensitive column replaced by `1 - value`.
pub fn counterfactual_flip(row: &[f64], sensitive_index: usize) -> Result<Vec<f64>, Error> {
    let mut out = row.to_vec();
    flip_in_place(&mut out, sensitive_index)?;
    Ok(out)
}

/// In-place form of [`counterfactual_flip`].
pub fn flip_in_place(row: &mut [f64], sensitive_index: usize) -> Result<(), Error> {
    let len = row.len();
    let v = row.get_mut(sensitive_index).ok_or(Error::DimensionMismatch {
        what: "sensitive index",
        expected: len,
        found: sensitive_index,
    })?;
    if *v != 0.0 && *v != 1.0 {
        return Err(Error::NotBinary {
            column: "sensitive".into(),
            value: *v,
        });
    }
    *v = 1.0 - *v;
    Ok(())
}

/// Disjoint train/test partition of an [`EncodedDataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    /// Row indices into the source dataset, ascending.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Indices of each (y, s) stratum, in order (0,0), (0,1), (1,0), (1,1).
fn strata(data: &EncodedDataset) -> [Vec<usize>; 4] {
    let mut out: [Vec<usize>; 4] = Default::default();
    for i in 0..data.len() {
        out[usize::from(data.y[i]) * 2 + usize::from(data.s[i])].push(i);
    }
    out
}

/// Per-stratum quotas summing to `round(total * fraction)`, by largest remainder.
fn allocate(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let wanted = math::round(total as f64 * fraction) as usize;
    let exact: Vec<f64> = sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut quota: Vec<usize> = exact.iter().map(|&e| math::floor(e) as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // stable sort keeps stratum order among equal remainders
    order.sort_by(|&a, &b| {
        let ra = exact[a] - quota[a] as f64;
        let rb = exact[b] - quota[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut missing = wanted.saturating_sub(quota.iter().sum());
    for &k in order.iter().cycle().take(4 * sizes.len()) {
        if missing == 0 {
            break;
        }
        if quota[k] < sizes[k] {
            quota[k] += 1;
            missing -= 1;
        }
    }
    quota
}

/// Picks a stratified random sample of each stratum; returns (chosen, rest), ascending.
fn stratified_pick(
    data: &EncodedDataset,
    fraction: f64,
    seed: u64,
    min_stratum: usize,
) -> Result<(Vec<usize>, Vec<usize>), Error> {
    let mut groups = strata(data);
    for (k, g) in groups.iter().enumerate() {
        if !g.is_empty() && g.len() < min_stratum {
            return Err(Error::StratumTooSmall {
                y: (k / 2) as u8,
                s: (k % 2) as u8,
                rows: g.len(),
            });
        }
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let quota = allocate(&sizes, fraction);
    let mut rng = seeded_rng(seed);
    let mut chosen = Vec::new();
    let mut rest = Vec::new();
    for (group, q) in groups.iter_mut().zip(quota) {
        group.shuffle(&mut rng);
        chosen.extend_from_slice(&group[..q]);
        rest.extend_from_slice(&group[q..]);
    }
    chosen.sort_unstable();
    rest.sort_unstable();
    Ok((chosen, rest))
}

/// Seeded split stratified on the joint (y, s) value.
///
/// The test side holds `round(N * test_fraction)` rows. Empty strata are
/// allowed; a stratum with a single row cannot be divided and is an error.
pub fn split(data: &EncodedDataset, test_fraction: f64, seed: u64) -> Result<DataSplit, Error> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let (test_indices, train_indices) = stratified_pick(data, test_fraction, seed, 2)?;
    if train_indices.is_empty() || test_indices.is_empty() {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: data.len(),
        });
    }
    Ok(DataSplit {
        train: data.subset(&train_indices),
        test: data.subset(&test_indices),
        train_indices,
        test_indices,
        seed,
    })
}

/// Stratified random subsample of `max_rows` rows; the full dataset if it is
/// already small enough. Row order is preserved.
pub fn subsample(data: &EncodedDataset, max_rows: usize, seed: u64) -> Result<EncodedDataset, Error> {
    if max_rows == 0 {
        return Err(Error::InvalidArgument("max_rows must be positive".into()));
    }
    if max_rows >= data.len() {
        return Ok(data.clone());
    }
    let fraction = max_rows as f64 / data.len() as f64;
    let (chosen, _) = stratified_pick(data, fraction, seed, 0)?;
    Ok(data.subset(&chosen))
}
