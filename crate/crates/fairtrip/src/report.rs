//! Text, CSV and JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fairtrip_core::analysis::{ClusterReport, DistanceHistogram, SnapshotSummary};
use fairtrip_core::dataset::{EncodedDataset, RawTable};
use fairtrip_core::probe::{ProbeReport, ProbeScores};
use fairtrip_core::trainer::EpochStats;
use fairtrip_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Data(format!("{}: {e}", path.display()))
}

fn flush(path: &Path, mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Dataset facts written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub rows_used: usize,
    pub features: usize,
    pub sensitive_column: String,
    pub sensitive_index: usize,
    pub target_rate: f64,
    pub sensitive_rate: f64,
    pub target_rate_s0: f64,
    pub target_rate_s1: f64,
}

fn rate(values: impl Iterator<Item = bool>) -> f64 {
    let (hits, n) = values.fold((0usize, 0usize), |(h, n), v| (h + usize::from(v), n + 1));
    if n == 0 {
        f64::NAN
    } else {
        hits as f64 / n as f64
    }
}

impl LoadSummary {
    /// `data` is the encoded table actually used (after any subsampling).
    pub fn new(raw: &RawTable, data: &EncodedDataset) -> Self {
        let pairs = || data.y.iter().zip(&data.s);
        LoadSummary {
            rows_read: raw.len() + raw.dropped_rows,
            rows_dropped: raw.dropped_rows,
            rows_used: data.len(),
            features: data.dim(),
            sensitive_column: raw.sensitive_column().to_owned(),
            sensitive_index: data.sensitive_index,
            target_rate: rate(data.y.iter().map(|&y| y == 1)),
            sensitive_rate: rate(data.s.iter().map(|&s| s == 1)),
            target_rate_s0: rate(pairs().filter(|(_, &s)| s == 0).map(|(&y, _)| y == 1)),
            target_rate_s1: rate(pairs().filter(|(_, &s)| s == 1).map(|(&y, _)| y == 1)),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "rows_read={}\nrows_dropped={}\nrows_used={}\nfeatures={}\nsensitive_column={}\n\
             sensitive_index={}\ntarget_rate={:.6}\nsensitive_rate={:.6}\n\
             target_rate_s0={:.6}\ntarget_rate_s1={:.6}\n",
            self.rows_read,
            self.rows_dropped,
            self.rows_used,
            self.features,
            self.sensitive_column,
            self.sensitive_index,
            self.target_rate,
            self.sensitive_rate,
            self.target_rate_s0,
            self.target_rate_s1,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresJson {
    pub test_auc: Vec<f64>,
    pub train_auc: Vec<f64>,
    pub mean_test_auc: f64,
    pub mean_train_auc: f64,
}

impl From<&ProbeScores> for ScoresJson {
    fn from(s: &ProbeScores) -> Self {
        ScoresJson {
            test_auc: s.test_auc.clone(),
            train_auc: s.train_auc.clone(),
            mean_test_auc: s.mean_test_auc,
            mean_train_auc: s.mean_train_auc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeJson {
    pub seeds: Vec<u64>,
    pub auc_y: f64,
    pub auc_s: f64,
    pub y: ScoresJson,
    pub s: ScoresJson,
}

impl From<&ProbeReport> for ProbeJson {
    fn from(r: &ProbeReport) -> Self {
        ProbeJson {
            seeds: r.seeds.clone(),
            auc_y: r.auc_y(),
            auc_s: r.auc_s(),
            y: (&r.y).into(),
            s: (&r.s).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterJson {
    pub collapsed: bool,
    pub cluster_count: usize,
    pub singletons: usize,
    pub coverage: f64,
    pub threshold: f64,
    pub points: usize,
    pub cluster_sizes: Vec<usize>,
    pub max_intra_distance: Vec<f64>,
    pub diameters: Vec<f64>,
}

impl From<&ClusterReport> for ClusterJson {
    fn from(r: &ClusterReport) -> Self {
        ClusterJson {
            collapsed: r.collapsed,
            cluster_count: r.cluster_count,
            singletons: r.singletons,
            coverage: r.coverage,
            threshold: r.threshold,
            points: r.points,
            cluster_sizes: r.cluster_sizes.clone(),
            max_intra_distance: r.max_intra_distance.clone(),
            diameters: r.diameters.clone(),
        }
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Key-value text; list values are comma-separated, largest cluster first.
pub fn cluster_text(r: &ClusterReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "collapsed={}", r.collapsed);
    let _ = writeln!(out, "cluster_count={}", r.cluster_count);
    let _ = writeln!(out, "singletons={}", r.singletons);
    let _ = writeln!(out, "coverage={}", r.coverage);
    let _ = writeln!(out, "threshold={}", r.threshold);
    let _ = writeln!(out, "points={}", r.points);
    let _ = writeln!(out, "cluster_sizes={}", join(&r.cluster_sizes));
    let _ = writeln!(out, "max_intra_distance={}", join(&r.max_intra_distance));
    let _ = writeln!(out, "diameters={}", join(&r.diameters));
    out
}

/// `bin_lo,bin_hi,count`, one row per bin.
pub fn write_histogram(path: &Path, h: &DistanceHistogram) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record(["bin_lo", "bin_hi", "count"]).map_err(&err)?;
    for (k, count) in h.counts.iter().enumerate() {
        w.write_record([h.bin_edges[k].to_string(), h.bin_edges[k + 1].to_string(), count.to_string()])
            .map_err(&err)?;
    }
    flush(path, w)
}

/// Embeddings as `e0,e1,e2,y,s`.
pub fn write_embeddings(path: &Path, emb: &[Vec3], y: &[u8], s: &[u8]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record(["e0", "e1", "e2", "y", "s"]).map_err(&err)?;
    for ((z, y), s) in emb.iter().zip(y).zip(s) {
        w.write_record([z[0].to_string(), z[1].to_string(), z[2].to_string(), y.to_string(), s.to_string()])
            .map_err(&err)?;
    }
    flush(path, w)
}

/// Reads a file written by [`write_embeddings`].
pub fn read_embeddings(path: &Path) -> Result<(Vec<Vec3>, Vec<u8>, Vec<u8>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let headers = r.headers().map_err(csv_error(path))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["e0", "e1", "e2", "y", "s"] {
        return Err(Error::Data(format!("{}: expected header e0,e1,e2,y,s", path.display())));
    }
    let (mut emb, mut ys, mut ss) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error(path))?;
        let bad = || Error::Data(format!("{}: row {}: malformed", path.display(), k + 2));
        let num = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad);
        let bit = |i: usize| rec.get(i).and_then(|v| v.parse::<u8>().ok()).filter(|&b| b <= 1).ok_or_else(bad);
        emb.push([num(0)?, num(1)?, num(2)?]);
        ys.push(bit(3)?);
        ss.push(bit(4)?);
    }
    Ok((emb, ys, ss))
}

/// One row per sensitive group with its centroid and positive rate, plus
/// the bounding box and the mean within/between-group distances.
pub fn write_summary(path: &Path, sum: &SnapshotSummary) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record([
        "s", "count", "c0", "c1", "c2", "positive_rate", "bbox_min0", "bbox_min1", "bbox_min2", "bbox_max0",
        "bbox_max1", "bbox_max2", "mean_within", "mean_between",
    ])
    .map_err(&err)?;
    for g in &sum.groups {
        let mut row = vec![g.s.to_string(), g.count.to_string()];
        row.extend(g.centroid.iter().map(f64::to_string));
        row.push(g.positive_rate.to_string());
        row.extend(sum.bbox_min.iter().chain(&sum.bbox_max).map(f64::to_string));
        row.push(sum.mean_within.to_string());
        row.push(sum.mean_between.to_string());
        w.write_record(&row).map_err(&err)?;
    }
    flush(path, w)
}

/// `epoch,mean_loss,active_fraction,degenerate_outputs`.
pub fn write_training_log(path: &Path, epochs: &[EpochStats]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record(["epoch", "mean_loss", "active_fraction", "degenerate_outputs"])
        .map_err(&err)?;
    for (k, e) in epochs.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            e.mean_loss.to_string(),
            e.active_fraction.to_string(),
            e.degenerate_outputs.to_string(),
        ])
        .map_err(&err)?;
    }
    flush(path, w)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}
