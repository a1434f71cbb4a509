//! Commands working on snapshot CSV files.

use std::path::Path;

use fairtrip_core::analysis::{detect_collapse, pairwise_distance_histogram, snapshot_summary};

use crate::error::{data_error, Result};
use crate::report::{cluster_text, read_embeddings, write_histogram, write_summary, write_text};

pub fn histogram_command(embeddings: &Path, out: &Path, bins: usize, max_pairs: usize, seed: u64) -> Result<()> {
    let (emb, _, _) = read_embeddings(embeddings)?;
    let hist = pairwise_distance_histogram(&emb, bins, max_pairs, seed).map_err(data_error)?;
    write_histogram(out, &hist)
}

/// Cluster report followed by the per-group summary, as key-value text.
pub fn inspect_command(embeddings: &Path, out: Option<&Path>) -> Result<String> {
    let (emb, y, s) = read_embeddings(embeddings)?;
    let cluster = detect_collapse(&emb).map_err(data_error)?;
    let summary = snapshot_summary(&emb, &y, &s).map_err(data_error)?;
    let mut text = cluster_text(&cluster);
    for g in &summary.groups {
        text += &format!(
            "group_s{}: count={} centroid={:?} positive_rate={}\n",
            g.s, g.count, g.centroid, g.positive_rate
        );
    }
    text += &format!(
        "mean_within={}\nmean_between={}\n",
        summary.mean_within, summary.mean_between
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
        write_text(&dir.join("cluster_report.txt"), &cluster_text(&cluster))?;
        write_summary(&dir.join("summary.csv"), &summary)?;
    }
    Ok(text)
}
