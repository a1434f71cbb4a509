//! End-to-end runs: load, encode, split, train, then probe and analyse each
//! snapshot.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fairtrip_core::analysis::{detect_collapse, pairwise_distance_histogram, snapshot_summary};
use fairtrip_core::dataset::{encode, split, subsample, DataSplit, EncodedDataset, RawTable};
use fairtrip_core::embedder::{embed_all, max_squared_distance};
use fairtrip_core::probe::{evaluate_fairness, probe, ProbeReport, ProbeTask};
use fairtrip_core::trainer::train;
use fairtrip_core::EMBED_DIM;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkpoint::save_params;
use crate::config::{Dataset, ExperimentConfig};
use crate::error::{data_error, Error, Result};
use crate::io::{adult::load_adult, law_school::load_law_school};
use crate::report::{self, ClusterJson, LoadSummary, ProbeJson};

/// Encoded data ready for training, with the table it came from.
pub struct Prepared {
    pub raw: RawTable,
    pub data: EncodedDataset,
    pub split: DataSplit,
}

pub fn load_raw(dataset: Dataset, path: &Path, sensitive: &str) -> Result<RawTable> {
    match dataset {
        Dataset::Adult => load_adult(path, sensitive),
        Dataset::LawSchool => load_law_school(path, sensitive),
    }
}

/// Load, encode, optionally subsample, then split. `config` must be resolved.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let path = config.data_path.as_deref().expect("resolved config has a data path");
    let sensitive = config.sensitive.as_deref().expect("resolved config has a sensitive column");
    let raw = load_raw(config.dataset, path, sensitive).map_err(|e| e.at("load"))?;
    let mut data = encode(&raw).map_err(|e| data_error(e).at("encode"))?;
    if let Some(max) = config.max_rows {
        data = subsample(&data, max, config.data_seed).map_err(|e| data_error(e).at("subsample"))?;
    }
    let split = split(&data, config.test_fraction, config.data_seed).map_err(|e| data_error(e).at("split"))?;
    Ok(Prepared { raw, data, split })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_fraction: f64,
    pub data_seed: u64,
}

impl SplitInfo {
    fn new(split: &DataSplit, config: &ExperimentConfig) -> Self {
        SplitInfo {
            train_rows: split.train.len(),
            test_rows: split.test.len(),
            test_fraction: config.test_fraction,
            data_seed: config.data_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub active_fraction: f64,
    pub outrageous_margin: bool,
    pub probe: ProbeJson,
    pub cluster: ClusterJson,
    /// Artifact paths relative to the output directory.
    pub embeddings_path: Option<String>,
    pub histogram_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub data: LoadSummary,
    pub split: SplitInfo,
    /// Squared diameter of the embedding space; `null` when unbounded.
    pub max_squared_distance: Option<f64>,
    pub outrageous_margin: bool,
    pub snapshots: Vec<SnapshotReport>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn final_snapshot(&self) -> &SnapshotReport {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// Creates `dir`, refusing a non-empty existing one unless `overwrite`.
pub fn claim_output_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if entries.next().is_some() && !overwrite {
            return Err(Error::Config(format!(
                "output directory {} is not empty (pass --overwrite to replace its files)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs one experiment. Artifacts go to `config.out` when set.
pub fn run_experiment(config: &ExperimentConfig, overwrite: bool) -> Result<ExperimentReport> {
    let start = Instant::now();
    let config = config.resolve()?;
    let train_config = config.train_config()?;
    let probe_config = config.probe.probe_config()?;
    let out = config.out.clone();
    if let Some(dir) = &out {
        claim_output_dir(dir, overwrite)?;
    }

    let prepared = prepare(&config)?;
    let load = LoadSummary::new(&prepared.raw, &prepared.data);
    let (train_set, test_set) = (&prepared.split.train, &prepared.split.test);
    if let Some(dir) = &out {
        report::write_text(&dir.join("load_report.txt"), &load.to_text()).map_err(|e| e.at("write"))?;
        report::write_json(&dir.join("config.json"), &config).map_err(|e| e.at("write"))?;
    }

    let run = train(train_set, &train_config).map_err(|e| Error::from(e).at("train"))?;
    if let Some(dir) = &out {
        report::write_training_log(&dir.join("training.csv"), &run.epochs).map_err(|e| e.at("write"))?;
    }

    let kind = train_config.activation;
    let outrageous = config.outrageous_margin()?;
    let mut snapshots = Vec::with_capacity(run.snapshots.len());
    for (&epoch, snap) in &run.snapshots {
        let test_emb =
            embed_all(&snap.params, test_set.features.iter_rows(), kind).map_err(|e| data_error(e).at("embed"))?;
        let probe = evaluate_fairness(
            &snap.embeddings,
            &train_set.y,
            &train_set.s,
            &test_emb,
            &test_set.y,
            &test_set.s,
            &probe_config,
        )
        .map_err(|e| data_error(e).at("probe"))?;
        let cluster = detect_collapse(&snap.embeddings).map_err(|e| data_error(e).at("cluster"))?;
        let h = &config.histogram;
        let hist = pairwise_distance_histogram(&snap.embeddings, h.bins, h.max_pairs, h.seed)
            .map_err(|e| data_error(e).at("histogram"))?;

        let (mut embeddings_path, mut histogram_path) = (None, None);
        if let Some(dir) = &out {
            let write = |name: String| -> (PathBuf, String) { (dir.join(&name), name) };
            let (p, name) = write(format!("epoch_{epoch}.csv"));
            report::write_embeddings(&p, &snap.embeddings, &train_set.y, &train_set.s).map_err(|e| e.at("write"))?;
            embeddings_path = Some(name);
            let (p, name) = write(format!("histogram_{epoch}.csv"));
            report::write_histogram(&p, &hist).map_err(|e| e.at("write"))?;
            histogram_path = Some(name);
            report::write_text(&dir.join(format!("cluster_{epoch}.txt")), &report::cluster_text(&cluster))
                .map_err(|e| e.at("write"))?;
            report::write_json(&dir.join(format!("probe_{epoch}.json")), &ProbeJson::from(&probe))
                .map_err(|e| e.at("write"))?;
            save_params(&dir.join(format!("params_{epoch}.ftl")), &snap.params).map_err(|e| e.at("write"))?;
            let summary = snapshot_summary(&snap.embeddings, &train_set.y, &train_set.s)
                .map_err(|e| data_error(e).at("summary"))?;
            report::write_summary(&dir.join(format!("summary_{epoch}.csv")), &summary).map_err(|e| e.at("write"))?;
        }
        let stats = run.epochs[epoch - 1];
        snapshots.push(SnapshotReport {
            epoch,
            mean_loss: stats.mean_loss,
            active_fraction: stats.active_fraction,
            outrageous_margin: outrageous,
            probe: (&probe).into(),
            cluster: (&cluster).into(),
            embeddings_path,
            histogram_path,
        });
    }

    let bound = max_squared_distance(kind, EMBED_DIM);
    let report = ExperimentReport {
        split: SplitInfo::new(&prepared.split, &config),
        config,
        data: load,
        max_squared_distance: bound.is_finite().then_some(bound),
        outrageous_margin: outrageous,
        snapshots,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &out {
        report::write_json(&dir.join("report.json"), &report).map_err(|e| e.at("write"))?;
    }
    Ok(report)
}

/// Probe AUCs on raw encoded features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub config: ExperimentConfig,
    pub data: LoadSummary,
    pub split: SplitInfo,
    /// The `s` probe does not see the sensitive column itself.
    pub sensitive_column_excluded: bool,
    pub probe: ProbeJson,
}

/// Fits the probes on raw encoded features instead of embeddings.
pub fn emit_baseline(config: &ExperimentConfig) -> Result<BaselineReport> {
    let config = config.resolve()?;
    let probe_config = config.probe.probe_config()?;
    let prepared = prepare(&config)?;
    let (train_set, test_set) = (&prepared.split.train, &prepared.split.test);
    let index = prepared.data.sensitive_index;
    let (train_x, test_x) = (&train_set.features, &test_set.features);
    let (train_blind, test_blind) = (train_x.without_column(index), test_x.without_column(index));
    let scores = |train_x, train_labels, test_x, test_labels| {
        let task = ProbeTask {
            train_x,
            train_labels,
            test_x,
            test_labels,
        };
        probe(task, &probe_config).map_err(|e| data_error(e).at("probe"))
    };
    let report = ProbeReport {
        seeds: probe_config.seeds.clone(),
        y: scores(train_x, &train_set.y, test_x, &test_set.y)?,
        s: scores(&train_blind, &train_set.s, &test_blind, &test_set.s)?,
    };
    let probe = ProbeJson::from(&report);
    Ok(BaselineReport {
        data: LoadSummary::new(&prepared.raw, &prepared.data),
        split: SplitInfo::new(&prepared.split, &config),
        config,
        sensitive_column_excluded: true,
        probe,
    })
}

/// Columns of the combined table.
pub const TABLE_HEADER: [&str; 15] = [
    "Dataset",
    "Triplet Selection Method",
    "Activation",
    "Margin",
    "ROC-AUC on Y",
    "ROC-AUC on S",
    "Epoch",
    "Collapsed?",
    "Seed",
    "Data Seed",
    "Test Fraction",
    "Max Rows",
    "Train Rows",
    "Test Rows",
    "Status",
];

/// One row per config delta in `matrix` (a JSON array of objects laid over
/// `base`). A failing row is recorded with its error and the rest continue.
/// Each row writes its artifacts to `<base.out>/row_<i>` when `base.out`
/// is set.
pub fn run_table(base: &ExperimentConfig, matrix: &Value, overwrite: bool) -> Result<Vec<Vec<String>>> {
    let rows = matrix
        .as_array()
        .ok_or_else(|| Error::Config("the config matrix must be a JSON array".into()))?;
    let mut table = Vec::with_capacity(rows.len());
    for (i, delta) in rows.iter().enumerate() {
        let config = base.with_delta(delta).map(|mut c| {
            c.out = base.out.as_ref().map(|d| d.join(format!("row_{i}")));
            c
        });
        let result = config.and_then(|c| run_experiment(&c, overwrite).map(|r| (c, r)));
        table.push(match result {
            Ok((_, r)) => {
                let c = &r.config;
                let last = r.final_snapshot();
                vec![
                    c.dataset.name().into(),
                    c.method.clone(),
                    c.activation.clone(),
                    c.margin.to_string(),
                    format!("{:.3}", last.probe.auc_y),
                    format!("{:.3}", last.probe.auc_s),
                    last.epoch.to_string(),
                    if last.cluster.collapsed { "yes" } else { "no" }.into(),
                    c.seed.to_string(),
                    c.data_seed.to_string(),
                    c.test_fraction.to_string(),
                    c.max_rows.map_or_else(String::new, |m| m.to_string()),
                    r.split.train_rows.to_string(),
                    r.split.test_rows.to_string(),
                    "ok".into(),
                ]
            }
            Err(e) => {
                let c = base.with_delta(delta).unwrap_or_else(|_| base.clone());
                let mut row = vec![
                    c.dataset.name().into(),
                    c.method.clone(),
                    c.activation.clone(),
                    c.margin.to_string(),
                    String::new(),
                    String::new(),
                    c.epochs.to_string(),
                    String::new(),
                    c.seed.to_string(),
                    c.data_seed.to_string(),
                    c.test_fraction.to_string(),
                    c.max_rows.map_or_else(String::new, |m| m.to_string()),
                    String::new(),
                    String::new(),
                ];
                row.push(format!("error (exit {}): {e}", e.exit_code()));
                row
            }
        });
    }
    Ok(table)
}

pub fn write_table(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(TABLE_HEADER).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
