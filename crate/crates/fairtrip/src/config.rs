//! Experiment configuration: JSON files, command-line overrides and
//! resolution of every default into an explicit value.

use std::path::{Path, PathBuf};

use fairtrip_core::embedder::ActivationKind;
use fairtrip_core::forest::ForestConfig;
use fairtrip_core::probe::{ProbeConfig, PROBE_SEEDS};
use fairtrip_core::trainer::TrainConfig;
use fairtrip_core::triplet::{is_outrageous, Margin, SelectionMethod};
use fairtrip_core::EMBED_DIM;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Snapshot epochs used when none are configured (those beyond the run
/// length are dropped and the final epoch is always added).
pub const DEFAULT_SNAPSHOTS: [usize; 5] = [1, 10, 100, 500, 1000];

/// Environment variable naming the directory that holds `adult/` and
/// `law_school/`.
pub const DATA_DIR_ENV: &str = "FAIRTRIP_DATA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Adult,
    LawSchool,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Adult => "adult",
            Dataset::LawSchool => "law_school",
        }
    }

    pub fn default_sensitive(self) -> &'static str {
        match self {
            Dataset::Adult => "sex",
            Dataset::LawSchool => "race",
        }
    }

    /// `$FAIRTRIP_DATA/<name>` (or `data/<name>`), with the Law School CSV
    /// inside its directory.
    pub fn default_path(self) -> PathBuf {
        let root = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from);
        match self {
            Dataset::Adult => root.join("adult"),
            Dataset::LawSchool => root.join("law_school").join("law_school.csv"),
        }
    }
}

impl std::str::FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adult" => Ok(Dataset::Adult),
            "law_school" | "lawschool" => Ok(Dataset::LawSchool),
            _ => Err(Error::Config(format!("unknown dataset `{s}` (expected adult or law_school)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Candidate features per node; `null` means `floor(sqrt(D))`.
    pub max_features: Option<usize>,
    pub seeds: Vec<u64>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        let forest = ForestConfig::default();
        ProbeSettings {
            n_trees: forest.n_trees,
            max_depth: forest.max_depth,
            min_samples_split: forest.min_samples_split,
            max_features: forest.max_features,
            seeds: PROBE_SEEDS.to_vec(),
        }
    }
}

impl ProbeSettings {
    pub fn probe_config(&self) -> Result<ProbeConfig> {
        if self.n_trees == 0 || self.max_depth == 0 || self.seeds.is_empty() || self.max_features == Some(0) {
            return Err(Error::Config(
                "probe needs n_trees, max_depth, max_features and seeds to be non-empty/positive".into(),
            ));
        }
        Ok(ProbeConfig {
            forest: ForestConfig {
                n_trees: self.n_trees,
                max_depth: self.max_depth,
                min_samples_split: self.min_samples_split,
                max_features: self.max_features,
            },
            seeds: self.seeds.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSettings {
    pub bins: usize,
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for HistogramSettings {
    fn default() -> Self {
        HistogramSettings {
            bins: 100,
            max_pairs: 2_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub data_path: Option<PathBuf>,
    pub sensitive: Option<String>,
    pub method: String,
    pub activation: String,
    pub margin: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub minibatch: usize,
    /// Seeds weight initialisation and triplet sampling.
    pub seed: u64,
    /// Empty means the defaults.
    pub snapshot_epochs: Vec<usize>,
    /// Seeds subsampling and the train/test split.
    pub data_seed: u64,
    pub test_fraction: f64,
    pub max_rows: Option<usize>,
    pub probe: ProbeSettings,
    pub histogram: HistogramSettings,
    /// Artifact directory; without one only the report is produced.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            dataset: Dataset::Adult,
            data_path: None,
            sensitive: None,
            method: train.method.name().into(),
            activation: train.activation.name().into(),
            margin: train.margin.value(),
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            minibatch: train.minibatch,
            seed: train.seed,
            snapshot_epochs: Vec::new(),
            data_seed: 0,
            test_fraction: 0.2,
            max_rows: None,
            probe: ProbeSettings::default(),
            histogram: HistogramSettings::default(),
            out: None,
        }
    }
}

/// Command-line values that replace config-file ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dataset: Option<Dataset>,
    pub data_path: Option<PathBuf>,
    pub sensitive: Option<String>,
    pub method: Option<String>,
    pub activation: Option<String>,
    pub margin: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_rows: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = o.dataset {
            if d != self.dataset {
                // path and sensitive column defaults follow the dataset
                self.data_path = None;
                self.sensitive = None;
            }
            self.dataset = d;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &o.$field {
                    self.$field = v.clone().into();
                }
            )*};
        }
        set!(data_path, sensitive, method, activation, margin, epochs, seed, out, max_rows);
    }

    /// Overlays a JSON object of field changes (nested objects merge).
    pub fn with_delta(&self, delta: &Value) -> Result<Self> {
        fn merge(base: &mut Value, delta: &Value) {
            match (base, delta) {
                (Value::Object(b), Value::Object(d)) => {
                    for (k, v) in d {
                        merge(b.entry(k.clone()).or_insert(Value::Null), v);
                    }
                }
                (b, d) => *b = d.clone(),
            }
        }
        if !delta.is_object() {
            return Err(Error::Config("a config delta must be a JSON object".into()));
        }
        let mut value = serde_json::to_value(self)?;
        merge(&mut value, delta);
        Ok(serde_json::from_value(value)?)
    }

    pub fn method(&self) -> Result<SelectionMethod> {
        self.method.parse().map_err(|e: fairtrip_core::Error| Error::Config(e.to_string()))
    }

    pub fn activation(&self) -> Result<ActivationKind> {
        self.activation.parse().map_err(|e: fairtrip_core::Error| Error::Config(e.to_string()))
    }

    /// Replaces every default with its concrete value and validates.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.data_path.get_or_insert_with(|| c.dataset.default_path());
        c.sensitive.get_or_insert_with(|| c.dataset.default_sensitive().into());
        if c.snapshot_epochs.is_empty() {
            c.snapshot_epochs = DEFAULT_SNAPSHOTS.iter().copied().filter(|&e| e < c.epochs).collect();
            c.snapshot_epochs.push(c.epochs);
        }
        c.snapshot_epochs.sort_unstable();
        c.snapshot_epochs.dedup();
        c.method()?;
        c.activation()?;
        Margin::new(c.margin).map_err(|e| Error::Config(e.to_string()))?;
        if !(c.test_fraction > 0.0 && c.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must be in (0, 1), got {}", c.test_fraction)));
        }
        if c.max_rows == Some(0) {
            return Err(Error::Config("max_rows must be positive".into()));
        }
        if c.histogram.bins == 0 || c.histogram.max_pairs == 0 {
            return Err(Error::Config("histogram bins and max_pairs must be positive".into()));
        }
        c.probe.probe_config()?;
        if let Some(&bad) = c.snapshot_epochs.iter().find(|&&e| e == 0 || e > c.epochs) {
            return Err(Error::Config(format!("snapshot epoch {bad} outside 1..={}", c.epochs)));
        }
        Ok(c)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            margin: Margin::new(self.margin).map_err(|e| Error::Config(e.to_string()))?,
            method: self.method()?,
            activation: self.activation()?,
            seed: self.seed,
            snapshot_epochs: self.snapshot_epochs.clone(),
            minibatch: self.minibatch,
        })
    }

    /// Whether the margin exceeds the squared diameter of the embedding space.
    pub fn outrageous_margin(&self) -> Result<bool> {
        Ok(is_outrageous(self.margin, self.activation()?, EMBED_DIM))
    }
}
