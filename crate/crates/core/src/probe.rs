//! Fairness probes: how well random forests recover the target and the
//! sensitive attribute from a representation.
//!
//! Probes only read the representation after training; nothing flows back
//! into the embedder.

use alloc::vec::Vec;

use crate::forest::{train_forest, ForestConfig};
use crate::matrix::Matrix;
use crate::metrics::roc_auc;
use crate::{Error, Vec3};

/// Seeds of the three probe forests whose AUCs are averaged.
pub const PROBE_SEEDS: [u64; 3] = [17, 29, 43];

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub forest: ForestConfig,
    pub seeds: Vec<u64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            forest: ForestConfig::default(),
            seeds: PROBE_SEEDS.to_vec(),
        }
    }
}

/// One labelled train/test pair of feature matrices.
#[derive(Debug, Clone, Copy)]
pub struct ProbeTask<'a> {
    pub train_x: &'a Matrix,
    pub train_labels: &'a [u8],
    pub test_x: &'a Matrix,
    pub test_labels: &'a [u8],
}

/// AUCs of one probed attribute across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeScores {
    /// Held-out AUC per seed, aligned with the report's seeds.
    pub test_auc: Vec<f64>,
    /// AUC on the forest's own training rows, per seed.
    pub train_auc: Vec<f64>,
    pub mean_test_auc: f64,
    pub mean_train_auc: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Fits one forest per seed on the task's train side and scores both sides.
pub fn probe(task: ProbeTask<'_>, config: &ProbeConfig) -> Result<ProbeScores, Error> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one probe seed is needed".into()));
    }
    if task.train_x.cols() != task.test_x.cols() {
        return Err(Error::DimensionMismatch {
            what: "probe test features",
            expected: task.train_x.cols(),
            found: task.test_x.cols(),
        });
    }
    let mut test_auc = Vec::with_capacity(config.seeds.len());
    let mut train_auc = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let forest = train_forest(task.train_x, task.train_labels, seed, &config.forest)?;
        test_auc.push(roc_auc(&forest.predict_all(task.test_x)?, task.test_labels)?);
        train_auc.push(roc_auc(&forest.predict_all(task.train_x)?, task.train_labels)?);
    }
    Ok(ProbeScores {
        mean_test_auc: mean(&test_auc),
        mean_train_auc: mean(&train_auc),
        test_auc,
        train_auc,
    })
}

/// Recoverability of the target (`y`) and sensitive attribute (`s`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub seeds: Vec<u64>,
    pub y: ProbeScores,
    pub s: ProbeScores,
}

impl ProbeReport {
    /// Mean held-out AUC for the target.
    pub fn auc_y(&self) -> f64 {
        self.y.mean_test_auc
    }

    /// Mean held-out AUC for the sensitive attribute.
    pub fn auc_s(&self) -> f64 {
        self.s.mean_test_auc
    }
}

/// Probes `y` and `s` from the same representation.
pub fn evaluate_fairness_matrix(
    train_x: &Matrix,
    train_y: &[u8],
    train_s: &[u8],
    test_x: &Matrix,
    test_y: &[u8],
    test_s: &[u8],
    config: &ProbeConfig,
) -> Result<ProbeReport, Error> {
    let y = probe(
        ProbeTask {
            train_x,
            train_labels: train_y,
            test_x,
            test_labels: test_y,
        },
        config,
    )?;
    let s = probe(
        ProbeTask {
            train_x,
            train_labels: train_s,
            test_x,
            test_labels: test_s,
        },
        config,
    )?;
    Ok(ProbeReport {
        seeds: config.seeds.clone(),
        y,
        s,
    })
}

/// Embeddings as a forest feature matrix.
pub fn embedding_matrix(embeddings: &[Vec3]) -> Matrix {
    let data = embeddings.iter().flatten().copied().collect();
    Matrix::from_vec(embeddings.len(), crate::EMBED_DIM, data).expect("3 columns per embedding")
}

/// Probes `y` and `s` from train/test embeddings.
pub fn evaluate_fairness(
    train_emb: &[Vec3],
    train_y: &[u8],
    train_s: &[u8],
    test_emb: &[Vec3],
    test_y: &[u8],
    test_s: &[u8],
    config: &ProbeConfig,
) -> Result<ProbeReport, Error> {
    evaluate_fairness_matrix(
        &embedding_matrix(train_emb),
        train_y,
        train_s,
        &embedding_matrix(test_emb),
        test_y,
        test_s,
        config,
    )
}
