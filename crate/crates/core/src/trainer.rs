//! Epoch-based SGD training of the embedder with the triplet loss.
//!
//! Every epoch visits each training sample once as an anchor, in a seeded
//! shuffled order. Anchors are grouped into minibatches; for each one a
//! triplet is drawn, its three rows are embedded with the shared parameters,
//! and the loss gradients of all three roles are backpropagated and averaged
//! over the minibatch before a plain SGD step.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::dataset::EncodedDataset;
use crate::embedder::{
    backward_batch, embed_all, forward_batch, init_params, ActivationKind, MlpParams, Mode, ParamGrads,
};
use crate::triplet::{
    lambda_indicator, select_triplet, triplet_grads, triplet_loss, ClassIndex, Margin, SelectionMethod,
};
use crate::{Error, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: Margin,
    pub method: SelectionMethod,
    pub activation: ActivationKind,
    pub seed: u64,
    /// Epochs (1-based) after which parameters and embeddings are kept.
    pub snapshot_epochs: Vec<usize>,
    pub minibatch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            learning_rate: 0.05,
            margin: Margin::new(0.0).expect("zero margin"),
            method: SelectionMethod::Classical,
            activation: ActivationKind::Softmax,
            seed: 0,
            snapshot_epochs: alloc::vec![1, 10, 100, 500, 1000],
            minibatch: 128,
        }
    }
}

impl TrainConfig {
    /// Checks the config against a dataset of `n` samples and returns the
    /// sorted, deduplicated snapshot epochs.
    pub fn validate(&self, n: usize) -> Result<Vec<usize>, Error> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.minibatch == 0 || self.minibatch > n {
            return Err(Error::InvalidArgument(format!(
                "minibatch must be in 1..={n}, got {}",
                self.minibatch
            )));
        }
        let mut epochs = self.snapshot_epochs.clone();
        epochs.sort_unstable();
        epochs.dedup();
        if let Some(&bad) = epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return Err(Error::InvalidArgument(format!(
                "snapshot epoch {bad} outside 1..={}",
                self.epochs
            )));
        }
        Ok(epochs)
    }
}

/// Parameters and training-set embeddings captured after an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub epoch: usize,
    pub params: MlpParams,
    pub embeddings: Vec<Vec3>,
}

/// Per-epoch statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    /// Fraction of the epoch's triplets whose indicator was 1.
    pub active_fraction: f64,
    /// Count of L1/L2 zero-norm fallbacks hit during the epoch.
    pub degenerate_outputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub params: MlpParams,
    pub epochs: Vec<EpochStats>,
    pub snapshots: BTreeMap<usize, Snapshot>,
}

impl TrainRun {
    pub fn loss_series(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

/// Training failure.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    /// The config or dataset cannot be trained on.
    Invalid(Error),
    /// A non-finite loss, gradient or parameter appeared. Carries the
    /// parameters as they were before the failing step.
    Diverged {
        epoch: usize,
        batch: usize,
        what: String,
        params: Box<MlpParams>,
    },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Invalid(e) => write!(f, "{e}"),
            TrainError::Diverged { epoch, batch, what, .. } => {
                write!(f, "training diverged at epoch {epoch}, batch {batch}: non-finite {what}")
            }
        }
    }
}

impl core::error::Error for TrainError {}

impl From<Error> for TrainError {
    fn from(e: Error) -> Self {
        TrainError::Invalid(e)
    }
}

/// `params -= lr * grads`, refusing non-finite inputs or results.
pub fn sgd_step(params: &mut MlpParams, grads: &ParamGrads, lr: f64) -> Result<(), Error> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients".into()));
    }
    params.apply_gradient(grads, lr);
    if !params.is_finite() {
        return Err(Error::NonFinite("parameters after update".into()));
    }
    Ok(())
}

/// Trains from freshly initialised parameters.
pub fn train(data: &EncodedDataset, config: &TrainConfig) -> Result<TrainRun, TrainError> {
    let params = init_params(data.dim(), config.seed)?;
    train_from(data, config, params)
}

/// Trains starting from the given parameters.
pub fn train_from(
    data: &EncodedDataset,
    config: &TrainConfig,
    mut params: MlpParams,
) -> Result<TrainRun, TrainError> {
    let snapshot_epochs = config.validate(data.len())?;
    if params.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            what: "parameters input dimension",
            expected: data.dim(),
            found: params.input_dim(),
        }
        .into());
    }
    let index = ClassIndex::new(&data.y);
    index.check_method(config.method)?;

    let kind = config.activation;
    let alpha = config.margin.value();
    // a separate stream from the one init_params draws from
    let mut rng = {
        let mut r = crate::seeded_rng(config.seed);
        r.set_stream(1);
        r
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut snapshots = BTreeMap::new();
    let mut grads = ParamGrads::zeros_like(&params);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut active = 0usize;
        let mut degenerate = 0usize;

        for (batch_no, anchors) in order.chunks(config.minibatch).enumerate() {
            let diverged = |what: &str, params: &MlpParams| TrainError::Diverged {
                epoch,
                batch: batch_no,
                what: what.into(),
                params: Box::new(params.clone()),
            };
            let b = anchors.len();
            let triplets = anchors
                .iter()
                .map(|&a| select_triplet(config.method, &index, a, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            // rows: anchors, then positives, then negatives
            let mut rows = Vec::with_capacity(3 * b);
            rows.extend(triplets.iter().map(|t| alloc::borrow::Cow::Borrowed(data.row(t.anchor))));
            for t in &triplets {
                rows.push(t.positive_row(data)?);
            }
            rows.extend(triplets.iter().map(|t| alloc::borrow::Cow::Borrowed(data.row(t.negative))));

            let batch = match forward_batch(&params, &rows, kind, Mode::Train) {
                Ok(batch) => batch,
                Err(Error::NonFinite(what)) => return Err(diverged(&what, &params)),
                Err(e) => return Err(e.into()),
            };
            degenerate += batch.traces.iter().filter(|t| t.degenerate).count();
            let z: Vec<&Vec3> = batch.outputs().collect();
            let mut grad_z = alloc::vec![[0.0; 3]; 3 * b];
            let scale = 1.0 / b as f64;
            for k in 0..b {
                let (za, zp, zn) = (z[k], z[b + k], z[2 * b + k]);
                let loss = triplet_loss(za, zp, zn, alpha);
                if !loss.is_finite() {
                    return Err(diverged("loss", &params));
                }
                loss_sum += loss;
                if lambda_indicator(za, zp, zn, alpha) {
                    active += 1;
                }
                let g = triplet_grads(za, zp, zn, alpha);
                grad_z[k] = g.anchor.map(|v| v * scale);
                grad_z[b + k] = g.positive.map(|v| v * scale);
                grad_z[2 * b + k] = g.negative.map(|v| v * scale);
            }

            grads.scale(0.0);
            backward_batch(&batch, &params, &grad_z, &mut grads)?;
            let before = params.clone();
            if let Some(stats) = batch.stats {
                params.update_running_stats(&stats);
            }
            if let Err(Error::NonFinite(what)) = sgd_step(&mut params, &grads, config.learning_rate) {
                return Err(diverged(&what, &before));
            }
        }

        let n = data.len() as f64;
        epochs.push(EpochStats {
            mean_loss: loss_sum / n,
            active_fraction: active as f64 / n,
            degenerate_outputs: degenerate,
        });
        if snapshot_epochs.binary_search(&epoch).is_ok() {
            let embeddings = embed_all(&params, data.features.iter_rows(), kind)?;
            snapshots.insert(
                epoch,
                Snapshot {
                    epoch,
                    params: params.clone(),
                    embeddings,
                },
            );
        }
    }

    Ok(TrainRun {
        params,
        epochs,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::init_params;
    use crate::matrix::Matrix;
    use alloc::vec;

    fn toy(n: usize) -> EncodedDataset {
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let y = (i % 2) as f64;
                [0.1 + 0.6 * y + 0.01 * (i % 7) as f64, 0.5, (i % 3 == 0) as u8 as f64]
            })
            .collect();
        let y = (0..n).map(|i| (i % 2) as u8).collect();
        let s = rows.iter().map(|r| r[2] as u8).collect();
        EncodedDataset::new(Matrix::from_rows(&rows).unwrap(), y, s, 2, vec!["a".into(), "b".into(), "s".into()])
            .unwrap()
    }

    #[test]
    fn sgd_examples() {
        let mut p = init_params(1, 0).unwrap();
        let before = p.clone();
        let mut g = ParamGrads::zeros_like(&p);
        sgd_step(&mut p, &g, 0.5).unwrap();
        assert_eq!(p, before);
        g.w1[0] = 3.0;
        sgd_step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);
        p.w1[0] = 1.0;
        g.w1[0] = 2.0;
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert!((p.w1[0] - 0.8).abs() < 1e-15);
        g.b1[0] = f64::NAN;
        assert!(sgd_step(&mut p, &g, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        let data = toy(10);
        let mut c = TrainConfig {
            epochs: 0,
            minibatch: 4,
            snapshot_epochs: vec![],
            ..TrainConfig::default()
        };
        assert!(train(&data, &c).is_err());
        c.epochs = 5;
        c.snapshot_epochs = vec![6];
        assert!(c.validate(10).is_err());
        c.snapshot_epochs = vec![5, 1, 5];
        assert_eq!(c.validate(10).unwrap(), [1, 5]);
        c.minibatch = 11;
        assert!(c.validate(10).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let data = toy(20);
        let c = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            minibatch: 8,
            snapshot_epochs: vec![1],
            seed: 5,
            ..TrainConfig::default()
        };
        let run = train(&data, &c).unwrap();
        assert_eq!(run.params, init_params(3, 5).unwrap());
        assert_eq!(run.epochs.len(), 1);
        assert_eq!(run.snapshots[&1].embeddings.len(), 20);
    }

    #[test]
    fn deterministic() {
        let data = toy(30);
        let c = TrainConfig {
            epochs: 5,
            minibatch: 7,
            snapshot_epochs: vec![2, 5],
            seed: 9,
            method: SelectionMethod::Random,
            margin: Margin::new(1.0).unwrap(),
            ..TrainConfig::default()
        };
        assert_eq!(train(&data, &c).unwrap(), train(&data, &c).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy(16);
        let c = TrainConfig {
            epochs: 50,
            learning_rate: 1e300,
            minibatch: 4,
            snapshot_epochs: vec![],
            activation: ActivationKind::None,
            margin: Margin::new(5.0).unwrap(),
            ..TrainConfig::default()
        };
        match train(&data, &c) {
            Err(TrainError::Diverged { params, .. }) => assert!(params.is_finite()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
