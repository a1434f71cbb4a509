//! Two-layer MLP embedder with a configurable output activation and manual
//! backpropagation.
//!
//! The network is `z = act(W2ᵀ · relu(W1ᵀ x + b1) + b2)` with a hidden width
//! of `ceil(K / 2)` and a 3-dimensional output. The output activation decides
//! the shape of the embedding space and therefore the largest distance two
//! embeddings can have (see [`max_pairwise_distance`]).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::{math, seeded_rng, Error, Vec3, EMBED_DIM};

/// Variance floor of batch normalisation.
pub const BATCHNORM_EPS: f64 = 1e-5;
/// Weight of the previous running statistic in the batchnorm update.
pub const BATCHNORM_MOMENTUM: f64 = 0.9;

/// Output activation or normalisation applied to the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    None,
    BatchNorm,
    L1Norm,
    L2Norm,
    Sigmoid,
    Softmax,
    Tanh,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 7] = [
        ActivationKind::None,
        ActivationKind::BatchNorm,
        ActivationKind::L1Norm,
        ActivationKind::L2Norm,
        ActivationKind::Sigmoid,
        ActivationKind::Softmax,
        ActivationKind::Tanh,
    ];

    /// Kinds whose embedding space has a finite diameter.
    pub const BOUNDED: [ActivationKind; 5] = [
        ActivationKind::L1Norm,
        ActivationKind::L2Norm,
        ActivationKind::Sigmoid,
        ActivationKind::Softmax,
        ActivationKind::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::None => "none",
            ActivationKind::BatchNorm => "batchnorm",
            ActivationKind::L1Norm => "l1norm",
            ActivationKind::L2Norm => "l2norm",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Softmax => "softmax",
            ActivationKind::Tanh => "tanh",
        }
    }

    pub fn is_bounded(self) -> bool {
        max_pairwise_distance(self, EMBED_DIM).is_finite()
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown activation `{s}`")))
    }
}

/// Largest Euclidean distance between two embeddings in `dim` dimensions,
/// or `f64::INFINITY` for unbounded kinds.
///
/// Softmax outputs lie on the probability simplex (two vertices are `√2`
/// apart), sigmoid in the unit cube (`√d`), tanh in `[-1, 1]^d` (`2√d`), and
/// L1/L2 normalised outputs on spheres of radius 1 (antipodes are 2 apart).
pub fn max_pairwise_distance(kind: ActivationKind, dim: usize) -> f64 {
    let d = dim as f64;
    match kind {
        ActivationKind::Softmax => math::sqrt(2.0),
        ActivationKind::Sigmoid => math::sqrt(d),
        ActivationKind::Tanh => 2.0 * math::sqrt(d),
        ActivationKind::L1Norm | ActivationKind::L2Norm => 2.0,
        ActivationKind::None | ActivationKind::BatchNorm => f64::INFINITY,
    }
}

/// Square of [`max_pairwise_distance`], exact for every kind.
pub fn max_squared_distance(kind: ActivationKind, dim: usize) -> f64 {
    let d = dim as f64;
    match kind {
        ActivationKind::Softmax => 2.0,
        ActivationKind::Sigmoid => d,
        ActivationKind::Tanh => 4.0 * d,
        ActivationKind::L1Norm | ActivationKind::L2Norm => 4.0,
        ActivationKind::None | ActivationKind::BatchNorm => f64::INFINITY,
    }
}

/// Whether the network runs on a training batch or on single samples.
///
/// Only batchnorm depends on it: training normalises with the statistics of
/// the batch, evaluation with the running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Embedder weights. `w1` is `K × H` and `w2` is `H × 3`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    input_dim: usize,
    hidden_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec3,
    pub running_mean: Vec3,
    pub running_var: Vec3,
}

/// Hidden width for `input_dim` inputs.
pub fn hidden_dim_for(input_dim: usize) -> usize {
    math::ceil(input_dim as f64 / 2.0) as usize
}

/// Glorot-uniform weights, zero biases, running statistics at (0, 1).
pub fn init_params(input_dim: usize, seed: u64) -> Result<MlpParams, Error> {
    if input_dim == 0 {
        return Err(Error::InvalidArgument("input dimension must be at least 1".into()));
    }
    let hidden_dim = hidden_dim_for(input_dim);
    let mut rng = seeded_rng(seed);
    let mut glorot = |fan_in: usize, fan_out: usize| {
        let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect::<Vec<f64>>()
    };
    let w1 = glorot(input_dim, hidden_dim);
    let w2 = glorot(hidden_dim, EMBED_DIM);
    Ok(MlpParams {
        input_dim,
        hidden_dim,
        w1,
        b1: vec![0.0; hidden_dim],
        w2,
        b2: [0.0; EMBED_DIM],
        running_mean: [0.0; EMBED_DIM],
        running_var: [1.0; EMBED_DIM],
    })
}

impl MlpParams {
    /// Reassembles parameters, e.g. from a checkpoint.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        input_dim: usize,
        hidden_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec3,
        running_mean: Vec3,
        running_var: Vec3,
    ) -> Result<Self, Error> {
        if input_dim == 0 || hidden_dim != hidden_dim_for(input_dim) {
            return Err(Error::InvalidArgument(format!(
                "hidden width {hidden_dim} does not match ceil({input_dim}/2)"
            )));
        }
        for (what, expected, found) in [
            ("w1", input_dim * hidden_dim, w1.len()),
            ("b1", hidden_dim, b1.len()),
            ("w2", hidden_dim * EMBED_DIM, w2.len()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        let params = MlpParams {
            input_dim,
            hidden_dim,
            w1,
            b1,
            w2,
            b2,
            running_mean,
            running_var,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .chain(&self.running_mean)
            .chain(&self.running_var)
            .all(|v| v.is_finite())
    }

    /// `self -= lr * grads`.
    pub fn apply_gradient(&mut self, grads: &ParamGrads, lr: f64) {
        let sub = |p: &mut [f64], g: &[f64]| {
            for (p, g) in p.iter_mut().zip(g) {
                *p -= lr * g;
            }
        };
        sub(&mut self.w1, &grads.w1);
        sub(&mut self.b1, &grads.b1);
        sub(&mut self.w2, &grads.w2);
        sub(&mut self.b2, &grads.b2);
    }

    /// Moves the running statistics toward a training batch's statistics.
    pub fn update_running_stats(&mut self, batch: &BatchStats) {
        for j in 0..EMBED_DIM {
            self.running_mean[j] =
                BATCHNORM_MOMENTUM * self.running_mean[j] + (1.0 - BATCHNORM_MOMENTUM) * batch.mean[j];
            self.running_var[j] =
                BATCHNORM_MOMENTUM * self.running_var[j] + (1.0 - BATCHNORM_MOMENTUM) * batch.var[j];
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), Error> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input row",
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activation output `v` plus the hidden-layer caches.
    fn pre_output(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec3) {
        let h = self.hidden_dim;
        let mut h1 = self.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            // encoded rows are mostly one-hot zeros
            if xi == 0.0 {
                continue;
            }
            let w = &self.w1[i * h..(i + 1) * h];
            for (acc, &wij) in h1.iter_mut().zip(w) {
                *acc += xi * wij;
            }
        }
        let a1: Vec<f64> = h1.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let mut v = self.b2;
        for (j, &aj) in a1.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            let w = &self.w2[j * EMBED_DIM..(j + 1) * EMBED_DIM];
            for (acc, &wjo) in v.iter_mut().zip(w) {
                *acc += aj * wjo;
            }
        }
        (h1, a1, v)
    }
}

/// Per-unit statistics of a training batch of pre-activation outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub mean: Vec3,
    /// Biased (population) variance.
    pub var: Vec3,
}

/// Result of [`apply_output_activation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activated {
    pub z: Vec3,
    /// Set when an L1/L2 normalisation received the zero vector and the
    /// fixed fallback `(1, 0, 0)` was returned instead.
    pub degenerate: bool,
}

const FALLBACK: Vec3 = [1.0, 0.0, 0.0];

/// Applies the output activation to a pre-activation vector.
///
/// Batchnorm normalises with `stats` (running statistics in evaluation,
/// batch statistics in training).
pub fn apply_output_activation(v: Vec3, kind: ActivationKind, stats: &BatchStats) -> Activated {
    let plain = |z| Activated {
        z,
        degenerate: false,
    };
    match kind {
        ActivationKind::None => plain(v),
        ActivationKind::Sigmoid => plain(v.map(|x| 1.0 / (1.0 + math::exp(-x)))),
        ActivationKind::Tanh => plain(v.map(math::tanh)),
        ActivationKind::Softmax => {
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e = v.map(|x| math::exp(x - max));
            let total: f64 = e.iter().sum();
            plain(e.map(|x| x / total))
        }
        ActivationKind::L1Norm | ActivationKind::L2Norm => {
            let norm = norm_of(&v, kind);
            if norm > 0.0 {
                plain(v.map(|x| x / norm))
            } else {
                Activated {
                    z: FALLBACK,
                    degenerate: true,
                }
            }
        }
        ActivationKind::BatchNorm => {
            let mut z = [0.0; EMBED_DIM];
            for j in 0..EMBED_DIM {
                z[j] = (v[j] - stats.mean[j]) / math::sqrt(stats.var[j] + BATCHNORM_EPS);
            }
            plain(z)
        }
    }
}

fn norm_of(v: &Vec3, kind: ActivationKind) -> f64 {
    match kind {
        ActivationKind::L1Norm => v.iter().map(|x| x.abs()).sum(),
        _ => math::sqrt(v.iter().map(|x| x * x).sum()),
    }
}

/// Cached intermediates of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub a1: Vec<f64>,
    pub v: Vec3,
    pub z: Vec3,
    pub kind: ActivationKind,
    pub degenerate: bool,
}

/// Gradients with the shapes of the trainable fields of [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec3,
}

impl ParamGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        ParamGrads {
            w1: vec![0.0; params.w1.len()],
            b1: vec![0.0; params.b1.len()],
            w2: vec![0.0; params.w2.len()],
            b2: [0.0; EMBED_DIM],
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.iter_mut() {
            *g *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }
}

fn check_output(z: &Vec3) -> Result<(), Error> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("embedder output".into()))
    }
}

/// Embeds one row in evaluation mode.
pub fn forward(params: &MlpParams, x: &[f64], kind: ActivationKind) -> Result<(Vec3, ForwardTrace), Error> {
    params.check_input(x)?;
    let (h1, a1, v) = params.pre_output(x);
    let stats = BatchStats {
        mean: params.running_mean,
        var: params.running_var,
    };
    let out = apply_output_activation(v, kind, &stats);
    check_output(&out.z)?;
    let trace = ForwardTrace {
        x: x.to_vec(),
        h1,
        a1,
        v,
        z: out.z,
        kind,
        degenerate: out.degenerate,
    };
    Ok((out.z, trace))
}

/// Vector-Jacobian product of a pointwise activation: `Jᵀ g` at `trace`.
fn activation_vjp(trace: &ForwardTrace, params: &MlpParams, g: &Vec3) -> Vec3 {
    let z = &trace.z;
    match trace.kind {
        ActivationKind::None => *g,
        ActivationKind::Sigmoid => core::array::from_fn(|i| g[i] * z[i] * (1.0 - z[i])),
        ActivationKind::Tanh => core::array::from_fn(|i| g[i] * (1.0 - z[i] * z[i])),
        ActivationKind::Softmax => {
            // (diag(z) - z zᵀ) g
            let gz: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
            core::array::from_fn(|i| z[i] * (g[i] - gz))
        }
        ActivationKind::L2Norm | ActivationKind::L1Norm if trace.degenerate => [0.0; EMBED_DIM],
        ActivationKind::L2Norm => {
            let norm = norm_of(&trace.v, ActivationKind::L2Norm);
            let gz: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
            core::array::from_fn(|i| (g[i] - z[i] * gz) / norm)
        }
        ActivationKind::L1Norm => {
            let norm = norm_of(&trace.v, ActivationKind::L1Norm);
            let gz: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
            core::array::from_fn(|i| (g[i] - signum(trace.v[i]) * gz) / norm)
        }
        ActivationKind::BatchNorm => {
            core::array::from_fn(|i| g[i] / math::sqrt(params.running_var[i] + BATCHNORM_EPS))
        }
    }
}

fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_trace(trace: &ForwardTrace, params: &MlpParams) -> Result<(), Error> {
    if trace.x.len() != params.input_dim || trace.h1.len() != params.hidden_dim {
        return Err(Error::DimensionMismatch {
            what: "forward trace",
            expected: params.input_dim,
            found: trace.x.len(),
        });
    }
    Ok(())
}

/// Backpropagates `grad_v = ∂L/∂v` through both layers into `grads`.
fn accumulate_from_pre_output(trace: &ForwardTrace, params: &MlpParams, grad_v: &Vec3, grads: &mut ParamGrads) {
    let h = params.hidden_dim;
    for (acc, g) in grads.b2.iter_mut().zip(grad_v) {
        *acc += g;
    }
    let mut grad_h1 = vec![0.0; h];
    for j in 0..h {
        let w = &params.w2[j * EMBED_DIM..(j + 1) * EMBED_DIM];
        let gw = &mut grads.w2[j * EMBED_DIM..(j + 1) * EMBED_DIM];
        let aj = trace.a1[j];
        let mut back = 0.0;
        for o in 0..EMBED_DIM {
            gw[o] += aj * grad_v[o];
            back += w[o] * grad_v[o];
        }
        // relu subgradient at 0 is 0
        grad_h1[j] = if trace.h1[j] > 0.0 { back } else { 0.0 };
    }
    for (acc, g) in grads.b1.iter_mut().zip(&grad_h1) {
        *acc += g;
    }
    for (i, &xi) in trace.x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let gw = &mut grads.w1[i * h..(i + 1) * h];
        for (acc, g) in gw.iter_mut().zip(&grad_h1) {
            *acc += xi * g;
        }
    }
}

/// Adds the gradient of `z · grad_z` for one evaluation-mode trace to `grads`.
pub fn backward_into(
    trace: &ForwardTrace,
    params: &MlpParams,
    grad_z: &Vec3,
    grads: &mut ParamGrads,
) -> Result<(), Error> {
    check_trace(trace, params)?;
    let grad_v = activation_vjp(trace, params, grad_z);
    accumulate_from_pre_output(trace, params, &grad_v, grads);
    Ok(())
}

/// Gradient of `z · grad_z` with respect to every trainable parameter.
pub fn backward(trace: &ForwardTrace, params: &MlpParams, grad_z: &Vec3) -> Result<ParamGrads, Error> {
    let mut grads = ParamGrads::zeros_like(params);
    backward_into(trace, params, grad_z, &mut grads)?;
    Ok(grads)
}

/// Forward caches for a whole batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    pub traces: Vec<ForwardTrace>,
    pub mode: Mode,
    /// Batch statistics, present for batchnorm in training mode.
    pub stats: Option<BatchStats>,
}

impl BatchTrace {
    pub fn outputs(&self) -> impl ExactSizeIterator<Item = &Vec3> + '_ {
        self.traces.iter().map(|t| &t.z)
    }
}

/// Embeds a batch of rows. In [`Mode::Train`] batchnorm uses the statistics
/// of this batch; running statistics are left untouched (see
/// [`MlpParams::update_running_stats`]).
pub fn forward_batch<R: AsRef<[f64]>>(
    params: &MlpParams,
    rows: &[R],
    kind: ActivationKind,
    mode: Mode,
) -> Result<BatchTrace, Error> {
    if kind != ActivationKind::BatchNorm || mode == Mode::Eval {
        let traces = rows
            .iter()
            .map(|x| forward(params, x.as_ref(), kind).map(|(_, t)| t))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(BatchTrace {
            traces,
            mode,
            stats: None,
        });
    }
    if rows.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    let mut traces = Vec::with_capacity(rows.len());
    for x in rows {
        let x = x.as_ref();
        params.check_input(x)?;
        let (h1, a1, v) = params.pre_output(x);
        traces.push(ForwardTrace {
            x: x.to_vec(),
            h1,
            a1,
            v,
            z: [0.0; EMBED_DIM],
            kind,
            degenerate: false,
        });
    }
    let n = traces.len() as f64;
    let mut mean = [0.0; EMBED_DIM];
    for t in &traces {
        for j in 0..EMBED_DIM {
            mean[j] += t.v[j] / n;
        }
    }
    let mut var = [0.0; EMBED_DIM];
    for t in &traces {
        for j in 0..EMBED_DIM {
            var[j] += (t.v[j] - mean[j]) * (t.v[j] - mean[j]) / n;
        }
    }
    let stats = BatchStats { mean, var };
    for t in &mut traces {
        t.z = apply_output_activation(t.v, kind, &stats).z;
        check_output(&t.z)?;
    }
    Ok(BatchTrace {
        traces,
        mode,
        stats: Some(stats),
    })
}

/// Adds the gradient of `Σᵢ zᵢ · grad_zᵢ` over the batch to `grads`.
pub fn backward_batch(
    batch: &BatchTrace,
    params: &MlpParams,
    grad_z: &[Vec3],
    grads: &mut ParamGrads,
) -> Result<(), Error> {
    if grad_z.len() != batch.traces.len() {
        return Err(Error::DimensionMismatch {
            what: "batch gradient",
            expected: batch.traces.len(),
            found: grad_z.len(),
        });
    }
    let Some(stats) = batch.stats else {
        for (trace, g) in batch.traces.iter().zip(grad_z) {
            backward_into(trace, params, g, grads)?;
        }
        return Ok(());
    };
    // dv_i = (g_i - mean(g) - ẑ_i · mean(g ⊙ ẑ)) / sqrt(var + eps), per unit
    let n = batch.traces.len() as f64;
    let mut mean_g = [0.0; EMBED_DIM];
    let mut mean_gz = [0.0; EMBED_DIM];
    for (t, g) in batch.traces.iter().zip(grad_z) {
        for j in 0..EMBED_DIM {
            mean_g[j] += g[j] / n;
            mean_gz[j] += g[j] * t.z[j] / n;
        }
    }
    for (t, g) in batch.traces.iter().zip(grad_z) {
        check_trace(t, params)?;
        let grad_v: Vec3 = core::array::from_fn(|j| {
            (g[j] - mean_g[j] - t.z[j] * mean_gz[j]) / math::sqrt(stats.var[j] + BATCHNORM_EPS)
        });
        accumulate_from_pre_output(t, params, &grad_v, grads);
    }
    Ok(())
}

/// Embeds every row of `rows` in evaluation mode.
pub fn embed_all<'a, I>(params: &MlpParams, rows: I, kind: ActivationKind) -> Result<Vec<Vec3>, Error>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rows.into_iter()
        .map(|x| forward(params, x, kind).map(|(z, _)| z))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(k: usize) -> MlpParams {
        let mut p = init_params(k, 0).unwrap();
        p.w1.iter_mut().for_each(|w| *w = 0.0);
        p.w2.iter_mut().for_each(|w| *w = 0.0);
        p
    }

    #[test]
    fn init_shapes_and_determinism() {
        let a = init_params(10, 1).unwrap();
        assert_eq!(a, init_params(10, 1).unwrap());
        assert_eq!(a.hidden_dim(), 5);
        assert_eq!(a.w2.len(), 5 * 3);
        assert_eq!(init_params(9, 1).unwrap().hidden_dim(), 5);
        assert!(init_params(0, 1).is_err());
        let limit = math::sqrt(6.0 / 15.0);
        assert!(a.w1.iter().all(|w| w.abs() <= limit));
        assert!(a.b1.iter().all(|&b| b == 0.0));
        assert_ne!(a, init_params(10, 2).unwrap());
    }

    #[test]
    fn zero_network_outputs() {
        let p = zero_params(4);
        let x = [0.3, 0.1, 0.0, 1.0];
        let (z, _) = forward(&p, &x, ActivationKind::Softmax).unwrap();
        for v in z {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let (z, _) = forward(&p, &x, ActivationKind::Tanh).unwrap();
        assert_eq!(z, [0.0; 3]);
    }

    #[test]
    fn l2_output_is_unit() {
        let p = init_params(7, 3).unwrap();
        let (z, _) = forward(&p, &[0.5, 0.2, 0.9, 0.1, 0.0, 1.0, 0.3], ActivationKind::L2Norm).unwrap();
        let n = math::sqrt(z.iter().map(|v| v * v).sum());
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn activation_examples() {
        let st = BatchStats {
            mean: [0.0; 3],
            var: [1.0; 3],
        };
        let a = apply_output_activation([3.0, 0.0, 0.0], ActivationKind::L2Norm, &st);
        assert_eq!(a.z, [1.0, 0.0, 0.0]);
        let a = apply_output_activation([1.0, -1.0, 2.0], ActivationKind::L1Norm, &st);
        assert_eq!(a.z, [0.25, -0.25, 0.5]);
        let a = apply_output_activation([0.0; 3], ActivationKind::L2Norm, &st);
        assert!(a.degenerate);
        assert_eq!(a.z, [1.0, 0.0, 0.0]);
        let a = apply_output_activation([0.0; 3], ActivationKind::L1Norm, &st);
        assert!(a.degenerate);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = init_params(3, 0).unwrap();
        assert!(matches!(
            forward(&p, &[1.0, 2.0], ActivationKind::None),
            Err(Error::DimensionMismatch { .. })
        ));
        let (_, trace) = forward(&p, &[1.0, 0.0, 0.5], ActivationKind::None).unwrap();
        let other = init_params(5, 0).unwrap();
        assert!(backward(&trace, &other, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = init_params(6, 4).unwrap();
        let (_, t) = forward(&p, &[0.1, 0.9, 0.4, 0.0, 1.0, 0.2], ActivationKind::Softmax).unwrap();
        let g = backward(&t, &p, &[0.0; 3]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_normalisation_has_zero_gradient() {
        let p = zero_params(2);
        let (z, t) = forward(&p, &[0.5, 0.5], ActivationKind::L2Norm).unwrap();
        assert!(t.degenerate);
        assert_eq!(z, FALLBACK);
        let g = backward(&t, &p, &[1.0, 1.0, 1.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn max_distances() {
        use ActivationKind::*;
        assert_eq!(max_pairwise_distance(Softmax, 3), math::sqrt(2.0));
        assert_eq!(max_pairwise_distance(Sigmoid, 3), math::sqrt(3.0));
        assert_eq!(max_pairwise_distance(Tanh, 3), 2.0 * math::sqrt(3.0));
        assert_eq!(max_pairwise_distance(L1Norm, 3), 2.0);
        assert_eq!(max_pairwise_distance(L2Norm, 3), 2.0);
        assert!(max_pairwise_distance(None, 3).is_infinite());
        assert!(max_pairwise_distance(BatchNorm, 3).is_infinite());
    }

    #[test]
    fn names_round_trip() {
        for k in ActivationKind::ALL {
            assert_eq!(k.name().parse::<ActivationKind>().unwrap(), k);
        }
        assert!("relu".parse::<ActivationKind>().is_err());
    }

    #[test]
    fn running_stats_update() {
        let mut p = init_params(2, 0).unwrap();
        p.update_running_stats(&BatchStats {
            mean: [1.0, 2.0, 3.0],
            var: [0.0, 0.0, 0.0],
        });
        assert!((p.running_mean[0] - 0.1).abs() < 1e-15);
        assert!((p.running_var[2] - 0.9).abs() < 1e-15);
    }
}
