//! Triplet loss over squared Euclidean distances, its activity indicator and
//! gradients, and the stochastic triplet selection methods.

use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::dataset::{counterfactual_flip, EncodedDataset};
use crate::embedder::{max_squared_distance, ActivationKind};
use crate::{math, Error, Rng, Vec3, EMBED_DIM};

/// Non-negative triplet margin α.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Margin(f64);

impl Margin {
    pub fn new(alpha: f64) -> Result<Self, Error> {
        if alpha.is_finite() && alpha >= 0.0 {
            Ok(Margin(alpha))
        } else {
            Err(Error::InvalidArgument(format!("margin must be finite and >= 0, got {alpha}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// How the positive and negative of a triplet are drawn for an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionMethod {
    /// Positive: another sample of the anchor's class. Negative: other class.
    Classical,
    /// Positive: the anchor with its sensitive attribute flipped. Negative: other class.
    Counterfactual,
    /// Positive: the flipped anchor. Negative: any other sample.
    TargetAgnosticCounterfactual,
    /// Positive and negative: any other samples.
    Random,
    /// Positive: the anchor itself. Negative: other class.
    IdenticalPositive,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 5] = [
        SelectionMethod::Classical,
        SelectionMethod::Counterfactual,
        SelectionMethod::TargetAgnosticCounterfactual,
        SelectionMethod::Random,
        SelectionMethod::IdenticalPositive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Classical => "classical",
            SelectionMethod::Counterfactual => "counterfactual",
            SelectionMethod::TargetAgnosticCounterfactual => "target_agnostic_counterfactual",
            SelectionMethod::Random => "random",
            SelectionMethod::IdenticalPositive => "identical_positive",
        }
    }

    /// Whether the negative must carry the other label.
    pub fn negative_from_other_class(self) -> bool {
        matches!(
            self,
            SelectionMethod::Classical | SelectionMethod::Counterfactual | SelectionMethod::IdenticalPositive
        )
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown triplet selection method `{s}`")))
    }
}

/// Where a triplet's positive comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positive {
    /// Another sample of the dataset.
    Sample(usize),
    /// A bit-identical copy of the anchor.
    Anchor,
    /// The anchor with the sensitive column flipped.
    Counterfactual,
}

/// Anchor, positive and negative, by reference into a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: Positive,
    pub negative: usize,
    pub method: SelectionMethod,
}

impl Triplet {
    pub fn positive_is_synthetic(&self) -> bool {
        self.positive == Positive::Counterfactual
    }

    /// Feature row of the positive; synthesised for counterfactual positives.
    pub fn positive_row<'a>(&self, data: &'a EncodedDataset) -> Result<Cow<'a, [f64]>, Error> {
        Ok(match self.positive {
            Positive::Sample(i) => Cow::Borrowed(data.row(i)),
            Positive::Anchor => Cow::Borrowed(data.row(self.anchor)),
            Positive::Counterfactual => {
                Cow::Owned(counterfactual_flip(data.row(self.anchor), data.sensitive_index)?)
            }
        })
    }
}

/// Per-label index lists for O(1) sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndex {
    labels: Vec<u8>,
    members: [Vec<usize>; 2],
    /// Position of each sample inside its label's member list.
    position: Vec<usize>,
}

impl ClassIndex {
    pub fn new(labels: &[u8]) -> Self {
        let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut position = vec![0; labels.len()];
        for (i, &y) in labels.iter().enumerate() {
            let list = &mut members[usize::from(y != 0)];
            position[i] = list.len();
            list.push(i);
        }
        ClassIndex {
            labels: labels.iter().map(|&y| u8::from(y != 0)).collect(),
            members,
            position,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn class_size(&self, label: u8) -> usize {
        self.members[usize::from(label != 0)].len()
    }

    /// Checks that every anchor has valid candidates under `method`.
    pub fn check_method(&self, method: SelectionMethod) -> Result<(), Error> {
        if self.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                found: self.len(),
            });
        }
        if method.negative_from_other_class() && (self.class_size(0) == 0 || self.class_size(1) == 0) {
            return Err(Error::SingleClass("target"));
        }
        if method == SelectionMethod::Classical && (self.class_size(0) == 1 || self.class_size(1) == 1) {
            return Err(Error::InvalidArgument(
                "classical selection needs at least two samples per class".into(),
            ));
        }
        Ok(())
    }

    fn any_other(&self, anchor: usize, rng: &mut Rng) -> usize {
        let r = rng.gen_range(0..self.len() - 1);
        if r >= anchor {
            r + 1
        } else {
            r
        }
    }

    fn same_class_other(&self, anchor: usize, rng: &mut Rng) -> Option<usize> {
        let list = &self.members[usize::from(self.labels[anchor])];
        if list.len() < 2 {
            return None;
        }
        let mut r = rng.gen_range(0..list.len() - 1);
        if r >= self.position[anchor] {
            r += 1;
        }
        Some(list[r])
    }

    fn other_class(&self, anchor: usize, rng: &mut Rng) -> Option<usize> {
        let list = &self.members[usize::from(1 - self.labels[anchor])];
        if list.is_empty() {
            None
        } else {
            Some(list[rng.gen_range(0..list.len())])
        }
    }
}

/// Draws a triplet for `anchor` uniformly among the candidates `method` allows.
pub fn select_triplet(
    method: SelectionMethod,
    index: &ClassIndex,
    anchor: usize,
    rng: &mut Rng,
) -> Result<Triplet, Error> {
    if anchor >= index.len() {
        return Err(Error::InvalidArgument(format!(
            "anchor {anchor} out of range for {} samples",
            index.len()
        )));
    }
    if index.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: index.len(),
        });
    }
    let other_class = |rng: &mut Rng| index.other_class(anchor, rng).ok_or(Error::SingleClass("target"));
    let (positive, negative) = match method {
        SelectionMethod::Classical => {
            let p = index.same_class_other(anchor, rng).ok_or_else(|| {
                Error::InvalidArgument(format!("anchor {anchor} is the only sample of its class"))
            })?;
            (Positive::Sample(p), other_class(rng)?)
        }
        SelectionMethod::Counterfactual => (Positive::Counterfactual, other_class(rng)?),
        SelectionMethod::TargetAgnosticCounterfactual => {
            (Positive::Counterfactual, index.any_other(anchor, rng))
        }
        SelectionMethod::Random => {
            let p = index.any_other(anchor, rng);
            (Positive::Sample(p), index.any_other(anchor, rng))
        }
        SelectionMethod::IdenticalPositive => (Positive::Anchor, other_class(rng)?),
    };
    Ok(Triplet {
        anchor,
        positive,
        negative,
        method,
    })
}

/// `max(‖za − zp‖² − ‖za − zn‖² + α, 0)`.
pub fn triplet_loss(za: &Vec3, zp: &Vec3, zn: &Vec3, alpha: f64) -> f64 {
    let value = math::sq_dist(za, zp) - math::sq_dist(za, zn) + alpha;
    if value > 0.0 {
        value
    } else {
        0.0
    }
}

/// True when the triplet produces gradients: `α ≥ ‖za − zn‖² − ‖za − zp‖²`.
pub fn lambda_indicator(za: &Vec3, zp: &Vec3, zn: &Vec3, alpha: f64) -> bool {
    alpha >= math::sq_dist(za, zn) - math::sq_dist(za, zp)
}

/// Loss gradients with respect to the three embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletGrads {
    pub anchor: Vec3,
    pub positive: Vec3,
    pub negative: Vec3,
}

impl TripletGrads {
    pub const ZERO: TripletGrads = TripletGrads {
        anchor: [0.0; EMBED_DIM],
        positive: [0.0; EMBED_DIM],
        negative: [0.0; EMBED_DIM],
    };

    pub fn is_zero(&self) -> bool {
        self.anchor
            .iter()
            .chain(&self.positive)
            .chain(&self.negative)
            .all(|&g| g == 0.0)
    }
}

/// Gradients of [`triplet_loss`]; zero where the indicator is 0.
///
/// The positive receives the attractive term `−2(za − zp)`, the negative the
/// repulsive term `2(za − zn)`, and the anchor both, `2(zn − zp)`.
pub fn triplet_grads(za: &Vec3, zp: &Vec3, zn: &Vec3, alpha: f64) -> TripletGrads {
    if !lambda_indicator(za, zp, zn, alpha) {
        return TripletGrads::ZERO;
    }
    TripletGrads {
        anchor: core::array::from_fn(|i| 2.0 * (za[i] - zp[i]) - 2.0 * (za[i] - zn[i])),
        positive: core::array::from_fn(|i| -2.0 * (za[i] - zp[i])),
        negative: core::array::from_fn(|i| 2.0 * (za[i] - zn[i])),
    }
}

/// Whether `alpha` exceeds the largest squared distance the activation allows,
/// so the indicator is 1 for every triplet. Always false for unbounded kinds.
pub fn is_outrageous(alpha: f64, kind: ActivationKind, dim: usize) -> bool {
    let max = max_squared_distance(kind, dim);
    max.is_finite() && alpha > max
}
