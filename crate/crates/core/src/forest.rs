//! Random-forest classifier used as a probe.
//!
//! Trees are grown on bootstrap samples with Gini splits over a random subset
//! of `floor(√D)` candidate features per node (more are examined when the
//! drawn ones are constant in the node). Thresholds sit midway between
//! consecutive distinct training values. Leaves store the class-1 fraction of
//! their bootstrap-weighted samples.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::matrix::Matrix;
use crate::{math, seeded_rng, Error, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Nodes with fewer (bootstrap-weighted) samples become leaves.
    pub min_samples_split: usize,
    /// Candidate features per node; `None` means `floor(√D)`, at least 1.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            max_depth: 8,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

/// Minimum training rows for [`train_forest`].
pub const MIN_TRAINING_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class-1 fraction of the training samples reaching the leaf.
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub seed: u64,
    pub config: ForestConfig,
}

/// Per-feature dense ranks of the training values.
struct RankedFeatures {
    /// Sorted distinct values of each feature.
    uniques: Vec<Vec<f64>>,
    /// `ranks[f][i]`: position of sample `i`'s value in `uniques[f]`.
    ranks: Vec<Vec<u32>>,
}

impl RankedFeatures {
    fn new(x: &Matrix) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut uniques = Vec::with_capacity(d);
        let mut ranks = Vec::with_capacity(d);
        let mut order: Vec<usize> = (0..n).collect();
        for f in 0..d {
            order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
            let mut u = Vec::new();
            let mut r = vec![0u32; n];
            for &i in &order {
                let v = x.get(i, f);
                if u.last() != Some(&v) {
                    u.push(v);
                }
                r[i] = (u.len() - 1) as u32;
            }
            uniques.push(u);
            ranks.push(r);
        }
        RankedFeatures { uniques, ranks }
    }
}

#[derive(Clone, Copy)]
struct Sample {
    index: u32,
    weight: u32,
    label: u8,
}

struct BestSplit {
    feature: usize,
    /// Samples with rank at most this go left.
    rank: u32,
    threshold: f64,
    score: f64,
}

struct TreeBuilder<'a> {
    data: &'a RankedFeatures,
    config: &'a ForestConfig,
    mtry: usize,
    rng: Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
    /// Weighted class counts per rank; kept zeroed between uses.
    dense: Vec<[u64; 2]>,
    sorted: Vec<(u32, u32, u8)>,
}

impl<'a> TreeBuilder<'a> {
    fn grow(&mut self, samples: Vec<Sample>, depth: usize) -> usize {
        let mut counts = [0u64; 2];
        for s in &samples {
            counts[usize::from(s.label)] += u64::from(s.weight);
        }
        let total = counts[0] + counts[1];
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: counts[1] as f64 / total as f64,
        });
        if depth >= self.config.max_depth
            || total < self.config.min_samples_split as u64
            || counts[0] == 0
            || counts[1] == 0
        {
            return id;
        }
        let Some(best) = self.best_split(&samples) else {
            return id;
        };
        let data = self.data;
        let ranks = &data.ranks[best.feature];
        let (left, right): (Vec<Sample>, Vec<Sample>) =
            samples.into_iter().partition(|s| ranks[s.index as usize] <= best.rank);
        let left_id = self.grow(left, depth + 1);
        let right_id = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left_id,
            right: right_id,
        };
        id
    }

    fn best_split(&mut self, samples: &[Sample]) -> Option<BestSplit> {
        let d = self.features.len();
        let mut best: Option<BestSplit> = None;
        let mut informative = 0;
        // partial Fisher-Yates: examine features in random order until mtry
        // non-constant ones have been seen
        for k in 0..d {
            if informative >= self.mtry {
                break;
            }
            let j = self.rng.gen_range(k..d);
            self.features.swap(k, j);
            let f = self.features[k];
            if let Some(split) = self.scan_feature(f, samples) {
                informative += 1;
                if best.as_ref().map_or(true, |b| split.score > b.score) {
                    best = Some(split);
                }
            }
        }
        best
    }

    /// Best Gini split on feature `f`, or `None` when it is constant here.
    fn scan_feature(&mut self, f: usize, samples: &[Sample]) -> Option<BestSplit> {
        let data = self.data;
        let ranks = &data.ranks[f];
        let uniques = &data.uniques[f];
        let m = samples.len();
        let mut groups: Vec<(u32, [u64; 2])> = Vec::new();
        let log_m = math::ln(m.max(2) as f64) / core::f64::consts::LN_2;
        if (m as f64) * log_m < uniques.len() as f64 {
            self.sorted.clear();
            self.sorted
                .extend(samples.iter().map(|s| (ranks[s.index as usize], s.weight, s.label)));
            self.sorted.sort_unstable_by_key(|t| t.0);
            for &(r, w, l) in &self.sorted {
                match groups.last_mut() {
                    Some((last, c)) if *last == r => c[usize::from(l)] += u64::from(w),
                    _ => {
                        let mut c = [0u64; 2];
                        c[usize::from(l)] = u64::from(w);
                        groups.push((r, c));
                    }
                }
            }
        } else {
            let (mut lo, mut hi) = (u32::MAX, 0u32);
            for s in samples {
                let r = ranks[s.index as usize];
                self.dense[r as usize][usize::from(s.label)] += u64::from(s.weight);
                lo = lo.min(r);
                hi = hi.max(r);
            }
            for r in lo..=hi {
                let c = core::mem::take(&mut self.dense[r as usize]);
                if c[0] + c[1] > 0 {
                    groups.push((r, c));
                }
            }
        }
        if groups.len() < 2 {
            return None;
        }

        let total = groups.iter().fold([0u64; 2], |acc, (_, c)| [acc[0] + c[0], acc[1] + c[1]]);
        let mut left = [0u64; 2];
        let mut best: Option<(usize, f64)> = None;
        for (k, (_, c)) in groups[..groups.len() - 1].iter().enumerate() {
            left[0] += c[0];
            left[1] += c[1];
            let right = [total[0] - left[0], total[1] - left[1]];
            // maximising Σ_child (n0² + n1²) / n minimises weighted Gini impurity
            let purity = |c: [u64; 2]| {
                let (a, b) = (c[0] as f64, c[1] as f64);
                (a * a + b * b) / (a + b)
            };
            let score = purity(left) + purity(right);
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((k, score));
            }
        }
        let (k, score) = best?;
        let (lo_rank, hi_rank) = (groups[k].0, groups[k + 1].0);
        let (a, b) = (uniques[lo_rank as usize], uniques[hi_rank as usize]);
        let mut threshold = a + (b - a) / 2.0;
        if threshold >= b {
            threshold = a;
        }
        Some(BestSplit {
            feature: f,
            rank: lo_rank,
            threshold,
            score,
        })
    }
}

fn tree_rng(seed: u64, tree: usize) -> Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(tree as u64);
    rng
}

/// Fits a forest on `x` (rows are samples) against binary `labels`.
///
/// Each tree draws its bootstrap sample and candidate features from its own
/// generator, derived from `(seed, tree index)`.
pub fn train_forest(x: &Matrix, labels: &[u8], seed: u64, config: &ForestConfig) -> Result<RandomForest, Error> {
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    if n < MIN_TRAINING_ROWS {
        return Err(Error::TooFewSamples {
            needed: MIN_TRAINING_ROWS,
            found: n,
        });
    }
    if x.cols() == 0 || config.n_trees == 0 || config.max_depth == 0 {
        return Err(Error::InvalidArgument(
            "forest needs features, trees and a positive depth".into(),
        ));
    }
    if labels.iter().all(|&l| l != 0) || labels.iter().all(|&l| l == 0) {
        return Err(Error::SingleClass("labels"));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest training features".into()));
    }
    let d = x.cols();
    let mtry = config
        .max_features
        .unwrap_or_else(|| math::floor(math::sqrt(d as f64)) as usize)
        .clamp(1, d);
    let ranked = RankedFeatures::new(x);
    let max_uniques = ranked.uniques.iter().map(Vec::len).max().unwrap_or(0);
    let labels: Vec<u8> = labels.iter().map(|&l| u8::from(l != 0)).collect();

    let mut trees = Vec::with_capacity(config.n_trees);
    let mut weights = vec![0u32; n];
    for t in 0..config.n_trees {
        let mut rng = tree_rng(seed, t);
        weights.iter_mut().for_each(|w| *w = 0);
        for _ in 0..n {
            weights[rng.gen_range(0..n)] += 1;
        }
        let samples: Vec<Sample> = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(i, &w)| Sample {
                index: i as u32,
                weight: w,
                label: labels[i],
            })
            .collect();
        let mut builder = TreeBuilder {
            data: &ranked,
            config,
            mtry,
            rng,
            nodes: Vec::new(),
            features: (0..d).collect(),
            dense: vec![[0; 2]; max_uniques],
            sorted: Vec::new(),
        };
        builder.grow(samples, 0);
        trees.push(DecisionTree { nodes: builder.nodes });
    }
    Ok(RandomForest {
        trees,
        n_features: d,
        seed,
        config: *config,
    })
}

impl RandomForest {
    /// Mean over trees of the leaf class-1 fraction.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, Error> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "forest input",
                expected: self.n_features,
                found: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict_all(&self, x: &Matrix) -> Result<Vec<f64>, Error> {
        x.iter_rows().map(|row| self.predict_proba(row)).collect()
    }
}

/// Free-function form of [`RandomForest::predict_proba`].
pub fn predict_proba(forest: &RandomForest, x: &[f64]) -> Result<f64, Error> {
    forest.predict_proba(x)
}
