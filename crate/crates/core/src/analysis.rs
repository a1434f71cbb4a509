//! Diagnostics on embedding snapshots: collapse detection, pairwise distance
//! histograms and per-group summaries.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng as _;

use crate::{math, seeded_rng, Error, Vec3, EMBED_DIM};

/// Linkage radius below which two embeddings belong to the same cluster.
pub const COLLAPSE_THRESHOLD: f64 = 1e-5;
/// Most clusters a collapsed space may split into.
pub const MAX_COLLAPSE_CLUSTERS: usize = 16;
/// Share of points the tight clusters must hold for a collapse verdict.
pub const MIN_COLLAPSE_COVERAGE: f64 = 0.99;
/// Above this many points collapse detection runs on a subsample.
pub const EXACT_CLUSTERING_LIMIT: usize = 50_000;
pub const CLUSTERING_SUBSAMPLE: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    /// Single-linkage components with at least two points.
    pub cluster_count: usize,
    /// Points not linked to any other point.
    pub singletons: usize,
    /// Sizes of the clusters, largest first.
    pub cluster_sizes: Vec<usize>,
    /// Single-linkage merge height of each cluster (the longest edge of
    /// its minimum spanning tree), aligned with `cluster_sizes`.
    pub max_intra_distance: Vec<f64>,
    /// Largest distance between two members of each cluster.
    pub diameters: Vec<f64>,
    /// Fraction of points inside the largest [`MAX_COLLAPSE_CLUSTERS`]
    /// clusters.
    pub coverage: f64,
    pub collapsed: bool,
    pub threshold: f64,
    /// Points examined (less than the input when subsampled).
    pub points: usize,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the partition does not depend on visit order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage clustering at `threshold`; returns the components.
fn linkage_components(points: &[Vec3], threshold: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut sets = DisjointSet::new(n);
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j][0] - points[i][0] >= threshold {
                break;
            }
            if math::dist(&points[i], &points[j]) < threshold {
                sets.union(i, j);
            }
        }
    }
    let mut by_root: alloc::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = sets.find(i);
        by_root.entry(r).or_default().push(i);
    }
    by_root.into_values().collect()
}

fn diameter(points: &[Vec3], members: &[usize]) -> f64 {
    let mut max = 0.0f64;
    for (k, &i) in members.iter().enumerate() {
        for &j in &members[k + 1..] {
            max = max.max(math::dist(&points[i], &points[j]));
        }
    }
    max
}

/// Longest edge of the minimum spanning tree over `members` (dense Prim).
fn merge_height(points: &[Vec3], members: &[usize]) -> f64 {
    let m = members.len();
    let mut best = vec![f64::INFINITY; m];
    let mut done = vec![false; m];
    let mut height = 0.0f64;
    let mut current = 0;
    for _ in 1..m {
        done[current] = true;
        let p = &points[members[current]];
        let mut next = usize::MAX;
        for k in 0..m {
            if done[k] {
                continue;
            }
            best[k] = best[k].min(math::dist(p, &points[members[k]]));
            if next == usize::MAX || best[k] < best[next] {
                next = k;
            }
        }
        height = height.max(best[next]);
        current = next;
    }
    height
}

/// Decides whether the embedding has collapsed into a few near-point clusters.
///
/// Points closer than [`COLLAPSE_THRESHOLD`] are linked (single linkage),
/// so every cluster's merge height is below the threshold even when a chain
/// of points makes its diameter larger. The space counts as collapsed when
/// the largest [`MAX_COLLAPSE_CLUSTERS`] clusters hold at least
/// [`MIN_COLLAPSE_COVERAGE`] of the points.
pub fn detect_collapse(embeddings: &[Vec3]) -> Result<ClusterReport, Error> {
    if embeddings.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: embeddings.len(),
        });
    }
    if embeddings.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embeddings".into()));
    }
    let subsampled: Vec<Vec3>;
    let points = if embeddings.len() > EXACT_CLUSTERING_LIMIT {
        let mut rng = seeded_rng(0x5eed);
        let mut idx = sample(&mut rng, embeddings.len(), CLUSTERING_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        subsampled = idx.into_iter().map(|i| embeddings[i]).collect();
        &subsampled[..]
    } else {
        embeddings
    };

    let threshold = COLLAPSE_THRESHOLD;
    let components = linkage_components(points, threshold);
    let singletons = components.iter().filter(|c| c.len() == 1).count();
    let mut clusters: Vec<(usize, f64, f64)> = components
        .iter()
        .filter(|c| c.len() > 1)
        .map(|c| (c.len(), merge_height(points, c), diameter(points, c)))
        .collect();
    clusters.sort_by(|a, b| b.0.cmp(&a.0).then(a.2.total_cmp(&b.2)));

    let covered: usize = clusters
        .iter()
        .filter(|c| c.1 < threshold)
        .take(MAX_COLLAPSE_CLUSTERS)
        .map(|c| c.0)
        .sum();
    let coverage = covered as f64 / points.len() as f64;
    Ok(ClusterReport {
        cluster_count: clusters.len(),
        singletons,
        cluster_sizes: clusters.iter().map(|c| c.0).collect(),
        max_intra_distance: clusters.iter().map(|c| c.1).collect(),
        diameters: clusters.iter().map(|c| c.2).collect(),
        coverage,
        collapsed: coverage >= MIN_COLLAPSE_COVERAGE,
        threshold,
        points: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHistogram {
    /// `counts.len() + 1` equally spaced edges from 0 to the largest distance.
    /// Bins are right-closed: `[e0, e1], (e1, e2], ...`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub sample_pair_count: u64,
    /// Whether the pairs were subsampled.
    pub subsampled: bool,
}

impl DistanceHistogram {
    /// Relative frequency of each bin.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.sample_pair_count.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// Histogram of pairwise Euclidean distances.
///
/// All `N(N-1)/2` pairs are used when there are at most `max_pairs` of them;
/// otherwise `max_pairs` pairs are drawn uniformly (with replacement) using
/// `seed`. Bins are equal-width and right-closed on `[0, largest observed
/// distance]`.
pub fn pairwise_distance_histogram(
    embeddings: &[Vec3],
    n_bins: usize,
    max_pairs: usize,
    seed: u64,
) -> Result<DistanceHistogram, Error> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    if n_bins == 0 || max_pairs == 0 {
        return Err(Error::InvalidArgument("bins and max_pairs must be positive".into()));
    }
    let all_pairs = n as u128 * (n as u128 - 1) / 2;
    let subsampled = all_pairs > max_pairs as u128;
    let mut distances = Vec::with_capacity(if subsampled { max_pairs } else { all_pairs as usize });
    if subsampled {
        let mut rng = seeded_rng(seed);
        for _ in 0..max_pairs {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            distances.push(math::dist(&embeddings[i], &embeddings[j]));
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                distances.push(math::dist(&embeddings[i], &embeddings[j]));
            }
        }
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("embeddings".into()));
    }
    let max = distances.iter().copied().fold(0.0, f64::max);
    let width = max / n_bins as f64;
    let bin_edges = (0..=n_bins)
        .map(|k| if k == n_bins { max } else { width * k as f64 })
        .collect();
    let mut counts = vec![0u64; n_bins];
    for d in &distances {
        let bin = if width > 0.0 {
            (math::ceil(d / width) as usize).saturating_sub(1).min(n_bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Ok(DistanceHistogram {
        bin_edges,
        counts,
        sample_pair_count: distances.len() as u64,
        subsampled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSummary {
    pub s: u8,
    pub count: usize,
    pub centroid: Vec3,
    /// Share of the group with `y = 1`.
    pub positive_rate: f64,
}

/// Numeric content behind a two-colour scatter plot of an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSummary {
    pub groups: [GroupSummary; 2],
    pub bbox_min: Vec3,
    pub bbox_max: Vec3,
    /// Mean distance between two points of the same sensitive group.
    pub mean_within: f64,
    /// Mean distance between points of different sensitive groups.
    pub mean_between: f64,
}

pub fn snapshot_summary(embeddings: &[Vec3], y: &[u8], s: &[u8]) -> Result<SnapshotSummary, Error> {
    let n = embeddings.len();
    for (what, len) in [("labels", y.len()), ("sensitive values", s.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    let mut count = [0usize; 2];
    let mut positives = [0usize; 2];
    let mut sums = [[0.0; EMBED_DIM]; 2];
    let mut bbox_min = [f64::INFINITY; EMBED_DIM];
    let mut bbox_max = [f64::NEG_INFINITY; EMBED_DIM];
    for i in 0..n {
        let g = usize::from(s[i] != 0);
        count[g] += 1;
        positives[g] += usize::from(y[i] != 0);
        for d in 0..EMBED_DIM {
            sums[g][d] += embeddings[i][d];
            bbox_min[d] = bbox_min[d].min(embeddings[i][d]);
            bbox_max[d] = bbox_max[d].max(embeddings[i][d]);
        }
    }
    if count[0] == 0 {
        return Err(Error::EmptyGroup("s=0"));
    }
    if count[1] == 0 {
        return Err(Error::EmptyGroup("s=1"));
    }

    let (mut within, mut within_pairs) = (0.0, 0u64);
    let (mut between, mut between_pairs) = (0.0, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let d = math::dist(&embeddings[i], &embeddings[j]);
            if s[i] == s[j] {
                within += d;
                within_pairs += 1;
            } else {
                between += d;
                between_pairs += 1;
            }
        }
    }
    let group = |g: usize| GroupSummary {
        s: g as u8,
        count: count[g],
        centroid: sums[g].map(|v| v / count[g] as f64),
        positive_rate: positives[g] as f64 / count[g] as f64,
    };
    Ok(SnapshotSummary {
        groups: [group(0), group(1)],
        bbox_min,
        bbox_max,
        mean_within: if within_pairs > 0 { within / within_pairs as f64 } else { 0.0 },
        mean_between: between / between_pairs as f64,
    })
}
