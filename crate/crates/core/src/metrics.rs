//! Ranking metrics.

use alloc::vec::Vec;

use crate::Error;

/// Area under the ROC curve: the probability that a random positive scores
/// higher than a random negative, ties counting one half.
///
/// Computed exactly from tie-aware rank counts in integer arithmetic, so
/// `roc_auc(s) + roc_auc(-s) == 1` holds bit for bit.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, Error> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "scores",
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass("labels"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the Mann-Whitney U statistic of the positives
    let mut u2: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]];
        let mut end = start;
        let (mut pos, mut neg) = (0u64, 0u64);
        // == also merges -0.0 with 0.0
        while end < order.len() && scores[order[end]] == value {
            if labels[order[end]] != 0 {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        u2 += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }

    let total = 2 * positives * negatives;
    Ok(if 2 * u2 <= total {
        u2 as f64 / total as f64
    } else {
        1.0 - (total - u2) as f64 / total as f64
    })
}
