//! Area under the ROC curve via the Mann-Whitney statistic.
//!
//! Wins and ties are accumulated as integers, so the fast path returns
//! exactly the value of the O(n^2) pairwise count.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AucResult {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// (false positive rate, true positive rate) at every distinct
    /// threshold, from (0,0) to (1,1).
    pub curve: Vec<(f64, f64)>,
}

/// Pairwise-comparison AUC with half credit for ties, computed in
/// O(n log n) by sweeping score groups in ascending order.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<AucResult> {
    assert_eq!(scores.len(), labels.len());
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    // ascending sweep: a positive beats every negative with a strictly
    // smaller score and half-ties the negatives in its own score group
    let mut wins: u64 = 0;
    let mut ties: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_pos = 0u64;
        let mut group_neg = 0u64;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            j += 1;
        }
        wins += group_pos * neg_below;
        ties += group_pos * group_neg;
        neg_below += group_neg;
        i = j;
    }
    let auc = (wins as f64 + 0.5 * ties as f64) / (n_pos as f64 * n_neg as f64);

    // ROC points, descending threshold sweep
    let mut curve = Vec::new();
    curve.push((0.0, 0.0));
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = order.len();
    while i > 0 {
        let mut j = i;
        while j > 0 && scores[order[j - 1]] == scores[order[i - 1]] {
            if labels[order[j - 1]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j -= 1;
        }
        curve.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        i = j;
    }
    Ok(AucResult {
        auc,
        n_pos,
        n_neg,
        curve,
    })
}
