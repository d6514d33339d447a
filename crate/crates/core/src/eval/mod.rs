//! Indicator, embedding and cluster evaluation.

mod auroc;
mod cluster;
mod coverage;
mod knn;
pub mod report;
mod terms;

pub use auroc::{auroc, triplet_auroc, AurocRow, TripletAuroc};
pub use cluster::{cluster, eps_components, pca_2d, ClusterReport, ClusterSummary, Projection};
pub use coverage::{coverage, CoverageReport};
pub use knn::{f1_score, knn_cv, knn_predict, knn_sweep, stratified_folds, KnnResult};
pub use terms::{cluster_shift_terms, ShiftTerms};

use thiserror::Error;

use crate::shift::ShiftError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no triplets for any indicator")]
    NoIndicators,
    #[error("no triplet has all three sources labeled")]
    NoLabeledTriplets,
    #[error("need at least {folds} labeled sources with embeddings, found {found}")]
    TooFewSources { folds: usize, found: usize },
    #[error("k = {k} must be smaller than the smallest training fold ({train})")]
    KTooLarge { k: usize, train: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cluster {cluster}: {source}")]
    ClusterText { cluster: String, source: ShiftError },
}

/// Ranks starting at 1, ties sharing their average rank.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation; `None` when either side is constant or the
/// lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}
