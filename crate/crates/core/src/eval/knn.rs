use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::EvalError;
use crate::corpus::SourceLabel;
use crate::embedder::{distance, DistanceKind, Embeddings};
use crate::source::SourceId;

/// Fold index per item. Each class is shuffled and dealt round-robin, the
/// deal continuing across classes so fold sizes differ by at most one.
pub fn stratified_folds(truth: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, "folds"));
    let mut out = vec![0; truth.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut members: Vec<usize> = (0..truth.len()).filter(|&k| truth[k] == class).collect();
        members.shuffle(&mut rng);
        for k in members {
            out[k] = next % folds;
            next += 1;
        }
    }
    out
}

/// Cosine kNN vote with `true` as the unreliable class. Every training point
/// tied with the k-th nearest distance votes; a split vote goes to `true`.
pub fn knn_predict(train: &[(&[f64], bool)], query: &[f64], k: usize) -> bool {
    let mut d: Vec<(f64, bool)> = train.iter().map(|(v, y)| (distance(DistanceKind::Cosine, query, v), *y)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(&(cutoff, _)) = d.get(k.saturating_sub(1)) else {
        return true;
    };
    let (yes, no) = d.iter().take_while(|(x, _)| *x <= cutoff).fold((0, 0), |(y, n), (_, l)| if *l { (y + 1, n) } else { (y, n + 1) });
    yes >= no
}

/// Binary F1 with `true` as the positive class; 0 when precision or recall is
/// undefined.
pub fn f1_score(pred: &[bool], truth: &[bool]) -> f64 {
    let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
    let fp = pred.iter().zip(truth).filter(|(p, t)| **p && !**t).count() as f64;
    let fnn = pred.iter().zip(truth).filter(|(p, t)| !**p && **t).count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fnn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnResult {
    pub k: usize,
    pub mean_f1: f64,
    pub fold_f1: Vec<f64>,
}

struct Dataset<'a> {
    vectors: Vec<&'a [f64]>,
    truth: Vec<bool>,
    fold: Vec<usize>,
    min_train: usize,
}

fn dataset<'a>(emb: &'a Embeddings, labels: &BTreeMap<SourceId, SourceLabel>, folds: usize, seed: u64) -> Result<Dataset<'a>, EvalError> {
    if folds < 2 {
        return Err(EvalError::InvalidParameter(format!("folds must be at least 2, got {folds}")));
    }
    let (vectors, truth): (Vec<&[f64]>, Vec<bool>) =
        emb.iter().filter_map(|(s, e)| labels.get(s).map(|l| (e.vector.as_slice(), l.is_unreliable()))).unzip();
    if vectors.len() < folds {
        return Err(EvalError::TooFewSources { folds, found: vectors.len() });
    }
    let fold = stratified_folds(&truth, folds, seed);
    let min_train = (0..folds).map(|f| fold.iter().filter(|&&x| x != f).count()).min().unwrap_or(0);
    Ok(Dataset { vectors, truth, fold, min_train })
}

fn evaluate(data: &Dataset, k: usize, folds: usize) -> Result<KnnResult, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidParameter("k must be at least 1".into()));
    }
    if k >= data.min_train {
        return Err(EvalError::KTooLarge { k, train: data.min_train });
    }
    let fold_f1: Vec<f64> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<(&[f64], bool)> =
                (0..data.truth.len()).filter(|&i| data.fold[i] != f).map(|i| (data.vectors[i], data.truth[i])).collect();
            let test: Vec<usize> = (0..data.truth.len()).filter(|&i| data.fold[i] == f).collect();
            let pred: Vec<bool> = test.iter().map(|&i| knn_predict(&train, data.vectors[i], k)).collect();
            let truth: Vec<bool> = test.iter().map(|&i| data.truth[i]).collect();
            f1_score(&pred, &truth)
        })
        .collect();
    Ok(KnnResult { k, mean_f1: fold_f1.iter().sum::<f64>() / folds as f64, fold_f1 })
}

/// Stratified k-fold cross-validated F1 of cosine kNN over labeled sources.
pub fn knn_cv(emb: &Embeddings, labels: &BTreeMap<SourceId, SourceLabel>, k: usize, folds: usize, seed: u64) -> Result<KnnResult, EvalError> {
    evaluate(&dataset(emb, labels, folds, seed)?, k, folds)
}

/// [`knn_cv`] for several k over the same folds.
pub fn knn_sweep(
    emb: &Embeddings,
    labels: &BTreeMap<SourceId, SourceLabel>,
    ks: &[usize],
    folds: usize,
    seed: u64,
) -> Result<Vec<KnnResult>, EvalError> {
    let data = dataset(emb, labels, folds, seed)?;
    ks.par_iter().map(|&k| evaluate(&data, k, folds)).collect()
}
