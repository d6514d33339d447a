use std::collections::{BTreeSet, HashSet};

use super::EvalError;
use crate::corpus::{tokenize, Corpus};
use crate::shift::{align, common_words, train_on_documents, word_shifts, Word2VecConfig, WordEmbeddingSet};
use crate::source::SourceId;

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTerms {
    /// Most shifted words between the mainstream cluster and cluster A, largest first.
    pub a: Vec<(String, f64)>,
    pub b: Vec<(String, f64)>,
    /// Words in both lists, in the order of `a`.
    pub common: Vec<String>,
}

fn pooled(corpus: &Corpus, name: &str, members: &[SourceId], cfg: &Word2VecConfig) -> Result<WordEmbeddingSet, EvalError> {
    let docs: Vec<Vec<String>> = members
        .iter()
        .flat_map(|s| corpus.articles_of(s))
        .map(|a| tokenize(&format!("{}\n{}", a.title, a.body)))
        .collect();
    let id = SourceId::normalize(name).unwrap_or_else(|| SourceId::from("cluster"));
    train_on_documents(id, &docs, cfg).map_err(|source| EvalError::ClusterText { cluster: name.to_string(), source })
}

fn ranked(
    main: &WordEmbeddingSet,
    other: &WordEmbeddingSet,
    name: &str,
    anchor_fraction: f64,
    stop_words: &HashSet<String>,
    top_n: usize,
) -> Result<Vec<(String, f64)>, EvalError> {
    let q = align(other, main, anchor_fraction).map_err(|source| EvalError::ClusterText { cluster: name.to_string(), source })?;
    let words: Vec<&str> = common_words(other, main).into_iter().filter(|w| !stop_words.contains(*w)).collect();
    let mut shifts = word_shifts(other, main, &q, &words);
    shifts.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    shifts.truncate(top_n);
    Ok(shifts)
}

/// Trains one embedding set per cluster on the pooled articles of its core
/// sources, aligns A and B onto the mainstream cluster and returns the
/// `top_n` most shifted shared words of each.
#[allow(clippy::too_many_arguments)]
pub fn cluster_shift_terms(
    corpus: &Corpus,
    mainstream: &[SourceId],
    cluster_a: &[SourceId],
    cluster_b: &[SourceId],
    top_n: usize,
    w2v: &Word2VecConfig,
    anchor_fraction: f64,
    stop_words: &HashSet<String>,
) -> Result<ShiftTerms, EvalError> {
    let main = pooled(corpus, "mainstream", mainstream, w2v)?;
    let a = ranked(&main, &pooled(corpus, "cluster_a", cluster_a, w2v)?, "cluster_a", anchor_fraction, stop_words, top_n)?;
    let b = ranked(&main, &pooled(corpus, "cluster_b", cluster_b, w2v)?, "cluster_b", anchor_fraction, stop_words, top_n)?;
    let in_b: BTreeSet<&str> = b.iter().map(|(w, _)| w.as_str()).collect();
    let common = a.iter().filter(|(w, _)| in_b.contains(w.as_str())).map(|(w, _)| w.clone()).collect();
    Ok(ShiftTerms { a, b, common })
}
