//! Placing new sources into a frozen embedding space, and the learning curve
//! of that placement over growing shares of the newcomers' articles.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{PipelineConfig, PipelineError};
use crate::copy::{aggregate_edges, copy_distances_with, detect_copy_pairs, vectorize_articles, CopyPair};
use crate::corpus::{tokenize, Corpus, Lexicons, ReferenceIndex, SourceLabel};
use crate::embedder::{train, train_online, Embeddings, TrainReport};
use crate::eval::{f1_score, knn_predict, spearman, stratified_folds};
use crate::indicator::IndicatorDistance;
use crate::refs::{extract_contexts, jargon_distance, score_contexts_lexicon, stance_distance, CitationContext, StanceScores};
use crate::sampler::{sample_triplets, SamplerError, Triplet};
use crate::shift::{align_with, normalize_shift, shift_distance, shift_matrix, train_on_documents, train_word_embeddings, ShiftDistance, ShiftError, WordEmbeddingSet};
use crate::source::SourceId;

/// The share of a source's articles standing in for three months of an
/// eighteen-month collection.
pub const THREE_MONTHS_FRACTION: f64 = 3.0 / 18.0;

/// Everything about a corpus that per-source masking does not change:
/// article-level copies, full-history word embeddings, citation contexts and
/// their stance scores.
pub struct IndicatorCache<'c> {
    corpus: &'c Corpus,
    cfg: &'c PipelineConfig,
    lexicons: &'c Lexicons,
    copy_pairs: Vec<CopyPair>,
    word_sets: BTreeMap<SourceId, WordEmbeddingSet>,
    contexts: Vec<CitationContext>,
    scores: StanceScores,
}

pub(crate) fn train_word_sets<'a>(
    corpus: &Corpus,
    sources: impl IntoIterator<Item = &'a SourceId>,
    cfg: &PipelineConfig,
) -> BTreeMap<SourceId, WordEmbeddingSet> {
    let sources: Vec<&SourceId> = sources.into_iter().collect();
    sources
        .par_iter()
        .filter_map(|s| match train_word_embeddings(corpus, s, &cfg.shift.word2vec) {
            Ok(set) => Some(((*s).clone(), set)),
            Err(e) => {
                log::warn!("shift: {e}");
                None
            }
        })
        .collect()
}

impl<'c> IndicatorCache<'c> {
    /// `word_sets` may hold embeddings trained earlier; the remaining sources
    /// are trained here. Contexts without a given stance score get the
    /// lexicon score.
    pub fn build(
        corpus: &'c Corpus,
        index: &ReferenceIndex,
        scores: Option<StanceScores>,
        mut word_sets: BTreeMap<SourceId, WordEmbeddingSet>,
        cfg: &'c PipelineConfig,
        lexicons: &'c Lexicons,
    ) -> Result<Self, PipelineError> {
        let vectors = vectorize_articles(corpus);
        let copy_pairs = detect_copy_pairs(&vectors, corpus, &cfg.copy)?;
        let missing: Vec<&SourceId> = corpus.sources().filter(|s| !word_sets.contains_key(*s)).collect();
        word_sets.extend(train_word_sets(corpus, missing, cfg));
        let contexts = extract_contexts(corpus, index);
        let mut all = score_contexts_lexicon(&contexts, &lexicons.negative_terms);
        all.extend(scores.unwrap_or_default());
        Ok(IndicatorCache { corpus, cfg, lexicons, copy_pairs, word_sets, contexts, scores: all })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    /// Indicator records among `sources` only, plus the raw shift matrix.
    pub fn among(&self, sources: &BTreeSet<SourceId>) -> Result<(Vec<IndicatorDistance>, Vec<ShiftDistance>), PipelineError> {
        let arts = self.corpus.articles();
        let pairs: Vec<CopyPair> = self
            .copy_pairs
            .iter()
            .filter(|p| sources.contains(&arts[p.origin].source) && sources.contains(&arts[p.copy].source))
            .copied()
            .collect();
        let edges = aggregate_edges(&pairs, self.corpus);
        let mut records: Vec<IndicatorDistance> =
            copy_distances_with(&edges, |s| self.corpus.source_size(s)).into_iter().map(Into::into).collect();
        let sets: Vec<WordEmbeddingSet> = self.word_sets.iter().filter(|(s, _)| sources.contains(*s)).map(|(_, w)| w.clone()).collect();
        let raw = shift_matrix(&sets, &self.cfg.shift.align, &self.lexicons.stop_words);
        records.extend(normalize_shift(&raw));
        let contexts: Vec<CitationContext> = self.contexts.iter().filter(|c| sources.contains(&c.source)).cloned().collect();
        records.extend(self.reference_records(&contexts)?);
        Ok((records, raw))
    }

    fn reference_records(&self, contexts: &[CitationContext]) -> Result<Vec<IndicatorDistance>, PipelineError> {
        let mut out: Vec<IndicatorDistance> = jargon_distance(contexts, &self.lexicons.jargon_terms, self.cfg.refs.jargon_mode)
            .into_iter()
            .map(Into::into)
            .collect();
        out.extend(stance_distance(contexts, &self.scores)?.into_iter().map(IndicatorDistance::from));
        Ok(out)
    }

    /// Records touching at least one newcomer when each newcomer keeps only
    /// the articles listed in `kept` (corpus indices). Newcomer word
    /// embeddings are retrained on the kept articles; shift distances are
    /// normalized together with `offline_raw`.
    pub fn newcomer_records(
        &self,
        offline: &BTreeSet<SourceId>,
        offline_raw: &[ShiftDistance],
        kept: &BTreeMap<SourceId, Vec<usize>>,
    ) -> Result<Vec<IndicatorDistance>, PipelineError> {
        let arts = self.corpus.articles();
        let kept_idx: HashSet<usize> = kept.values().flatten().copied().collect();
        let allowed = |i: usize| offline.contains(&arts[i].source) || kept_idx.contains(&i);
        let is_new = |s: &SourceId| kept.contains_key(s);
        let touches = |r: &IndicatorDistance| is_new(&r.i) || is_new(&r.j);

        let pairs: Vec<CopyPair> = self
            .copy_pairs
            .iter()
            .filter(|p| allowed(p.origin) && allowed(p.copy))
            .filter(|p| is_new(&arts[p.origin].source) || is_new(&arts[p.copy].source))
            .copied()
            .collect();
        let edges = aggregate_edges(&pairs, self.corpus);
        let size_of = |s: &str| kept.get(s).map_or_else(|| self.corpus.source_size(s), Vec::len);
        let mut records: Vec<IndicatorDistance> = copy_distances_with(&edges, size_of).into_iter().map(Into::into).collect();

        let new_sets: BTreeMap<SourceId, WordEmbeddingSet> = kept
            .par_iter()
            .filter_map(|(s, idx)| {
                let docs: Vec<Vec<String>> = idx.iter().map(|&i| tokenize(&format!("{}\n{}", arts[i].title, arts[i].body))).collect();
                match train_on_documents(s.clone(), &docs, &self.cfg.shift.word2vec) {
                    Ok(set) => Some((s.clone(), set)),
                    Err(ShiftError::EmptyVocabulary(_)) => None,
                    Err(e) => {
                        log::warn!("shift: {e}");
                        None
                    }
                }
            })
            .collect();
        let partners: Vec<&WordEmbeddingSet> =
            self.word_sets.iter().filter(|(s, _)| offline.contains(*s)).map(|(_, w)| w).chain(new_sets.values()).collect();
        let align = &self.cfg.shift.align;
        let stop = &self.lexicons.stop_words;
        let new_raw: Vec<ShiftDistance> = new_sets
            .values()
            .flat_map(|n| partners.iter().map(move |p| (n, *p)))
            .filter(|(n, p)| n.source() != p.source() && !(kept.contains_key(p.source()) && p.source() < n.source()))
            .collect::<Vec<_>>()
            .into_par_iter()
            .filter_map(|(n, p)| {
                let (a, b) = if n.source() < p.source() { (n, p) } else { (p, n) };
                let al = align_with(a, b, align.anchor_fraction, align.center_anchors).ok()?;
                shift_distance(a, b, &al, align.top_fraction, stop)
            })
            .collect();
        let all_raw: Vec<ShiftDistance> = offline_raw.iter().cloned().chain(new_raw).collect();
        records.extend(normalize_shift(&all_raw).into_iter().filter(|r| touches(r)));

        let contexts: Vec<CitationContext> = self
            .contexts
            .iter()
            .filter(|c| offline.contains(&c.source) || (kept.contains_key(&c.source) && self.corpus.index_of(&c.article_id).is_some_and(|i| kept_idx.contains(&i))))
            .cloned()
            .collect();
        records.extend(self.reference_records(&contexts)?.into_iter().filter(|r| touches(r)));
        Ok(records)
    }
}

fn sample_or_empty(records: &[IndicatorDistance], sources: &[SourceId], cfg: &PipelineConfig) -> Result<Vec<Triplet>, PipelineError> {
    match sample_triplets(records, sources, &cfg.sampling) {
        Ok(out) => Ok(out.triplets),
        Err(SamplerError::NothingToSample | SamplerError::NoCandidates(_)) => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

/// Samples triplets from newcomer records and trains the newcomers into the
/// frozen space.
pub fn place_newcomers(
    records: &[IndicatorDistance],
    frozen: &Embeddings,
    newcomers: &[SourceId],
    cfg: &PipelineConfig,
) -> Result<(Embeddings, Vec<Triplet>, TrainReport), PipelineError> {
    let universe: Vec<SourceId> = frozen.keys().chain(newcomers).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let new: HashSet<&SourceId> = newcomers.iter().collect();
    let triplets: Vec<Triplet> = sample_or_empty(records, &universe, cfg)?
        .into_iter()
        .filter(|t| new.contains(&t.anchor) || new.contains(&t.positive) || new.contains(&t.negative))
        .collect();
    let (emb, report) = train_online(&triplets, frozen, newcomers, &cfg.embedding)?;
    Ok((emb, triplets, report))
}

/// Offline embeddings for `sources` from the cached indicators.
pub fn train_offline(cache: &IndicatorCache, sources: &BTreeSet<SourceId>, cfg: &PipelineConfig) -> Result<(Embeddings, Vec<ShiftDistance>), PipelineError> {
    let (records, raw) = cache.among(sources)?;
    let list: Vec<SourceId> = sources.iter().cloned().collect();
    let triplets = sample_or_empty(&records, &list, cfg)?;
    if triplets.is_empty() {
        return Err(PipelineError::Config("offline sources produced no triplets".into()));
    }
    let (emb, _) = train(&triplets, &list, &cfg.embedding)?;
    Ok((emb, raw))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePoint {
    pub fraction: f64,
    /// Pooled over folds; `None` when no newcomer could be placed.
    pub f1: Option<f64>,
    pub newcomers: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineReport {
    pub points: Vec<OnlinePoint>,
    /// Rank correlation of F1 with the fraction.
    pub spearman: Option<f64>,
}

/// Articles kept per newcomer: a prefix of a seeded permutation, so larger
/// fractions always contain smaller ones.
pub fn mask_articles(corpus: &Corpus, newcomers: &[SourceId], fraction: f64, seed: u64) -> BTreeMap<SourceId, Vec<usize>> {
    newcomers
        .iter()
        .filter_map(|s| {
            let mut idx = corpus.article_indices(s).to_vec();
            let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, &format!("mask:{s}")));
            idx.shuffle(&mut rng);
            let n = (fraction * idx.len() as f64).ceil() as usize;
            if n == 0 {
                log::warn!("online: {s} has no articles at fraction {fraction}; excluded");
                return None;
            }
            idx.truncate(n);
            Some((s.clone(), idx))
        })
        .collect()
}

/// Cross-validated online learning curve: each fold's labeled sources are
/// held out as newcomers, the rest trained and frozen; newcomers re-enter with
/// a growing share of their articles and are classified by kNN against the
/// offline sources.
pub fn online_curve(cache: &IndicatorCache, labels: &BTreeMap<SourceId, SourceLabel>, fractions: &[f64], cfg: &PipelineConfig) -> Result<OnlineReport, PipelineError> {
    let corpus = cache.corpus();
    let labeled: Vec<SourceId> = corpus.sources().filter(|s| labels.contains_key(*s)).cloned().collect();
    let truth: Vec<bool> = labeled.iter().map(|s| labels[s].is_unreliable()).collect();
    let folds = cfg.eval.folds;
    if labeled.len() < folds {
        return Err(crate::eval::EvalError::TooFewSources { folds, found: labeled.len() }.into());
    }
    let fold_of = stratified_folds(&truth, folds, cfg.seed);
    let per_fold: Vec<Vec<(Vec<bool>, Vec<bool>, usize)>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let newcomers: Vec<SourceId> = labeled.iter().zip(&fold_of).filter(|(_, g)| **g == f).map(|(s, _)| s.clone()).collect();
            let offline: BTreeSet<SourceId> = corpus.sources().filter(|s| !newcomers.contains(s)).cloned().collect();
            let (frozen, raw) = train_offline(cache, &offline, cfg)?;
            let reference: Vec<(&[f64], bool)> = frozen
                .iter()
                .filter_map(|(s, e)| labels.get(s).map(|l| (e.vector.as_slice(), l.is_unreliable())))
                .collect();
            fractions
                .iter()
                .map(|&fraction| {
                    let kept = mask_articles(corpus, &newcomers, fraction, cfg.seed);
                    let present: Vec<SourceId> = kept.keys().cloned().collect();
                    let records = cache.newcomer_records(&offline, &raw, &kept)?;
                    let (emb, _, _) = place_newcomers(&records, &frozen, &present, cfg)?;
                    let pred: Vec<bool> = present.iter().map(|s| knn_predict(&reference, &emb[s].vector, cfg.eval.k)).collect();
                    let actual: Vec<bool> = present.iter().map(|s| labels[s].is_unreliable()).collect();
                    Ok((pred, actual, newcomers.len() - present.len()))
                })
                .collect()
        })
        .collect::<Result<_, PipelineError>>()?;
    let points: Vec<OnlinePoint> = fractions
        .iter()
        .enumerate()
        .map(|(k, &fraction)| {
            let (mut pred, mut actual, mut excluded) = (Vec::new(), Vec::new(), 0);
            for fold in &per_fold {
                pred.extend(&fold[k].0);
                actual.extend(&fold[k].1);
                excluded += fold[k].2;
            }
            let f1 = (!pred.is_empty()).then(|| f1_score(&pred, &actual));
            OnlinePoint { fraction, f1, newcomers: pred.len(), excluded }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| p.f1.map(|f| (p.fraction, f))).unzip();
    Ok(OnlineReport { spearman: spearman(&xs, &ys), points })
}
