mod common;

use std::collections::BTreeMap;

use sourcevec::copy::{detect_copies, vectorize_articles, CopyConfig};
use sourcevec::corpus::Lexicons;
use sourcevec::embedder::read_source_embeddings;
use sourcevec::eval::{cluster_shift_terms, f1_score, knn_cv, stratified_folds};
use sourcevec::pipeline::Stage;
use sourcevec::source::SourceId;
use sourcevec::synth::{generate, pipeline_config, SynthConfig};

#[test]
fn planted_copies_are_recovered() {
    let s = generate(&SynthConfig { copy_rate: 0.4, ..Default::default() }).unwrap();
    let edges = detect_copies(&vectorize_articles(&s.corpus), &s.corpus, &CopyConfig::default()).unwrap();
    let found: BTreeMap<(&str, &str), usize> = edges.iter().map(|e| ((e.from_source.as_str(), e.to_source.as_str()), e.weight)).collect();
    let planted = &s.truth.copy_edges;
    let recovered = planted.iter().filter(|e| found.contains_key(&(e.origin.as_str(), e.copy.as_str()))).count();
    assert!(recovered as f64 >= 0.9 * planted.len() as f64, "{recovered} of {} edges", planted.len());
    let articles: usize = planted.iter().map(|e| e.articles).sum();
    let hit: usize = planted.iter().map(|e| found.get(&(e.origin.as_str(), e.copy.as_str())).map_or(0, |&w| w.min(e.articles))).sum();
    assert!(hit as f64 >= 0.9 * articles as f64, "{hit} of {articles} copied articles");
}

/// Expected F1 of predicting the training majority in every fold.
fn majority_baseline(truth: &[bool], folds: usize, seed: u64) -> f64 {
    let fold_of = stratified_folds(truth, folds, seed);
    let mut scores = Vec::new();
    for f in 0..folds {
        let train: Vec<bool> = truth.iter().zip(&fold_of).filter(|(_, g)| **g != f).map(|(t, _)| *t).collect();
        let pos = train.iter().filter(|t| **t).count();
        let guess = 2 * pos >= train.len();
        let test: Vec<bool> = truth.iter().zip(&fold_of).filter(|(_, g)| **g == f).map(|(t, _)| *t).collect();
        scores.push(f1_score(&vec![guess; test.len()], &test));
    }
    scores.iter().sum::<f64>() / folds as f64
}

#[test]
fn no_separation_no_signal() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = common::synthetic(dir.path(), &SynthConfig { camp_separation: 0.0, ..Default::default() });
    let labels = common::labels(&cfg);
    let p = common::run_through(cfg.clone(), Stage::Train);
    let emb = read_source_embeddings(&p.work().embeddings()).unwrap();
    let truth: Vec<bool> = emb.keys().map(|s| labels[s].is_unreliable()).collect();
    let baseline = majority_baseline(&truth, 10, cfg.seed);
    let f1 = knn_cv(&emb, &labels, 5, 10, cfg.seed).unwrap().mean_f1;
    assert!(f1 <= baseline + 0.1, "F1 {f1} above majority baseline {baseline}");
}

#[test]
fn planted_shift_targets_top_the_cluster_comparison() {
    let s = generate(&SynthConfig::default()).unwrap();
    let cfg = pipeline_config(1);
    let stop = Lexicons::bundled().stop_words;
    let half = s.truth.unreliable.len() / 2;
    let (a, b): (Vec<SourceId>, Vec<SourceId>) = (s.truth.unreliable[..half].to_vec(), s.truth.unreliable[half..].to_vec());
    let terms = cluster_shift_terms(&s.corpus, &s.truth.reliable, &a, &b, 100, &cfg.shift.word2vec, 1.0, &stop).unwrap();
    let targets = s.truth.target_words();
    for list in [&terms.a, &terms.b] {
        let hits = list.iter().filter(|(w, _)| targets.contains(w.as_str())).count();
        assert!(hits >= 15, "{hits} of {} planted words in the top 100", targets.len());
    }
    assert!(terms.common.iter().filter(|w| targets.contains(w.as_str())).count() >= 15);

    let same = cluster_shift_terms(&s.corpus, &s.truth.reliable, &s.truth.reliable, &s.truth.reliable, 100, &cfg.shift.word2vec, 1.0, &stop).unwrap();
    let mean = same.a.iter().map(|(_, d)| d).sum::<f64>() / same.a.len() as f64;
    assert!(mean < 0.05, "self-comparison mean shift {mean}");
}
