use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, WeightedAliasIndex};
use serde::{Deserialize, Serialize};

use super::{ShiftError, WordEmbeddingSet};
use crate::corpus::{tokenize, Corpus};
use crate::source::SourceId;

/// Skip-gram with negative sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            dim: 100,
            window: 10,
            min_count: 20,
            negative: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample: 1e-4,
            seed: 1,
        }
    }
}

/// Trains on the title and body of every article of `source`; each article is
/// one sentence, so windows never cross article boundaries.
pub fn train_word_embeddings(corpus: &Corpus, source: &SourceId, cfg: &Word2VecConfig) -> Result<WordEmbeddingSet, ShiftError> {
    let docs: Vec<Vec<String>> =
        corpus.articles_of(source).map(|a| tokenize(&format!("{}\n{}", a.title, a.body))).collect();
    train_on_documents(source.clone(), &docs, cfg)
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x.clamp(-30.0, 30.0)).exp())
}

pub fn train_on_documents(source: SourceId, docs: &[Vec<String>], cfg: &Word2VecConfig) -> Result<WordEmbeddingSet, ShiftError> {
    if cfg.dim == 0 || cfg.window == 0 || cfg.epochs == 0 {
        return Err(ShiftError::InvalidConfig(format!(
            "dim, window and epochs must be positive (got {}, {}, {})",
            cfg.dim, cfg.window, cfg.epochs
        )));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for w in doc {
            *counts.entry(w.as_str()).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= cfg.min_count).collect();
    if vocab.is_empty() {
        return Err(ShiftError::EmptyVocabulary(source));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, (w, _))| (*w, i as u32)).collect();
    let ids: Vec<Vec<u32>> =
        docs.iter().map(|d| d.iter().filter_map(|w| index.get(w.as_str()).copied()).collect()).collect();

    let total: u64 = vocab.iter().map(|(_, c)| c).sum();
    let keep_prob: Vec<f64> = vocab
        .iter()
        .map(|&(_, c)| {
            if cfg.subsample <= 0.0 {
                return 1.0;
            }
            let f = c as f64 / total as f64;
            ((f / cfg.subsample).sqrt() + 1.0) * cfg.subsample / f
        })
        .collect();
    let noise = WeightedAliasIndex::new(vocab.iter().map(|&(_, c)| (c as f64).powf(0.75)).collect())
        .expect("vocabulary counts are positive");

    let (v, d) = (vocab.len(), cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(cfg.seed, source.as_str()));
    let mut syn0: Vec<f32> = (0..v * d).map(|_| (rng.gen::<f32>() - 0.5) / d as f32).collect();
    let mut syn1 = vec![0f32; v * d];
    let mut grad = vec![0f32; d];

    let planned = (total as f64) * cfg.epochs as f64;
    let mut processed = 0f64;
    let mut sentence: Vec<u32> = Vec::new();
    for _ in 0..cfg.epochs {
        for doc in &ids {
            let lr = cfg.learning_rate * (1.0 - processed / (planned + 1.0)).max(1e-4) as f32;
            processed += doc.len() as f64;
            sentence.clear();
            sentence.extend(doc.iter().copied().filter(|&w| {
                let p = keep_prob[w as usize];
                p >= 1.0 || rng.gen::<f64>() < p
            }));
            for (pos, &center) in sentence.iter().enumerate() {
                let reach = cfg.window - rng.gen_range(0..cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let input = sentence[ctx_pos] as usize * d;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=cfg.negative {
                        let (target, label) = if k == 0 {
                            (center as usize, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == center as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = target * d;
                        let a = &syn0[input..input + d];
                        let b = &mut syn1[out..out + d];
                        let f: f32 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                        let g = (label - sigmoid(f)) * lr;
                        for ((gi, bi), ai) in grad.iter_mut().zip(b.iter_mut()).zip(a) {
                            *gi += g * *bi;
                            *bi += g * ai;
                        }
                    }
                    for (x, g) in syn0[input..input + d].iter_mut().zip(&grad) {
                        *x += g;
                    }
                }
            }
        }
    }

    let words = vocab.iter().map(|(w, _)| w.to_string()).collect();
    let freqs = vocab.iter().map(|&(_, c)| c).collect();
    WordEmbeddingSet::from_parts(source, d, words, freqs, syn0)
}
