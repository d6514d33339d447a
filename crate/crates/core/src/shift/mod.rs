//! Per-source word embeddings, orthogonal alignment, and the semantic-shift
//! distance between sources.

mod word2vec;

pub use word2vec::{train_on_documents, train_word_embeddings, Word2VecConfig};

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicator::{min_max_normalize, Indicator, IndicatorDistance};
use crate::source::SourceId;

pub const MIN_COMMON_WORDS: usize = 10;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("source {0} has no word left after the min_count filter")]
    EmptyVocabulary(SourceId),
    #[error("{a} and {b} share {common} words, need at least {MIN_COMMON_WORDS}")]
    TooFewCommonWords { a: SourceId, b: SourceId, common: usize },
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Word vectors of one source, ordered by descending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingSet {
    source: SourceId,
    dim: usize,
    words: Vec<String>,
    counts: Vec<u64>,
    vectors: Vec<f32>,
    index: HashMap<String, usize>,
}

impl WordEmbeddingSet {
    /// Builds a set from parallel word/count/vector data, re-sorting by
    /// frequency (descending, ties by word).
    pub fn from_parts(source: SourceId, dim: usize, words: Vec<String>, counts: Vec<u64>, vectors: Vec<f32>) -> Result<Self, ShiftError> {
        if dim == 0 || words.len() != counts.len() || vectors.len() != words.len() * dim {
            return Err(ShiftError::InvalidConfig(format!(
                "{} words, {} counts, {} values for dim {dim}",
                words.len(),
                counts.len(),
                vectors.len()
            )));
        }
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(ShiftError::InvalidConfig(format!("non-finite vector value for {source}")));
        }
        let mut order: Vec<usize> = (0..words.len()).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(words[a].cmp(&words[b])));
        let mut set = WordEmbeddingSet {
            source,
            dim,
            words: Vec::with_capacity(order.len()),
            counts: Vec::with_capacity(order.len()),
            vectors: Vec::with_capacity(vectors.len()),
            index: HashMap::with_capacity(order.len()),
        };
        for i in order {
            if set.index.insert(words[i].clone(), set.words.len()).is_some() {
                return Err(ShiftError::InvalidConfig(format!("duplicate word {:?}", words[i])));
            }
            set.words.push(words[i].clone());
            set.counts.push(counts[i]);
            set.vectors.extend_from_slice(&vectors[i * dim..(i + 1) * dim]);
        }
        Ok(set)
    }

    pub fn source(&self) -> &SourceId {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&i| self.counts[i])
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// The `fraction` most frequent words, stop words removed first.
    pub fn top_words(&self, fraction: f64, stop_words: &HashSet<String>) -> Vec<&str> {
        let content: Vec<&str> = self.words.iter().map(String::as_str).filter(|w| !stop_words.contains(*w)).collect();
        let n = (content.len() as f64 * fraction).ceil() as usize;
        content.into_iter().take(n).collect()
    }

    /// Applies an orthogonal map to every vector.
    pub fn transformed(&self, q: &DMatrix<f64>) -> WordEmbeddingSet {
        let mut out = self.clone();
        for i in 0..self.len() {
            let v = apply(q, self.row(i));
            for (dst, x) in out.vectors[i * self.dim..(i + 1) * self.dim].iter_mut().zip(v) {
                *dst = x as f32;
            }
        }
        out
    }
}

/// Orthogonal map taking vectors of `from_source` into the space of `to_source`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub from_source: SourceId,
    pub to_source: SourceId,
    pub q: DMatrix<f64>,
}

impl Alignment {
    /// `||QᵀQ - I||_F`
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.q.nrows();
        (self.q.transpose() * &self.q - DMatrix::<f64>::identity(n, n)).norm()
    }
}

fn apply(q: &DMatrix<f64>, v: &[f32]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|r| (0..d).map(|c| q[(r, c)] * v[c] as f64).sum()).collect()
}

fn unit(v: &[f32]) -> Vec<f64> {
    let n = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    v.iter().map(|&x| if n > 0.0 { x as f64 / n } else { 0.0 }).collect()
}

/// Words in both vocabularies, most frequent first by the smaller of the two counts.
pub fn common_words<'a>(a: &'a WordEmbeddingSet, b: &WordEmbeddingSet) -> Vec<&'a str> {
    let mut common: Vec<(&str, u64)> = a
        .words
        .iter()
        .zip(&a.counts)
        .filter_map(|(w, &ca)| b.count(w).map(|cb| (w.as_str(), ca.min(cb))))
        .collect();
    common.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
    common.into_iter().map(|(w, _)| w).collect()
}

/// Orthogonal Procrustes: the rotation `Q` minimizing `Σ ||Q a_w - b_w||²` over
/// unit-normalized anchor words.
pub fn align(a: &WordEmbeddingSet, b: &WordEmbeddingSet, anchor_fraction: f64) -> Result<Alignment, ShiftError> {
    align_with(a, b, anchor_fraction, false)
}

/// As [`align`], optionally mean-centering the anchors before the solve.
///
/// Centering discards the direction shared by all skip-gram vectors, which
/// the solve then leaves unconstrained even though evaluation uses the
/// uncentered vectors.
pub fn align_with(a: &WordEmbeddingSet, b: &WordEmbeddingSet, anchor_fraction: f64, center: bool) -> Result<Alignment, ShiftError> {
    if a.dim != b.dim {
        return Err(ShiftError::DimensionMismatch(a.dim, b.dim));
    }
    if !(anchor_fraction > 0.0 && anchor_fraction <= 1.0) {
        return Err(ShiftError::InvalidConfig(format!("anchor_fraction {anchor_fraction} outside (0, 1]")));
    }
    let common = common_words(a, b);
    if common.len() < MIN_COMMON_WORDS {
        return Err(ShiftError::TooFewCommonWords { a: a.source.clone(), b: b.source.clone(), common: common.len() });
    }
    let n = ((common.len() as f64 * anchor_fraction).ceil() as usize).clamp(MIN_COMMON_WORDS, common.len());
    let d = a.dim;
    let mut ma = DMatrix::<f64>::zeros(n, d);
    let mut mb = DMatrix::<f64>::zeros(n, d);
    for (r, w) in common[..n].iter().enumerate() {
        for (c, x) in unit(a.get(w).expect("common word")).into_iter().enumerate() {
            ma[(r, c)] = x;
        }
        for (c, x) in unit(b.get(w).expect("common word")).into_iter().enumerate() {
            mb[(r, c)] = x;
        }
    }
    for m in [&mut ma, &mut mb].into_iter().filter(|_| center) {
        for c in 0..d {
            let mean = m.column(c).mean();
            m.column_mut(c).add_scalar_mut(-mean);
        }
    }
    let svd = (ma.transpose() * mb).svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    Ok(Alignment { from_source: a.source.clone(), to_source: b.source.clone(), q: v_t.transpose() * u.transpose() })
}

fn cosine_distance(x: &[f64], y: &[f32]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, &b)| a * b as f64).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|&b| (b as f64).powi(2)).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 1.0;
    }
    1.0 - dot / (nx * ny)
}

/// Evaluation words: the top `top_fraction` of each vocabulary (stop words
/// removed), intersected.
pub fn evaluation_words<'a>(a: &'a WordEmbeddingSet, b: &WordEmbeddingSet, top_fraction: f64, stop_words: &HashSet<String>) -> Vec<&'a str> {
    let top_b: HashSet<&str> = b.top_words(top_fraction, stop_words).into_iter().collect();
    a.top_words(top_fraction, stop_words).into_iter().filter(|w| top_b.contains(w)).collect()
}

/// Per-word cosine distance between `Q a_w` and `b_w`.
pub fn word_shifts(a: &WordEmbeddingSet, b: &WordEmbeddingSet, alignment: &Alignment, words: &[&str]) -> Vec<(String, f64)> {
    words
        .iter()
        .filter_map(|w| {
            let (va, vb) = (a.get(w)?, b.get(w)?);
            Some((w.to_string(), cosine_distance(&apply(&alignment.q, va), vb)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftDistance {
    pub i: SourceId,
    pub j: SourceId,
    pub d: f64,
    pub evaluated_words: usize,
}

/// Raw mean cosine distance over the evaluation words; `None` when the set is empty.
pub fn shift_distance(
    a: &WordEmbeddingSet,
    b: &WordEmbeddingSet,
    alignment: &Alignment,
    top_fraction: f64,
    stop_words: &HashSet<String>,
) -> Option<ShiftDistance> {
    let words = evaluation_words(a, b, top_fraction, stop_words);
    let shifts = word_shifts(a, b, alignment, &words);
    if shifts.is_empty() {
        return None;
    }
    Some(ShiftDistance {
        i: a.source.clone(),
        j: b.source.clone(),
        d: shifts.iter().map(|(_, d)| d).sum::<f64>() / shifts.len() as f64,
        evaluated_words: shifts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub anchor_fraction: f64,
    pub top_fraction: f64,
    pub center_anchors: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { anchor_fraction: 1.0, top_fraction: 0.10, center_anchors: false }
    }
}

/// Raw distances for every unordered pair of sources (once per pair, aligned
/// from the lexicographically smaller source). Pairs that cannot be aligned or
/// have no evaluation words are skipped with a warning.
pub fn shift_matrix(sets: &[WordEmbeddingSet], cfg: &AlignConfig, stop_words: &HashSet<String>) -> Vec<ShiftDistance> {
    let mut order: Vec<&WordEmbeddingSet> = sets.iter().collect();
    order.sort_by(|x, y| x.source.cmp(&y.source));
    let pairs: Vec<(usize, usize)> = (0..order.len()).flat_map(|i| ((i + 1)..order.len()).map(move |j| (i, j))).collect();
    pairs
        .into_par_iter()
        .filter_map(|(i, j)| {
            let (a, b) = (order[i], order[j]);
            match align_with(a, b, cfg.anchor_fraction, cfg.center_anchors) {
                Ok(al) => {
                    let d = shift_distance(a, b, &al, cfg.top_fraction, stop_words);
                    if d.is_none() {
                        log::warn!("shift: no evaluation words shared by {} and {}", a.source, b.source);
                    }
                    d
                }
                Err(e) => {
                    log::warn!("shift: skipping pair: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Min-max normalizes the raw matrix into indicator records.
pub fn normalize_shift(raw: &[ShiftDistance]) -> Vec<IndicatorDistance> {
    let norm = min_max_normalize(&raw.iter().map(|r| r.d).collect::<Vec<_>>());
    raw.iter().zip(norm).map(|(r, d)| IndicatorDistance::pair(Indicator::Shift, r.i.clone(), r.j.clone(), d)).collect()
}

fn sidecar(path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.vocab", path.display()))
}

/// Text format (`vocab_size dim` header, then `word f1 .. f_dim`), plus a
/// `<path>.vocab` sidecar of `word count` lines.
pub fn write_embeddings(path: &Path, set: &WordEmbeddingSet) -> Result<(), ShiftError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| ShiftError::Io { path: p, source }
    };
    let write = |p: &Path, body: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Result<(), ShiftError> {
        let mut w = BufWriter::new(File::create(p).map_err(io_err(p))?);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err(p))
    };
    write(path, &|w| {
        writeln!(w, "{} {}", set.len(), set.dim)?;
        for (i, word) in set.words.iter().enumerate() {
            write!(w, "{word}")?;
            for x in set.row(i) {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    write(&sidecar(path), &|w| {
        for (word, c) in set.words.iter().zip(&set.counts) {
            writeln!(w, "{word} {c}")?;
        }
        Ok(())
    })
}

pub fn read_embeddings(path: &Path, source: SourceId) -> Result<WordEmbeddingSet, ShiftError> {
    let bad = |message: String| ShiftError::Format { path: path.to_path_buf(), message };
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|source| ShiftError::Io { path: p.to_path_buf(), source });
    let mut lines = open(path)?.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?.map_err(|e| bad(e.to_string()))?;
    let dims: Vec<usize> = header.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let [n, dim] = dims[..] else {
        return Err(bad(format!("bad header {header:?}")));
    };
    let (mut words, mut vectors) = (Vec::with_capacity(n), Vec::with_capacity(n * dim));
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default().to_string();
        let before = vectors.len();
        for p in parts {
            vectors.push(p.parse::<f32>().map_err(|e| bad(format!("line {}: {e}", k + 2)))?);
        }
        if vectors.len() - before != dim {
            return Err(bad(format!("line {}: expected {dim} values", k + 2)));
        }
        words.push(word);
    }
    if words.len() != n {
        return Err(bad(format!("header says {n} words, found {}", words.len())));
    }
    let mut counts_by_word: HashMap<String, u64> = HashMap::new();
    for line in open(&sidecar(path))?.lines() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let (w, c) = line.rsplit_once(' ').ok_or_else(|| bad(format!("bad vocab line {line:?}")))?;
        counts_by_word.insert(w.to_string(), c.parse().map_err(|_| bad(format!("bad count in {line:?}")))?);
    }
    let counts = words
        .iter()
        .map(|w| counts_by_word.get(w).copied().ok_or_else(|| bad(format!("no count for {w:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    WordEmbeddingSet::from_parts(source, dim, words, counts, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_set(source: &str, n: usize, dim: usize, seed: u64) -> WordEmbeddingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors: Vec<f32> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let words = (0..n).map(|k| format!("w{k}")).collect();
        let counts = (0..n).map(|k| (10 * n - k) as u64).collect();
        WordEmbeddingSet::from_parts(source.into(), dim, words, counts, vectors).unwrap()
    }

    pub(crate) fn random_rotation(dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
        g.qr().q()
    }

    fn mean_distance(a: &WordEmbeddingSet, b: &WordEmbeddingSet, q: &DMatrix<f64>) -> f64 {
        let al = Alignment { from_source: a.source.clone(), to_source: b.source.clone(), q: q.clone() };
        let words: Vec<&str> = a.words().iter().map(String::as_str).collect();
        let s = word_shifts(a, b, &al, &words);
        s.iter().map(|x| x.1).sum::<f64>() / s.len() as f64
    }

    #[test]
    fn self_alignment_is_identity() {
        let a = gaussian_set("a", 200, 30, 1);
        let al = align(&a, &a, 1.0).unwrap();
        assert!(al.orthogonality_error() < 1e-6);
        assert!(mean_distance(&a, &a, &al.q) < 1e-6);
        let d = shift_distance(&a, &a, &al, 0.1, &HashSet::new()).unwrap();
        assert!(d.d.abs() < 1e-9);
    }

    #[test]
    fn recovers_random_rotations() {
        for seed in 0..5 {
            let a = gaussian_set("a", 300, 40, seed);
            let r = random_rotation(40, 100 + seed);
            let b = WordEmbeddingSet { source: "b".into(), ..a.transformed(&r) };
            let al = align(&a, &b, 1.0).unwrap();
            assert!(al.orthogonality_error() < 1e-6);
            assert!(mean_distance(&a, &b, &al.q) < 1e-3);
            assert!((&al.q - &r).norm() < 1e-6);
        }
    }

    #[test]
    fn orthogonal_evaluation_words_give_distance_one() {
        // identity alignment, every evaluation word rotated by 90 degrees
        let words: Vec<String> = (0..20).map(|k| format!("w{k}")).collect();
        let counts: Vec<u64> = (0..20).map(|k| 100 - k).collect();
        let va: Vec<f32> = (0..20).flat_map(|_| [1.0, 0.0]).collect();
        let vb: Vec<f32> = (0..20).flat_map(|_| [0.0, 1.0]).collect();
        let a = WordEmbeddingSet::from_parts("a".into(), 2, words.clone(), counts.clone(), va).unwrap();
        let b = WordEmbeddingSet::from_parts("b".into(), 2, words, counts, vb).unwrap();
        let al = Alignment { from_source: "a".into(), to_source: "b".into(), q: DMatrix::identity(2, 2) };
        let d = shift_distance(&a, &b, &al, 0.1, &HashSet::new()).unwrap();
        assert_eq!(d.evaluated_words, 2);
        assert!((d.d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_common_words() {
        let a = gaussian_set("a", 9, 5, 1);
        assert!(matches!(align(&a, &a, 1.0), Err(ShiftError::TooFewCommonWords { common: 9, .. })));
    }

    #[test]
    fn evaluation_set_excludes_stop_words_and_intersects() {
        let a = gaussian_set("a", 100, 4, 1);
        let stop: HashSet<String> = ["w0".to_string()].into();
        let top = a.top_words(0.1, &stop);
        assert_eq!(top.len(), 10);
        assert_eq!(top[0], "w1");
        let words: Vec<String> = (0..100).map(|k| format!("w{k}")).collect();
        // b ranks words in reverse
        let counts = (0..100).map(|k| k as u64 + 1).collect();
        let b = WordEmbeddingSet::from_parts("b".into(), 4, words, counts, vec![0.5; 400]).unwrap();
        assert!(evaluation_words(&a, &b, 0.1, &stop).is_empty());
        // top 60 of 99: a keeps w1..=w60, b keeps w40..=w99
        assert_eq!(evaluation_words(&a, &b, 0.6, &stop).len(), 21);
    }

    #[test]
    fn direction_symmetry() {
        let a = gaussian_set("a", 200, 20, 7);
        let r = random_rotation(20, 8);
        let mut b = WordEmbeddingSet { source: "b".into(), ..a.transformed(&r) };
        // perturb b so the distance is not trivially zero
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for x in &mut b.vectors {
            *x += 0.5 * <StandardNormal as Distribution<f32>>::sample(&StandardNormal, &mut rng);
        }
        let stop = HashSet::new();
        let ab = shift_distance(&a, &b, &align(&a, &b, 1.0).unwrap(), 0.2, &stop).unwrap();
        let ba = shift_distance(&b, &a, &align(&b, &a, 1.0).unwrap(), 0.2, &stop).unwrap();
        assert!(ab.d > 0.01);
        assert!((ab.d - ba.d).abs() < 1e-3);
    }

    #[test]
    fn independent_trainings_align_much_closer() {
        use rand::Rng;
        // same text, different seeds; a random walk on a ring of words gives
        // every word a distinctive neighbourhood
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ring = 80i64;
        let docs: Vec<Vec<String>> = (0..1500)
            .map(|_| {
                let mut at = rng.gen_range(0..ring);
                (0..20)
                    .map(|_| {
                        at = (at + rng.gen_range(-3..=3) + ring) % ring;
                        format!("w{at}")
                    })
                    .collect()
            })
            .collect();
        for s in 0..5u64 {
            let cfg = |seed| Word2VecConfig { dim: 16, window: 4, min_count: 5, epochs: 5, subsample: 0.0, seed, ..Default::default() };
            let a = train_on_documents("a".into(), &docs, &cfg(2 * s)).unwrap();
            let b = train_on_documents("a".into(), &docs, &cfg(2 * s + 1)).unwrap();
            let b = WordEmbeddingSet { source: "b".into(), ..b };
            let al = align(&a, &b, 1.0).unwrap();
            let pre = mean_distance(&a, &b, &DMatrix::identity(16, 16));
            let post = mean_distance(&a, &b, &al.q);
            assert!(post < 0.1 * pre, "seed {s}: pre {pre} post {post}");
        }
    }

    #[test]
    fn normalized_matrix_spans_unit_interval() {
        let sets: Vec<WordEmbeddingSet> = (0..4).map(|k| gaussian_set(&format!("s{k}"), 60, 8, k)).collect();
        let raw = shift_matrix(&sets, &AlignConfig::default(), &HashSet::new());
        assert_eq!(raw.len(), 6);
        let norm = normalize_shift(&raw);
        let ds: Vec<f64> = norm.iter().map(|r| r.distance).collect();
        assert!(ds.iter().all(|d| (0.0..=1.0).contains(d)));
        assert!(ds.iter().any(|&d| d == 0.0) && ds.iter().any(|&d| d == 1.0));
        assert!(norm.iter().all(|r| r.i < r.j && r.indicator == Indicator::Shift));
    }

    #[test]
    fn file_roundtrip() {
        let a = gaussian_set("a", 30, 6, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.vec");
        write_embeddings(&p, &a).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("30 6\n"));
        assert_eq!(read_embeddings(&p, "a".into()).unwrap(), a);
    }
}
