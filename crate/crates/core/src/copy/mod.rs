//! Verbatim-copy detection and the copy distance between sources.

mod tfidf;

pub use tfidf::{vectorize_articles, SparseVector, TfIdfVectors};

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::indicator::{Indicator, IndicatorDistance};
use crate::source::SourceId;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Error, PartialEq)]
pub enum CopyError {
    #[error("copy threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("vector count {vectors} does not match corpus size {articles}")]
    Misaligned { vectors: usize, articles: usize },
}

/// How candidate article pairs are generated before exact cosine scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum CandidateRule {
    /// Every cross-source pair.
    Exhaustive,
    /// Pairs sharing at least one of each article's `k` highest-weight terms.
    TopTerms(usize),
    /// Pairs where one article shares a term with the other's weight prefix,
    /// the prefix being long enough that the remaining norm cannot reach the
    /// threshold. Never misses a pair above threshold.
    PrefixBound,
}

impl Default for CandidateRule {
    fn default() -> Self {
        CandidateRule::PrefixBound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CopyConfig {
    pub threshold: f64,
    pub candidates: CandidateRule,
}

impl Default for CopyConfig {
    fn default() -> Self {
        CopyConfig { threshold: DEFAULT_THRESHOLD, candidates: CandidateRule::default() }
    }
}

/// One detected copy at article level, by corpus index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopyPair {
    pub origin: usize,
    pub copy: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyEdge {
    pub from_source: SourceId,
    pub to_source: SourceId,
    /// (origin article id, copy article id)
    pub copied_article_pairs: Vec<(String, String)>,
    pub weight: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyDistance {
    pub i: SourceId,
    pub j: SourceId,
    pub d: f64,
}

impl From<CopyDistance> for IndicatorDistance {
    fn from(c: CopyDistance) -> Self {
        IndicatorDistance::pair(Indicator::Copy, c.i, c.j, c.d)
    }
}

fn candidate_lists(vectors: &[SparseVector], corpus: &Corpus, rule: CandidateRule, threshold: f64) -> Vec<Vec<usize>> {
    let n = vectors.len();
    let arts = corpus.articles();
    let cross = |x: usize, y: usize| arts[x].source != arts[y].source;
    match rule {
        CandidateRule::Exhaustive => (0..n)
            .into_par_iter()
            .map(|x| ((x + 1)..n).filter(|&y| !vectors[y].is_zero() && cross(x, y)).collect())
            .collect(),
        CandidateRule::TopTerms(k) => {
            let keys: Vec<Vec<u32>> =
                vectors.iter().map(|v| v.terms_by_weight().into_iter().take(k).map(|(t, _)| t).collect()).collect();
            let mut postings: HashMap<u32, Vec<usize>> = HashMap::new();
            for (idx, ks) in keys.iter().enumerate() {
                for &t in ks {
                    postings.entry(t).or_default().push(idx);
                }
            }
            gather(n, |x| keys[x].iter().flat_map(|t| postings[t].iter().copied()), cross)
        }
        CandidateRule::PrefixBound => {
            // cos(x, y) <= |x restricted to terms outside the prefix|, so a pair above
            // threshold must share a term with x's prefix. A small slack guards rounding.
            let bound = (threshold - 1e-9).max(0.0).powi(2);
            let mut postings: HashMap<u32, Vec<usize>> = HashMap::new();
            for (idx, v) in vectors.iter().enumerate() {
                let mut remaining: f64 = v.entries.iter().map(|(_, w)| w * w).sum();
                for (t, w) in v.terms_by_weight() {
                    if remaining < bound {
                        break;
                    }
                    postings.entry(t).or_default().push(idx);
                    remaining -= w * w;
                }
            }
            let empty = Vec::new();
            let lists = gather(
                n,
                |y| vectors[y].entries.iter().flat_map(|(t, _)| postings.get(t).unwrap_or(&empty).iter().copied()),
                |_, _| true,
            );
            // Found from y's side; fold into the x < y convention with the cross-source check.
            let mut sym: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (y, xs) in lists.into_iter().enumerate() {
                for x in xs {
                    let (a, b) = if x < y { (x, y) } else { (y, x) };
                    if cross(a, b) {
                        sym[a].push(b);
                    }
                }
            }
            for l in &mut sym {
                l.sort_unstable();
                l.dedup();
            }
            sym
        }
    }
}

/// For each article x, the distinct partners y > x yielded by `partners(x)`.
fn gather<I>(n: usize, partners: impl Fn(usize) -> I + Sync, keep: impl Fn(usize, usize) -> bool + Sync) -> Vec<Vec<usize>>
where
    I: Iterator<Item = usize>,
{
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut ys: Vec<usize> = partners(x).filter(|&y| y > x && keep(x, y)).collect();
            ys.sort_unstable();
            ys.dedup();
            ys
        })
        .collect()
}

/// Article-level copies. For each (origin source, copy article) only the most
/// similar origin article is kept, so a copy counts once towards an edge.
pub fn detect_copy_pairs(vectors: &TfIdfVectors, corpus: &Corpus, config: &CopyConfig) -> Result<Vec<CopyPair>, CopyError> {
    let t = config.threshold;
    if !(t > 0.0 && t <= 1.0) {
        return Err(CopyError::InvalidThreshold(t));
    }
    if vectors.vectors.len() != corpus.len() {
        return Err(CopyError::Misaligned { vectors: vectors.vectors.len(), articles: corpus.len() });
    }
    let vs = &vectors.vectors;
    let arts = corpus.articles();
    let candidates = candidate_lists(vs, corpus, config.candidates, t);
    let raw: Vec<CopyPair> = candidates
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(x, ys)| {
            ys.into_iter().filter_map(move |y| {
                let sim = vs[x].dot(&vs[y]);
                if sim <= t {
                    return None;
                }
                match arts[x].published_at.cmp(&arts[y].published_at) {
                    std::cmp::Ordering::Less => Some(CopyPair { origin: x, copy: y, similarity: sim }),
                    std::cmp::Ordering::Greater => Some(CopyPair { origin: y, copy: x, similarity: sim }),
                    std::cmp::Ordering::Equal => None,
                }
            })
        })
        .collect();

    let mut best: BTreeMap<(&SourceId, usize), CopyPair> = BTreeMap::new();
    for p in raw {
        let key = (&arts[p.origin].source, p.copy);
        match best.get(&key) {
            Some(cur) if cur.similarity > p.similarity || (cur.similarity == p.similarity && cur.origin < p.origin) => {}
            _ => {
                best.insert(key, p);
            }
        }
    }
    Ok(best.into_values().collect())
}

/// Aggregates article copies into per (origin source, copy source) edges.
pub fn aggregate_edges(pairs: &[CopyPair], corpus: &Corpus) -> Vec<CopyEdge> {
    let arts = corpus.articles();
    let mut grouped: BTreeMap<(SourceId, SourceId), Vec<(String, String)>> = BTreeMap::new();
    for p in pairs {
        let (o, c) = (&arts[p.origin], &arts[p.copy]);
        grouped.entry((o.source.clone(), c.source.clone())).or_default().push((o.id.clone(), c.id.clone()));
    }
    grouped
        .into_iter()
        .map(|((from_source, to_source), mut copied_article_pairs)| {
            copied_article_pairs.sort();
            CopyEdge { from_source, to_source, weight: copied_article_pairs.len(), copied_article_pairs }
        })
        .collect()
}

pub fn detect_copies(vectors: &TfIdfVectors, corpus: &Corpus, config: &CopyConfig) -> Result<Vec<CopyEdge>, CopyError> {
    Ok(aggregate_edges(&detect_copy_pairs(vectors, corpus, config)?, corpus))
}

/// `d(i, j) = 1 - weight(i -> j) / |A_j|` for every edge. Pairs without an
/// edge are left implicit at distance 1.
pub fn copy_distances(edges: &[CopyEdge], corpus: &Corpus) -> Vec<CopyDistance> {
    copy_distances_with(edges, |s| corpus.source_size(s))
}

/// As [`copy_distances`] with source sizes supplied by the caller.
pub fn copy_distances_with(edges: &[CopyEdge], size_of: impl Fn(&str) -> usize) -> Vec<CopyDistance> {
    edges
        .iter()
        .filter_map(|e| {
            let size = size_of(&e.to_source);
            (size > 0).then(|| CopyDistance {
                i: e.from_source.clone(),
                j: e.to_source.clone(),
                d: (1.0 - e.weight as f64 / size as f64).clamp(0.0, 1.0),
            })
        })
        .collect()
}

pub fn write_edges(path: &Path, edges: &[CopyEdge]) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "from_source\tto_source\tweight")?;
    for e in edges {
        writeln!(w, "{}\t{}\t{}", e.from_source, e.to_source, e.weight)?;
    }
    w.flush()
}

/// Article-level provenance: `origin_id, copy_id, from_source, to_source`.
pub fn write_copied_pairs(path: &Path, edges: &[CopyEdge]) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "origin_id\tcopy_id\tfrom_source\tto_source")?;
    for e in edges {
        for (o, c) in &e.copied_article_pairs {
            writeln!(w, "{o}\t{c}\t{}\t{}", e.from_source, e.to_source)?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::article;
    use proptest::prelude::*;

    fn run(corpus: &Corpus, threshold: f64, rule: CandidateRule) -> Vec<CopyEdge> {
        let v = vectorize_articles(corpus);
        detect_copies(&v, corpus, &CopyConfig { threshold, candidates: rule }).unwrap()
    }

    fn filler(src: &str, n: usize) -> Vec<crate::corpus::Article> {
        (0..n)
            .map(|k| article(&format!("{src}-f{k}"), src, &format!("{src}word{k} unique{src}{k} text{k}{src}"), k as i64))
            .collect()
    }

    #[test]
    fn direction_follows_publication_date() {
        let body = "the vaccine rollout began in several regions today";
        let c = Corpus::from_articles(vec![article("1", "i", body, 0), article("2", "j", body, 24)]).unwrap();
        let edges = run(&c, 0.85, CandidateRule::Exhaustive);
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].from_source.as_str(), edges[0].to_source.as_str(), edges[0].weight), ("i", "j", 1));
        assert_eq!(edges[0].copied_article_pairs, vec![("1".to_string(), "2".to_string())]);
    }

    #[test]
    fn timestamp_ties_and_same_source_are_skipped() {
        let body = "identical words everywhere";
        let c = Corpus::from_articles(vec![
            article("1", "i", body, 0),
            article("2", "j", body, 0),
            article("3", "i", body, 5),
        ])
        .unwrap();
        let edges = run(&c, 0.85, CandidateRule::Exhaustive);
        // 1 and 2 tie; 3 is in source i, copied from j's article 2
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].from_source.as_str(), edges[0].to_source.as_str()), ("j", "i"));
        assert_eq!(edges[0].copied_article_pairs, vec![("2".to_string(), "3".to_string())]);
    }

    #[test]
    fn below_threshold_is_not_a_copy() {
        // "a a b" vs "a b" has cosine 3 / sqrt(10) ~ 0.9487
        let c = Corpus::from_articles(vec![article("1", "x", "a a b", 0), article("2", "y", "a b", 1)]).unwrap();
        assert_eq!(run(&c, 0.95, CandidateRule::Exhaustive).len(), 0);
        assert_eq!(run(&c, 0.94, CandidateRule::Exhaustive).len(), 1);
        // strict comparison at exactly 1.0
        let d = Corpus::from_articles(vec![article("1", "x", "a b", 0), article("2", "y", "a b", 1)]).unwrap();
        assert_eq!(run(&d, 1.0, CandidateRule::Exhaustive).len(), 0);
    }

    #[test]
    fn invalid_threshold_rejected() {
        let c = Corpus::from_articles(vec![article("1", "x", "a", 0)]).unwrap();
        let v = vectorize_articles(&c);
        for t in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(detect_copies(&v, &c, &CopyConfig { threshold: t, candidates: CandidateRule::Exhaustive }).is_err());
        }
    }

    fn planted() -> Corpus {
        let mut arts = filler("i", 10);
        let mut js = filler("j", 6);
        for k in 0..4 {
            let orig = &arts[k];
            js.push(article(&format!("j-c{k}"), "j", &orig.body.clone(), 100 + k as i64));
        }
        arts.extend(js);
        Corpus::from_articles(arts).unwrap()
    }

    #[test]
    fn planted_copies_give_weight_and_distance() {
        let c = planted();
        let edges = run(&c, 0.85, CandidateRule::TopTerms(5));
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].weight, 4);
        let d = copy_distances(&edges, &c);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].i.as_str(), d[0].j.as_str()), ("i", "j"));
        assert!((d[0].d - 0.6).abs() < 1e-12);
        // the reverse direction is not materialized, i.e. d(j, i) = 1
        assert!(!d.iter().any(|x| x.i.as_str() == "j"));
    }

    #[test]
    fn full_copy_gives_zero_distance() {
        let mut arts = filler("i", 3);
        for k in 0..3 {
            arts.push(article(&format!("j{k}"), "j", &arts[k].body.clone(), 50));
        }
        let c = Corpus::from_articles(arts).unwrap();
        let d = copy_distances(&run(&c, 0.85, CandidateRule::Exhaustive), &c);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].d, 0.0);
    }

    #[test]
    fn copy_counted_once_per_origin_source() {
        // two near-identical originals in i; j's copy must count once
        let c = Corpus::from_articles(vec![
            article("o1", "i", "alpha beta gamma delta", 0),
            article("o2", "i", "alpha beta gamma delta", 1),
            article("c", "j", "alpha beta gamma delta", 2),
        ])
        .unwrap();
        let edges = run(&c, 0.85, CandidateRule::Exhaustive);
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].weight, 1);
        assert_eq!(edges[0].copied_article_pairs, vec![("o1".to_string(), "c".to_string())]);
    }

    #[test]
    fn tsv_writers() {
        let c = planted();
        let edges = run(&c, 0.85, CandidateRule::Exhaustive);
        let dir = tempfile::tempdir().unwrap();
        write_edges(&dir.path().join("e.tsv"), &edges).unwrap();
        write_copied_pairs(&dir.path().join("p.tsv"), &edges).unwrap();
        let e = std::fs::read_to_string(dir.path().join("e.tsv")).unwrap();
        assert_eq!(e, "from_source\tto_source\tweight\ni\tj\t4\n");
        let p = std::fs::read_to_string(dir.path().join("p.tsv")).unwrap();
        assert_eq!(p.lines().count(), 5);
    }

    fn random_corpus(seed: u64, n: usize) -> Corpus {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vocab: Vec<String> = (0..60).map(|k| format!("w{k}")).collect();
        let mut arts: Vec<crate::corpus::Article> = Vec::new();
        for k in 0..n {
            let body = if k > 0 && rng.gen_bool(0.3) {
                // edited copy of an earlier article
                let src = &arts[rng.gen_range(0..k)].body;
                let mut toks: Vec<&str> = src.split(' ').collect();
                for _ in 0..rng.gen_range(0..4) {
                    let at = rng.gen_range(0..toks.len());
                    toks[at] = &vocab[rng.gen_range(0..vocab.len())];
                }
                toks.join(" ")
            } else {
                (0..rng.gen_range(3..15)).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect::<Vec<_>>().join(" ")
            };
            arts.push(article(&format!("a{k}"), &format!("s{}", rng.gen_range(0..5)), &body, rng.gen_range(0..50)));
        }
        Corpus::from_articles(arts).unwrap()
    }

    #[test]
    fn prefix_bound_matches_exhaustive() {
        for seed in 0..4 {
            let c = random_corpus(seed, 150);
            for t in [0.5, 0.85] {
                assert_eq!(run(&c, t, CandidateRule::Exhaustive), run(&c, t, CandidateRule::PrefixBound), "seed {seed} t {t}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn distances_in_unit_interval_and_threshold_monotone(seed in 0u64..1000, lo in 0.3f64..0.9, step in 0.0f64..0.1) {
            let c = random_corpus(seed, 60);
            let low = run(&c, lo, CandidateRule::Exhaustive);
            let high = run(&c, lo + step, CandidateRule::Exhaustive);
            let count = |es: &[CopyEdge]| es.iter().map(|e| e.weight).sum::<usize>();
            prop_assert!(count(&high) <= count(&low));
            for e in &high {
                prop_assert!(low.iter().any(|l| l.from_source == e.from_source && l.to_source == e.to_source));
            }
            for d in copy_distances(&low, &c) {
                prop_assert!((0.0..=1.0).contains(&d.d));
            }
            for e in &low {
                prop_assert_ne!(&e.from_source, &e.to_source);
                prop_assert_eq!(e.weight, e.copied_article_pairs.len());
                for (o, cp) in &e.copied_article_pairs {
                    prop_assert!(c.get(o).unwrap().published_at <= c.get(cp).unwrap().published_at);
                }
            }
        }
    }
}
