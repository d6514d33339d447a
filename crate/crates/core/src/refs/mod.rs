//! Citation contexts of scientific references and the two per-reference
//! distances: shared jargon and stance.

mod extract;

pub use extract::{extract_contexts, MAX_LINKS_PER_BLOCK};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{text_url_re, tokenize};
use crate::indicator::{min_max_normalize, Indicator, IndicatorDistance};
use crate::source::SourceId;

#[derive(Debug, Error)]
pub enum RefsError {
    #[error("{} citation contexts have no stance score, first: {:?}", .0.len(), .0.first())]
    MissingScores(Vec<(String, String)>),
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RefsError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> RefsError + '_ {
        move |source| RefsError::Io { path: path.to_path_buf(), source }
    }
}

/// The passage of one article surrounding one reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationContext {
    pub article_id: String,
    pub source: SourceId,
    pub reference_key: String,
    pub context_text: String,
    /// Tokens of the context with URLs removed.
    pub context_tokens: Vec<String>,
}

impl CitationContext {
    pub fn new(article_id: String, source: SourceId, reference_key: String, context_text: String) -> Self {
        let context_tokens = tokenize(&text_url_re().replace_all(&context_text, " "));
        CitationContext { article_id, source, reference_key, context_text, context_tokens }
    }
}

#[derive(Serialize, Deserialize)]
struct ContextRecord {
    article_id: String,
    source: String,
    reference_key: String,
    context: String,
}

pub fn write_contexts(path: &Path, contexts: &[CitationContext]) -> Result<(), RefsError> {
    let mut w = BufWriter::new(File::create(path).map_err(RefsError::io(path))?);
    for c in contexts {
        let rec = ContextRecord {
            article_id: c.article_id.clone(),
            source: c.source.to_string(),
            reference_key: c.reference_key.clone(),
            context: c.context_text.clone(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| RefsError::io(path)(e.into()))?;
        writeln!(w).map_err(RefsError::io(path))?;
    }
    w.flush().map_err(RefsError::io(path))
}

pub fn read_contexts(path: &Path) -> Result<Vec<CitationContext>, RefsError> {
    let r = BufReader::new(File::open(path).map_err(RefsError::io(path))?);
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(RefsError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| RefsError::Malformed { path: path.to_path_buf(), line: k + 1, message };
        let rec: ContextRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let source = SourceId::normalize(&rec.source).ok_or_else(|| bad("empty source".into()))?;
        if rec.context.trim().is_empty() {
            return Err(bad("empty context".into()));
        }
        out.push(CitationContext::new(rec.article_id, source, rec.reference_key, rec.context));
    }
    Ok(out)
}

/// Stance scores keyed by (article id, reference key).
pub type StanceScores = HashMap<(String, String), f64>;

/// Reads the `article_id, reference_key, score` TSV; scores must lie in [0, 1].
pub fn read_stance_scores(path: &Path) -> Result<StanceScores, RefsError> {
    let r = BufReader::new(File::open(path).map_err(RefsError::io(path))?);
    let mut out = HashMap::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(RefsError::io(path))?;
        let bad = |message: String| RefsError::Malformed { path: path.to_path_buf(), line: k + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if k == 0 && cols.first() == Some(&"article_id") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let [id, key, score] = cols[..] else {
            return Err(bad(format!("expected 3 columns, got {}", cols.len())));
        };
        let score: f64 = score.trim().parse().map_err(|_| bad(format!("bad score {score:?}")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad(format!("score {score} outside [0, 1]")));
        }
        out.insert((id.to_string(), key.to_string()), score);
    }
    Ok(out)
}

pub fn write_stance_scores(path: &Path, contexts: &[CitationContext], scores: &StanceScores) -> Result<(), RefsError> {
    let mut w = BufWriter::new(File::create(path).map_err(RefsError::io(path))?);
    let mut write = || -> io::Result<()> {
        writeln!(w, "article_id\treference_key\tscore")?;
        for c in contexts {
            if let Some(s) = scores.get(&(c.article_id.clone(), c.reference_key.clone())) {
                writeln!(w, "{}\t{}\t{s}", c.article_id, c.reference_key)?;
            }
        }
        w.flush()
    };
    write().map_err(RefsError::io(path))
}

/// Offline stance scorer: the fraction of context tokens found in the
/// negative lexicon, 0 for a context without tokens.
pub fn score_contexts_lexicon(contexts: &[CitationContext], negative_terms: &HashSet<String>) -> StanceScores {
    contexts
        .iter()
        .map(|c| {
            let toks = &c.context_tokens;
            let neg = toks.iter().filter(|t| negative_terms.contains(*t)).count();
            let score = if toks.is_empty() { 0.0 } else { (neg as f64 / toks.len() as f64).clamp(0.0, 1.0) };
            ((c.article_id.clone(), c.reference_key.clone()), score)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistance {
    pub i: SourceId,
    pub j: SourceId,
    pub reference_key: String,
    pub indicator: Indicator,
    pub d: f64,
}

impl From<ReferenceDistance> for IndicatorDistance {
    fn from(r: ReferenceDistance) -> Self {
        IndicatorDistance { indicator: r.indicator, i: r.i, j: r.j, distance: r.d, reference_key: Some(r.reference_key) }
    }
}

/// How normalized jargon overlap becomes a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JargonMode {
    /// `1 - norm(overlap)`: more shared jargon, smaller distance.
    #[default]
    Inverted,
    /// `norm(overlap)` as printed.
    Literal,
}

/// Groups contexts per reference, then per source, in sorted order.
fn by_reference<'a, T>(
    contexts: &'a [CitationContext],
    mut value: impl FnMut(&'a CitationContext) -> T,
) -> BTreeMap<&'a str, BTreeMap<&'a SourceId, Vec<T>>> {
    let mut map: BTreeMap<&str, BTreeMap<&SourceId, Vec<T>>> = BTreeMap::new();
    for c in contexts {
        map.entry(c.reference_key.as_str()).or_default().entry(&c.source).or_default().push(value(c));
    }
    map
}

/// Calls `f` for every unordered source pair (i < j) co-citing a reference.
fn co_citations<'a, T, R>(
    grouped: &BTreeMap<&'a str, BTreeMap<&'a SourceId, T>>,
    mut f: impl FnMut(&'a str, &'a SourceId, &T, &'a SourceId, &T) -> R,
) -> Vec<R> {
    let mut out = Vec::new();
    for (&key, per_source) in grouped {
        let entries: Vec<(&&SourceId, &T)> = per_source.iter().collect();
        for (x, (si, vi)) in entries.iter().enumerate() {
            for (sj, vj) in &entries[x + 1..] {
                out.push(f(key, si, vi, sj, vj));
            }
        }
    }
    out
}

/// Raw shared-jargon counts per co-cited reference, before normalization.
pub fn jargon_overlaps(contexts: &[CitationContext], jargon_terms: &HashSet<String>) -> Vec<(SourceId, SourceId, String, usize)> {
    let grouped = by_reference(contexts, |c| c.context_tokens.iter().filter(|t| jargon_terms.contains(*t)).cloned().collect::<Vec<_>>());
    let unions: BTreeMap<&str, BTreeMap<&SourceId, BTreeSet<String>>> = grouped
        .into_iter()
        .map(|(k, per)| (k, per.into_iter().map(|(s, lists)| (s, lists.into_iter().flatten().collect())).collect()))
        .collect();
    co_citations(&unions, |key, i, ji, j, jj| (i.clone(), j.clone(), key.to_string(), ji.intersection(jj).count()))
}

pub fn jargon_distance(contexts: &[CitationContext], jargon_terms: &HashSet<String>, mode: JargonMode) -> Vec<ReferenceDistance> {
    let raw = jargon_overlaps(contexts, jargon_terms);
    let norm = min_max_normalize(&raw.iter().map(|r| r.3 as f64).collect::<Vec<_>>());
    raw.into_iter()
        .zip(norm)
        .map(|((i, j, reference_key, _), n)| ReferenceDistance {
            i,
            j,
            reference_key,
            indicator: Indicator::Jargon,
            d: match mode {
                JargonMode::Inverted => 1.0 - n,
                JargonMode::Literal => n,
            },
        })
        .collect()
}

/// Raw `|stance_i - stance_j|` per co-cited reference, a source's stance being
/// the mean score of its contexts citing the reference.
pub fn stance_differences(contexts: &[CitationContext], scores: &StanceScores) -> Result<Vec<ReferenceDistance>, RefsError> {
    let grouped = by_reference(contexts, |c| (c.article_id.as_str(), c.reference_key.as_str()));
    let mut missing = Vec::new();
    let mut means: BTreeMap<&str, BTreeMap<&SourceId, f64>> = BTreeMap::new();
    for (key, per_source) in &grouped {
        if per_source.len() < 2 {
            continue;
        }
        for (source, ids) in per_source {
            let mut sum = 0.0;
            for &(article, reference) in ids {
                match scores.get(&(article.to_string(), reference.to_string())) {
                    Some(s) => sum += s,
                    None => missing.push((article.to_string(), reference.to_string())),
                }
            }
            means.entry(key).or_default().insert(source, sum / ids.len() as f64);
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(RefsError::MissingScores(missing));
    }
    Ok(co_citations(&means, |key, i, si, j, sj| ReferenceDistance {
        i: i.clone(),
        j: j.clone(),
        reference_key: key.to_string(),
        indicator: Indicator::Stance,
        d: (si - sj).abs(),
    }))
}

/// Stance differences, min-max normalized over all records.
pub fn stance_distance(contexts: &[CitationContext], scores: &StanceScores) -> Result<Vec<ReferenceDistance>, RefsError> {
    let mut raw = stance_differences(contexts, scores)?;
    let norm = min_max_normalize(&raw.iter().map(|r| r.d).collect::<Vec<_>>());
    for (r, n) in raw.iter_mut().zip(norm) {
        r.d = n;
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(article: &str, source: &str, key: &str, text: &str) -> CitationContext {
        CitationContext::new(article.into(), source.into(), key.into(), text.into())
    }

    fn terms(ts: &[&str]) -> HashSet<String> {
        ts.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn jargon_overlap_counts_shared_lexicon_tokens() {
        let jargon = terms(&["mental", "health", "vaccine"]);
        let cs = vec![
            ctx("1", "a", "r", "mental health matters https://x.edu/health"),
            ctx("2", "b", "r", "Mental Health is a concern"),
            ctx("3", "c", "r", "nothing technical here"),
        ];
        let ov = jargon_overlaps(&cs, &jargon);
        let get = |i: &str, j: &str| ov.iter().find(|r| r.0.as_str() == i && r.1.as_str() == j).unwrap().3;
        assert_eq!(get("a", "b"), 2);
        assert_eq!(get("a", "c"), 0);
        let d = jargon_distance(&cs, &jargon, JargonMode::Inverted);
        let dist = |i: &str, j: &str| d.iter().find(|r| r.i.as_str() == i && r.j.as_str() == j).unwrap().d;
        assert_eq!(dist("a", "b"), 0.0);
        assert_eq!(dist("a", "c"), 1.0);
        let lit = jargon_distance(&cs, &jargon, JargonMode::Literal);
        assert_eq!(lit.iter().find(|r| r.j.as_str() == "b").unwrap().d, 1.0);
    }

    #[test]
    fn jargon_unions_contexts_per_source() {
        let jargon = terms(&["virus", "dose"]);
        let cs = vec![
            ctx("1", "a", "r", "the virus"),
            ctx("2", "a", "r", "a dose"),
            ctx("3", "b", "r", "virus dose"),
            ctx("4", "b", "q", "virus"),
        ];
        let ov = jargon_overlaps(&cs, &jargon);
        assert_eq!(ov.len(), 1);
        assert_eq!(ov[0].3, 2);
    }

    #[test]
    fn stance_examples() {
        let cs = vec![ctx("1", "a", "r", "x"), ctx("2", "b", "r", "y"), ctx("3", "c", "r", "z"), ctx("4", "d", "q", "w")];
        let scores: StanceScores = [("1", 0.9), ("2", 0.1), ("3", 0.5)]
            .into_iter()
            .map(|(id, s)| ((id.to_string(), "r".to_string()), s))
            .collect();
        let raw = stance_differences(&cs, &scores).unwrap();
        assert_eq!(raw.len(), 3);
        assert!((raw[0].d - 0.8).abs() < 1e-12);
        // d(a, b) = 0.8, d(a, c) = 0.4, d(b, c) = 0.4
        let norm = stance_distance(&cs, &scores).unwrap();
        let ds: Vec<f64> = norm.iter().map(|r| r.d).collect();
        assert_eq!(ds, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn stance_min_max_example() {
        // three pairs with raw {0, 0.4, 0.8}
        let cs = vec![
            ctx("1", "a", "r1", "x"),
            ctx("2", "b", "r1", "x"),
            ctx("3", "a", "r2", "x"),
            ctx("4", "b", "r2", "x"),
            ctx("5", "a", "r3", "x"),
            ctx("6", "b", "r3", "x"),
        ];
        let s = |pairs: &[(&str, &str, f64)]| -> StanceScores {
            pairs.iter().map(|(a, r, v)| ((a.to_string(), r.to_string()), *v)).collect()
        };
        let scores = s(&[("1", "r1", 0.3), ("2", "r1", 0.3), ("3", "r2", 0.5), ("4", "r2", 0.1), ("5", "r3", 0.0), ("6", "r3", 0.8)]);
        let d: Vec<f64> = stance_distance(&cs, &scores).unwrap().iter().map(|r| r.d).collect();
        assert_eq!(d.len(), 3);
        for (got, want) in d.iter().zip([0.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn stance_averages_contexts_and_reports_missing() {
        let cs = vec![ctx("1", "a", "r", "x"), ctx("2", "a", "r", "y"), ctx("3", "b", "r", "z"), ctx("9", "c", "solo", "z")];
        let mut scores: StanceScores = HashMap::new();
        scores.insert(("1".into(), "r".into()), 1.0);
        scores.insert(("3".into(), "r".into()), 0.25);
        match stance_differences(&cs, &scores) {
            Err(RefsError::MissingScores(m)) => assert_eq!(m, vec![("2".to_string(), "r".to_string())]),
            other => panic!("{other:?}"),
        }
        scores.insert(("2".into(), "r".into()), 0.0);
        let raw = stance_differences(&cs, &scores).unwrap();
        // mean(1, 0) = 0.5 vs 0.25; the uncited "solo" reference needs no score
        assert_eq!(raw.len(), 1);
        assert!((raw[0].d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lexicon_scorer() {
        let neg = terms(&["lie", "hoax"]);
        let cs = vec![
            ctx("1", "a", "r", "they lie about the hoax and other six words here"),
            ctx("2", "a", "q", "a calm statement"),
            ctx("3", "a", "p", "lie hoax"),
            ctx("4", "a", "o", "https://only.a.url/x"),
        ];
        let s = score_contexts_lexicon(&cs, &neg);
        assert!((s[&("1".to_string(), "r".to_string())] - 0.2).abs() < 1e-12);
        assert_eq!(s[&("2".to_string(), "q".to_string())], 0.0);
        assert_eq!(s[&("3".to_string(), "p".to_string())], 1.0);
        assert_eq!(s[&("4".to_string(), "o".to_string())], 0.0);
    }

    #[test]
    fn context_and_stance_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cs = vec![ctx("1", "a", "https://cdc.gov/x", "He said \"tabs\there\"."), ctx("2", "b", "doi:10.1/x", "plain")];
        let p = dir.path().join("contexts.jsonl");
        write_contexts(&p, &cs).unwrap();
        let first = std::fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&first).unwrap();
        for field in ["article_id", "source", "reference_key", "context"] {
            assert!(v.get(field).is_some(), "{field}");
        }
        assert_eq!(read_contexts(&p).unwrap(), cs);

        let scores = score_contexts_lexicon(&cs, &terms(&["plain"]));
        let sp = dir.path().join("stance.tsv");
        write_stance_scores(&sp, &cs, &scores).unwrap();
        assert_eq!(read_stance_scores(&sp).unwrap(), scores);
        std::fs::write(&sp, "article_id\treference_key\tscore\n1\tr\t1.5\n").unwrap();
        assert!(read_stance_scores(&sp).is_err());
    }

    proptest::proptest! {
        #[test]
        fn distances_symmetric_and_bounded(
            raw in proptest::collection::vec((0usize..5, 0usize..3, 0.0f64..1.0, 0usize..4), 1..40)
        ) {
            let words = ["virus", "dose", "trial", "mask"];
            let jargon = terms(&words);
            let cs: Vec<CitationContext> = raw.iter().enumerate().map(|(k, (s, r, _, w))| {
                ctx(&k.to_string(), &format!("s{s}"), &format!("r{r}"), &words[..=*w].join(" "))
            }).collect();
            let scores: StanceScores = raw.iter().enumerate()
                .map(|(k, (_, r, v, _))| ((k.to_string(), format!("r{r}")), *v)).collect();
            // reverse the context order: the pair orientation must not change the values
            let mut rev = cs.clone();
            rev.reverse();
            for (a, b) in [(stance_distance(&cs, &scores).unwrap(), stance_distance(&rev, &scores).unwrap()),
                           (jargon_distance(&cs, &jargon, JargonMode::Inverted), jargon_distance(&rev, &jargon, JargonMode::Inverted))] {
                proptest::prop_assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(&b) {
                    proptest::prop_assert!(x.i < x.j);
                    proptest::prop_assert!((0.0..=1.0).contains(&x.d));
                    proptest::prop_assert_eq!((&x.i, &x.j, &x.reference_key), (&y.i, &y.j, &y.reference_key));
                    proptest::prop_assert!((x.d - y.d).abs() < 1e-12);
                }
            }
        }
    }
}
