//! Article ingestion, topic filtering, labels, lexicons and reference indexes.
//!
//! The corpus is immutable after loading and indexed by source, so every
//! downstream stage can borrow it concurrently.

mod labels;
mod lexicon;
mod reference;
mod tokenize;

pub use labels::{load_labels, parse_labels, ReliabilityClass, SourceLabel};
pub use lexicon::{load_term_file, parse_terms, Lexicons};
pub use reference::{normalize_url, ReferenceIndex};
pub use tokenize::tokenize;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::SourceId;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("duplicate article id {0:?}")]
    DuplicateId(String),
    #[error("lexicon {0} has no terms")]
    EmptyLexicon(PathBuf),
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }

    fn malformed(path: &Path, line: u64, message: impl Into<String>) -> Self {
        CorpusError::Malformed { path: path.to_path_buf(), line, message: message.into() }
    }
}

/// One news publication.
#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub id: String,
    pub source: SourceId,
    pub title: String,
    pub body: String,
    pub published_at: DateTime<Utc>,
    pub url: Option<String>,
    pub raw_html: Option<String>,
    /// Absolute http(s) URLs from the record's link list, `raw_html` anchors and the body.
    pub out_links: Vec<String>,
}

/// Input file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

/// An indexed, read-only article collection.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    articles: Vec<Article>,
    by_source: BTreeMap<SourceId, Vec<usize>>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Builds the per-source index. Rejects duplicate ids.
    pub fn from_articles(articles: Vec<Article>) -> Result<Self, CorpusError> {
        let mut by_source: BTreeMap<SourceId, Vec<usize>> = BTreeMap::new();
        let mut by_id = HashMap::with_capacity(articles.len());
        for (idx, article) in articles.iter().enumerate() {
            if by_id.insert(article.id.clone(), idx).is_some() {
                return Err(CorpusError::DuplicateId(article.id.clone()));
            }
            by_source.entry(article.source.clone()).or_default().push(idx);
        }
        Ok(Corpus { articles, by_source, by_id })
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// Sources in canonical (lexicographic) order.
    pub fn sources(&self) -> impl Iterator<Item = &SourceId> {
        self.by_source.keys()
    }

    pub fn n_sources(&self) -> usize {
        self.by_source.len()
    }

    /// Indices into [`Corpus::articles`] for one source, in file order.
    pub fn article_indices(&self, source: &str) -> &[usize] {
        self.by_source.get(source).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn articles_of<'a>(&'a self, source: &str) -> impl Iterator<Item = &'a Article> + 'a {
        self.article_indices(source).iter().map(move |&i| &self.articles[i])
    }

    pub fn source_size(&self, source: &str) -> usize {
        self.article_indices(source).len()
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.by_id.get(id).map(|&i| &self.articles[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Keeps the articles for which `keep` holds.
    pub fn retain(&self, mut keep: impl FnMut(&Article) -> bool) -> Corpus {
        let kept: Vec<Article> = self.articles.iter().filter(|a| keep(a)).cloned().collect();
        Corpus::from_articles(kept).expect("subset of a valid corpus has unique ids")
    }

    /// Writes the corpus in the canonical JSONL layout.
    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
        let mut out = BufWriter::new(file);
        for a in &self.articles {
            let record = RawArticleOut {
                id: &a.id,
                source: a.source.as_str(),
                title: &a.title,
                content: &a.body,
                published_utc: a.published_at.timestamp(),
                url: a.url.as_deref(),
                raw_html: a.raw_html.as_deref(),
                links: &a.out_links,
            };
            serde_json::to_writer(&mut out, &record).map_err(|e| CorpusError::io(path, e.into()))?;
            out.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
        }
        out.flush().map_err(|e| CorpusError::io(path, e))
    }
}

#[derive(Deserialize)]
struct RawArticle {
    id: serde_json::Value,
    source: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default, alias = "body")]
    content: Option<String>,
    #[serde(alias = "published_at")]
    published_utc: serde_json::Value,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    raw_html: Option<String>,
    #[serde(default)]
    links: Option<Vec<String>>,
}

#[derive(Serialize)]
struct RawArticleOut<'a> {
    id: &'a str,
    source: &'a str,
    title: &'a str,
    content: &'a str,
    published_utc: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    url: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_html: Option<&'a str>,
    links: &'a [String],
}

#[derive(Deserialize)]
struct CsvArticle {
    id: String,
    source: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    content: String,
    published_utc: String,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    raw_html: Option<String>,
    /// Whitespace-separated.
    #[serde(default)]
    links: Option<String>,
}

/// Loads articles from `path`.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let articles = match format {
        CorpusFormat::Jsonl => parse_jsonl(path, BufReader::new(file))?,
        CorpusFormat::Csv => parse_csv(path, file)?,
    };
    Corpus::from_articles(articles)
}

fn parse_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<Article>, CorpusError> {
    let mut articles = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle =
            serde_json::from_str(&line).map_err(|e| CorpusError::malformed(path, lineno, e.to_string()))?;
        let id = match raw.id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            _ => return Err(CorpusError::malformed(path, lineno, "id must be a string or number")),
        };
        let published_at = match &raw.published_utc {
            serde_json::Value::Number(n) => n.as_i64().and_then(|s| Utc.timestamp_opt(s, 0).single()),
            serde_json::Value::String(s) => parse_timestamp(s),
            _ => None,
        }
        .ok_or_else(|| CorpusError::malformed(path, lineno, format!("unparseable timestamp {}", raw.published_utc)))?;
        let article = build_article(
            id,
            &raw.source,
            raw.title.unwrap_or_default(),
            raw.content.unwrap_or_default(),
            published_at,
            raw.url,
            raw.raw_html,
            raw.links.unwrap_or_default(),
        )
        .map_err(|m| CorpusError::malformed(path, lineno, m))?;
        articles.push(article);
    }
    Ok(articles)
}

fn parse_csv(path: &Path, reader: impl Read) -> Result<Vec<Article>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let mut articles = Vec::new();
    for result in rdr.deserialize::<CsvArticle>() {
        let rec = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CorpusError::malformed(path, line, e.to_string())
        })?;
        // header is line 1
        let lineno = articles.len() as u64 + 2;
        let published_at = parse_timestamp(&rec.published_utc)
            .ok_or_else(|| CorpusError::malformed(path, lineno, format!("unparseable timestamp {:?}", rec.published_utc)))?;
        let links = rec.links.map(|l| l.split_whitespace().map(str::to_string).collect()).unwrap_or_default();
        let article = build_article(
            rec.id,
            &rec.source,
            rec.title,
            rec.content,
            published_at,
            rec.url.filter(|u| !u.is_empty()),
            rec.raw_html.filter(|h| !h.is_empty()),
            links,
        )
        .map_err(|m| CorpusError::malformed(path, lineno, m))?;
        articles.push(article);
    }
    Ok(articles)
}

#[allow(clippy::too_many_arguments)]
fn build_article(
    id: String,
    source: &str,
    title: String,
    body: String,
    published_at: DateTime<Utc>,
    url: Option<String>,
    raw_html: Option<String>,
    links: Vec<String>,
) -> Result<Article, String> {
    if id.trim().is_empty() {
        return Err("empty article id".into());
    }
    let source = SourceId::normalize(source).ok_or("empty source")?;
    let out_links = collect_links(&links, raw_html.as_deref(), &body);
    Ok(Article { id, source, title, body, published_at, url, raw_html, out_links })
}

/// Parses a timestamp; strings without a zone are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Utc.timestamp_opt(secs, 0).single();
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|n| Utc.from_utc_datetime(&n))
}

fn href_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?i)href\s*=\s*["']([^"']+)["']"#).unwrap())
}

/// Matches bare http(s) URLs in running text.
pub(crate) fn text_url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"https?://[^\s<>"']+"#).unwrap())
}

/// Strips sentence punctuation that a bare URL swallowed at its end.
pub(crate) fn trim_url_tail(url: &str) -> &str {
    url.trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']'])
}

fn collect_links(links: &[String], raw_html: Option<&str>, body: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |candidate: &str| {
        if let Ok(u) = url::Url::parse(candidate.trim()) {
            if matches!(u.scheme(), "http" | "https") && u.host_str().is_some() {
                let s = u.to_string();
                if seen.insert(s.clone()) {
                    out.push(s);
                }
            }
        }
    };
    for l in links {
        push(l);
    }
    if let Some(html) = raw_html {
        for cap in href_re().captures_iter(html) {
            push(&cap[1]);
        }
    }
    for m in text_url_re().find_iter(body) {
        push(trim_url_tail(m.as_str()));
    }
    out
}

/// True when any keyword occurs as a token (or contiguous token sequence for
/// multi-word keywords) in the title or body.
fn mentions_topic(article: &Article, single: &HashSet<&str>, phrases: &[Vec<String>]) -> bool {
    [&article.title, &article.body].iter().any(|text| {
        let tokens = tokenize(text);
        tokens.iter().any(|t| single.contains(t.as_str()))
            || phrases.iter().any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
    })
}

/// Keeps articles that mention at least one topic keyword.
///
/// Keywords are matched at token level, case-insensitively.
pub fn filter_topic(corpus: &Corpus, topic_keywords: &HashSet<String>) -> Corpus {
    let mut single_tokens = Vec::new();
    let mut phrases = Vec::new();
    for kw in topic_keywords {
        let mut toks = tokenize(kw);
        match toks.len() {
            0 => {}
            1 => single_tokens.push(toks.pop().unwrap()),
            _ => phrases.push(toks),
        }
    }
    let single: HashSet<&str> = single_tokens.iter().map(String::as_str).collect();
    corpus.retain(|a| mentions_topic(a, &single, &phrases))
}
