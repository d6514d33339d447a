use std::collections::BTreeMap;

use rayon::prelude::*;
use scraper::{ElementRef, Html, Selector};

use super::CitationContext;
use crate::corpus::{text_url_re, trim_url_tail, Article, Corpus, ReferenceIndex};

/// Blocks holding more links than this are treated as end-note lists.
pub const MAX_LINKS_PER_BLOCK: usize = 10;

const BLOCK_TAGS: &[&str] = &[
    "p", "li", "blockquote", "div", "td", "th", "dd", "dt", "section", "article", "aside", "h1", "h2", "h3", "h4",
    "h5", "h6", "figcaption", "pre", "main", "body",
];

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn element_text(el: ElementRef) -> String {
    collapse_ws(&el.text().collect::<String>())
}

/// (reference key, passage) pairs from anchors in `html`; `None` when the
/// markup holds no anchor at all.
fn html_contexts(html: &str, base: Option<&url::Url>, index: &ReferenceIndex) -> Option<Vec<(String, String)>> {
    let doc = Html::parse_document(html);
    let anchors = Selector::parse("a[href]").expect("static selector");
    doc.select(&anchors).next()?;
    let mut out = Vec::new();
    for a in doc.select(&anchors) {
        let href = a.value().attr("href").unwrap_or_default().trim();
        let absolute = match (url::Url::parse(href), base) {
            (Ok(u), _) => u.to_string(),
            (Err(url::ParseError::RelativeUrlWithoutBase), Some(b)) => match b.join(href) {
                Ok(u) => u.to_string(),
                Err(_) => continue,
            },
            _ => continue,
        };
        let Some(key) = index.match_url(&absolute) else { continue };
        let Some(block) = a.ancestors().filter_map(ElementRef::wrap).find(|e| BLOCK_TAGS.contains(&e.value().name()))
        else {
            continue;
        };
        // list items are judged by the density of the whole list
        let scope = if matches!(block.value().name(), "li" | "dd" | "dt") {
            block
                .ancestors()
                .filter_map(ElementRef::wrap)
                .find(|e| matches!(e.value().name(), "ul" | "ol" | "dl"))
                .unwrap_or(block)
        } else {
            block
        };
        if scope.select(&anchors).count() > MAX_LINKS_PER_BLOCK {
            continue;
        }
        let text = element_text(block);
        if !text.is_empty() {
            out.push((key, text));
        }
    }
    Some(out)
}

fn is_sentence_end(text: &str, at: usize) -> bool {
    let b = text.as_bytes();
    match b[at] {
        b'\n' => true,
        b'.' | b'!' | b'?' => at + 1 == b.len() || b[at + 1].is_ascii_whitespace(),
        _ => false,
    }
}

/// (reference key, sentence) pairs for bare URLs in plain text. The sentence
/// always contains the URL token.
fn text_contexts(text: &str, index: &ReferenceIndex) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for m in text_url_re().find_iter(text) {
        let url = trim_url_tail(m.as_str());
        let Some(key) = index.match_url(url) else { continue };
        let (start, end) = (m.start(), m.start() + url.len());
        let from = (0..start).rev().find(|&k| is_sentence_end(text, k)).map_or(0, |k| k + 1);
        let to = (end..text.len()).find(|&k| is_sentence_end(text, k)).map_or(text.len(), |k| k + 1);
        let sentence = collapse_ws(&text[from..to]);
        if !sentence.is_empty() {
            out.push((key, sentence));
        }
    }
    out
}

fn article_contexts(article: &Article, index: &ReferenceIndex) -> Vec<CitationContext> {
    let found = match article.raw_html.as_deref().filter(|h| !h.trim().is_empty()) {
        Some(html) => {
            let base = article.url.as_deref().and_then(|u| url::Url::parse(u).ok());
            html_contexts(html, base.as_ref(), index).unwrap_or_else(|| text_contexts(&article.body, index))
        }
        None => text_contexts(&article.body, index),
    };
    // several passages citing the same reference in one article are merged
    let mut merged: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (key, text) in found {
        let passages = merged.entry(key).or_default();
        if !passages.contains(&text) {
            passages.push(text);
        }
    }
    merged
        .into_iter()
        .map(|(reference_key, passages)| {
            CitationContext::new(article.id.clone(), article.source.clone(), reference_key, passages.join(" "))
        })
        .collect()
}

/// One context per (article, reference) cited by the article, in corpus order.
pub fn extract_contexts(corpus: &Corpus, index: &ReferenceIndex) -> Vec<CitationContext> {
    corpus.articles().par_iter().flat_map_iter(|a| article_contexts(a, index)).collect()
}
