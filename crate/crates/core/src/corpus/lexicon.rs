use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::CorpusError;

const BUNDLED_STOP_WORDS: &str = include_str!("../../data/stop_words.txt");
const BUNDLED_TOPIC_KEYWORDS: &str = include_str!("../../data/topic_keywords.txt");
const BUNDLED_JARGON: &str = include_str!("../../data/jargon_terms.txt");
const BUNDLED_NEGATIVE: &str = include_str!("../../data/negative_terms.txt");

/// Term lists shared by the indicators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub jargon_terms: HashSet<String>,
    pub topic_keywords: HashSet<String>,
    pub stop_words: HashSet<String>,
    /// Used by the offline stance scorer.
    pub negative_terms: HashSet<String>,
}

impl Lexicons {
    /// The lists shipped with the crate.
    pub fn bundled() -> Self {
        let parse = |text| parse_terms(text).expect("bundled lexicons are non-empty");
        Lexicons {
            jargon_terms: parse(BUNDLED_JARGON),
            topic_keywords: parse(BUNDLED_TOPIC_KEYWORDS),
            stop_words: parse(BUNDLED_STOP_WORDS),
            negative_terms: parse(BUNDLED_NEGATIVE),
        }
    }

    /// Bundled lists, each replaced by a file when one is given.
    pub fn load(
        jargon: Option<&Path>,
        topic: Option<&Path>,
        stop: Option<&Path>,
        negative: Option<&Path>,
    ) -> Result<Self, CorpusError> {
        let mut lex = Lexicons::bundled();
        if let Some(p) = jargon {
            lex.jargon_terms = load_term_file(p)?;
        }
        if let Some(p) = topic {
            lex.topic_keywords = load_term_file(p)?;
        }
        if let Some(p) = stop {
            lex.stop_words = load_term_file(p)?;
        }
        if let Some(p) = negative {
            lex.negative_terms = load_term_file(p)?;
        }
        Ok(lex)
    }
}

/// One term per line; blank lines and `#` comments are skipped, terms are lowercased.
/// Returns `None` when no term is left.
pub fn parse_terms(text: &str) -> Option<HashSet<String>> {
    let terms: HashSet<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect();
    (!terms.is_empty()).then_some(terms)
}

pub fn load_term_file(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_terms(&text).ok_or_else(|| CorpusError::EmptyLexicon(PathBuf::from(path)))
}
