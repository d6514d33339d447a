use std::collections::HashSet;
use std::path::Path;

use super::CorpusError;

/// Canonical form of a reference URL.
///
/// Lowercases the host, drops the fragment, the default port and tracking
/// query parameters (`utm_*`, `fbclid`). DOI resolver links collapse to
/// `doi:<lowercased doi>` so they match bare DOI entries.
pub fn normalize_url(raw: &str) -> Option<String> {
    let raw = raw.trim();
    if let Some(doi) = bare_doi(raw) {
        return Some(doi);
    }
    let mut url = url::Url::parse(raw).ok()?;
    if !matches!(url.scheme(), "http" | "https") {
        return None;
    }
    let host = url.host_str()?.to_ascii_lowercase();
    if host == "doi.org" || host == "dx.doi.org" || host == "www.doi.org" {
        let path = url.path().trim_start_matches('/');
        let decoded = percent_decode(path);
        if decoded.starts_with("10.") {
            return Some(format!("doi:{}", decoded.to_lowercase()));
        }
    }
    url.set_fragment(None);
    let kept: Vec<(String, String)> = url
        .query_pairs()
        .filter(|(k, _)| !k.starts_with("utm_") && k != "fbclid")
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    if kept.is_empty() {
        url.set_query(None);
    } else {
        url.query_pairs_mut().clear().extend_pairs(kept);
    }
    Some(url.to_string())
}

fn bare_doi(raw: &str) -> Option<String> {
    let lower = raw.to_lowercase();
    let rest = lower.strip_prefix("doi:").map(str::trim).unwrap_or(&lower);
    (rest.starts_with("10.") && rest.contains('/') && !rest.contains(char::is_whitespace))
        .then(|| format!("doi:{rest}"))
}

// DOI suffixes only ever arrive with an escaped slash in practice.
fn percent_decode(s: &str) -> String {
    s.replace("%2F", "/").replace("%2f", "/")
}

fn domain_of(entry: &str) -> Option<String> {
    let entry = entry.trim().to_ascii_lowercase();
    let host = if entry.contains("://") {
        url::Url::parse(&entry).ok()?.host_str()?.to_string()
    } else {
        entry.split('/').next()?.to_string()
    };
    let host = host.strip_prefix("www.").unwrap_or(&host).trim_matches('.').to_string();
    (!host.is_empty()).then_some(host)
}

/// The universe of scientific references: exact paper URLs/DOIs plus
/// whole scientific domains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReferenceIndex {
    pub paper_urls: HashSet<String>,
    pub scientific_domains: HashSet<String>,
}

impl ReferenceIndex {
    pub fn from_entries<'a>(
        papers: impl IntoIterator<Item = &'a str>,
        domains: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let live = |l: &&str| !l.trim().is_empty() && !l.trim_start().starts_with('#');
        ReferenceIndex {
            paper_urls: papers.into_iter().filter(live).filter_map(normalize_url).collect(),
            scientific_domains: domains.into_iter().filter(live).filter_map(domain_of).collect(),
        }
    }

    /// Loads the two one-entry-per-line files.
    pub fn load(paper_urls: &Path, domains: &Path) -> Result<Self, CorpusError> {
        let papers = std::fs::read_to_string(paper_urls).map_err(|e| CorpusError::io(paper_urls, e))?;
        let doms = std::fs::read_to_string(domains).map_err(|e| CorpusError::io(domains, e))?;
        Ok(Self::from_entries(papers.lines(), doms.lines()))
    }

    fn host_in_domains(&self, host: &str) -> bool {
        let mut h = host;
        loop {
            if self.scientific_domains.contains(h) {
                return true;
            }
            match h.find('.') {
                Some(dot) => h = &h[dot + 1..],
                None => return false,
            }
        }
    }

    /// Returns the reference key when `raw_url` belongs to the index.
    pub fn match_url(&self, raw_url: &str) -> Option<String> {
        let key = normalize_url(raw_url)?;
        if self.paper_urls.contains(&key) {
            return Some(key);
        }
        if key.starts_with("doi:") {
            return self.host_in_domains("doi.org").then_some(key);
        }
        let host = url::Url::parse(&key).ok()?.host_str()?.to_string();
        self.host_in_domains(&host).then_some(key)
    }
}
