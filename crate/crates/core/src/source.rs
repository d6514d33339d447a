//! News-source identifiers.

use std::borrow::Borrow;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// Normalized news-source name: lowercase, whitespace runs replaced by `_`.
///
/// Every artifact keys sources by this form, so label and corpus joins never
/// fail on casing or spacing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(String);

impl SourceId {
    /// Normalizes a raw source name. Returns `None` when nothing is left.
    pub fn normalize(raw: &str) -> Option<Self> {
        let joined = raw
            .split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
            .join("_");
        if joined.is_empty() {
            None
        } else {
            Some(SourceId(joined))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for SourceId {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for SourceId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SourceId {
    /// Normalizing conversion; panics on a blank name.
    fn from(raw: &str) -> Self {
        SourceId::normalize(raw).expect("blank source name")
    }
}
