use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::source::SourceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReliabilityClass {
    Reliable,
    Unreliable,
}

impl ReliabilityClass {
    /// Reliable iff factual reporting is above 2 and the source is not
    /// flagged for conspiracy content.
    pub fn derive(factual_reporting: u8, conspiracy: bool) -> Self {
        if factual_reporting > 2 && !conspiracy {
            ReliabilityClass::Reliable
        } else {
            ReliabilityClass::Unreliable
        }
    }
}

/// Ground truth for one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLabel {
    pub source: SourceId,
    /// 0 (least credible) to 5.
    pub factual_reporting: u8,
    pub conspiracy: bool,
    /// -3 (far left) to 3 (far right).
    pub political_leaning: i8,
    pub reliability_class: ReliabilityClass,
}

impl SourceLabel {
    pub fn new(source: SourceId, factual_reporting: u8, conspiracy: bool, political_leaning: i8) -> Self {
        SourceLabel {
            source,
            factual_reporting,
            conspiracy,
            political_leaning,
            reliability_class: ReliabilityClass::derive(factual_reporting, conspiracy),
        }
    }

    pub fn is_unreliable(&self) -> bool {
        self.reliability_class == ReliabilityClass::Unreliable
    }
}

#[derive(Deserialize)]
struct LabelRow {
    source: String,
    factual_reporting: String,
    conspiracy: String,
    political_leaning: String,
}

fn parse_bool(token: &str) -> Option<bool> {
    match token.trim().to_ascii_lowercase().as_str() {
        "true" | "t" | "1" | "yes" | "y" => Some(true),
        "false" | "f" | "0" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Loads the label CSV (`source,factual_reporting,conspiracy,political_leaning`).
///
/// Sources that never appear in the corpus are kept; evaluation joins on the
/// intersection.
pub fn load_labels(path: &Path) -> Result<BTreeMap<SourceId, SourceLabel>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    parse_labels(path, file)
}

pub fn parse_labels(path: &Path, reader: impl Read) -> Result<BTreeMap<SourceId, SourceLabel>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut labels = BTreeMap::new();
    for (idx, row) in rdr.deserialize::<LabelRow>().enumerate() {
        let line = idx as u64 + 2;
        let row = row.map_err(|e| CorpusError::malformed(path, line, e.to_string()))?;
        let bad = |m: String| CorpusError::malformed(path, line, m);
        let source = SourceId::normalize(&row.source).ok_or_else(|| bad("empty source".into()))?;
        let factual: u8 = row
            .factual_reporting
            .parse()
            .ok()
            .filter(|v| *v <= 5)
            .ok_or_else(|| bad(format!("factual_reporting {:?} outside 0..=5", row.factual_reporting)))?;
        let conspiracy =
            parse_bool(&row.conspiracy).ok_or_else(|| bad(format!("unknown boolean {:?}", row.conspiracy)))?;
        let leaning: i8 = row
            .political_leaning
            .parse()
            .ok()
            .filter(|v: &i8| (-3..=3).contains(v))
            .ok_or_else(|| bad(format!("political_leaning {:?} outside -3..=3", row.political_leaning)))?;
        labels.insert(source.clone(), SourceLabel::new(source, factual, conspiracy, leaning));
    }
    Ok(labels)
}
