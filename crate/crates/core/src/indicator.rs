//! Agreement indicators and the distance records every sampler consumes.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::source::SourceId;

/// The four source-agreement indicators, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    Copy,
    Shift,
    Jargon,
    Stance,
}

impl Indicator {
    pub const ALL: [Indicator; 4] = [Indicator::Copy, Indicator::Shift, Indicator::Jargon, Indicator::Stance];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Copy => "copy",
            Indicator::Shift => "shift",
            Indicator::Jargon => "jargon",
            Indicator::Stance => "stance",
        }
    }

    /// Reference indicators carry one record per co-cited reference.
    pub fn is_per_reference(self) -> bool {
        matches!(self, Indicator::Jargon | Indicator::Stance)
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Indicator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "copy" => Ok(Indicator::Copy),
            "shift" => Ok(Indicator::Shift),
            "jargon" => Ok(Indicator::Jargon),
            "stance" | "reference" => Ok(Indicator::Stance),
            other => Err(format!("unknown indicator {other:?}")),
        }
    }
}

/// One `(i, j, indicator, distance)` observation, optionally tied to a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorDistance {
    pub indicator: Indicator,
    pub i: SourceId,
    pub j: SourceId,
    pub distance: f64,
    pub reference_key: Option<String>,
}

impl IndicatorDistance {
    pub fn pair(indicator: Indicator, i: SourceId, j: SourceId, distance: f64) -> Self {
        IndicatorDistance { indicator, i, j, distance, reference_key: None }
    }
}

/// Writes distance records as TSV.
///
/// Pair indicators use `indicator, i, j, distance`; when any record carries a
/// reference key the five-column layout `indicator, i, j, reference_key,
/// distance` is used for the whole file.
pub fn write_distances(path: &Path, records: &[IndicatorDistance]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let with_ref = records.iter().any(|r| r.reference_key.is_some());
    if with_ref {
        writeln!(out, "indicator\ti\tj\treference_key\tdistance")?;
    } else {
        writeln!(out, "indicator\ti\tj\tdistance")?;
    }
    for r in records {
        if with_ref {
            let key = r.reference_key.as_deref().unwrap_or("");
            writeln!(out, "{}\t{}\t{}\t{}\t{}", r.indicator, r.i, r.j, key, r.distance)?;
        } else {
            writeln!(out, "{}\t{}\t{}\t{}", r.indicator, r.i, r.j, r.distance)?;
        }
    }
    out.flush()
}

/// Reads a distance TSV in either layout.
pub fn read_distances(path: &Path) -> io::Result<Vec<IndicatorDistance>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || (lineno == 0 && line.starts_with("indicator\t")) {
            continue;
        }
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {msg}", path.display(), lineno + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        let (reference_key, dist_col) = match cols.len() {
            4 => (None, cols[3]),
            5 => (Some(cols[3].to_string()).filter(|k| !k.is_empty()), cols[4]),
            _ => return Err(bad("expected 4 or 5 tab-separated columns")),
        };
        let indicator = cols[0].parse().map_err(|e: String| bad(&e))?;
        let i = SourceId::normalize(cols[1]).ok_or_else(|| bad("empty source"))?;
        let j = SourceId::normalize(cols[2]).ok_or_else(|| bad("empty source"))?;
        let distance: f64 = dist_col.parse().map_err(|_| bad("bad distance"))?;
        records.push(IndicatorDistance { indicator, i, j, distance, reference_key });
    }
    Ok(records)
}

/// Min-max normalizes values into `[0, 1]`. A constant input maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
}
