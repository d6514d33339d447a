use std::collections::{BTreeMap, BTreeSet};

use super::EvalError;
use crate::indicator::Indicator;
use crate::sampler::Triplet;
use crate::source::SourceId;

type Tuple = (SourceId, SourceId, SourceId);

/// Source and triplet coverage between indicators. Rows and columns follow
/// `indicators`; a cell is `None` when its row indicator has no triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub indicators: Vec<Indicator>,
    pub sources: BTreeMap<Indicator, BTreeSet<SourceId>>,
    pub triplets: BTreeMap<Indicator, BTreeSet<Tuple>>,
    /// sc[i][j] = |src(i) ∩ src(j)| / |src(i)|
    pub sc: Vec<Vec<Option<f64>>>,
    /// tc[i][j] = |trpl(i) ∩ trpl(j)| / |trpl(i)|
    pub tc: Vec<Vec<Option<f64>>>,
}

fn ratio<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Option<f64> {
    (!a.is_empty()).then(|| a.intersection(b).count() as f64 / a.len() as f64)
}

/// Triplets are grouped by their positive indicator. Every indicator in
/// [`Indicator::ALL`] gets a row; empty ones are undefined.
pub fn coverage(triplets: &[Triplet]) -> Result<CoverageReport, EvalError> {
    let mut sources: BTreeMap<Indicator, BTreeSet<SourceId>> = Indicator::ALL.iter().map(|&f| (f, BTreeSet::new())).collect();
    let mut tuples: BTreeMap<Indicator, BTreeSet<Tuple>> = Indicator::ALL.iter().map(|&f| (f, BTreeSet::new())).collect();
    for t in triplets {
        let f = t.pos_indicator;
        let src = sources.get_mut(&f).expect("all indicators present");
        src.extend([t.anchor.clone(), t.positive.clone(), t.negative.clone()]);
        tuples.get_mut(&f).expect("all indicators present").insert((t.anchor.clone(), t.positive.clone(), t.negative.clone()));
    }
    if tuples.values().all(BTreeSet::is_empty) {
        return Err(EvalError::NoIndicators);
    }
    let indicators = Indicator::ALL.to_vec();
    let matrix = |f: &dyn Fn(Indicator, Indicator) -> Option<f64>| -> Vec<Vec<Option<f64>>> {
        indicators.iter().map(|&i| indicators.iter().map(|&j| f(i, j)).collect()).collect()
    };
    let sc = matrix(&|i, j| ratio(&sources[&i], &sources[&j]));
    let tc = matrix(&|i, j| ratio(&tuples[&i], &tuples[&j]));
    Ok(CoverageReport { indicators, sources, triplets: tuples, sc, tc })
}
