use std::collections::{BTreeMap, BTreeSet};

use super::{average_ranks, EvalError};
use crate::corpus::SourceLabel;
use crate::indicator::Indicator;
use crate::sampler::Triplet;
use crate::source::SourceId;

/// Area under the ROC curve by the rank-sum formulation, ties averaged.
/// `None` when only one class is present.
pub fn auroc(scores: &[f64], truth: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), truth.len(), "scores and truth differ in length");
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(truth).filter(|(_, &t)| t).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AurocRow {
    /// (anchor, positive) pairs ranked by pos_prob.
    pub p: Option<f64>,
    /// (anchor, negative) pairs ranked by neg_prob.
    pub n: Option<f64>,
    /// Whole triplets ranked by pos_prob * neg_prob.
    pub f: Option<f64>,
    pub triplets: usize,
    pub sources: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletAuroc {
    pub per_indicator: BTreeMap<Indicator, AurocRow>,
    pub overall: AurocRow,
}

fn row(triplets: &[&Triplet], labels: &BTreeMap<SourceId, SourceLabel>) -> AurocRow {
    let class = |s: &SourceId| labels[s].reliability_class;
    let mut sources = BTreeSet::new();
    let (mut ps, mut pt, mut ns, mut nt, mut fs, mut ft) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for t in triplets {
        sources.extend([&t.anchor, &t.positive, &t.negative]);
        let pos_ok = class(&t.anchor) == class(&t.positive);
        let neg_ok = class(&t.anchor) != class(&t.negative);
        ps.push(t.pos_prob);
        pt.push(pos_ok);
        ns.push(t.neg_prob);
        nt.push(neg_ok);
        fs.push(t.pos_prob * t.neg_prob);
        ft.push(pos_ok && neg_ok);
    }
    AurocRow { p: auroc(&ps, &pt), n: auroc(&ns, &nt), f: auroc(&fs, &ft), triplets: triplets.len(), sources: sources.len() }
}

/// Triplets touching an unlabeled source are left out. Grouped by the
/// positive indicator.
pub fn triplet_auroc(triplets: &[Triplet], labels: &BTreeMap<SourceId, SourceLabel>) -> Result<TripletAuroc, EvalError> {
    let labeled: Vec<&Triplet> = triplets
        .iter()
        .filter(|t| [&t.anchor, &t.positive, &t.negative].iter().all(|s| labels.contains_key(*s)))
        .collect();
    if labeled.is_empty() {
        return Err(EvalError::NoLabeledTriplets);
    }
    let per_indicator = Indicator::ALL
        .iter()
        .map(|&f| {
            let group: Vec<&Triplet> = labeled.iter().copied().filter(|t| t.pos_indicator == f).collect();
            (f, row(&group, labels))
        })
        .collect();
    Ok(TripletAuroc { per_indicator, overall: row(&labeled, labels) })
}
