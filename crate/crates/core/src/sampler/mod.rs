//! Triplet sampling from indicator distances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicator::{Indicator, IndicatorDistance};
use crate::source::SourceId;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("no candidate for anchor {0}")]
    NoCandidates(SourceId),
    #[error("no triplet could be sampled: no anchor has candidates")]
    NothingToSample,
    #[error("invalid sampling configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegMode {
    /// `1 - pp`, renormalized over the anchor's candidates.
    Inverse,
    /// Equal mass on every other source of the corpus.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegModes {
    pub copy: NegMode,
    pub shift: NegMode,
    pub jargon: NegMode,
    pub stance: NegMode,
}

impl Default for NegModes {
    fn default() -> Self {
        NegModes { copy: NegMode::Uniform, shift: NegMode::Inverse, jargon: NegMode::Uniform, stance: NegMode::Inverse }
    }
}

impl NegModes {
    pub fn get(&self, f: Indicator) -> NegMode {
        match f {
            Indicator::Copy => self.copy,
            Indicator::Shift => self.shift,
            Indicator::Jargon => self.jargon,
            Indicator::Stance => self.stance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Positives (and negatives) drawn per indicator per anchor.
    pub l: usize,
    pub epsilon: f64,
    pub neg_modes: NegModes,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { l: 10, epsilon: 1e-6, neg_modes: NegModes::default(), max_retries: 20, seed: 1 }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.l == 0 {
            return Err(SamplerError::InvalidConfig("l must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(SamplerError::InvalidConfig(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

/// A probability map over sources, in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub outcomes: Vec<SourceId>,
    pub probs: Vec<f64>,
}

impl Categorical {
    fn from_weights(weights: BTreeMap<SourceId, f64>) -> Self {
        let total: f64 = weights.values().sum();
        let (outcomes, probs) = weights.into_iter().map(|(s, w)| (s, w / total)).unzip();
        Categorical { outcomes, probs }
    }

    pub fn prob(&self, s: &str) -> f64 {
        self.outcomes.iter().position(|o| o.as_str() == s).map_or(0.0, |k| self.probs[k])
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// A reusable sampler; draws return indices into `outcomes`.
    pub fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.probs).expect("probabilities are positive and finite")
    }
}

/// `pp(i, j) ∝ 1 / max(d(i, j), ε)`. Several records for the same candidate
/// (one per co-cited reference) add up.
pub fn positive_distribution(anchor: &SourceId, candidates: &[(SourceId, f64)], epsilon: f64) -> Result<Categorical, SamplerError> {
    let mut weights: BTreeMap<SourceId, f64> = BTreeMap::new();
    for (j, d) in candidates {
        if j != anchor && d.is_finite() {
            *weights.entry(j.clone()).or_insert(0.0) += 1.0 / d.max(epsilon);
        }
    }
    if weights.is_empty() {
        return Err(SamplerError::NoCandidates(anchor.clone()));
    }
    Ok(Categorical::from_weights(weights))
}

fn uniform(anchor: &SourceId, sources: &[SourceId]) -> Result<Categorical, SamplerError> {
    let weights: BTreeMap<SourceId, f64> = sources.iter().filter(|s| *s != anchor).map(|s| (s.clone(), 1.0)).collect();
    if weights.is_empty() {
        return Err(SamplerError::NoCandidates(anchor.clone()));
    }
    Ok(Categorical::from_weights(weights))
}

/// Inverse mode: `(1 - pp)` renormalized, uniform when there is a single
/// candidate. Uniform mode: every source in `sources` except the anchor.
pub fn negative_distribution(anchor: &SourceId, pp: &Categorical, mode: NegMode, sources: &[SourceId]) -> Result<Categorical, SamplerError> {
    match mode {
        NegMode::Inverse if pp.len() > 1 => Ok(Categorical::from_weights(
            pp.outcomes.iter().cloned().zip(pp.probs.iter().map(|p| 1.0 - p)).collect(),
        )),
        _ => uniform(anchor, sources),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: SourceId,
    pub positive: SourceId,
    pub negative: SourceId,
    pub pos_indicator: Indicator,
    pub neg_indicator: Indicator,
    pub pos_prob: f64,
    pub neg_prob: f64,
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.anchor, self.positive, self.negative, self.pos_indicator, self.neg_indicator, self.pos_prob, self.neg_prob
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleOutcome {
    pub triplets: Vec<Triplet>,
    /// Triplets given up after exhausting negative redraws.
    pub dropped: usize,
}

/// Candidates per indicator per anchor: each record counts for both endpoints.
pub fn candidates_by_anchor(distances: &[IndicatorDistance]) -> BTreeMap<Indicator, BTreeMap<SourceId, Vec<(SourceId, f64)>>> {
    let mut out: BTreeMap<Indicator, BTreeMap<SourceId, Vec<(SourceId, f64)>>> = BTreeMap::new();
    for r in distances.iter().filter(|r| r.i != r.j) {
        let per = out.entry(r.indicator).or_default();
        per.entry(r.i.clone()).or_default().push((r.j.clone(), r.distance));
        per.entry(r.j.clone()).or_default().push((r.i.clone(), r.distance));
    }
    out
}

/// Draws `l` positives per indicator for every anchor with candidates, then a
/// negative for each. A negative may never be a source this anchor already
/// drew as a positive under any indicator; offending draws are redrawn up to
/// `max_retries` times, after which the triplet is dropped.
///
/// `sources` is the universe for uniform negatives. Each anchor has its own
/// random stream derived from the seed, so output does not depend on thread
/// count.
pub fn sample_triplets(distances: &[IndicatorDistance], sources: &[SourceId], config: &SamplingConfig) -> Result<SampleOutcome, SamplerError> {
    config.validate()?;
    let mut universe: Vec<SourceId> = sources.to_vec();
    universe.extend(distances.iter().flat_map(|r| [r.i.clone(), r.j.clone()]));
    universe.sort();
    universe.dedup();

    let candidates = candidates_by_anchor(distances);
    let anchors: BTreeSet<&SourceId> = candidates.values().flat_map(|m| m.keys()).collect();
    if anchors.is_empty() {
        return Err(SamplerError::NothingToSample);
    }
    let per_anchor: Vec<SampleOutcome> = anchors
        .into_par_iter()
        .map(|anchor| sample_anchor(anchor, &candidates, &universe, config))
        .collect();
    let mut out = SampleOutcome::default();
    for o in per_anchor {
        out.triplets.extend(o.triplets);
        out.dropped += o.dropped;
    }
    if out.dropped > 0 {
        log::debug!("sampler: dropped {} triplets after {} redraws", out.dropped, config.max_retries);
    }
    Ok(out)
}

fn sample_anchor(
    anchor: &SourceId,
    candidates: &BTreeMap<Indicator, BTreeMap<SourceId, Vec<(SourceId, f64)>>>,
    universe: &[SourceId],
    config: &SamplingConfig,
) -> SampleOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(config.seed, anchor.as_str()));
    let mut drawn: Vec<(Indicator, Categorical, Vec<usize>)> = Vec::new();
    let mut positives: BTreeSet<&SourceId> = BTreeSet::new();
    for f in Indicator::ALL {
        let Some(cands) = candidates.get(&f).and_then(|m| m.get(anchor)) else { continue };
        let Ok(pp) = positive_distribution(anchor, cands, config.epsilon) else { continue };
        let sampler = pp.sampler();
        let picks: Vec<usize> = (0..config.l).map(|_| sampler.sample(&mut rng)).collect();
        drawn.push((f, pp, picks));
    }
    for (_, pp, picks) in &drawn {
        positives.extend(picks.iter().map(|&k| &pp.outcomes[k]));
    }

    let mut out = SampleOutcome::default();
    for (f, pp, picks) in &drawn {
        let Ok(np) = negative_distribution(anchor, pp, config.neg_modes.get(*f), universe) else {
            out.dropped += picks.len();
            continue;
        };
        let sampler = np.sampler();
        for &p in picks {
            let negative = (0..=config.max_retries)
                .map(|_| sampler.sample(&mut rng))
                .find(|&n| !positives.contains(&np.outcomes[n]));
            match negative {
                Some(n) => out.triplets.push(Triplet {
                    anchor: anchor.clone(),
                    positive: pp.outcomes[p].clone(),
                    negative: np.outcomes[n].clone(),
                    pos_indicator: *f,
                    neg_indicator: *f,
                    pos_prob: pp.probs[p],
                    neg_prob: np.probs[n],
                }),
                None => out.dropped += 1,
            }
        }
    }
    out
}

const TRIPLET_HEADER: &str = "anchor\tpositive\tnegative\tpos_indicator\tneg_indicator\tpos_prob\tneg_prob";

pub fn write_triplets(path: &Path, triplets: &[Triplet]) -> io::Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{TRIPLET_HEADER}")?;
    for t in triplets {
        writeln!(w, "{t}")?;
    }
    w.flush()
}

pub fn read_triplets(path: &Path) -> io::Result<Vec<Triplet>> {
    let bad = |line: usize, msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {msg}", path.display()));
    let mut out = Vec::new();
    for (k, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if (k == 0 && line == TRIPLET_HEADER) || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [a, p, n, pi, ni, pp, np] = cols[..] else {
            return Err(bad(k + 1, format!("expected 7 columns, got {}", cols.len())));
        };
        let source = |s: &str| SourceId::normalize(s).ok_or_else(|| bad(k + 1, "empty source".into()));
        let indicator = |s: &str| s.parse::<Indicator>().map_err(|e| bad(k + 1, e));
        let prob = |s: &str| s.parse::<f64>().map_err(|e| bad(k + 1, e.to_string()));
        out.push(Triplet {
            anchor: source(a)?,
            positive: source(p)?,
            negative: source(n)?,
            pos_indicator: indicator(pi)?,
            neg_indicator: indicator(ni)?,
            pos_prob: prob(pp)?,
            neg_prob: prob(np)?,
        });
    }
    Ok(out)
}
