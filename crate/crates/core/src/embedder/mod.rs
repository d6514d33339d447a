//! Source embeddings trained with a triplet margin loss.

mod loss;

pub use loss::{distance, distance_grad, triplet_loss, triplet_loss_grad, DistanceKind, TripletGrad};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::Triplet;
use crate::source::SourceId;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("loss became non-finite at epoch {epoch}; lower the learning rate (currently {learning_rate})")]
    Diverged { epoch: usize, learning_rate: f64 },
    #[error("triplet references unknown source {0}")]
    UnknownSource(SourceId),
    #[error("no triplets to train on")]
    NoTriplets,
    #[error("sources both frozen and newcomer: {0:?}")]
    Overlap(Vec<SourceId>),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub margin: f64,
    pub distance: DistanceKind,
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub convergence_window: usize,
    pub tolerance: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.0,
            distance: DistanceKind::Cosine,
            dim: 50,
            learning_rate: 0.05,
            batch_size: 256,
            max_epochs: 200,
            convergence_window: 5,
            tolerance: 1e-4,
            optimizer: Optimizer::Sgd,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.into()));
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if self.dim == 0 || self.batch_size == 0 || self.convergence_window == 0 {
            return bad("dim, batch_size and convergence_window must be positive");
        }
        if !(self.tolerance > 0.0) || !(self.learning_rate > 0.0) {
            return bad("tolerance and learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEmbedding {
    pub source: SourceId,
    pub vector: Vec<f64>,
    pub frozen: bool,
}

/// Embeddings keyed by source; iteration order is the canonical file order.
pub type Embeddings = BTreeMap<SourceId, SourceEmbedding>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Triplets with positive loss.
    pub active_triplets: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub converged: bool,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

struct Table {
    vectors: Vec<Vec<f64>>,
    trainable: Vec<bool>,
}

fn index_triplets(triplets: &[Triplet], index: &HashMap<&SourceId, usize>) -> Result<Vec<[usize; 3]>, EmbedError> {
    let look = |s: &SourceId| index.get(s).copied().ok_or_else(|| EmbedError::UnknownSource(s.clone()));
    triplets.iter().map(|t| Ok([look(&t.anchor)?, look(&t.positive)?, look(&t.negative)?])).collect()
}

/// Mini-batch descent on the mean triplet loss; only trainable rows move.
fn optimize(table: &mut Table, triplets: &[[usize; 3]], cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<TrainReport, EmbedError> {
    let (n, dim) = (table.vectors.len(), cfg.dim);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut grad = vec![vec![0.0; dim]; n];
    let mut touched = vec![false; n];
    let (mut m1, mut m2) = (vec![vec![0.0; dim]; n], vec![vec![0.0; dim]; n]);
    let mut step = 0i32;
    let mut report = TrainReport::default();

    for epoch in 1..=cfg.max_epochs {
        if cfg.distance == DistanceKind::Cosine {
            for (v, &t) in table.vectors.iter_mut().zip(&table.trainable) {
                if t && v.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-12 {
                    *v = gaussian(rng, dim);
                }
            }
        }
        order.shuffle(rng);
        let (mut total, mut active) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            for &k in batch {
                let [a, p, q] = triplets[k];
                let g = triplet_loss_grad(&table.vectors[a], &table.vectors[p], &table.vectors[q], cfg.margin, cfg.distance);
                total += g.loss;
                if g.loss > 0.0 {
                    active += 1;
                    for (idx, gv) in [(a, &g.anchor), (p, &g.positive), (q, &g.negative)] {
                        touched[idx] = true;
                        for (acc, x) in grad[idx].iter_mut().zip(gv) {
                            *acc += x;
                        }
                    }
                }
            }
            step += 1;
            let scale = 1.0 / batch.len() as f64;
            for idx in 0..n {
                if !touched[idx] {
                    continue;
                }
                touched[idx] = false;
                let g = &mut grad[idx];
                if table.trainable[idx] {
                    let v = &mut table.vectors[idx];
                    match cfg.optimizer {
                        Optimizer::Sgd => {
                            for (x, gi) in v.iter_mut().zip(g.iter()) {
                                *x -= cfg.learning_rate * gi * scale;
                            }
                        }
                        Optimizer::Adam => {
                            let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
                            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
                            for d in 0..dim {
                                let gi = g[d] * scale;
                                m1[idx][d] = b1 * m1[idx][d] + (1.0 - b1) * gi;
                                m2[idx][d] = b2 * m2[idx][d] + (1.0 - b2) * gi * gi;
                                v[d] -= cfg.learning_rate * (m1[idx][d] / c1) / ((m2[idx][d] / c2).sqrt() + eps);
                            }
                        }
                    }
                }
                g.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        let mean_loss = total / triplets.len() as f64;
        if !mean_loss.is_finite() || table.vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(EmbedError::Diverged { epoch, learning_rate: cfg.learning_rate });
        }
        report.epochs.push(EpochStats { epoch, mean_loss, active_triplets: active });
        let w = cfg.convergence_window;
        if report.epochs.len() > w {
            let recent = &report.epochs[report.epochs.len() - w - 1..];
            let (lo, hi) = recent.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.mean_loss), hi.max(e.mean_loss)));
            if hi - lo < cfg.tolerance {
                report.converged = true;
                break;
            }
        }
        if mean_loss == 0.0 {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}

/// Offline training: every source in `sources` gets a vector initialized from
/// N(0, 1) in lexicographic order. Sources without triplets keep their
/// initialization.
pub fn train(triplets: &[Triplet], sources: &[SourceId], cfg: &TrainConfig) -> Result<(Embeddings, TrainReport), EmbedError> {
    cfg.validate()?;
    if triplets.is_empty() {
        return Err(EmbedError::NoTriplets);
    }
    let names: Vec<SourceId> = sources.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index: HashMap<&SourceId, usize> = names.iter().enumerate().map(|(k, s)| (s, k)).collect();
    let idx = index_triplets(triplets, &index)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = Table { vectors: names.iter().map(|_| gaussian(&mut rng, cfg.dim)).collect(), trainable: vec![true; names.len()] };
    let report = optimize(&mut table, &idx, cfg, &mut rng)?;
    let out = names
        .into_iter()
        .zip(table.vectors)
        .map(|(source, vector)| (source.clone(), SourceEmbedding { source, vector, frozen: false }))
        .collect();
    Ok((out, report))
}

/// Online training: `frozen` vectors are never updated and come back
/// bit-identical; newcomers start from N(0, 1) and move into the frozen space.
/// Every returned vector is marked frozen except the newcomers.
pub fn train_online(
    triplets: &[Triplet],
    frozen: &Embeddings,
    newcomers: &[SourceId],
    cfg: &TrainConfig,
) -> Result<(Embeddings, TrainReport), EmbedError> {
    cfg.validate()?;
    let overlap: Vec<SourceId> = newcomers.iter().filter(|s| frozen.contains_key(*s)).cloned().collect();
    if !overlap.is_empty() {
        return Err(EmbedError::Overlap(overlap));
    }
    let mut out: Embeddings = frozen.iter().map(|(s, e)| (s.clone(), SourceEmbedding { frozen: true, ..e.clone() })).collect();
    let fresh: Vec<SourceId> = newcomers.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if fresh.is_empty() {
        return Ok((out, TrainReport::default()));
    }
    if let Some(e) = frozen.values().find(|e| e.vector.len() != cfg.dim) {
        return Err(EmbedError::InvalidConfig(format!("frozen vector of {} has dim {}, config says {}", e.source, e.vector.len(), cfg.dim)));
    }
    let names: Vec<SourceId> = frozen.keys().cloned().chain(fresh.iter().cloned()).collect();
    let index: HashMap<&SourceId, usize> = names.iter().enumerate().map(|(k, s)| (s, k)).collect();
    let idx = index_triplets(triplets, &index)?;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(cfg.seed, "online"));
    let mut table = Table {
        vectors: frozen.values().map(|e| e.vector.clone()).chain(fresh.iter().map(|_| gaussian(&mut rng, cfg.dim))).collect(),
        trainable: names.iter().map(|s| !frozen.contains_key(s)).collect(),
    };
    let report = if idx.is_empty() { TrainReport::default() } else { optimize(&mut table, &idx, cfg, &mut rng)? };
    for (source, vector) in names.into_iter().zip(table.vectors).skip(frozen.len()) {
        out.insert(source.clone(), SourceEmbedding { source, vector, frozen: false });
    }
    Ok((out, report))
}

fn manifest_path(path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.manifest.json", path.display()))
}

#[derive(Serialize, Deserialize)]
struct EmbeddingManifest {
    dim: usize,
    frozen: Vec<SourceId>,
}

/// `n_sources s` header, then `source f1 .. f_s`; frozen flags go to a
/// `<path>.manifest.json` sidecar. Values round-trip exactly.
pub fn write_source_embeddings(path: &Path, emb: &Embeddings) -> Result<(), EmbedError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| EmbedError::Io { path: p, source }
    };
    let dim = emb.values().next().map_or(0, |e| e.vector.len());
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut body = || -> io::Result<()> {
        writeln!(w, "{} {dim}", emb.len())?;
        for (s, e) in emb {
            write!(w, "{s}")?;
            for x in &e.vector {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    body().map_err(io_err(path))?;
    let manifest = EmbeddingManifest { dim, frozen: emb.values().filter(|e| e.frozen).map(|e| e.source.clone()).collect() };
    let mp = manifest_path(path);
    std::fs::write(&mp, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&mp))
}

pub fn read_source_embeddings(path: &Path) -> Result<Embeddings, EmbedError> {
    let bad = |message: String| EmbedError::Format { path: path.to_path_buf(), message };
    let file = File::open(path).map_err(|source| EmbedError::Io { path: path.to_path_buf(), source })?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?.map_err(|e| bad(e.to_string()))?;
    let dims: Vec<usize> = header.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let [n, dim] = dims[..] else {
        return Err(bad(format!("bad header {header:?}")));
    };
    let frozen: BTreeSet<SourceId> = match std::fs::read_to_string(manifest_path(path)) {
        Ok(text) => serde_json::from_str::<EmbeddingManifest>(&text).map_err(|e| bad(e.to_string()))?.frozen.into_iter().collect(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeSet::new(),
        Err(source) => return Err(EmbedError::Io { path: manifest_path(path), source }),
    };
    let mut out = Embeddings::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let mut parts = line.split(' ');
        let source = SourceId::normalize(parts.next().unwrap_or_default()).ok_or_else(|| bad(format!("line {}: no source", k + 2)))?;
        let vector = parts.map(str::parse::<f64>).collect::<Result<Vec<_>, _>>().map_err(|e| bad(format!("line {}: {e}", k + 2)))?;
        if vector.len() != dim {
            return Err(bad(format!("line {}: expected {dim} values", k + 2)));
        }
        out.insert(source.clone(), SourceEmbedding { frozen: frozen.contains(&source), source, vector });
    }
    if out.len() != n {
        return Err(bad(format!("header says {n} sources, found {}", out.len())));
    }
    Ok(out)
}

pub fn write_training_log(path: &Path, report: &TrainReport) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch\tmean_loss\tactive_triplets")?;
    for e in &report.epochs {
        writeln!(w, "{}\t{}\t{}", e.epoch, e.mean_loss, e.active_triplets)?;
    }
    w.flush()
}
