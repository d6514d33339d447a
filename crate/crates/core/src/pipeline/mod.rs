//! Stage runner: each stage reads artifacts from the work directory, writes
//! its own, and records a manifest so unchanged stages are skipped.

pub mod config;
mod manifest;
pub mod online;

pub use config::{EvalConfig, IngestConfig, Paths, PipelineConfig, RefsStageConfig, ShiftStageConfig};
pub use manifest::{hash_path, Manifest};
pub use online::{mask_articles, online_curve, place_newcomers, IndicatorCache, OnlinePoint, OnlineReport, THREE_MONTHS_FRACTION};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

use serde_json::json;
use thiserror::Error;

use crate::copy::{copy_distances, detect_copies, vectorize_articles, write_copied_pairs, write_edges, CopyError};
use crate::corpus::{filter_topic, load_corpus, load_labels, Corpus, CorpusError, CorpusFormat, Lexicons, ReferenceIndex, SourceLabel};
use crate::embedder::{read_source_embeddings, train, write_source_embeddings, write_training_log, EmbedError, Embeddings};
use crate::eval::{self, report, EvalError};
use crate::indicator::{read_distances, write_distances, Indicator, IndicatorDistance};
use crate::refs::{
    extract_contexts, jargon_distance, read_stance_scores, score_contexts_lexicon, stance_distance, write_contexts, write_stance_scores,
    CitationContext, RefsError, StanceScores,
};
use crate::sampler::{read_triplets, sample_triplets, write_triplets, SamplerError, Triplet};
use crate::shift::{normalize_shift, read_embeddings, shift_matrix, write_embeddings, ShiftDistance, ShiftError, WordEmbeddingSet};
use crate::source::SourceId;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing {artifact}; run the `{stage}` stage first")]
    MissingArtifact { artifact: PathBuf, stage: Stage },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("stance command failed: {0}")]
    StanceCommand(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Copy(#[from] CopyError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Refs(#[from] RefsError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl PipelineError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Copy,
    Shift,
    Refs,
    Sample,
    Train,
    TrainOnline,
    Eval,
    Cluster,
    All,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Copy,
        Stage::Shift,
        Stage::Refs,
        Stage::Sample,
        Stage::Train,
        Stage::TrainOnline,
        Stage::Eval,
        Stage::Cluster,
        Stage::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Copy => "copy",
            Stage::Shift => "shift",
            Stage::Refs => "refs",
            Stage::Sample => "sample",
            Stage::Train => "train",
            Stage::TrainOnline => "train-online",
            Stage::Eval => "eval",
            Stage::Cluster => "cluster",
            Stage::All => "all",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s || (s == "train_online" && *st == Stage::TrainOnline))
            .ok_or_else(|| format!("unknown stage {s:?}; expected one of {}", Stage::ALL.map(Stage::name).join(", ")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    /// Inputs, parameters and outputs matched the last run.
    pub skipped: bool,
    pub summary: String,
}

/// Artifact locations inside the work directory.
#[derive(Debug, Clone)]
pub struct WorkDir(PathBuf);

impl WorkDir {
    pub fn root(&self) -> &Path {
        &self.0
    }
    pub fn corpus(&self) -> PathBuf {
        self.0.join("corpus.jsonl")
    }
    pub fn sources(&self) -> PathBuf {
        self.0.join("sources.txt")
    }
    pub fn copy_edges(&self) -> PathBuf {
        self.0.join("copy_edges.tsv")
    }
    pub fn copied_pairs(&self) -> PathBuf {
        self.0.join("copied_pairs.tsv")
    }
    pub fn word_vectors(&self) -> PathBuf {
        self.0.join("word_vectors")
    }
    pub fn shift_raw(&self) -> PathBuf {
        self.0.join("shift_raw.tsv")
    }
    pub fn contexts(&self) -> PathBuf {
        self.0.join("contexts.jsonl")
    }
    pub fn stance_scores(&self) -> PathBuf {
        self.0.join("stance_scores.tsv")
    }
    pub fn distances(&self, f: Indicator) -> PathBuf {
        self.0.join(format!("{f}_distances.tsv"))
    }
    pub fn triplets(&self) -> PathBuf {
        self.0.join("triplets.tsv")
    }
    pub fn sample_stats(&self) -> PathBuf {
        self.0.join("sample_stats.json")
    }
    pub fn embeddings(&self) -> PathBuf {
        self.0.join("embeddings.txt")
    }
    pub fn training_log(&self) -> PathBuf {
        self.0.join("training_log.tsv")
    }
    pub fn online(&self) -> PathBuf {
        self.0.join("online")
    }
    pub fn reports(&self) -> PathBuf {
        self.0.join("reports")
    }
    fn manifest(&self, stage: Stage) -> PathBuf {
        self.0.join("manifests").join(format!("{stage}.json"))
    }
}

/// An input of a stage: an upstream artifact, or a user file.
enum Input {
    Artifact(PathBuf, Stage),
    User(PathBuf),
}

impl Input {
    fn path(&self) -> &Path {
        match self {
            Input::Artifact(p, _) | Input::User(p) => p,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |e| PipelineError::io(path, e)
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(io_err(path))
}

fn read_sources(path: &Path) -> Result<Vec<SourceId>, PipelineError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(io_err(path))?;
        if let Some(s) = line.split('\t').next().and_then(SourceId::normalize) {
            out.push(s);
        }
    }
    Ok(out)
}

pub fn write_shift_raw(path: &Path, raw: &[ShiftDistance]) -> Result<(), PipelineError> {
    let mut text = String::from("i\tj\traw_distance\tevaluated_words\n");
    for r in raw {
        text.push_str(&format!("{}\t{}\t{}\t{}\n", r.i, r.j, r.d, r.evaluated_words));
    }
    write_file(path, &text)
}

pub fn read_shift_raw(path: &Path) -> Result<Vec<ShiftDistance>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |n: usize| PipelineError::io(path, io::Error::new(io::ErrorKind::InvalidData, format!("line {}: malformed", n + 1)));
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let c: Vec<&str> = l.split('\t').collect();
            let [i, j, d, w] = c[..] else { return Err(bad(n)) };
            Ok(ShiftDistance {
                i: SourceId::normalize(i).ok_or_else(|| bad(n))?,
                j: SourceId::normalize(j).ok_or_else(|| bad(n))?,
                d: d.parse().map_err(|_| bad(n))?,
                evaluated_words: w.parse().map_err(|_| bad(n))?,
            })
        })
        .collect()
}

fn vector_file(dir: &Path, s: &SourceId) -> PathBuf {
    dir.join(format!("{s}.vec"))
}

/// Word embeddings written by the `shift` stage.
pub fn read_word_vectors(dir: &Path) -> Result<BTreeMap<SourceId, WordEmbeddingSet>, PipelineError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("vec") {
            continue;
        }
        let Some(source) = path.file_stem().and_then(|s| s.to_str()).and_then(SourceId::normalize) else { continue };
        out.insert(source.clone(), read_embeddings(&path, source)?);
    }
    Ok(out)
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configuration serializes")
}

/// Runs stages against one configuration.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    /// Rerun stages even when their manifest matches.
    pub force: bool,
    /// Allow `refs.stance_command` when no stance scores are supplied.
    pub use_model: bool,
}

impl Pipeline {
    pub fn new(mut cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.propagate_seed();
        cfg.validate()?;
        Ok(Pipeline { cfg, force: false, use_model: false })
    }

    pub fn work(&self) -> WorkDir {
        WorkDir(self.cfg.work_dir.clone())
    }

    pub fn lexicons(&self) -> Result<Lexicons, PipelineError> {
        let p = &self.cfg.paths;
        Ok(Lexicons::load(p.jargon_terms.as_deref(), p.topic_keywords.as_deref(), p.stop_words.as_deref(), p.negative_terms.as_deref())?)
    }

    pub fn labels(&self) -> Result<Option<BTreeMap<SourceId, SourceLabel>>, PipelineError> {
        self.cfg.paths.labels.as_deref().map(load_labels).transpose().map_err(Into::into)
    }

    fn require_labels(&self, stage: Stage) -> Result<BTreeMap<SourceId, SourceLabel>, PipelineError> {
        self.labels()?.ok_or_else(|| PipelineError::Config(format!("stage {stage} needs paths.labels")))
    }

    fn reference_index(&self) -> Result<ReferenceIndex, PipelineError> {
        let read = |p: &Option<PathBuf>| -> Result<String, PipelineError> {
            match p {
                Some(p) => fs::read_to_string(p).map_err(io_err(p)),
                None => Ok(String::new()),
            }
        };
        let (papers, domains) = (read(&self.cfg.paths.paper_urls)?, read(&self.cfg.paths.science_domains)?);
        if papers.trim().is_empty() && domains.trim().is_empty() {
            log::warn!("refs: no paper URLs or scientific domains configured; no citation will match");
        }
        Ok(ReferenceIndex::from_entries(papers.lines(), domains.lines()))
    }

    fn lexicon_inputs(&self) -> Vec<Input> {
        let p = &self.cfg.paths;
        [&p.jargon_terms, &p.topic_keywords, &p.stop_words, &p.negative_terms].into_iter().flatten().cloned().map(Input::User).collect()
    }

    /// The corpus written by `ingest`.
    pub fn load_work_corpus(&self) -> Result<Corpus, PipelineError> {
        Ok(load_corpus(&self.work().corpus(), CorpusFormat::Jsonl)?)
    }

    /// Runs `stage`, or every stage in order for [`Stage::All`].
    pub fn run(&self, stage: Stage) -> Result<Vec<StageOutcome>, PipelineError> {
        fs::create_dir_all(self.work().root().join("manifests")).map_err(io_err(self.work().root()))?;
        let stages: Vec<Stage> = match stage {
            Stage::All => {
                let mut v = vec![Stage::Ingest, Stage::Copy, Stage::Shift, Stage::Refs, Stage::Sample, Stage::Train];
                if self.cfg.paths.newcomer_corpus.is_some() {
                    v.push(Stage::TrainOnline);
                }
                if self.cfg.paths.labels.is_some() {
                    v.push(Stage::Eval);
                }
                v.push(Stage::Cluster);
                v
            }
            s => vec![s],
        };
        stages.into_iter().map(|s| self.run_one(s)).collect()
    }

    fn run_one(&self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        let (inputs, params) = self.spec(stage);
        for input in &inputs {
            match input {
                Input::Artifact(p, producer) if !p.exists() => {
                    return Err(PipelineError::MissingArtifact { artifact: p.clone(), stage: *producer })
                }
                Input::User(p) if !p.exists() => {
                    return Err(PipelineError::io(p, io::Error::new(io::ErrorKind::NotFound, "input file not found")))
                }
                _ => {}
            }
        }
        let paths: Vec<PathBuf> = inputs.iter().map(|i| i.path().to_path_buf()).collect();
        let hashes = manifest::hash_all(&paths).map_err(io_err(self.work().root()))?;
        let mpath = self.work().manifest(stage);
        if !self.force {
            if let Some(m) = Manifest::read(&mpath) {
                if m.params == params && m.inputs == hashes && m.outputs_intact() {
                    log::info!("{stage}: up to date");
                    return Ok(StageOutcome { stage, skipped: true, summary: "up to date".into() });
                }
            }
        }
        log::info!("{stage}: running");
        let (summary, outputs) = match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Copy => self.copy()?,
            Stage::Shift => self.shift()?,
            Stage::Refs => self.refs()?,
            Stage::Sample => self.sample()?,
            Stage::Train => self.train()?,
            Stage::TrainOnline => self.train_online()?,
            Stage::Eval => self.eval()?,
            Stage::Cluster => self.cluster()?,
            Stage::All => unreachable!("expanded by run"),
        };
        let m = Manifest {
            stage: stage.to_string(),
            params,
            inputs: hashes,
            outputs: manifest::hash_all(&outputs).map_err(io_err(self.work().root()))?,
        };
        m.write(&mpath).map_err(io_err(&mpath))?;
        log::info!("{stage}: {summary}");
        Ok(StageOutcome { stage, skipped: false, summary })
    }

    fn spec(&self, stage: Stage) -> (Vec<Input>, serde_json::Value) {
        let w = self.work();
        let c = &self.cfg;
        let art = |p: PathBuf, s: Stage| Input::Artifact(p, s);
        let corpus = || art(w.corpus(), Stage::Ingest);
        let labels = || c.paths.labels.iter().cloned().map(Input::User).collect::<Vec<_>>();
        match stage {
            Stage::Ingest => {
                let mut i = vec![Input::User(c.paths.corpus.clone())];
                i.extend(c.paths.topic_keywords.iter().cloned().map(Input::User));
                (i, json!({ "ingest": to_json(&c.ingest), "format": to_json(&c.paths.corpus_format) }))
            }
            Stage::Copy => (vec![corpus()], json!({ "copy": to_json(&c.copy) })),
            Stage::Shift => {
                let mut i = vec![corpus()];
                i.extend(c.paths.stop_words.iter().cloned().map(Input::User));
                (i, json!({ "shift": to_json(&c.shift) }))
            }
            Stage::Refs => {
                let mut i = vec![corpus()];
                let p = &c.paths;
                for f in [&p.paper_urls, &p.science_domains, &p.jargon_terms, &p.negative_terms, &p.stance_scores].into_iter().flatten() {
                    i.push(Input::User(f.clone()));
                }
                (i, json!({ "refs": to_json(&c.refs), "use_model": self.use_model }))
            }
            Stage::Sample => {
                let mut i = vec![art(w.sources(), Stage::Ingest), art(w.distances(Indicator::Copy), Stage::Copy), art(w.distances(Indicator::Shift), Stage::Shift)];
                i.push(art(w.distances(Indicator::Jargon), Stage::Refs));
                i.push(art(w.distances(Indicator::Stance), Stage::Refs));
                (i, json!({ "sampling": to_json(&c.sampling) }))
            }
            Stage::Train => (
                vec![art(w.sources(), Stage::Ingest), art(w.triplets(), Stage::Sample)],
                json!({ "embedding": to_json(&c.embedding) }),
            ),
            Stage::TrainOnline => {
                let mut i = vec![
                    corpus(),
                    art(w.embeddings(), Stage::Train),
                    art(w.word_vectors(), Stage::Shift),
                    art(w.shift_raw(), Stage::Shift),
                    art(w.stance_scores(), Stage::Refs),
                ];
                i.extend(c.paths.newcomer_corpus.iter().cloned().map(Input::User));
                i.extend(self.lexicon_inputs());
                (i, json!({ "all": to_json(c) }))
            }
            Stage::Eval => {
                let mut i = vec![art(w.triplets(), Stage::Sample), art(w.embeddings(), Stage::Train)];
                i.extend(labels());
                if c.eval.online {
                    i.extend([corpus(), art(w.word_vectors(), Stage::Shift), art(w.shift_raw(), Stage::Shift), art(w.stance_scores(), Stage::Refs)]);
                    i.extend(self.lexicon_inputs());
                    return (i, json!({ "all": to_json(c) }));
                }
                (i, json!({ "eval": to_json(&c.eval), "seed": c.seed }))
            }
            Stage::Cluster => {
                let mut i = vec![art(w.embeddings(), Stage::Train)];
                i.extend(labels());
                if c.eval.shift_terms_top_n > 0 {
                    i.push(corpus());
                    i.extend(c.paths.stop_words.iter().cloned().map(Input::User));
                }
                (i, json!({ "eval": to_json(&c.eval), "word2vec": to_json(&c.shift) }))
            }
            Stage::All => (Vec::new(), json!({})),
        }
    }

    fn ingest(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let raw = load_corpus(&self.cfg.paths.corpus, self.cfg.paths.corpus_format)?;
        let corpus = if self.cfg.ingest.filter_topic { filter_topic(&raw, &self.lexicons()?.topic_keywords) } else { raw.clone() };
        if corpus.is_empty() {
            return Err(PipelineError::Config(format!("no article of {} is left after the topic filter", self.cfg.paths.corpus.display())));
        }
        corpus.write_jsonl(&w.corpus())?;
        let listing: String = corpus.sources().map(|s| format!("{s}\t{}\n", corpus.source_size(s))).collect();
        write_file(&w.sources(), &listing)?;
        Ok((format!("{} of {} articles kept, {} sources", corpus.len(), raw.len(), corpus.n_sources()), vec![w.corpus(), w.sources()]))
    }

    fn copy(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let corpus = self.load_work_corpus()?;
        let edges = detect_copies(&vectorize_articles(&corpus), &corpus, &self.cfg.copy)?;
        write_edges(&w.copy_edges(), &edges).map_err(io_err(&w.copy_edges()))?;
        write_copied_pairs(&w.copied_pairs(), &edges).map_err(io_err(&w.copied_pairs()))?;
        let records: Vec<IndicatorDistance> = copy_distances(&edges, &corpus).into_iter().map(Into::into).collect();
        let out = w.distances(Indicator::Copy);
        write_distances(&out, &records).map_err(io_err(&out))?;
        let copies: usize = edges.iter().map(|e| e.weight).sum();
        Ok((format!("{copies} copied articles over {} source edges", edges.len()), vec![w.copy_edges(), w.copied_pairs(), out]))
    }

    fn shift(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let corpus = self.load_work_corpus()?;
        let sets = online::train_word_sets(&corpus, corpus.sources(), &self.cfg);
        let dir = w.word_vectors();
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (s, set) in &sets {
            write_embeddings(&vector_file(&dir, s), set)?;
        }
        let sets: Vec<WordEmbeddingSet> = sets.into_values().collect();
        let raw = shift_matrix(&sets, &self.cfg.shift.align, &self.lexicons()?.stop_words);
        write_shift_raw(&w.shift_raw(), &raw)?;
        let out = w.distances(Indicator::Shift);
        write_distances(&out, &normalize_shift(&raw)).map_err(io_err(&out))?;
        Ok((format!("{} word embedding sets, {} source pairs", sets.len(), raw.len()), vec![dir, w.shift_raw(), out]))
    }

    /// Stance scores from the configured file, the external model, or the lexicon.
    fn stance_scores(&self, contexts: &[CitationContext], lex: &Lexicons) -> Result<(StanceScores, &'static str), PipelineError> {
        if let Some(p) = &self.cfg.paths.stance_scores {
            return Ok((read_stance_scores(p)?, "file"));
        }
        match (&self.cfg.refs.stance_command, self.use_model) {
            (Some(cmd), true) => Ok((self.run_stance_command(cmd)?, "model")),
            (None, true) => Err(PipelineError::Config("--use-model needs refs.stance_command".into())),
            _ => Ok((score_contexts_lexicon(contexts, &lex.negative_terms), "lexicon")),
        }
    }

    fn run_stance_command(&self, template: &str) -> Result<StanceScores, PipelineError> {
        let w = self.work();
        let out = w.root().join("stance_scores.model.tsv");
        let cmd = template.replace("{contexts}", &w.contexts().display().to_string()).replace("{scores}", &out.display().to_string());
        log::info!("refs: running {cmd}");
        let status = Command::new("sh").arg("-c").arg(&cmd).status().map_err(|e| PipelineError::StanceCommand(format!("{cmd}: {e}")))?;
        if !status.success() {
            return Err(PipelineError::StanceCommand(format!("{cmd}: {status}")));
        }
        Ok(read_stance_scores(&out)?)
    }

    fn refs(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let corpus = self.load_work_corpus()?;
        let lex = self.lexicons()?;
        let contexts = extract_contexts(&corpus, &self.reference_index()?);
        write_contexts(&w.contexts(), &contexts)?;
        let (scores, origin) = self.stance_scores(&contexts, &lex)?;
        write_stance_scores(&w.stance_scores(), &contexts, &scores)?;
        let jargon: Vec<IndicatorDistance> = jargon_distance(&contexts, &lex.jargon_terms, self.cfg.refs.jargon_mode).into_iter().map(Into::into).collect();
        let stance: Vec<IndicatorDistance> = stance_distance(&contexts, &scores)?.into_iter().map(Into::into).collect();
        let (jp, sp) = (w.distances(Indicator::Jargon), w.distances(Indicator::Stance));
        write_distances(&jp, &jargon).map_err(io_err(&jp))?;
        write_distances(&sp, &stance).map_err(io_err(&sp))?;
        let refs: BTreeSet<&str> = contexts.iter().map(|c| c.reference_key.as_str()).collect();
        Ok((
            format!("{} citation contexts of {} references, stance from {origin}", contexts.len(), refs.len()),
            vec![w.contexts(), w.stance_scores(), jp, sp],
        ))
    }

    fn sample(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let sources = read_sources(&w.sources())?;
        let mut records = Vec::new();
        for f in Indicator::ALL {
            let p = w.distances(f);
            records.extend(read_distances(&p).map_err(io_err(&p))?);
        }
        let outcome = sample_triplets(&records, &sources, &self.cfg.sampling)?;
        write_triplets(&w.triplets(), &outcome.triplets).map_err(io_err(&w.triplets()))?;
        let mut outputs = vec![w.triplets(), w.sample_stats()];
        let mut counts = BTreeMap::new();
        for f in Indicator::ALL {
            let subset: Vec<Triplet> = outcome.triplets.iter().filter(|t| t.pos_indicator == f).cloned().collect();
            let p = w.root().join(format!("triplets_{f}.tsv"));
            write_triplets(&p, &subset).map_err(io_err(&p))?;
            counts.insert(f.name(), subset.len());
            outputs.push(p);
        }
        let stats = json!({ "triplets": outcome.triplets.len(), "dropped": outcome.dropped, "per_indicator": counts });
        write_file(&w.sample_stats(), &(serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n"))?;
        Ok((format!("{} triplets, {} dropped", outcome.triplets.len(), outcome.dropped), outputs))
    }

    fn train(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let sources = read_sources(&w.sources())?;
        let triplets = read_triplets(&w.triplets()).map_err(io_err(&w.triplets()))?;
        let (emb, report) = train(&triplets, &sources, &self.cfg.embedding)?;
        write_source_embeddings(&w.embeddings(), &emb)?;
        write_training_log(&w.training_log(), &report).map_err(io_err(&w.training_log()))?;
        let sidecar = PathBuf::from(format!("{}.manifest.json", w.embeddings().display()));
        Ok((
            format!(
                "{} sources, {} epochs, final loss {:.6}, converged: {}",
                emb.len(),
                report.epochs.len(),
                report.final_loss().unwrap_or(f64::NAN),
                report.converged
            ),
            vec![w.embeddings(), sidecar, w.training_log()],
        ))
    }

    /// Indicator cache over `corpus`, reusing trained word vectors and
    /// filling stance scores missing from the `refs` output with the lexicon.
    pub fn indicator_cache<'c>(&'c self, corpus: &'c Corpus, lex: &'c Lexicons) -> Result<IndicatorCache<'c>, PipelineError> {
        let w = self.work();
        let word_sets = read_word_vectors(&w.word_vectors())?;
        let scores = read_stance_scores(&w.stance_scores())?;
        IndicatorCache::build(corpus, &self.reference_index()?, Some(scores), word_sets, &self.cfg, lex)
    }

    fn train_online(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let path = self.cfg.paths.newcomer_corpus.as_deref().ok_or_else(|| PipelineError::Config("train-online needs paths.newcomer_corpus".into()))?;
        let lex = self.lexicons()?;
        let offline_corpus = self.load_work_corpus()?;
        let mut newcomer = load_corpus(path, self.cfg.paths.corpus_format)?;
        if self.cfg.ingest.filter_topic {
            newcomer = filter_topic(&newcomer, &lex.topic_keywords);
        }
        let frozen = read_source_embeddings(&w.embeddings())?;
        let newcomers: Vec<SourceId> = newcomer.sources().cloned().collect();
        let overlap: Vec<SourceId> = newcomers.iter().filter(|s| frozen.contains_key(*s)).cloned().collect();
        if !overlap.is_empty() {
            return Err(EmbedError::Overlap(overlap).into());
        }
        let merged = Corpus::from_articles(offline_corpus.articles().iter().chain(newcomer.articles()).cloned().collect())?;
        let cache = self.indicator_cache(&merged, &lex)?;
        let offline: BTreeSet<SourceId> = frozen.keys().cloned().collect();
        let kept: BTreeMap<SourceId, Vec<usize>> = newcomers.iter().map(|s| (s.clone(), merged.article_indices(s).to_vec())).collect();
        let records = cache.newcomer_records(&offline, &read_shift_raw(&w.shift_raw())?, &kept)?;
        let (emb, triplets, report) = place_newcomers(&records, &frozen, &newcomers, &self.cfg)?;
        let dir = w.online();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let (ep, tp, lp, dp) = (dir.join("embeddings.txt"), dir.join("triplets.tsv"), dir.join("training_log.tsv"), dir.join("newcomer_distances.tsv"));
        write_source_embeddings(&ep, &emb)?;
        write_triplets(&tp, &triplets).map_err(io_err(&tp))?;
        write_training_log(&lp, &report).map_err(io_err(&lp))?;
        write_distances(&dp, &records).map_err(io_err(&dp))?;
        Ok((format!("{} newcomers placed with {} triplets", newcomers.len(), triplets.len()), vec![dir]))
    }

    fn eval(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let dir = w.reports();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let labels = self.require_labels(Stage::Eval)?;
        let triplets = read_triplets(&w.triplets()).map_err(io_err(&w.triplets()))?;
        let emb = read_source_embeddings(&w.embeddings())?;
        let mut outputs = Vec::new();
        let mut summary = Vec::new();

        let cov = eval::coverage(&triplets)?;
        report::write_coverage(&dir, &cov).map_err(io_err(&dir))?;
        outputs.extend(["sc.csv", "tc.csv", "sc.svg", "tc.svg"].map(|f| dir.join(f)));

        match eval::triplet_auroc(&triplets, &labels) {
            Ok(a) => {
                let p = dir.join("auroc.csv");
                write_file(&p, &report::auroc_csv(&a))?;
                outputs.push(p);
                if let Some(f) = a.overall.f {
                    summary.push(format!("triplet AUROC {f:.3}"));
                }
            }
            Err(EvalError::NoLabeledTriplets) => log::warn!("eval: no fully labeled triplet; AUROC skipped"),
            Err(e) => return Err(e.into()),
        }

        let e = &self.cfg.eval;
        let main = eval::knn_cv(&emb, &labels, e.k, e.folds, self.cfg.seed)?;
        summary.push(format!("kNN F1 {:.3} (k = {})", main.mean_f1, e.k));
        let mut ks: Vec<usize> = e.k_sweep.iter().copied().chain([e.k]).collect::<BTreeSet<_>>().into_iter().collect();
        ks.retain(|&k| eval::knn_cv(&emb, &labels, k, e.folds, self.cfg.seed).is_ok());
        let sweep = eval::knn_sweep(&emb, &labels, &ks, e.folds, self.cfg.seed)?;
        let (kp, ksvg) = (dir.join("knn.csv"), dir.join("knn.svg"));
        write_file(&kp, &report::knn_csv(&sweep))?;
        let pts: Vec<(f64, Option<f64>)> = sweep.iter().map(|r| (r.k as f64, Some(r.mean_f1))).collect();
        write_file(&ksvg, &report::line_svg("kNN F1 by k", &pts))?;
        outputs.extend([kp, ksvg]);

        if e.online {
            let lex = self.lexicons()?;
            let corpus = self.load_work_corpus()?;
            let cache = self.indicator_cache(&corpus, &lex)?;
            let mut fractions = e.online_fractions.clone();
            if !fractions.iter().any(|f| (f - THREE_MONTHS_FRACTION).abs() < 1e-12) {
                fractions.push(THREE_MONTHS_FRACTION);
            }
            let curve = online_curve(&cache, &labels, &fractions, &self.cfg)?;
            let configured: Vec<&OnlinePoint> = curve.points.iter().filter(|p| e.online_fractions.contains(&p.fraction)).collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = configured.iter().filter_map(|p| p.f1.map(|f| (p.fraction, f))).unzip();
            let rho = eval::spearman(&xs, &ys);
            let pts: Vec<(f64, Option<f64>)> = configured.iter().map(|p| (p.fraction, p.f1)).collect();
            let (cp, csvg, sp) = (dir.join("online_curve.csv"), dir.join("online_curve.svg"), dir.join("online_summary.json"));
            write_file(&cp, &report::curve_csv(&pts))?;
            write_file(&csvg, &report::line_svg("online F1 by article fraction", &pts))?;
            let three = curve.points.iter().find(|p| (p.fraction - THREE_MONTHS_FRACTION).abs() < 1e-12).and_then(|p| p.f1);
            let s = json!({
                "spearman": rho,
                "three_months_f1": three,
                "points": curve.points.iter().map(|p| json!({ "fraction": p.fraction, "f1": p.f1, "newcomers": p.newcomers, "excluded": p.excluded })).collect::<Vec<_>>(),
            });
            write_file(&sp, &(serde_json::to_string_pretty(&s).expect("summary serializes") + "\n"))?;
            outputs.extend([cp, csvg, sp]);
            summary.push(format!("online Spearman {}", rho.map_or("NA".into(), |r| format!("{r:.3}"))));
        }
        Ok((summary.join(", "), outputs))
    }

    fn cluster(&self) -> Result<(String, Vec<PathBuf>), PipelineError> {
        let w = self.work();
        let dir = w.reports();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let labels = self.labels()?.unwrap_or_default();
        let emb: Embeddings = read_source_embeddings(&w.embeddings())?;
        let e = &self.cfg.eval;
        let r = eval::cluster(&emb, e.eps, e.min_pts, &labels)?;
        report::write_clusters(&dir, &r).map_err(io_err(&dir))?;
        let mut outputs: Vec<PathBuf> = ["clusters.csv", "cluster_members.csv", "clusters.svg"].map(|f| dir.join(f)).to_vec();
        let densities: Vec<String> =
            r.clusters.iter().map(|c| c.unreliability_density.map_or("NA".into(), |d| format!("{d:.2}"))).collect();
        let mut summary = format!("{} clusters at eps {}, unreliability [{}]", r.clusters.len(), e.eps, densities.join(", "));
        if e.shift_terms_top_n > 0 && r.clusters.len() >= 2 {
            let lex = self.lexicons()?;
            let corpus = self.load_work_corpus()?;
            let top: Vec<&eval::ClusterSummary> = r.clusters.iter().take(3).collect();
            let main = top.iter().min_by(|a, b| a.unreliability_density.unwrap_or(0.0).total_cmp(&b.unreliability_density.unwrap_or(0.0))).expect("two clusters");
            let rest: Vec<&eval::ClusterSummary> = top.iter().filter(|c| c.id != main.id).copied().collect();
            let (a, b) = (rest[0], *rest.get(1).unwrap_or(&rest[0]));
            let terms = eval::cluster_shift_terms(
                &corpus,
                &main.members,
                &a.members,
                &b.members,
                e.shift_terms_top_n,
                &self.cfg.shift.word2vec,
                self.cfg.shift.align.anchor_fraction,
                &lex.stop_words,
            )?;
            let p = dir.join("shift_terms.csv");
            let mut text = format!("# mainstream cluster {}, A = {}, B = {}\nlist,rank,word,shift\n", main.id, a.id, b.id);
            for (name, list) in [("a", &terms.a), ("b", &terms.b)] {
                for (k, (word, d)) in list.iter().enumerate() {
                    text.push_str(&format!("{name},{},{word},{d:.6}\n", k + 1));
                }
            }
            for (k, word) in terms.common.iter().enumerate() {
                text.push_str(&format!("common,{},{word},\n", k + 1));
            }
            write_file(&p, &text)?;
            outputs.push(p);
            summary.push_str(&format!(", {} shared shifted terms", terms.common.len()));
        }
        Ok((summary, outputs))
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_roundtrip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("trian".parse::<Stage>().is_err());
    }
}
