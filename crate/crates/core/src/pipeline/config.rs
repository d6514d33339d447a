use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::copy::CopyConfig;
use crate::corpus::CorpusFormat;
use crate::embedder::TrainConfig;
use crate::refs::JargonMode;
use crate::sampler::SamplingConfig;
use crate::shift::{AlignConfig, Word2VecConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub corpus_format: CorpusFormat,
    pub labels: Option<PathBuf>,
    pub paper_urls: Option<PathBuf>,
    pub science_domains: Option<PathBuf>,
    pub jargon_terms: Option<PathBuf>,
    pub topic_keywords: Option<PathBuf>,
    pub stop_words: Option<PathBuf>,
    pub negative_terms: Option<PathBuf>,
    /// Precomputed stance scores (article_id, reference_key, score).
    pub stance_scores: Option<PathBuf>,
    /// Articles of sources to place into a trained space (`train-online`).
    pub newcomer_corpus: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: PathBuf::from("corpus.jsonl"),
            corpus_format: CorpusFormat::Jsonl,
            labels: None,
            paper_urls: None,
            science_domains: None,
            jargon_terms: None,
            topic_keywords: None,
            stop_words: None,
            negative_terms: None,
            stance_scores: None,
            newcomer_corpus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub filter_topic: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { filter_topic: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftStageConfig {
    pub word2vec: Word2VecConfig,
    pub align: AlignConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefsStageConfig {
    pub jargon_mode: JargonMode,
    /// External scorer run by `--use-model` when no stance scores exist.
    /// `{contexts}` and `{scores}` are replaced by the two file paths.
    pub stance_command: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub folds: usize,
    /// Extra k values reported by `eval`; values too large for the folds are skipped.
    pub k_sweep: Vec<usize>,
    pub eps: f64,
    pub min_pts: usize,
    pub online: bool,
    pub online_fractions: Vec<f64>,
    /// Words reported per cluster pair by `cluster`; 0 disables the analysis.
    pub shift_terms_top_n: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 5,
            folds: 10,
            k_sweep: vec![1, 3, 5, 7, 9, 15, 21, 29, 37, 45],
            eps: 0.1,
            min_pts: 1,
            online: false,
            online_fractions: (1..=10).map(|k| k as f64 / 10.0).collect(),
            shift_terms_top_n: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Drives every stage; per-module seeds are overwritten with it.
    pub seed: u64,
    pub work_dir: PathBuf,
    pub threads: Option<usize>,
    pub paths: Paths,
    pub ingest: IngestConfig,
    pub copy: CopyConfig,
    pub shift: ShiftStageConfig,
    pub refs: RefsStageConfig,
    pub sampling: SamplingConfig,
    pub embedding: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            work_dir: PathBuf::from("work"),
            threads: None,
            paths: Paths::default(),
            ingest: IngestConfig::default(),
            copy: CopyConfig::default(),
            shift: ShiftStageConfig::default(),
            refs: RefsStageConfig::default(),
            sampling: SamplingConfig::default(),
            embedding: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parses a TOML file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = parent.canonicalize().map_err(|e| PipelineError::io(parent, e))?;
        cfg.rebase_paths(&base);
        Ok(cfg)
    }

    pub fn rebase_paths(&mut self, base: &Path) {
        rebase(base, &mut self.work_dir);
        let p = &mut self.paths;
        rebase(base, &mut p.corpus);
        for opt in [
            &mut p.labels,
            &mut p.paper_urls,
            &mut p.science_domains,
            &mut p.jargon_terms,
            &mut p.topic_keywords,
            &mut p.stop_words,
            &mut p.negative_terms,
            &mut p.stance_scores,
            &mut p.newcomer_corpus,
        ] {
            if let Some(x) = opt.as_mut() {
                rebase(base, x);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Copies the global seed into every module configuration.
    pub fn propagate_seed(&mut self) {
        self.shift.word2vec.seed = self.seed;
        self.sampling.seed = self.seed;
        self.embedding.seed = self.seed;
    }

    /// Parameter checks that need no file access.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.copy.threshold > 0.0 && self.copy.threshold <= 1.0) {
            return bad(format!("copy.threshold {} outside (0, 1]", self.copy.threshold));
        }
        let w = &self.shift.word2vec;
        if w.dim == 0 || w.window == 0 || w.epochs == 0 || w.negative == 0 {
            return bad("shift.word2vec dim, window, negative and epochs must be positive".into());
        }
        let a = &self.shift.align;
        if !(a.anchor_fraction > 0.0 && a.anchor_fraction <= 1.0) || !(a.top_fraction > 0.0 && a.top_fraction <= 1.0) {
            return bad("shift.align fractions must lie in (0, 1]".into());
        }
        self.sampling.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.embedding.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let e = &self.eval;
        if e.k == 0 || e.folds < 2 {
            return bad("eval.k must be >= 1 and eval.folds >= 2".into());
        }
        if !(e.eps >= 0.0) {
            return bad(format!("eval.eps {} must be non-negative", e.eps));
        }
        if e.online_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad("eval.online_fractions must lie in (0, 1]".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }
}
