#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use sourcevec::corpus::{load_labels, SourceLabel};
use sourcevec::pipeline::{Pipeline, PipelineConfig, Stage};
use sourcevec::source::SourceId;
use sourcevec::synth::{write_synthetic, SynthConfig, SyntheticCorpus};

/// Writes a synthetic corpus into `dir` and returns it with its ready-made config.
pub fn synthetic(dir: &Path, cfg: &SynthConfig) -> (SyntheticCorpus, PipelineConfig) {
    let synth = write_synthetic(dir, cfg).expect("synthetic corpus");
    let pcfg = PipelineConfig::load(&dir.join("config.toml")).expect("generated config loads");
    (synth, pcfg)
}

/// Runs every stage from ingest through `last`.
pub fn run_through(cfg: PipelineConfig, last: Stage) -> Pipeline {
    let p = Pipeline::new(cfg).expect("valid config");
    for stage in [Stage::Ingest, Stage::Copy, Stage::Shift, Stage::Refs, Stage::Sample, Stage::Train, Stage::Eval, Stage::Cluster] {
        p.run(stage).expect("pipeline runs");
        if stage == last {
            break;
        }
    }
    p
}

pub fn labels(cfg: &PipelineConfig) -> BTreeMap<SourceId, SourceLabel> {
    load_labels(cfg.paths.labels.as_deref().expect("labels configured")).expect("labels load")
}
