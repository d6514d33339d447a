use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sourcevec::pipeline::{Pipeline, PipelineConfig, Stage};
use sourcevec::synth::{write_synthetic, SynthConfig};

/// Learn news-source embeddings from how sources agree with each other.
#[derive(Parser)]
#[command(name = "sourcevec", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one pipeline stage, or `all`.
    Run(RunArgs),
    /// Write a synthetic two-camp corpus with ground truth and a config.
    GenSynthetic(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// ingest, copy, shift, refs, sample, train, train-online, eval, cluster or all
    stage: Stage,
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides the configured seed for every stage.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    work_dir: Option<PathBuf>,
    /// Score stances with the configured external command.
    #[arg(long)]
    use_model: bool,
    /// Rerun even when inputs and parameters are unchanged.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    out: PathBuf,
    #[arg(long)]
    n_sources: Option<usize>,
    #[arg(long)]
    articles_per_source: Option<usize>,
    #[arg(long)]
    unreliable_fraction: Option<f64>,
    #[arg(long)]
    camp_separation: Option<f64>,
    #[arg(long)]
    copy_rate: Option<f64>,
    #[arg(long)]
    shift_strength: Option<f64>,
    #[arg(long)]
    jargon_rate: Option<f64>,
    #[arg(long)]
    stance_gap: Option<f64>,
    #[arg(long)]
    citation_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.work_dir {
        cfg.work_dir = w;
    }
    if let Some(t) = args.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("setting up the thread pool")?;
    }
    let mut pipeline = Pipeline::new(cfg)?;
    pipeline.force = args.force;
    pipeline.use_model = args.use_model;
    for outcome in pipeline.run(args.stage)? {
        let mark = if outcome.skipped { "skipped" } else { "done" };
        println!("{:<13} {mark:<8} {}", outcome.stage.to_string(), outcome.summary);
    }
    Ok(())
}

fn gen_synthetic(a: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::default();
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { cfg.$f = v; } )* };
    }
    set!(n_sources, articles_per_source, unreliable_fraction, camp_separation, copy_rate, shift_strength, jargon_rate, stance_gap, citation_rate, seed);
    let s = write_synthetic(&a.out, &cfg)?;
    println!(
        "{} articles from {} sources written to {}; run with --config {}",
        s.corpus.len(),
        s.corpus.n_sources(),
        a.out.display(),
        a.out.join("config.toml").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let started = Instant::now();
    let result = match Cli::parse().command {
        Cmd::Run(a) => run(a),
        Cmd::GenSynthetic(a) => gen_synthetic(a),
    };
    match result {
        Ok(()) => {
            log::info!("finished in {:.1}s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
