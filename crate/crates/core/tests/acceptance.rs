//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! output of `cargo test`. Set `SOURCEVEC_NELA_CONFIG` to a pipeline config
//! over the full news corpus to run the data-gated check.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sourcevec::copy::{copy_distances_with, detect_copies, vectorize_articles, CandidateRule, CopyConfig, CopyEdge};
use sourcevec::corpus::SourceLabel;
use sourcevec::embedder::{read_source_embeddings, triplet_loss, triplet_loss_grad, DistanceKind, Embeddings, SourceEmbedding};
use sourcevec::eval::{cluster, coverage, knn_cv, knn_sweep, triplet_auroc};
use sourcevec::indicator::Indicator;
use sourcevec::pipeline::online::{mask_articles, online_curve, place_newcomers, train_offline};
use sourcevec::pipeline::{Pipeline, PipelineConfig, Stage};
use sourcevec::sampler::{negative_distribution, positive_distribution, read_triplets, NegMode, Triplet};
use sourcevec::shift::{align, common_words, train_word_embeddings, word_shifts};
use sourcevec::source::SourceId;
use sourcevec::synth::{generate, pipeline_config, SynthConfig};

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(name: &str, got: f64, want: f64) -> Result<(), String> {
    ensure((got - want).abs() <= 1e-9, format!("{name}: got {got}, want {want}"))
}

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let spent = started.elapsed();
    ensure(spent <= limit, format!("took {:.1}s, limit {:.0}s", spent.as_secs_f64(), limit.as_secs_f64()))
}

fn ids(names: &[&str]) -> Vec<SourceId> {
    names.iter().map(|&n| SourceId::from(n)).collect()
}

fn triplet(f: Indicator, a: &str, p: &str, n: &str) -> Triplet {
    Triplet { anchor: a.into(), positive: p.into(), negative: n.into(), pos_indicator: f, neg_indicator: f, pos_prob: 0.5, neg_prob: 0.5 }
}

fn formula_suite() -> Verdict {
    let started = Instant::now();
    let mut checks = 0;
    let mut check = |name: &str, got: f64, want: f64| -> Result<(), String> {
        checks += 1;
        close(name, got, want)
    };

    let edge = |from: &str, to: &str, weight: usize| CopyEdge { from_source: from.into(), to_source: to.into(), copied_article_pairs: Vec::new(), weight };
    let sizes: BTreeMap<&str, usize> = [("b", 10), ("c", 5)].into();
    let d = copy_distances_with(&[edge("a", "b", 3), edge("a", "c", 5)], |s| sizes[s]);
    check("copy distance 3 of 10", d[0].d, 0.7)?;
    check("copy distance 5 of 5", d[1].d, 0.0)?;

    let a = SourceId::from("a");
    let cand = |v: &[(&str, f64)]| v.iter().map(|(s, d)| (SourceId::from(*s), *d)).collect::<Vec<_>>();
    let pp = positive_distribution(&a, &cand(&[("b", 1.0), ("c", 3.0)]), 1e-6).unwrap();
    check("pp at d 1", pp.prob("b"), 0.75)?;
    check("pp at d 3", pp.prob("c"), 0.25)?;
    let np = negative_distribution(&a, &pp, NegMode::Inverse, &[]).unwrap();
    check("np inverse two", np.prob("b"), 0.25)?;
    check("np inverse two'", np.prob("c"), 0.75)?;
    let pp3 = positive_distribution(&a, &cand(&[("b", 1.0), ("c", 2.0), ("d", 4.0)]), 1e-6).unwrap();
    check("pp three", pp3.prob("b"), 4.0 / 7.0)?;
    let np3 = negative_distribution(&a, &pp3, NegMode::Inverse, &[]).unwrap();
    for (s, want) in [("b", 3.0 / 14.0), ("c", 5.0 / 14.0), ("d", 6.0 / 14.0)] {
        check("np renormalized", np3.prob(s), want)?;
    }
    let dup = positive_distribution(&a, &cand(&[("b", 0.5), ("b", 0.5), ("c", 0.25)]), 1e-6).unwrap();
    check("per-reference records add up", dup.prob("b"), 0.5)?;
    let floor = positive_distribution(&a, &cand(&[("b", 0.0), ("c", 0.5)]), 1e-6).unwrap();
    ensure(floor.prob("b") >= 0.999, format!("epsilon floor gives {}", floor.prob("b")))?;
    let uni = negative_distribution(&a, &pp, NegMode::Uniform, &ids(&["a", "b", "c", "d"])).unwrap();
    check("np uniform", uni.prob("d"), 1.0 / 3.0)?;

    let cos = triplet_loss(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], 1.0, DistanceKind::Cosine);
    check("cosine triplet loss", cos, 1.0 + 1.0 / 2f64.sqrt())?;
    check("inactive triplet", triplet_loss(&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], 1.0, DistanceKind::Cosine), 0.0)?;
    check("euclidean triplet loss", triplet_loss(&[0.0, 0.0], &[3.0, 4.0], &[1.0, 0.0], 1.0, DistanceKind::Euclidean), 5.0)?;

    let cov = coverage(&[
        triplet(Indicator::Copy, "a", "b", "c"),
        triplet(Indicator::Copy, "a", "b", "d"),
        triplet(Indicator::Shift, "a", "b", "c"),
        triplet(Indicator::Shift, "e", "f", "a"),
    ])
    .unwrap();
    let (c, s) = (0, 1);
    check("sc copy/shift", cov.sc[c][s].unwrap(), 0.75)?;
    check("sc shift/copy", cov.sc[s][c].unwrap(), 0.6)?;
    check("tc copy/shift", cov.tc[c][s].unwrap(), 0.5)?;
    check("tc shift/copy", cov.tc[s][c].unwrap(), 0.5)?;
    check("sc diagonal", cov.sc[c][c].unwrap(), 1.0)?;
    ensure(cov.sc[2][0].is_none(), "an indicator without triplets must be undefined")?;

    let emb: Embeddings = ["s1", "s2", "s3"]
        .iter()
        .map(|&n| (SourceId::from(n), SourceEmbedding { source: n.into(), vector: vec![1.0, 2.0], frozen: false }))
        .collect();
    let labels: BTreeMap<SourceId, SourceLabel> = [("s1", 1, true, -3), ("s2", 4, false, 1), ("s3", 2, false, 2)]
        .into_iter()
        .map(|(n, f, c, l)| (SourceId::from(n), SourceLabel::new(n.into(), f, c, l)))
        .collect();
    let r = cluster(&emb, 0.1, 1, &labels).map_err(|e| e.to_string())?;
    ensure(r.clusters.len() == 1, "identical points form one cluster")?;
    check("unreliability density", r.clusters[0].unreliability_density.unwrap(), 2.0 / 3.0)?;
    check("partisanship", r.clusters[0].partisanship.unwrap(), 2.0 / 3.0)?;
    check("mean leaning", r.clusters[0].mean_leaning.unwrap(), 0.0)?;

    within(Duration::from_secs(10), started)?;
    Ok(format!("{checks} values within 1e-9"))
}

fn edge_difference(pruned: &[CopyEdge], exhaustive: &[CopyEdge]) -> Option<String> {
    let pairs = |edges: &[CopyEdge]| -> BTreeSet<(String, String)> { edges.iter().flat_map(|e| e.copied_article_pairs.iter().cloned()).collect() };
    let (p, e) = (pairs(pruned), pairs(exhaustive));
    if pruned == exhaustive {
        return None;
    }
    Some(format!(
        "{} of {} edges; copies only pruned {:?}, only exhaustive {:?}",
        pruned.len(),
        exhaustive.len(),
        p.difference(&e).collect::<Vec<_>>(),
        e.difference(&p).collect::<Vec<_>>()
    ))
}

fn copy_oracle() -> Verdict {
    let started = Instant::now();
    let corpora = [(10, 200, 0.02, 1), (20, 100, 0.05, 2), (16, 120, 0.08, 3), (8, 150, 0.10, 4), (12, 160, 0.12, 5)];
    let (mut edges_seen, mut top_terms_misses) = (0, 0);
    for (n_sources, per_source, edit, seed) in corpora {
        let synth = generate(&SynthConfig { n_sources, articles_per_source: per_source, copy_edit_rate: edit, seed, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let corpus = &synth.corpus;
        ensure(corpus.len() <= 2000, "corpus too large for the oracle")?;
        let vectors = vectorize_articles(corpus);
        let run = |rule| detect_copies(&vectors, corpus, &CopyConfig { candidates: rule, ..Default::default() }).map_err(|e| e.to_string());
        let exhaustive = run(CandidateRule::Exhaustive)?;
        let pruned = run(CandidateRule::default())?;
        if let Some(why) = edge_difference(&pruned, &exhaustive) {
            return Err(format!("seed {seed}: {why}"));
        }
        if edge_difference(&run(CandidateRule::TopTerms(5))?, &exhaustive).is_some() {
            top_terms_misses += 1;
        }
        edges_seen += exhaustive.len();
    }
    within(Duration::from_secs(120), started)?;
    Ok(format!("5 corpora, {edges_seen} edges identical under the default rule; top-5 terms differs on {top_terms_misses}"))
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

fn alignment_recovery() -> Verdict {
    let started = Instant::now();
    let synth = generate(&SynthConfig { n_sources: 4, ..Default::default() }).map_err(|e| e.to_string())?;
    let source = synth.corpus.sources().next().cloned().ok_or("empty corpus")?;
    let set = train_word_embeddings(&synth.corpus, &source, &pipeline_config(1).shift.word2vec).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_d, mut worst_q) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let r = random_rotation(set.dim(), &mut rng);
        let moved = set.transformed(&r);
        let al = align(&moved, &set, 1.0).map_err(|e| e.to_string())?;
        let words = common_words(&moved, &set);
        let shifts = word_shifts(&moved, &set, &al, &words);
        let mean = shifts.iter().map(|(_, d)| d).sum::<f64>() / shifts.len() as f64;
        worst_d = worst_d.max(mean);
        worst_q = worst_q.max(al.orthogonality_error());
    }
    ensure(worst_d < 1e-3, format!("mean cosine distance after alignment {worst_d:e}"))?;
    ensure(worst_q < 1e-6, format!("orthogonality error {worst_q:e}"))?;
    within(Duration::from_secs(60), started)?;
    Ok(format!("10 rotations of {} words: worst mean distance {worst_d:.1e}, worst ||QtQ-I|| {worst_q:.1e}", set.len()))
}

fn gradient_check() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 8;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for kind in [DistanceKind::Cosine, DistanceKind::Euclidean] {
        let margin = if kind == DistanceKind::Cosine { 0.5 } else { 1.0 };
        let mut points = 0;
        while points < 10 {
            let mut v: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
            let loss = |v: &[Vec<f64>]| triplet_loss(&v[0], &v[1], &v[2], margin, kind);
            let d_ap = sourcevec::embedder::distance(kind, &v[0], &v[1]);
            let d_an = sourcevec::embedder::distance(kind, &v[0], &v[2]);
            if (d_ap - d_an + margin).abs() < 1e-2 || loss(&v) == 0.0 {
                continue;
            }
            let g = triplet_loss_grad(&v[0], &v[1], &v[2], margin, kind);
            let analytic: Vec<f64> = [g.anchor, g.positive, g.negative].concat();
            let mut numeric = Vec::with_capacity(3 * dim);
            for k in 0..3 {
                for c in 0..dim {
                    let x = v[k][c];
                    v[k][c] = x + h;
                    let up = loss(&v);
                    v[k][c] = x - h;
                    let down = loss(&v);
                    v[k][c] = x;
                    numeric.push((up - down) / (2.0 * h));
                }
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
            worst = worst.max(diff / scale.max(1e-12));
            points += 1;
        }
    }
    ensure(worst < 1e-4, format!("relative error {worst:e}"))?;
    within(Duration::from_secs(10), started)?;
    Ok(format!("20 points, worst relative error {worst:.1e}"))
}

struct EndToEnd {
    _dir: tempfile::TempDir,
    work: PathBuf,
}

fn end_to_end(keep: &mut Option<EndToEnd>) -> Verdict {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (synth, cfg) = common::synthetic(dir.path(), &SynthConfig::default());
    let labels = common::labels(&cfg);
    let pipeline = Pipeline::new(cfg.clone()).map_err(|e| e.to_string())?;
    pipeline.run(Stage::All).map_err(|e| e.to_string())?;
    let spent = started.elapsed();
    let work = pipeline.work().root().to_path_buf();
    *keep = Some(EndToEnd { _dir: dir, work: work.clone() });

    let emb = read_source_embeddings(&work.join("embeddings.txt")).map_err(|e| e.to_string())?;
    ensure(emb.len() == 30, format!("{} sources embedded", emb.len()))?;
    let f1 = knn_cv(&emb, &labels, 5, 10, cfg.seed).map_err(|e| e.to_string())?.mean_f1;
    ensure(f1 >= 0.9, format!("kNN F1 {f1:.3}"))?;
    let r = cluster(&emb, 0.1, 1, &labels).map_err(|e| e.to_string())?;
    ensure(r.clusters.len() == 2, format!("{} clusters at eps 0.1", r.clusters.len()))?;
    let mut densities = Vec::new();
    for c in &r.clusters {
        let u = c.unreliability_density.ok_or("cluster without labeled members")?;
        let camp: BTreeSet<bool> = c.members.iter().map(|m| synth.truth.is_unreliable(m)).collect();
        ensure(camp.len() == 1, format!("cluster {} mixes camps", c.id))?;
        let planted = if camp.contains(&true) { 1.0 } else { 0.0 };
        ensure((u - planted).abs() < 0.05, format!("cluster {} density {u}, planted {planted}", c.id))?;
        densities.push(format!("{u:.2}"));
    }
    ensure(spent <= Duration::from_secs(300), format!("run all took {:.1}s", spent.as_secs_f64()))?;
    Ok(format!("kNN F1 {f1:.3}, 2 clusters with U [{}], run all {:.1}s", densities.join(", "), spent.as_secs_f64()))
}

fn sampler_statistics(e2e: &Option<EndToEnd>) -> Verdict {
    let a = SourceId::from("a");
    let cands: Vec<(SourceId, f64)> = [("b", 1.0), ("c", 2.0), ("d", 4.0)].iter().map(|(s, d)| (SourceId::from(*s), *d)).collect();
    let pp = positive_distribution(&a, &cands, 1e-6).map_err(|e| e.to_string())?;
    let np = negative_distribution(&a, &pp, NegMode::Inverse, &[]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 100_000;
    let mut worst = 0.0f64;
    for dist in [&pp, &np] {
        let sampler = dist.sampler();
        let mut counts = vec![0usize; dist.len()];
        for _ in 0..draws {
            counts[sampler.sample(&mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(&dist.probs) {
            worst = worst.max((*c as f64 / draws as f64 - p).abs());
        }
    }
    ensure(worst <= 0.01, format!("empirical frequency off by {worst}"))?;

    let work = &e2e.as_ref().ok_or("needs the end-to-end run")?.work;
    let triplets = read_triplets(&work.join("triplets.tsv")).map_err(|e| e.to_string())?;
    let mut positives: BTreeMap<&SourceId, HashSet<&SourceId>> = BTreeMap::new();
    for t in &triplets {
        positives.entry(&t.anchor).or_default().insert(&t.positive);
    }
    let violations = triplets
        .iter()
        .filter(|t| t.negative == t.anchor || t.positive == t.anchor || positives[&t.anchor].contains(&t.negative))
        .count();
    ensure(violations == 0, format!("{violations} triplets violate the cleaning rule"))?;
    Ok(format!("worst frequency error {worst:.4} over {draws} draws; 0 violations in {} triplets", triplets.len()))
}

fn online_contract() -> Verdict {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, cfg) = common::synthetic(dir.path(), &SynthConfig { articles_per_source: 60, camp_separation: 0.5, ..Default::default() });
    let labels = common::labels(&cfg);
    let pipeline = common::run_through(cfg, Stage::Refs);
    let cfg = &pipeline.cfg;
    let corpus = pipeline.load_work_corpus().map_err(|e| e.to_string())?;
    let lex = pipeline.lexicons().map_err(|e| e.to_string())?;
    let cache = pipeline.indicator_cache(&corpus, &lex).map_err(|e| e.to_string())?;

    let newcomers: Vec<SourceId> = corpus.sources().step_by(10).cloned().collect();
    let offline: BTreeSet<SourceId> = corpus.sources().filter(|s| !newcomers.contains(s)).cloned().collect();
    let (frozen, raw) = train_offline(&cache, &offline, cfg).map_err(|e| e.to_string())?;
    let kept = mask_articles(&corpus, &newcomers, 0.5, cfg.seed);
    let records = cache.newcomer_records(&offline, &raw, &kept).map_err(|e| e.to_string())?;
    let (placed, triplets, _) = place_newcomers(&records, &frozen, &newcomers, cfg).map_err(|e| e.to_string())?;
    ensure(!triplets.is_empty(), "no newcomer triplet")?;
    for (s, before) in &frozen {
        let after = &placed[s];
        ensure(after.frozen, format!("{s} lost its frozen flag"))?;
        let same = before.vector.iter().zip(&after.vector).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, format!("frozen vector of {s} changed"))?;
    }

    let fractions: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let curve = online_curve(&cache, &labels, &fractions, cfg).map_err(|e| e.to_string())?;
    let f1: Vec<String> = curve.points.iter().map(|p| p.f1.map_or("NA".into(), |f| format!("{f:.2}"))).collect();
    let rho = curve.spearman.ok_or_else(|| format!("Spearman undefined, F1 [{}]", f1.join(", ")))?;
    ensure(rho >= 0.6, format!("Spearman {rho:.3}, F1 [{}]", f1.join(", ")))?;
    Ok(format!(
        "{} frozen vectors bit-identical; Spearman {rho:.3} over F1 [{}] in {:.0}s",
        frozen.len(),
        f1.join(", "),
        started.elapsed().as_secs_f64()
    ))
}

/// Reference values for the full news corpus: (indicator, AUROC p/n/f in percent).
const REFERENCE_AUROC: [(&str, [f64; 3]); 3] = [("copy", [72.7, 51.0, 36.3]), ("stance", [89.7, 73.3, 68.3]), ("overall", [77.0, 69.7, 57.5])];

fn news_corpus(path: &Path) -> Verdict {
    let cfg = PipelineConfig::load(path).map_err(|e| e.to_string())?;
    let pipeline = Pipeline::new(cfg.clone()).map_err(|e| e.to_string())?;
    pipeline.run(Stage::All).map_err(|e| e.to_string())?;
    let labels = pipeline.labels().map_err(|e| e.to_string())?.ok_or("labels required")?;
    let work = pipeline.work();
    let emb = read_source_embeddings(&work.embeddings()).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();

    let ks: Vec<usize> = (29..=45).step_by(2).collect();
    let sweep = knn_sweep(&emb, &labels, &ks, 10, cfg.seed).map_err(|e| e.to_string())?;
    let best = sweep.iter().max_by(|a, b| a.mean_f1.total_cmp(&b.mean_f1)).ok_or("empty sweep")?;
    if (best.mean_f1 * 100.0 - 87.0).abs() > 5.0 {
        failures.push(format!("best kNN F1 {:.1}% at k {}", best.mean_f1 * 100.0, best.k));
    }

    let triplets = read_triplets(&work.triplets()).map_err(|e| e.to_string())?;
    let auroc = triplet_auroc(&triplets, &labels).map_err(|e| e.to_string())?;
    for (name, want) in REFERENCE_AUROC {
        let row = match name {
            "overall" => auroc.overall,
            other => auroc.per_indicator.get(&other.parse::<Indicator>()?).copied().unwrap_or_default(),
        };
        for (got, want) in [row.p, row.n, row.f].into_iter().zip(want) {
            match got {
                Some(g) if (g * 100.0 - want).abs() <= 5.0 => {}
                other => failures.push(format!("{name} AUROC {other:?} vs {want}%")),
            }
        }
    }

    let r = cluster(&emb, 0.1, 1, &labels).map_err(|e| e.to_string())?;
    if !(5..=9).contains(&r.clusters.len()) {
        failures.push(format!("{} clusters", r.clusters.len()));
    }
    let mut by_u: Vec<_> = r.clusters.iter().filter(|c| c.unreliability_density.is_some()).collect();
    by_u.sort_by(|a, b| b.unreliability_density.partial_cmp(&a.unreliability_density).expect("finite"));
    for c in by_u.iter().take(3) {
        let flagged = c.members.iter().filter(|m| labels.get(*m).is_some_and(|l| l.conspiracy)).count();
        let labeled = c.members.iter().filter(|m| labels.contains_key(*m)).count();
        if 2 * flagged <= labeled {
            failures.push(format!("high-U cluster {} has {flagged} of {labeled} conspiracy-flagged", c.id));
        }
    }
    if failures.is_empty() {
        Ok(format!("best F1 {:.1}% at k {}, {} clusters", best.mean_f1 * 100.0, best.k, r.clusters.len()))
    } else {
        Err(failures.join("; "))
    }
}

fn main() {
    let mut results: Vec<(&str, Option<Verdict>)> = Vec::new();
    let guard = |f: &mut dyn FnMut() -> Verdict| -> Verdict {
        catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        })
    };
    results.push(("formula unit suite", Some(guard(&mut formula_suite))));
    results.push(("copy oracle equivalence", Some(guard(&mut copy_oracle))));
    results.push(("alignment recovery", Some(guard(&mut alignment_recovery))));
    results.push(("gradient check", Some(guard(&mut gradient_check))));
    let mut e2e = None;
    results.push(("end-to-end planted structure", Some(guard(&mut || end_to_end(&mut e2e)))));
    results.push(("sampler statistics", Some(guard(&mut || sampler_statistics(&e2e)))));
    results.push(("online contract", Some(guard(&mut online_contract))));
    let nela = std::env::var_os("SOURCEVEC_NELA_CONFIG").map(PathBuf::from);
    results.push(("news corpus reference values (data-gated)", nela.map(|p| guard(&mut || news_corpus(&p)))));

    let mut failed = 0;
    for (name, verdict) in &results {
        match verdict {
            Some(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Some(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            None => println!("SKIP  {name}: set SOURCEVEC_NELA_CONFIG to run"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
