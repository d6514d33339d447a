//! Two-camp synthetic corpora with planted agreement structure, for tests and
//! demonstrations.
//!
//! Sources fall into a reliable and an unreliable camp. `camp_separation`
//! scales every camp signal at once; at 0 the camps are indistinguishable.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, Corpus, CorpusError, Lexicons};
use crate::embedder::Optimizer;
use crate::pipeline::PipelineConfig;
use crate::source::SourceId;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus settings: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_sources: usize,
    pub articles_per_source: usize,
    pub unreliable_fraction: f64,
    pub camp_separation: f64,
    /// Share of each source's articles that copy a same-camp article.
    pub copy_rate: f64,
    /// Share of a copy's words replaced.
    pub copy_edit_rate: f64,
    /// Probability that an unreliable-camp occurrence of a shift target moves
    /// to its alternative topic.
    pub shift_strength: f64,
    pub n_shift_targets: usize,
    /// Probability that a jargon term in a citation comes from the camp's own list.
    pub jargon_rate: f64,
    /// Extra share of negative words in unreliable-camp citations.
    pub stance_gap: f64,
    /// Mean citations per article.
    pub citation_rate: f64,
    pub n_references: usize,
    pub offtopic_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_sources: 30,
            articles_per_source: 150,
            unreliable_fraction: 0.5,
            camp_separation: 1.0,
            copy_rate: 0.3,
            copy_edit_rate: 0.05,
            shift_strength: 1.0,
            n_shift_targets: 20,
            jargon_rate: 0.8,
            stance_gap: 0.3,
            citation_rate: 0.6,
            n_references: 30,
            offtopic_rate: 0.1,
            seed: 1,
        }
    }
}

const N_GROUPS: usize = 12;
const GROUP_WORDS: usize = 20;
const CAMP_JARGON: usize = 12;
const SHARED_JARGON: usize = 6;
const N_NEGATIVE: usize = 8;
const SENTENCES: usize = 8;
const SENTENCE_LEN: usize = 10;
const CONTEXT_LEN: usize = 12;
const BASE_NEGATIVE_SHARE: f64 = 0.05;
const FUNCTION_WORDS: &[&str] = &["the", "of", "and", "to", "in", "a", "for", "on", "with", "that"];
pub const TOPIC_KEYWORD: &str = "outbreak";
const DOMAIN: &str = "synth-university.edu";

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_sources < 4 {
            return bad(format!("n_sources must be at least 4, got {}", self.n_sources));
        }
        if self.articles_per_source < 2 {
            return bad("articles_per_source must be at least 2".into());
        }
        let n_u = self.n_unreliable();
        if n_u < 2 || self.n_sources - n_u < 2 {
            return bad(format!("unreliable_fraction {} leaves a camp with fewer than 2 sources", self.unreliable_fraction));
        }
        for (name, v, hi) in [
            ("camp_separation", self.camp_separation, 1.0),
            ("copy_rate", self.copy_rate, 1.0),
            ("copy_edit_rate", self.copy_edit_rate, 0.5),
            ("shift_strength", self.shift_strength, 1.0),
            ("jargon_rate", self.jargon_rate, 1.0),
            ("stance_gap", self.stance_gap, 1.0 - BASE_NEGATIVE_SHARE),
            ("citation_rate", self.citation_rate, 5.0),
            ("offtopic_rate", self.offtopic_rate, 0.9),
        ] {
            if !(0.0..=hi).contains(&v) {
                return bad(format!("{name} = {v} outside [0, {hi}]"));
            }
        }
        if self.copy_rate >= 1.0 {
            return bad("copy_rate must be below 1 so every source keeps original articles".into());
        }
        if self.n_shift_targets > N_GROUPS * 2 {
            return bad(format!("n_shift_targets at most {}", N_GROUPS * 2));
        }
        if self.n_references == 0 {
            return bad("n_references must be positive".into());
        }
        Ok(())
    }

    fn n_unreliable(&self) -> usize {
        (self.n_sources as f64 * self.unreliable_fraction).round() as usize
    }
}

/// Pseudo-words: consonant-vowel syllables spelling out `k` in base 70.
fn pseudo_word(k: usize, syllables: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut n = k;
    let mut w = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        let s = n % 70;
        n /= 70;
        w.push(C[s / 5] as char);
        w.push(V[s % 5] as char);
    }
    w
}

struct Vocab {
    groups: Vec<Vec<String>>,
    targets: Vec<String>,
    jargon_reliable: Vec<String>,
    jargon_unreliable: Vec<String>,
    jargon_shared: Vec<String>,
    negative: Vec<String>,
}

impl Vocab {
    fn new(n_targets: usize) -> Self {
        let stop = Lexicons::bundled().stop_words;
        let mut next = 0usize;
        let mut take = |n: usize| -> Vec<String> {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                // spread indices so neighbouring words differ in their first syllable
                let w = pseudo_word(next * 37 + 11, 3);
                next += 1;
                if !stop.contains(&w) && w != TOPIC_KEYWORD {
                    out.push(w);
                }
            }
            out
        };
        let groups = (0..N_GROUPS).map(|_| take(GROUP_WORDS)).collect();
        Vocab {
            groups,
            targets: take(n_targets),
            jargon_reliable: take(CAMP_JARGON),
            jargon_unreliable: take(CAMP_JARGON),
            jargon_shared: take(SHARED_JARGON),
            negative: take(N_NEGATIVE),
        }
    }

    fn home(&self, target: usize) -> usize {
        target % N_GROUPS
    }

    fn alt(&self, target: usize) -> usize {
        (target % N_GROUPS + N_GROUPS / 2) % N_GROUPS
    }

    fn all_jargon(&self) -> Vec<&String> {
        self.jargon_reliable.iter().chain(&self.jargon_unreliable).chain(&self.jargon_shared).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    PlainText,
    Html,
    EndNotes,
}

#[derive(Debug, Clone)]
enum Sentence {
    Plain(Vec<String>),
    /// Words before and after the link, and the reference index.
    Citation(Vec<String>, Vec<String>, usize),
}

#[derive(Debug, Clone)]
struct Draft {
    title: Vec<String>,
    sentences: Vec<Sentence>,
    layout: Layout,
    decoy: Option<usize>,
    end_notes: Vec<usize>,
    published: DateTime<Utc>,
}

/// Counts of planted copies per (origin, copier) source pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCopyEdge {
    pub origin: SourceId,
    pub copy: SourceId,
    pub articles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftTarget {
    pub word: String,
    pub home_topic: Vec<String>,
    pub alt_topic: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub unreliable: Vec<SourceId>,
    pub reliable: Vec<SourceId>,
    pub copy_edges: Vec<PlantedCopyEdge>,
    pub shift_targets: Vec<ShiftTarget>,
    pub jargon_reliable: Vec<String>,
    pub jargon_unreliable: Vec<String>,
    pub jargon_shared: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub labels_csv: String,
    pub truth: GroundTruth,
    pub paper_urls: Vec<String>,
    pub jargon_terms: Vec<String>,
    pub negative_terms: Vec<String>,
}

fn reference_url(r: usize) -> String {
    if r % 2 == 0 {
        format!("https://doi.org/10.5555/synth.{r}")
    } else {
        format!("https://www.{DOMAIN}/studies/{r}.html")
    }
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    vocab: Vocab,
    rng: ChaCha8Rng,
    unreliable: Vec<bool>,
    ref_weights: rand::distributions::WeightedIndex<f64>,
}

impl Gen<'_> {
    fn group_word(&mut self, g: usize) -> String {
        self.vocab.groups[g][self.rng.gen_range(0..GROUP_WORDS)].clone()
    }

    fn filler(&mut self, g: usize) -> String {
        if self.rng.gen_bool(0.3) {
            FUNCTION_WORDS[self.rng.gen_range(0..FUNCTION_WORDS.len())].to_string()
        } else {
            self.group_word(g)
        }
    }

    fn sentence(&mut self, source: usize, g: usize) -> Vec<String> {
        let mut words: Vec<String> = (0..SENTENCE_LEN).map(|_| self.filler(g)).collect();
        let shifted_p = if self.unreliable[source] { self.cfg.camp_separation * self.cfg.shift_strength } else { 0.0 };
        for t in 0..self.vocab.targets.len() {
            let (home, alt) = (self.vocab.home(t), self.vocab.alt(t));
            if g != home && g != alt {
                continue;
            }
            let moved = shifted_p > 0.0 && self.rng.gen_bool(shifted_p);
            if (g == home && !moved) || (g == alt && moved) {
                let at = self.rng.gen_range(0..=words.len());
                words.insert(at, self.vocab.targets[t].clone());
            }
        }
        words
    }

    fn jargon(&mut self, source: usize) -> String {
        let own = self.rng.gen_bool(self.cfg.camp_separation * self.cfg.jargon_rate);
        if own {
            let list = if self.unreliable[source] { &self.vocab.jargon_unreliable } else { &self.vocab.jargon_reliable };
            list[self.rng.gen_range(0..list.len())].clone()
        } else {
            let all = self.vocab.all_jargon();
            all[self.rng.gen_range(0..all.len())].clone()
        }
    }

    fn citation(&mut self, source: usize, g: usize) -> Sentence {
        let neg_share = BASE_NEGATIVE_SHARE + if self.unreliable[source] { self.cfg.camp_separation * self.cfg.stance_gap } else { 0.0 };
        let mut words: Vec<String> = (0..3).map(|_| self.jargon(source)).collect();
        let expected = neg_share * (CONTEXT_LEN - 3) as f64;
        let mut negatives = expected.floor() as usize;
        if self.rng.gen_bool(expected.fract()) {
            negatives += 1;
        }
        for _ in 0..negatives {
            words.push(self.vocab.negative[self.rng.gen_range(0..N_NEGATIVE)].clone());
        }
        while words.len() < CONTEXT_LEN {
            let w = self.filler(g);
            words.push(w);
        }
        words.shuffle(&mut self.rng);
        let cut = self.rng.gen_range(2..CONTEXT_LEN - 2);
        let after = words.split_off(cut);
        Sentence::Citation(words, after, self.ref_weights_sample())
    }

    fn ref_weights_sample(&mut self) -> usize {
        use rand::distributions::Distribution;
        self.ref_weights.sample(&mut self.rng)
    }

    fn original(&mut self, source: usize, start: DateTime<Utc>) -> Draft {
        let offtopic = self.rng.gen_bool(self.cfg.offtopic_rate);
        let g1 = self.rng.gen_range(0..N_GROUPS);
        let g2 = (g1 + self.rng.gen_range(1..N_GROUPS)) % N_GROUPS;
        let mut title: Vec<String> = (0..4).map(|_| self.group_word(g1)).collect();
        if !offtopic {
            title.insert(0, TOPIC_KEYWORD.to_string());
        }
        let mut sentences: Vec<Sentence> = (0..SENTENCES)
            .map(|_| {
                let g = if self.rng.gen_bool(0.8) { [g1, g2][self.rng.gen_range(0..2)] } else { self.rng.gen_range(0..N_GROUPS) };
                Sentence::Plain(self.sentence(source, g))
            })
            .collect();
        // three article-unique words keep unrelated articles apart
        if let Some(Sentence::Plain(words)) = sentences.last_mut() {
            for k in 0..3 {
                words.push(pseudo_word(self.rng.gen_range(0..70usize.pow(4)) * 3 + k, 5));
            }
        }
        if !offtopic {
            let rate = self.cfg.citation_rate;
            let mut n = rate.floor() as usize;
            if self.rng.gen_bool(rate.fract()) {
                n += 1;
            }
            for _ in 0..n {
                let g = [g1, g2][self.rng.gen_range(0..2)];
                let c = self.citation(source, g);
                let at = self.rng.gen_range(0..=sentences.len());
                sentences.insert(at, c);
            }
        }
        let layout = match self.rng.gen_range(0..10) {
            0..=4 => Layout::PlainText,
            5..=8 => Layout::Html,
            _ => Layout::EndNotes,
        };
        let end_notes = if layout == Layout::EndNotes {
            (0..11).map(|_| self.ref_weights_sample()).collect()
        } else {
            Vec::new()
        };
        let decoy = self.rng.gen_bool(0.1).then(|| self.rng.gen_range(0..1000));
        let published = start + Duration::seconds(self.rng.gen_range(0..180 * 86_400));
        Draft { title, sentences, layout, decoy, end_notes, published }
    }

    fn edit(&mut self, words: &[String]) -> Vec<String> {
        words
            .iter()
            .map(|w| {
                if self.rng.gen_bool(self.cfg.copy_edit_rate) {
                    let g = self.rng.gen_range(0..N_GROUPS);
                    self.group_word(g)
                } else {
                    w.clone()
                }
            })
            .collect()
    }

    fn copy_of(&mut self, origin: &Draft) -> Draft {
        let sentences = origin
            .sentences
            .iter()
            .map(|s| match s {
                Sentence::Plain(w) => Sentence::Plain(self.edit(w)),
                Sentence::Citation(a, b, r) => Sentence::Citation(self.edit(a), self.edit(b), *r),
            })
            .collect();
        let published = origin.published + Duration::seconds(self.rng.gen_range(3600..=48 * 3600));
        Draft { sentences, published, ..origin.clone() }
    }
}

fn render(draft: &Draft, id: String, source: &SourceId) -> Article {
    let mut body = String::new();
    let mut html = String::from("<html><body>");
    let mut links = Vec::new();
    let plain = draft.layout == Layout::PlainText;
    for s in &draft.sentences {
        match s {
            Sentence::Plain(w) => {
                let text = w.join(" ");
                let _ = write!(body, "{text}. ");
                let _ = write!(html, "<p>{text}.</p>");
            }
            Sentence::Citation(a, b, r) => {
                let url = reference_url(*r);
                let (a, b) = (a.join(" "), b.join(" "));
                if plain {
                    let _ = write!(body, "{a} {url} {b}. ");
                } else {
                    let _ = write!(body, "{a} {b}. ");
                }
                let _ = write!(html, "<p>{a} <a href=\"{url}\">{b}</a>.</p>");
                links.push(url);
            }
        }
    }
    if let Some(k) = draft.decoy {
        let url = format!("https://blog.example.net/post/{k}");
        if plain {
            let _ = write!(body, "more at {url} today. ");
        }
        let _ = write!(html, "<p>more at <a href=\"{url}\">this post</a> today.</p>");
        links.push(url);
    }
    if !draft.end_notes.is_empty() {
        html.push_str("<h3>references</h3><ol>");
        for r in &draft.end_notes {
            let url = reference_url(*r);
            let _ = write!(html, "<li><a href=\"{url}\">{url}</a></li>");
            links.push(url);
        }
        html.push_str("</ol>");
    }
    html.push_str("</body></html>");
    links.sort();
    links.dedup();
    Article {
        id,
        source: source.clone(),
        title: draft.title.join(" "),
        body: body.trim_end().to_string(),
        published_at: draft.published,
        url: Some(format!("https://{source}.example.com/a/{}", draft.published.timestamp())),
        raw_html: (!plain).then_some(html),
        out_links: links,
    }
}

/// Builds the corpus, labels and ground truth in memory.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticCorpus, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_sources;
    let names: Vec<SourceId> = (0..n).map(|k| SourceId::from(format!("source_{k:02}").as_str())).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut unreliable = vec![false; n];
    for &k in &order[..cfg.n_unreliable()] {
        unreliable[k] = true;
    }
    let weights: Vec<f64> = (0..cfg.n_references).map(|r| 1.0 / ((r + 1) as f64).sqrt()).collect();
    let mut g = Gen {
        cfg,
        vocab: Vocab::new(cfg.n_shift_targets),
        rng,
        unreliable: unreliable.clone(),
        ref_weights: rand::distributions::WeightedIndex::new(weights).expect("positive weights"),
    };
    let start = Utc.with_ymd_and_hms(2020, 3, 1, 0, 0, 0).single().expect("valid date");

    let n_copies = (cfg.copy_rate * cfg.articles_per_source as f64).round() as usize;
    let n_orig = cfg.articles_per_source - n_copies;
    let originals: Vec<Vec<Draft>> = (0..n).map(|s| (0..n_orig).map(|_| g.original(s, start)).collect()).collect();

    let mut drafts: Vec<Vec<Draft>> = originals.clone();
    let mut planted: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for j in 0..n {
        for _ in 0..n_copies {
            let same_camp = g.rng.gen_bool(cfg.camp_separation);
            let pool: Vec<usize> = (0..n).filter(|&i| i != j && (!same_camp || unreliable[i] == unreliable[j])).collect();
            let i = pool[g.rng.gen_range(0..pool.len())];
            let on_topic: Vec<&Draft> = originals[i].iter().filter(|d| d.title.first().map(String::as_str) == Some(TOPIC_KEYWORD)).collect();
            let Some(&origin) = on_topic.choose(&mut g.rng) else { continue };
            let copy = g.copy_of(origin);
            drafts[j].push(copy);
            *planted.entry((i, j)).or_default() += 1;
        }
    }

    let articles: Vec<Article> = drafts
        .iter()
        .enumerate()
        .flat_map(|(s, list)| list.iter().enumerate().map(move |(k, d)| (s, k, d)))
        .map(|(s, k, d)| render(d, format!("{}-{k:04}", names[s]), &names[s]))
        .collect();
    let corpus = Corpus::from_articles(articles)?;

    let mut labels_csv = String::from("source,factual_reporting,conspiracy,political_leaning\n");
    for (k, name) in names.iter().enumerate() {
        let (factual, conspiracy, leaning): (u8, bool, i8) = if unreliable[k] {
            let sign = if g.rng.gen_bool(0.8) { 1 } else { -1 };
            if g.rng.gen_bool(0.5) {
                (g.rng.gen_range(0..=2), g.rng.gen_bool(0.5), sign * g.rng.gen_range(2..=3))
            } else {
                (g.rng.gen_range(3..=4), true, sign * g.rng.gen_range(2..=3))
            }
        } else {
            (g.rng.gen_range(3..=5), false, g.rng.gen_range(-2..=2))
        };
        let _ = writeln!(labels_csv, "{name},{factual},{conspiracy},{leaning}");
    }

    let v = &g.vocab;
    let truth = GroundTruth {
        unreliable: names.iter().zip(&unreliable).filter(|(_, u)| **u).map(|(s, _)| s.clone()).collect(),
        reliable: names.iter().zip(&unreliable).filter(|(_, u)| !**u).map(|(s, _)| s.clone()).collect(),
        copy_edges: planted
            .iter()
            .map(|(&(i, j), &c)| PlantedCopyEdge { origin: names[i].clone(), copy: names[j].clone(), articles: c })
            .collect(),
        shift_targets: (0..v.targets.len())
            .map(|t| ShiftTarget { word: v.targets[t].clone(), home_topic: v.groups[v.home(t)].clone(), alt_topic: v.groups[v.alt(t)].clone() })
            .collect(),
        jargon_reliable: v.jargon_reliable.clone(),
        jargon_unreliable: v.jargon_unreliable.clone(),
        jargon_shared: v.jargon_shared.clone(),
    };
    Ok(SyntheticCorpus {
        corpus,
        labels_csv,
        truth,
        paper_urls: (0..cfg.n_references).filter(|r| r % 2 == 0).map(reference_url).collect(),
        jargon_terms: v.all_jargon().into_iter().cloned().collect(),
        negative_terms: v.negative.clone(),
    })
}

fn lines(items: &[String]) -> String {
    items.iter().map(|s| format!("{s}\n")).collect()
}

/// Pipeline settings suited to desk-scale synthetic corpora.
pub fn pipeline_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig { seed, work_dir: PathBuf::from("work"), ..Default::default() };
    let p = &mut cfg.paths;
    p.corpus = PathBuf::from("corpus.jsonl");
    p.labels = Some(PathBuf::from("labels.csv"));
    p.paper_urls = Some(PathBuf::from("paper_urls.txt"));
    p.science_domains = Some(PathBuf::from("science_domains.txt"));
    p.jargon_terms = Some(PathBuf::from("jargon_terms.txt"));
    p.topic_keywords = Some(PathBuf::from("topic_keywords.txt"));
    p.negative_terms = Some(PathBuf::from("negative_terms.txt"));
    let w = &mut cfg.shift.word2vec;
    w.dim = 50;
    w.window = 5;
    w.min_count = 5;
    w.subsample = 1e-3;
    cfg.embedding.optimizer = Optimizer::Adam;
    cfg.embedding.learning_rate = 0.01;
    cfg.embedding.margin = 1.9;
    cfg.eval.k_sweep = vec![1, 3, 5, 7, 9];
    cfg.propagate_seed();
    cfg
}

/// Writes `corpus.jsonl`, `labels.csv`, the reference index and lexicon
/// files, `ground_truth.json` and a ready-to-run `config.toml` into `dir`.
pub fn write_synthetic(dir: &Path, cfg: &SynthConfig) -> Result<SyntheticCorpus, SynthError> {
    let synth = generate(cfg)?;
    fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.to_path_buf(), source })?;
    synth.corpus.write_jsonl(&dir.join("corpus.jsonl"))?;
    let files: Vec<(&str, String)> = vec![
        ("labels.csv", synth.labels_csv.clone()),
        ("paper_urls.txt", lines(&synth.paper_urls)),
        ("science_domains.txt", format!("{DOMAIN}\n")),
        ("jargon_terms.txt", lines(&synth.jargon_terms)),
        ("negative_terms.txt", lines(&synth.negative_terms)),
        ("topic_keywords.txt", format!("{TOPIC_KEYWORD}\n")),
        ("ground_truth.json", serde_json::to_string_pretty(&synth.truth).expect("truth serializes") + "\n"),
        ("synth.toml", toml::to_string_pretty(cfg).expect("settings serialize")),
        ("config.toml", pipeline_config(cfg.seed).to_toml()),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| SynthError::Io { path, source })?;
    }
    Ok(synth)
}

/// Shift targets and the camp of every source, for checks against results.
impl GroundTruth {
    pub fn is_unreliable(&self, s: &str) -> bool {
        self.unreliable.iter().any(|u| u.as_str() == s)
    }

    pub fn target_words(&self) -> HashSet<&str> {
        self.shift_targets.iter().map(|t| t.word.as_str()).collect()
    }
}
