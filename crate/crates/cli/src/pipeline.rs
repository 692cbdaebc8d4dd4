//! One function per subcommand. Every artifact is written to a temporary
//! name and renamed into place.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use log::{info, warn};
use rayon::prelude::*;

use vqevent::activity_cluster::{cdf_export, cluster_events, tier_summary, ActivityTier};
use vqevent::classifier::{split_and_run_with, train_with, LabeledExample, SplitConfig, TrainConfig};
use vqevent::corpus::{
    dataset_stats_from_shapes, drop_head_fraction, load_headlines, load_messages, sort_and_dedup, CleaningReport,
    Event, EventShape, Headline, Message, SkippedLine, Strictness,
};
use vqevent::event_graph::{
    connected_components, merge_messages, sample_per_pair, split_on_articulation, validate_window, window_pairs,
    Component, QualityOptions,
};
use vqevent::features::{compare_categories, extract_features, feature_names, FeatureVector, FeatureWindow, Lexicon};
use vqevent::keyword_mining::{
    batch_by_hour, detect_keywords, preprocess_headline, preprocess_record, rank_articulation_words,
    top_keyword_pairs, KeywordPair,
};
use vqevent::store::{self, write_atomic, write_event, write_events_index, EventsStore, EVENTS_INDEX};
use vqevent::synth::{labels_csv, parse_labels_csv, Generator, GeneratorSpec};
use vqevent::text::{Stoplist, WordStemmer};
use vqevent::vq_model::{histogram_export, interarrivals, learn_codebook, quantize, Codebook, InterarrivalSeries};

use crate::config::PipelineConfig;
use crate::{CliError, Command, WindowArg};

const LOCK: &str = ".lock";
const POOL: &str = "pool.jsonl";
const HEADLINE_TOKENS: &str = "headline_tokens.jsonl";
const PAIRS: &str = "pairs.csv";
const EVENTS: &str = "events";
const CODEBOOK: &str = "codebook.txt";
const VECTORS: &str = "vectors.csv";
const TIERS: &str = "tiers.csv";
const LABELS: &str = "labels.csv";

/// Advisory lock held for the lifetime of one subcommand.
struct WorkdirLock(PathBuf);

impl WorkdirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create work directory {}", dir.display()))?;
        let path = dir.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkdirLock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked {
                dir: dir.to_owned(),
                lock: path,
            }
            .into()),
            Err(e) => Err(e).with_context(|| format!("cannot create {}", path.display())),
        }
    }
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Line-oriented output that only appears under its final name on commit.
struct AtomicLines {
    path: PathBuf,
    tmp: PathBuf,
    out: Option<BufWriter<File>>,
}

impl AtomicLines {
    fn create(path: PathBuf) -> Result<Self> {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
        let f = File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        Ok(AtomicLines {
            path,
            tmp,
            out: Some(BufWriter::new(f)),
        })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        let out = self.out.as_mut().expect("not committed");
        out.write_all(s.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .with_context(|| format!("cannot write {}", self.tmp.display()))
    }

    fn commit(mut self) -> Result<()> {
        let out = self.out.take().expect("not committed");
        let f = out.into_inner().map_err(|e| e.into_error())?;
        f.sync_all()?;
        fs::rename(&self.tmp, &self.path).with_context(|| format!("cannot rename to {}", self.path.display()))
    }
}

impl Drop for AtomicLines {
    fn drop(&mut self) {
        if self.out.is_some() {
            let _ = fs::remove_file(&self.tmp);
        }
    }
}

struct Work<'a> {
    cfg: &'a PipelineConfig,
}

impl Work<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.workdir.join(name)
    }

    /// Path of an artifact that an earlier subcommand must have produced.
    fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        require_path(&p, &format!("run `vqevent {producer}` first"))?;
        Ok(p)
    }

    fn strictness(&self) -> Strictness {
        if self.cfg.strict {
            Strictness::Strict
        } else {
            Strictness::Lenient
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.path(name), contents.as_bytes())?;
        info!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn read(&self, name: &str, producer: &str) -> Result<String> {
        let p = self.require(name, producer)?;
        fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))
    }
}

fn require_path(p: &Path, hint: &str) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Missing {
            path: p.to_owned(),
            hint: hint.to_owned(),
        }
        .into())
    }
}

fn report_skipped(path: &Path, skipped: &[SkippedLine]) {
    for s in skipped.iter().take(5) {
        warn!("{}:{}: skipped malformed line: {}", path.display(), s.line, s.reason);
    }
    if skipped.len() > 5 {
        warn!("{}: {} malformed lines skipped in total", path.display(), skipped.len());
    }
}

pub fn run(command: &Command, cfg: &PipelineConfig) -> Result<()> {
    let _lock = WorkdirLock::acquire(&cfg.workdir)?;
    let w = Work { cfg };
    match command {
        Command::Ingest { .. } => ingest(&w),
        Command::DetectKeywords { .. } => detect(&w),
        Command::BuildEvents => build_events(&w),
        Command::ValidateEvents => validate_events(&w),
        Command::LearnCodebook => codebook(&w),
        Command::Vectorize => vectorize(&w),
        Command::ClusterTiers => cluster_tiers(&w),
        Command::ExportFigures => export_figures(&w),
        Command::ExtractFeatures => features(&w),
        Command::Compare { .. } => compare(&w),
        Command::Train { window, .. } => train(&w, *window),
        Command::Evaluate { window, .. } => evaluate(&w, *window),
        Command::Synth { raw } => synth(&w, *raw),
        Command::Stats => stats(&w),
    }
}

fn ingest(w: &Work) -> Result<()> {
    let input = w
        .cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("ingest needs a message file: pass --input or set `input`".into()))?;
    require_path(&input, "the message file named by `input`")?;
    let loaded = load_messages(&input, w.strictness())?;
    report_skipped(&input, &loaded.skipped);
    let mut messages = loaded.records;
    let loaded_n = messages.len() + loaded.skipped.len();
    let duplicates_removed = sort_and_dedup(&mut messages);
    let report = CleaningReport {
        loaded: loaded_n,
        skipped_malformed: loaded.skipped.len(),
        duplicates_removed,
        kept: messages.len(),
    };
    let mut out = AtomicLines::create(w.path(POOL))?;
    for m in &messages {
        out.line(&m.to_json_line())?;
    }
    out.commit()?;
    w.write("ingest_report.txt", &report.to_string())?;
    w.write("ingest_report.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    print!("{report}");
    Ok(())
}

fn detect(w: &Work) -> Result<()> {
    let path = w
        .cfg
        .headlines
        .clone()
        .ok_or_else(|| CliError::Usage("detect-keywords needs a headline file: pass --headlines or set `headlines`".into()))?;
    require_path(&path, "the headline file named by `headlines`")?;
    let loaded = load_headlines(&path, w.strictness())?;
    report_skipped(&path, &loaded.skipped);
    let stoplist = Stoplist::english();
    let stemmer = WordStemmer::english();
    let mut heads: Vec<Headline> = loaded
        .records
        .iter()
        .map(|r| preprocess_record(r, &stoplist, &stemmer))
        .collect();
    heads.sort_by(|a, b| {
        (a.timestamp, &a.source_account, &a.tokens).cmp(&(b.timestamp, &b.source_account, &b.tokens))
    });

    let batches: Vec<(u64, Vec<Headline>)> = batch_by_hour(&heads).into_iter().collect();
    let per_batch = batches
        .par_iter()
        .map(|(hour, batch)| {
            let docs: Vec<&Vec<String>> = batch.iter().map(|h| &h.tokens).collect();
            let itemsets = detect_keywords(&docs, w.cfg.itemsets, w.cfg.eta)?;
            Ok(top_keyword_pairs(&itemsets, w.cfg.pair_sets, *hour))
        })
        .collect::<vqevent::Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for p in per_batch.into_iter().flatten() {
        if seen.insert(p.clone()) {
            pairs.push(p);
        }
    }

    let mut tokens = String::new();
    for h in &heads {
        tokens += &serde_json::to_string(h)?;
        tokens.push('\n');
    }
    w.write(HEADLINE_TOKENS, &tokens)?;
    w.write(PAIRS, &store::pairs_csv(&pairs)?)?;
    println!("{} headlines in {} hourly batches -> {} keyword pairs", heads.len(), batches.len(), pairs.len());
    Ok(())
}

/// The components of one window after articulation splitting. Components
/// carry keywords and pairs only.
struct Window {
    day: NaiveDate,
    components: Vec<Component>,
    removed: Vec<String>,
}

type PairMessages = HashMap<KeywordPair, Vec<Message>>;

/// Windows plus the message set of every keyword pair, shared by
/// build-events and validate-events.
fn build_windows(w: &Work) -> Result<(Vec<Window>, PairMessages)> {
    let pairs = store::parse_pairs_csv(&w.read(PAIRS, "detect-keywords")?)?;
    let heads: Vec<Headline> = w
        .read(HEADLINE_TOKENS, "detect-keywords")?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .context("malformed headline_tokens.jsonl")?;
    let pool_path = w.require(POOL, "ingest")?;
    let pool = load_messages(&pool_path, Strictness::Strict)?.records;

    let graphs = window_pairs(&pairs, w.cfg.window_secs);
    let windows = graphs
        .par_iter()
        .map(|g| {
            let end = g.window_start + g.window_length;
            let docs: Vec<&Vec<String>> = heads
                .iter()
                .filter(|h| (g.window_start..end).contains(&h.timestamp))
                .map(|h| &h.tokens)
                .collect();
            let candidates: Vec<String> = if docs.is_empty() {
                Vec::new()
            } else {
                rank_articulation_words(&docs)?
                    .into_iter()
                    .take(w.cfg.articulation_top)
                    .map(|s| s.word)
                    .collect()
            };
            let mut components = Vec::new();
            let mut removed = Vec::new();
            for c in connected_components(g) {
                let split = split_on_articulation(&c, &candidates);
                components.extend(split.fragments);
                removed.extend(split.removed);
            }
            removed.sort();
            removed.dedup();
            Ok(Window {
                day: g.window_date(),
                components,
                removed,
            })
        })
        .collect::<vqevent::Result<Vec<_>>>()?;

    // stem -> positions in the pool, restricted to words used by some pair
    let wanted: HashSet<&str> = pairs.iter().flat_map(|p| p.words()).collect();
    let stoplist = Stoplist::english();
    let stemmer = WordStemmer::english();
    let tokens: Vec<Vec<String>> = pool
        .par_iter()
        .map(|m| {
            preprocess_headline(&m.text, &stoplist, &stemmer)
                .into_iter()
                .filter(|t| wanted.contains(t.as_str()))
                .collect()
        })
        .collect();
    let mut index: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, toks) in tokens.iter().enumerate() {
        for t in toks {
            index.entry(t.as_str()).or_default().push(i);
        }
    }
    let empty = Vec::new();
    let per_pair: PairMessages = pairs
        .par_iter()
        .map(|p| {
            let a: BTreeSet<usize> = index.get(p.first.as_str()).unwrap_or(&empty).iter().copied().collect();
            let msgs = index
                .get(p.second.as_str())
                .unwrap_or(&empty)
                .iter()
                .filter(|i| a.contains(i))
                .map(|&i| pool[i].clone())
                .collect();
            (p.clone(), msgs)
        })
        .collect();
    Ok((windows, per_pair))
}

/// Fills a fresh store directory, then swaps it in for `events/`.
fn replace_store(w: &Work, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let dir = w.path(EVENTS);
    let tmp = w.path(".events.tmp");
    let old = w.path(".events.old");
    for d in [&tmp, &old] {
        if d.exists() {
            fs::remove_dir_all(d).with_context(|| format!("cannot clear {}", d.display()))?;
        }
    }
    fs::create_dir_all(&tmp)?;
    fill(&tmp)?;
    if dir.exists() {
        fs::rename(&dir, &old)?;
    }
    fs::rename(&tmp, &dir).with_context(|| format!("cannot move events store into {}", dir.display()))?;
    if old.exists() {
        fs::remove_dir_all(&old)?;
    }
    info!("wrote {}", dir.display());
    Ok(())
}

fn build_events(w: &Work) -> Result<()> {
    let (windows, per_pair) = build_windows(w)?;
    let mut stoplist = Stoplist::english();
    let mut events = Vec::new();
    let mut ids = HashSet::new();
    let mut dropped = 0usize;
    for win in &windows {
        stoplist.extend(&win.removed);
        for c in &win.components {
            let merged = merge_messages(c, &per_pair)?;
            if merged.messages.len() < w.cfg.min_messages {
                dropped += 1;
                continue;
            }
            let base = c.event_id(win.day);
            let mut id = base.clone();
            let mut n = 1;
            while !ids.insert(id.clone()) {
                n += 1;
                id = format!("{base}-{n}");
            }
            let (event, _) = Event::new(id, merged.keywords, merged.messages, win.day)?;
            events.push(event);
        }
    }
    if dropped > 0 {
        info!("{dropped} components with fewer than {} messages dropped", w.cfg.min_messages);
    }
    replace_store(w, |tmp| {
        let lines = events
            .par_iter()
            .map(|e| write_event(tmp, e))
            .collect::<vqevent::Result<Vec<_>>>()?;
        Ok(write_events_index(tmp, &lines)?)
    })?;
    w.write("stopwords.txt", &stoplist.to_file_contents())?;
    println!("{} windows -> {} events", windows.len(), events.len());
    Ok(())
}

fn validate_events(w: &Work) -> Result<()> {
    let (windows, per_pair) = build_windows(w)?;
    let seeds: Vec<u64> = (0..w.cfg.validation_seeds as u64).map(|i| w.cfg.seed + i).collect();
    let stoplist = Stoplist::english();
    let rows = windows
        .par_iter()
        .filter(|win| {
            let keep = win.components.len() >= 2;
            if !keep {
                info!("window {} has fewer than two components; not validated", win.day);
            }
            keep
        })
        .map(|win| {
            let local: PairMessages = win
                .components
                .iter()
                .flat_map(|c| &c.pairs)
                .map(|p| (p.clone(), per_pair[p].clone()))
                .collect();
            let sample = sample_per_pair(&local, w.cfg.validation_sample, w.cfg.seed);
            validate_window(win.day, &win.components, &sample, &seeds, QualityOptions::default(), &stoplist)
        })
        .collect::<vqevent::Result<Vec<_>>>()?;
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    w.write("validation.csv", &store::validation_csv(&rows)?)?;
    println!("{} metric rows over {} windows", rows.len(), rows.len() / 7);
    Ok(())
}

fn open_events(w: &Work) -> Result<EventsStore> {
    w.require(&format!("{EVENTS}/{EVENTS_INDEX}"), "build-events` or `vqevent synth")?;
    let store = EventsStore::open(&w.path(EVENTS))?;
    if store.is_empty() {
        return Err(CliError::Usage("the events store is empty".into()).into());
    }
    Ok(store)
}

/// Applies `f` to every stored event in parallel, keeping store order.
fn map_events<T, F>(store: &EventsStore, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Event) -> vqevent::Result<T> + Sync,
{
    Ok((0..store.len())
        .into_par_iter()
        .map(|i| f(store.load(i)?))
        .collect::<vqevent::Result<Vec<_>>>()?)
}

/// Interarrival series after the stale head is dropped; empty ones skipped.
fn load_series(w: &Work) -> Result<Vec<InterarrivalSeries>> {
    let store = open_events(w)?;
    let hd = w.cfg.head_drop_fraction;
    let series = map_events(&store, |e| interarrivals(&drop_head_fraction(&e, hd)?))?;
    let (kept, empty): (Vec<_>, Vec<_>) = series.into_iter().partition(|s| !s.is_empty());
    for s in &empty {
        warn!("event `{}` has no messages after head-drop; skipped", s.event_id);
    }
    Ok(kept)
}

fn codebook(w: &Work) -> Result<()> {
    let series = load_series(w)?;
    let cb = learn_codebook(&series, w.cfg.k_codewords, w.cfg.seed)?;
    w.write(CODEBOOK, &cb.to_file_contents())?;
    println!("codebook of {} codewords from {} events", cb.k(), series.len());
    Ok(())
}

fn vectorize(w: &Work) -> Result<()> {
    let cb = Codebook::parse(&w.read(CODEBOOK, "learn-codebook")?)?;
    let series = load_series(w)?;
    let vectors = series
        .par_iter()
        .map(|s| quantize(s, &cb))
        .collect::<vqevent::Result<Vec<_>>>()?;
    w.write(VECTORS, &store::vectors_csv(&vectors)?)?;
    println!("{} event vectors of dimension {}", vectors.len(), cb.k());
    Ok(())
}

fn cluster_tiers(w: &Work) -> Result<()> {
    let vectors = store::parse_vectors_csv(&w.read(VECTORS, "vectorize")?)?;
    let tiers = cluster_events(&vectors, w.cfg.n_tiers, w.cfg.seed)?;
    w.write(TIERS, &store::tiers_csv(&tiers)?)?;

    let k = vectors[0].weights.len();
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["rank".to_owned(), "label".into(), "members".into(), "statistic".into()];
    header.extend((0..k).map(|i| format!("w{i}")));
    out.write_record(&header)?;
    for t in &tiers {
        let s = tier_summary(t, &vectors)?;
        for (stat, values) in [("mean", &s.mean), ("std", &s.std)] {
            let mut rec = vec![s.rank.to_string(), s.label.to_string(), s.members.to_string(), stat.to_owned()];
            rec.extend(values.iter().map(|x| x.to_string()));
            out.write_record(&rec)?;
        }
        println!("tier {} ({}): {} events, bin-0 weight {:.3}", t.rank, t.label, s.members, t.bin0());
    }
    w.write("tier_summary.csv", &String::from_utf8(out.into_inner()?)?)?;
    Ok(())
}

/// Rebuilds tiers from their saved assignments and the event vectors.
fn load_tiers(w: &Work, vectors: &[vqevent::vq_model::EventVector]) -> Result<Vec<ActivityTier>> {
    let assignments = store::parse_tiers_csv(&w.read(TIERS, "cluster-tiers")?)?;
    let by_id: HashMap<&str, &Vec<f64>> = vectors.iter().map(|v| (v.event_id.as_str(), &v.weights)).collect();
    let mut tiers: BTreeMap<usize, ActivityTier> = BTreeMap::new();
    for a in assignments {
        let t = tiers.entry(a.rank).or_insert_with(|| ActivityTier {
            rank: a.rank,
            label: a.label,
            member_ids: BTreeSet::new(),
            mean_vector: Vec::new(),
        });
        t.member_ids.insert(a.event_id);
    }
    for t in tiers.values_mut() {
        let members: Vec<&Vec<f64>> = t.member_ids.iter().filter_map(|id| by_id.get(id.as_str()).copied()).collect();
        if members.len() != t.member_ids.len() {
            return Err(CliError::Usage("tiers.csv names events missing from vectors.csv; rerun cluster-tiers".into()).into());
        }
        let k = members[0].len();
        t.mean_vector = (0..k)
            .map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64)
            .collect();
    }
    Ok(tiers.into_values().collect())
}

fn export_figures(w: &Work) -> Result<()> {
    let vectors = store::parse_vectors_csv(&w.read(VECTORS, "vectorize")?)?;
    let tiers = load_tiers(w, &vectors)?;
    let series = load_series(w)?;
    fs::create_dir_all(w.path("figures"))?;
    w.write("figures/heatmap.csv", &store::heatmap_csv(&tiers, &vectors)?)?;
    for t in &tiers {
        let stem = format!("{}_{}", t.rank, t.label);
        let cdf = cdf_export(t, &series)?;
        w.write(&format!("figures/cdf_{stem}.csv"), &store::cdf_csv(&cdf)?)?;
        let pooled = InterarrivalSeries {
            event_id: stem.clone(),
            deltas: series
                .iter()
                .filter(|s| t.member_ids.contains(&s.event_id))
                .flat_map(|s| s.deltas.iter().copied())
                .collect(),
        };
        let h = histogram_export(&pooled, w.cfg.bin_width, w.cfg.cutoff)?;
        w.write(&format!("figures/histogram_{stem}.csv"), &store::histogram_csv(&h)?)?;
    }
    println!("plotting data for {} tiers in {}", tiers.len(), w.path("figures").display());
    Ok(())
}

fn features_file(window: &str) -> String {
    format!("features_{window}.csv")
}

fn features(w: &Work) -> Result<()> {
    let store = open_events(w)?;
    let lexicon = Lexicon::english();
    let (hd, ef, early_first) = (w.cfg.head_drop_fraction, w.cfg.early_fraction, w.cfg.early_before_head_drop);
    let rows = map_events(&store, |e| {
        let trimmed = drop_head_fraction(&e, hd)?;
        let full = extract_features(&trimmed, FeatureWindow::Full, &lexicon)?;
        let early_base = if early_first { &e } else { &trimmed };
        let early = extract_features(early_base, FeatureWindow::Early(ef), &lexicon)?;
        Ok((full, early))
    })?;
    let (full, early): (Vec<FeatureVector>, Vec<FeatureVector>) = rows.into_iter().unzip();
    w.write(&features_file("full"), &store::features_csv(&full)?)?;
    w.write(&features_file("early"), &store::features_csv(&early)?)?;
    println!("{} features for {} events", feature_names().len(), full.len());
    Ok(())
}

/// Event id -> high-activity flag, from `--labels` or the top tier.
fn load_labels(w: &Work) -> Result<BTreeMap<String, bool>> {
    match &w.cfg.labels {
        Some(p) => {
            require_path(p, "the labels file named by `labels`")?;
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            Ok(parse_labels_csv(&text)?.into_iter().map(|l| (l.event_id, l.high)).collect())
        }
        None => {
            let text = w.read(TIERS, "cluster-tiers` or pass `--labels")?;
            Ok(store::parse_tiers_csv(&text)?
                .into_iter()
                .map(|a| (a.event_id, a.rank == 0))
                .collect())
        }
    }
}

fn labeled_features(w: &Work, window: &str) -> Result<Vec<LabeledExample>> {
    let fw = match window {
        "early" => FeatureWindow::Early(w.cfg.early_fraction),
        _ => FeatureWindow::Full,
    };
    let vectors = store::parse_features_csv(&w.read(&features_file(window), "extract-features")?, fw)?;
    let labels = load_labels(w)?;
    let mut unlabeled = 0usize;
    let examples: Vec<LabeledExample> = vectors
        .into_iter()
        .filter_map(|v| match labels.get(&v.event_id) {
            Some(&high) => Some(LabeledExample::new(v.event_id, v.values, high)),
            None => {
                unlabeled += 1;
                None
            }
        })
        .collect();
    if unlabeled > 0 {
        warn!("{unlabeled} events without a label ignored");
    }
    Ok(examples)
}

fn compare(w: &Work) -> Result<()> {
    let examples = labeled_features(w, "full")?;
    let to_vec = |e: &LabeledExample| FeatureVector {
        event_id: e.event_id.clone(),
        window: FeatureWindow::Full,
        values: e.features.clone(),
    };
    let high: Vec<FeatureVector> = examples.iter().filter(|e| e.label).map(to_vec).collect();
    let other: Vec<FeatureVector> = examples.iter().filter(|e| !e.label).map(to_vec).collect();
    let rows = compare_categories(&high, &other)?;
    w.write("comparison.csv", &store::comparison_csv(&rows)?)?;
    println!("{} high-activity vs {} other events; {} features compared", high.len(), other.len(), rows.len());
    Ok(())
}

fn train(w: &Work, window: WindowArg) -> Result<()> {
    let names: Vec<String> = feature_names().into_iter().map(str::to_owned).collect();
    for name in window.names() {
        let examples = labeled_features(w, name)?;
        let cfg = TrainConfig {
            l2: w.cfg.l2,
            seed: w.cfg.seed,
            positive_weight: w.cfg.positive_weight,
        };
        let model = train_with(&examples, &cfg)?.with_feature_names(names.clone())?;
        w.write(&format!("model_{name}.txt"), &model.to_file_contents())?;
        println!("{name}: model trained on {} events", examples.len());
    }
    Ok(())
}

fn evaluate(w: &Work, window: WindowArg) -> Result<()> {
    let split = SplitConfig {
        seed: w.cfg.seed,
        rounds: w.cfg.rounds,
        l2_grid: w.cfg.l2_grid.clone(),
        threshold: w.cfg.threshold,
        positive_weight: w.cfg.positive_weight,
    };
    for name in window.names() {
        let examples = labeled_features(w, name)?;
        let summary = split_and_run_with(&examples, &split)?;
        let mut body = summary.mean.to_csv();
        body += "\nround,l2,fp_rate,precision,recall,roc_area\n";
        for r in &summary.rounds {
            let m = &r.report;
            body += &format!("{},{},{:.3},{:.3},{:.3},{:.3}\n", r.round, r.l2, m.fp_rate, m.precision, m.recall, m.roc_area);
        }
        w.write(&format!("report_{name}.csv"), &body)?;
        println!("{name} window, mean of {} rounds:\n{}", summary.rounds.len(), summary.mean);
    }
    Ok(())
}

fn synth(w: &Work, raw: bool) -> Result<()> {
    let mut spec = GeneratorSpec {
        seed: w.cfg.seed,
        ..GeneratorSpec::default()
    };
    for (k, v) in &w.cfg.synth {
        spec.set(k, v).map_err(|e| CliError::Usage(format!("synth.{k}: {e}")))?;
    }
    let g = Generator::new(spec).map_err(|e| CliError::Usage(format!("synthetic corpus: {e}")))?;
    let mut messages = if raw {
        Some(AtomicLines::create(w.path("synth_messages.jsonl"))?)
    } else {
        None
    };
    let mut total = 0usize;
    replace_store(w, |tmp| {
        let mut lines = Vec::with_capacity(g.len());
        let indices: Vec<usize> = (0..g.len()).collect();
        // bounded batches keep memory flat on large corpora
        for chunk in indices.chunks(32) {
            let batch: Vec<Event> = chunk.par_iter().map(|&i| g.event(i).event).collect();
            lines.extend(
                batch
                    .par_iter()
                    .map(|e| write_event(tmp, e))
                    .collect::<vqevent::Result<Vec<_>>>()?,
            );
            for e in &batch {
                total += e.len();
                if let Some(out) = messages.as_mut() {
                    for m in e.messages() {
                        out.line(&m.to_json_line())?;
                    }
                }
            }
        }
        Ok(write_events_index(tmp, &lines)?)
    })?;
    if let Some(out) = messages {
        out.commit()?;
        let mut heads = AtomicLines::create(w.path("synth_headlines.jsonl"))?;
        for i in 0..g.len() {
            for h in g.headlines(i) {
                heads.line(&serde_json::to_string(&h)?)?;
            }
        }
        heads.commit()?;
        info!("wrote raw messages and headlines");
    }
    w.write(LABELS, &labels_csv(&g.labels()))?;
    let high = g.labels().iter().filter(|l| l.high).count();
    println!("{} events ({high} high-activity), {total} messages", g.len());
    Ok(())
}

fn stats(w: &Work) -> Result<()> {
    let store = open_events(w)?;
    let shapes = map_events(&store, |e| Ok(EventShape::of(&e)))?;
    let stats = dataset_stats_from_shapes(&shapes)?;
    w.write("stats.txt", &stats.to_string())?;
    w.write("stats.json", &(serde_json::to_string_pretty(&stats)? + "\n"))?;
    print!("{stats}");
    Ok(())
}
