//! Turning keyword pairs into events: connected components of the daily
//! keyword graph, splitting at articulation words, message merging and the
//! clustering-quality metrics used to validate the grouping.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use chrono::{DateTime, NaiveDate};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{sort_and_dedup, Message};
use crate::error::{Error, Result};
use crate::keyword_mining::{KeywordPair, BATCH_SECS};
use crate::seeded_rng;
use crate::text::{tokenize, Stoplist, WordStemmer};

/// Window length used to group keyword pairs into one graph.
pub const DAY_SECS: u64 = 86_400;

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

/// Keywords as nodes, keyword pairs as edges, over one time window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordGraph {
    nodes: BTreeSet<String>,
    edges: BTreeSet<KeywordPair>,
    pub window_start: u64,
    pub window_length: u64,
}

impl KeywordGraph {
    pub fn new(window_start: u64, window_length: u64) -> Self {
        KeywordGraph {
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
            window_start,
            window_length,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = KeywordPair>, window_start: u64, window_length: u64) -> Self {
        let mut g = Self::new(window_start, window_length);
        for p in pairs {
            g.add_edge(p);
        }
        g
    }

    pub fn add_node(&mut self, word: &str) {
        self.nodes.insert(word.to_owned());
    }

    pub fn add_edge(&mut self, pair: KeywordPair) {
        self.nodes.insert(pair.first.clone());
        self.nodes.insert(pair.second.clone());
        self.edges.insert(pair);
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<KeywordPair> {
        &self.edges
    }

    pub fn window_date(&self) -> NaiveDate {
        date_of(self.window_start)
    }
}

pub(crate) fn date_of(timestamp: u64) -> NaiveDate {
    DateTime::from_timestamp(timestamp as i64, 0)
        .map(|d| d.date_naive())
        .unwrap_or_default()
}

/// Groups pairs into UTC-midnight aligned windows of `window_length`
/// seconds, keyed by the batch start time.
pub fn window_pairs(pairs: &[KeywordPair], window_length: u64) -> Vec<KeywordGraph> {
    let mut windows: BTreeMap<u64, Vec<KeywordPair>> = BTreeMap::new();
    for p in pairs {
        let start = p.batch_hour * BATCH_SECS / window_length * window_length;
        windows.entry(start).or_default().push(p.clone());
    }
    windows
        .into_iter()
        .map(|(start, ps)| KeywordGraph::from_pairs(ps, start, window_length))
        .collect()
}

/// A connected group of keywords: one event candidate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Component {
    pub keywords: BTreeSet<String>,
    pub pairs: BTreeSet<KeywordPair>,
    pub messages: Vec<Message>,
}

impl Component {
    pub fn smallest_keyword(&self) -> Option<&str> {
        self.keywords.iter().next().map(String::as_str)
    }

    /// `<window date>_<smallest keyword>`.
    pub fn event_id(&self, date: NaiveDate) -> String {
        format!("{}_{}", date.format("%Y-%m-%d"), self.smallest_keyword().unwrap_or("empty"))
    }
}

fn components_of(nodes: &BTreeSet<String>, edges: &BTreeSet<KeywordPair>) -> Vec<Component> {
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut uf = UnionFind::new(nodes.len());
    for e in edges {
        uf.union(index[e.first.as_str()], index[e.second.as_str()]);
    }
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    let node_list: Vec<&String> = nodes.iter().collect();
    for (i, n) in node_list.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().keywords.insert((*n).clone());
    }
    for e in edges {
        let root = uf.find(index[e.first.as_str()]);
        groups.get_mut(&root).expect("root exists").pairs.insert(e.clone());
    }
    let mut comps: Vec<Component> = groups.into_values().collect();
    comps.sort_by(|a, b| a.smallest_keyword().cmp(&b.smallest_keyword()));
    comps
}

/// Maximal connected keyword sets, ordered by smallest keyword.
pub fn connected_components(graph: &KeywordGraph) -> Vec<Component> {
    components_of(&graph.nodes, &graph.edges)
}

/// Fragments of a component after articulation-word removal, plus the
/// words removed (to be appended to the stoplist).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitOutcome {
    pub fragments: Vec<Component>,
    pub removed: Vec<String>,
}

/// Repeatedly removes the highest-ranked candidate word whose removal
/// increases the number of connected pieces, recursing into the pieces
/// until none can be disconnected further.
///
/// Only words listed in `ranked_words` are candidates; passing the full
/// ranked vocabulary gives the exhaustive behaviour, passing its head
/// restricts splitting to likely articulation words. Pieces left with a
/// single keyword cannot describe an event and are dropped. Messages are
/// not carried over: re-merge them from the fragment pairs.
pub fn split_on_articulation(component: &Component, ranked_words: &[String]) -> SplitOutcome {
    let mut rank: HashMap<&str, usize> = HashMap::new();
    for (i, w) in ranked_words.iter().enumerate() {
        rank.entry(w.as_str()).or_insert(i);
    }
    let mut outcome = SplitOutcome::default();
    let mut pending = vec![Component {
        keywords: component.keywords.clone(),
        pairs: component.pairs.clone(),
        messages: Vec::new(),
    }];
    while let Some(comp) = pending.pop() {
        let mut candidates: Vec<&String> = comp.keywords.iter().filter(|w| rank.contains_key(w.as_str())).collect();
        candidates.sort_by_key(|w| (rank[w.as_str()], w.as_str()));

        let before = components_of(&comp.keywords, &comp.pairs).len();
        let split = candidates.into_iter().find_map(|w| {
            let mut nodes = comp.keywords.clone();
            nodes.remove(w);
            let edges: BTreeSet<KeywordPair> = comp
                .pairs
                .iter()
                .filter(|p| p.first != *w && p.second != *w)
                .cloned()
                .collect();
            let pieces = components_of(&nodes, &edges);
            (pieces.len() > before).then(|| (w.clone(), pieces))
        });
        match split {
            Some((word, pieces)) => {
                outcome.removed.push(word);
                // reversed so that pieces are processed in keyword order
                pending.extend(pieces.into_iter().filter(|p| p.keywords.len() >= 2).rev());
            }
            None => outcome.fragments.push(comp),
        }
    }
    outcome.fragments.sort_by(|a, b| a.smallest_keyword().cmp(&b.smallest_keyword()));
    outcome
}

/// Messages that contain both keywords of `pair` after headline-style
/// preprocessing. Stands in for a keyword search against a message pool.
pub fn select_pair_messages(pool: &[Message], pair: &KeywordPair, stoplist: &Stoplist, stemmer: &WordStemmer) -> Vec<Message> {
    pool.iter()
        .filter(|m| {
            let toks = crate::keyword_mining::preprocess_headline(&m.text, stoplist, stemmer);
            toks.contains(&pair.first) && toks.contains(&pair.second)
        })
        .cloned()
        .collect()
}

/// Union of the message sets of every pair, deduplicated by id and sorted
/// by timestamp.
pub fn merge_messages(component: &Component, per_pair: &HashMap<KeywordPair, Vec<Message>>) -> Result<Component> {
    let mut messages = Vec::new();
    for p in &component.pairs {
        let msgs = per_pair.get(p).ok_or_else(|| Error::MissingPair(p.to_string()))?;
        messages.extend(msgs.iter().cloned());
    }
    sort_and_dedup(&mut messages);
    Ok(Component {
        keywords: component.keywords.clone(),
        pairs: component.pairs.clone(),
        messages,
    })
}

/// Clustering criteria; see [`cluster_quality`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    I1,
    I2,
    E1,
    G1,
    G1Prime,
    H1,
    H2,
}

impl Metric {
    pub const ALL: [Metric; 7] = [Metric::I1, Metric::I2, Metric::E1, Metric::G1, Metric::G1Prime, Metric::H1, Metric::H2];

    pub fn name(self) -> &'static str {
        match self {
            Metric::I1 => "I1",
            Metric::I2 => "I2",
            Metric::E1 => "E1",
            Metric::G1 => "G1",
            Metric::G1Prime => "G1'",
            Metric::H1 => "H1",
            Metric::H2 => "H2",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::I1 | Metric::I2 | Metric::H1 | Metric::H2)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityOptions {
    /// Include `(u, u)` terms in the pair sums.
    pub include_self_pairs: bool,
}

impl Default for QualityOptions {
    fn default() -> Self {
        QualityOptions { include_self_pairs: true }
    }
}

/// Unit-length term-frequency vector of one message, ordered so that float
/// sums do not depend on hash order.
type UnitVec = BTreeMap<String, f64>;

fn unit_tf(text: &str, stoplist: &Stoplist) -> Option<UnitVec> {
    let mut tf: UnitVec = BTreeMap::new();
    for t in tokenize(text) {
        if !stoplist.contains(&t) {
            *tf.entry(t).or_insert(0.0) += 1.0;
        }
    }
    let norm = tf.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    tf.values_mut().for_each(|v| *v /= norm);
    Some(tf)
}

fn add_into(acc: &mut UnitVec, v: &UnitVec) {
    for (k, x) in v {
        *acc.entry(k.clone()).or_insert(0.0) += x;
    }
}

fn dot(a: &UnitVec, b: &UnitVec) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum()
}

/// Per-cluster similarity sums; cosine similarity of term-frequency vectors.
struct ClusterSums {
    n: f64,
    /// sum over ordered (u, v) in S_i x S_i
    within: f64,
    /// sum over v in S_i, u in S
    to_all: f64,
}

/// Pairwise cosine sums computed through composite vectors: for unit
/// vectors, `sum_{u in A, v in B} cos(u, v) = (sum_A u) . (sum_B v)`.
fn cluster_sums(components: &[Component], options: QualityOptions, stoplist: &Stoplist) -> Vec<ClusterSums> {
    let clusters: Vec<Vec<UnitVec>> = components
        .iter()
        .map(|c| c.messages.iter().filter_map(|m| unit_tf(&m.text, stoplist)).collect::<Vec<_>>())
        .filter(|docs: &Vec<UnitVec>| {
            if docs.is_empty() {
                log::warn!("component without any message text excluded from clustering metrics");
            }
            !docs.is_empty()
        })
        .collect();
    let composites: Vec<UnitVec> = clusters
        .iter()
        .map(|docs| {
            let mut acc = UnitVec::new();
            docs.iter().for_each(|d| add_into(&mut acc, d));
            acc
        })
        .collect();
    let mut total = UnitVec::new();
    composites.iter().for_each(|c| add_into(&mut total, c));

    clusters
        .iter()
        .zip(&composites)
        .map(|(docs, comp)| {
            let n = docs.len() as f64;
            let mut within = dot(comp, comp);
            let mut to_all = dot(comp, &total);
            if !options.include_self_pairs {
                // every unit vector has self-similarity 1
                within -= n;
                to_all -= n;
            }
            ClusterSums { n, within, to_all }
        })
        .collect()
}

/// Evaluates a clustering criterion over the messages of `components`,
/// one document per message.
///
/// * `I1 = sum_i (1/n_i) sum_{u,v in S_i} sim(u, v)`
/// * `I2 = sum_i sqrt(sum_{u,v in S_i} sim(u, v))`
/// * `E1 = sum_i n_i * sum_{v in S_i, u in S} sim(u, v) / sqrt(sum_{u,v in S_i} sim(u, v))`
/// * `G1 = sum_i sum_{v in S_i, u in S \ S_i} sim(u, v) / sum_{u,v in S_i} sim(u, v)`
/// * `G1' = sum_i n_i^2 * (same ratio as G1)`
/// * `H1 = I1 / E1`, `H2 = I2 / E1`
///
/// Components without message text are excluded with a warning.
pub fn cluster_quality(components: &[Component], metric: Metric, options: QualityOptions, stoplist: &Stoplist) -> f64 {
    let sums = cluster_sums(components, options, stoplist);
    quality_from_sums(&sums, metric)
}

/// All seven criteria at once, in [`Metric::ALL`] order.
pub fn cluster_quality_all(components: &[Component], options: QualityOptions, stoplist: &Stoplist) -> Vec<(Metric, f64)> {
    let sums = cluster_sums(components, options, stoplist);
    Metric::ALL.iter().map(|&m| (m, quality_from_sums(&sums, m))).collect()
}

fn quality_from_sums(sums: &[ClusterSums], metric: Metric) -> f64 {
    let i1 = || sums.iter().map(|s| s.within / s.n).sum::<f64>();
    let i2 = || sums.iter().map(|s| s.within.max(0.0).sqrt()).sum::<f64>();
    let e1 = || sums.iter().map(|s| s.n * s.to_all / s.within.sqrt()).sum::<f64>();
    let g1_terms = || sums.iter().map(|s| ((s.to_all - s.within) / s.within, s.n));
    match metric {
        Metric::I1 => i1(),
        Metric::I2 => i2(),
        Metric::E1 => e1(),
        Metric::G1 => g1_terms().map(|(r, _)| r).sum(),
        Metric::G1Prime => g1_terms().map(|(r, n)| n * n * r).sum(),
        Metric::H1 => i1() / e1(),
        Metric::H2 => i2() / e1(),
    }
}

/// Randomly partitions `pairs` into components of the given sizes
/// (counted in pairs). The partition is a pure function of `seed`.
pub fn random_component_baseline(pairs: &[KeywordPair], sizes: &[usize], seed: u64) -> Result<Vec<Component>> {
    let total: usize = sizes.iter().sum();
    if total != pairs.len() || sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "sizes {sizes:?} cannot partition {} keyword pairs",
            pairs.len()
        )));
    }
    let mut shuffled = pairs.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut seeded_rng(seed, 0));
    let mut out = Vec::with_capacity(sizes.len());
    let mut rest = shuffled.as_slice();
    for &s in sizes {
        let (chunk, tail) = rest.split_at(s);
        rest = tail;
        let mut c = Component::default();
        for p in chunk {
            c.keywords.insert(p.first.clone());
            c.keywords.insert(p.second.clone());
            c.pairs.insert(p.clone());
        }
        out.push(c);
    }
    Ok(out)
}

/// Draws the same number of messages from every pair so that no pair
/// dominates; pairs with fewer messages contribute all of theirs.
pub fn sample_per_pair(per_pair: &HashMap<KeywordPair, Vec<Message>>, per_pair_count: usize, seed: u64) -> HashMap<KeywordPair, Vec<Message>> {
    let mut keys: Vec<&KeywordPair> = per_pair.keys().collect();
    keys.sort();
    keys.into_iter()
        .enumerate()
        .map(|(i, k)| {
            let mut msgs = per_pair[k].clone();
            msgs.sort_by(|a, b| a.id.cmp(&b.id));
            msgs.shuffle(&mut seeded_rng(seed, i as u64 + 1));
            msgs.truncate(per_pair_count);
            (k.clone(), msgs)
        })
        .collect()
}

/// One line of the validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub day: NaiveDate,
    pub metric: Metric,
    pub true_value: f64,
    pub baseline_mean: f64,
}

/// Scores the true components of one window against size-matched random
/// components averaged over `seeds`, using one shared message sample.
pub fn validate_window(
    day: NaiveDate,
    components: &[Component],
    sample: &HashMap<KeywordPair, Vec<Message>>,
    seeds: &[u64],
    options: QualityOptions,
    stoplist: &Stoplist,
) -> Result<Vec<ValidationRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("validation needs at least one baseline seed".into()));
    }
    let merged: Vec<Component> = components.iter().map(|c| merge_messages(c, sample)).collect::<Result<_>>()?;
    let truth = cluster_quality_all(&merged, options, stoplist);

    let pairs: Vec<KeywordPair> = components.iter().flat_map(|c| c.pairs.iter().cloned()).collect();
    let sizes: Vec<usize> = components.iter().map(|c| c.pairs.len()).collect();
    let mut baseline = vec![0.0; Metric::ALL.len()];
    for &seed in seeds {
        let random = random_component_baseline(&pairs, &sizes, seed)?;
        let merged: Vec<Component> = random.iter().map(|c| merge_messages(c, sample)).collect::<Result<_>>()?;
        for (acc, (_, v)) in baseline.iter_mut().zip(cluster_quality_all(&merged, options, stoplist)) {
            *acc += v / seeds.len() as f64;
        }
    }
    Ok(truth
        .into_iter()
        .zip(baseline)
        .map(|((metric, true_value), baseline_mean)| ValidationRow {
            day,
            metric,
            true_value,
            baseline_mean,
        })
        .collect())
}

/// Words appearing in more than one component, for diagnostics.
pub fn shared_keywords(components: &[Component]) -> BTreeSet<String> {
    let mut seen = HashSet::new();
    let mut shared = BTreeSet::new();
    for c in components {
        for k in &c.keywords {
            if !seen.insert(k.clone()) {
                shared.insert(k.clone());
            }
        }
    }
    shared
}
