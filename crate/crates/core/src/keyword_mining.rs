//! Keyword pairs from hourly headline batches, plus the maxtf-idf score used
//! to find articulation words: frequent filler words ("live", "says") that
//! would otherwise glue unrelated events together.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Headline, HeadlineRecord};
use crate::error::{Error, Result};
use crate::text::{tokenize, Stoplist, WordStemmer};

/// Default minimum overlap between two headlines.
pub const DEFAULT_ETA: usize = 2;
/// Item sets contributing a search pair per batch.
pub const DEFAULT_PAIR_SETS: usize = 6;
/// Headline batch length in seconds.
pub const BATCH_SECS: u64 = 3600;

/// Lowercase, strip punctuation, drop stopwords, stem and deduplicate.
///
/// A token is dropped when either its surface form or its stem is in the
/// stoplist, so learned articulation words (stored stemmed) also apply.
pub fn preprocess_headline(text: &str, stoplist: &Stoplist, stemmer: &WordStemmer) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for tok in tokenize(text) {
        if stoplist.contains(&tok) {
            continue;
        }
        let stem = stemmer.stem(&tok);
        if stem.is_empty() || stoplist.contains(&stem) {
            continue;
        }
        if seen.insert(stem.clone()) {
            out.push(stem);
        }
    }
    out
}

pub fn preprocess_record(record: &HeadlineRecord, stoplist: &Stoplist, stemmer: &WordStemmer) -> Headline {
    Headline {
        timestamp: record.timestamp,
        source_account: record.account.clone(),
        tokens: preprocess_headline(&record.text, stoplist, stemmer),
    }
}

/// Groups headlines into wall-clock hour batches keyed by `timestamp / 3600`.
pub fn batch_by_hour(headlines: &[Headline]) -> BTreeMap<u64, Vec<Headline>> {
    let mut batches: BTreeMap<u64, Vec<Headline>> = BTreeMap::new();
    for h in headlines {
        batches.entry(h.timestamp / BATCH_SECS).or_default().push(h.clone());
    }
    batches
}

/// A group of keywords accumulated from overlapping headlines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemSet {
    pub words: BTreeSet<String>,
    pub word_scores: BTreeMap<String, u64>,
    pub total_score: u64,
}

impl ItemSet {
    fn new(words: BTreeSet<String>) -> Self {
        let word_scores = words.iter().map(|w| (w.clone(), 1)).collect();
        let total_score = words.len() as u64;
        ItemSet {
            words,
            word_scores,
            total_score,
        }
    }

    /// Narrow to `common` and credit every surviving word once.
    fn merge(&mut self, common: &BTreeSet<String>) {
        self.words = self.words.intersection(common).cloned().collect();
        self.word_scores.retain(|w, _| common.contains(w));
        for w in &self.words {
            *self.word_scores.entry(w.clone()).or_insert(0) += 1;
        }
        self.total_score = self.word_scores.values().sum();
    }

    /// The two highest-scoring words, ties broken lexicographically.
    pub fn top_two(&self) -> Option<(&str, &str)> {
        let mut ranked: Vec<(&String, &u64)> = self.word_scores.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        match ranked.as_slice() {
            [a, b, ..] => Some((a.0.as_str(), b.0.as_str())),
            _ => None,
        }
    }
}

/// Frequent-itemset style keyword detection over one batch of headlines.
///
/// Headlines are deduplicated and visited in sorted order, so the result
/// does not depend on input order. Every pair of headlines sharing at least
/// `eta` words yields a common set `G`; `G` is merged (by intersection) into
/// the existing item set overlapping it most when that overlap is at least
/// `eta`, and otherwise starts a new item set. Returns the `k` best item
/// sets by total score; ties go to the earlier-created set.
pub fn detect_keywords<S: AsRef<[String]>>(headlines: &[S], k: usize, eta: usize) -> Result<Vec<ItemSet>> {
    if eta < 2 {
        return Err(Error::InvalidArgument(format!("eta must be at least 2, got {eta}")));
    }
    let sets: BTreeSet<BTreeSet<String>> = headlines
        .iter()
        .map(|h| h.as_ref().iter().cloned().collect())
        .collect();
    let sets: Vec<BTreeSet<String>> = sets.into_iter().collect();

    let mut itemsets: Vec<ItemSet> = Vec::new();
    for (a, ha) in sets.iter().enumerate() {
        for hb in &sets[a + 1..] {
            let common: BTreeSet<String> = ha.intersection(hb).cloned().collect();
            if common.len() < eta {
                continue;
            }
            // first maximum wins, i.e. the earliest-created set on ties
            let best = itemsets
                .iter()
                .enumerate()
                .map(|(j, s)| (j, s.words.intersection(&common).count()))
                .fold(None, |acc: Option<(usize, usize)>, (j, o)| match acc {
                    Some((_, bo)) if bo >= o => acc,
                    _ => Some((j, o)),
                });
            match best {
                Some((j, overlap)) if overlap >= eta => itemsets[j].merge(&common),
                _ => itemsets.push(ItemSet::new(common)),
            }
        }
    }

    let mut order: Vec<usize> = (0..itemsets.len()).collect();
    order.sort_by(|&a, &b| itemsets[b].total_score.cmp(&itemsets[a].total_score).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order.into_iter().map(|i| itemsets[i].clone()).collect())
}

/// Two keywords used together as one search query.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeywordPair {
    pub first: String,
    pub second: String,
    pub batch_hour: u64,
}

impl KeywordPair {
    /// Canonical pair: `first < second`. Fails on identical words.
    pub fn new(a: &str, b: &str, batch_hour: u64) -> Result<Self> {
        let (first, second) = match a.cmp(b) {
            std::cmp::Ordering::Less => (a, b),
            std::cmp::Ordering::Greater => (b, a),
            std::cmp::Ordering::Equal => {
                return Err(Error::InvalidArgument(format!("keyword pair needs two distinct words, got `{a}` twice")))
            }
        };
        Ok(KeywordPair {
            first: first.to_owned(),
            second: second.to_owned(),
            batch_hour,
        })
    }

    pub fn words(&self) -> [&str; 2] {
        [&self.first, &self.second]
    }
}

impl fmt::Display for KeywordPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}@{}", self.first, self.second, self.batch_hour)
    }
}

/// The two best words of each of the first `n_sets` item sets.
pub fn top_keyword_pairs(itemsets: &[ItemSet], n_sets: usize, batch_hour: u64) -> Vec<KeywordPair> {
    itemsets
        .iter()
        .take(n_sets)
        .filter_map(|s| s.top_two())
        .filter_map(|(a, b)| KeywordPair::new(a, b, batch_hour).ok())
        .collect()
}

fn counts(doc: &[String]) -> HashMap<&str, usize> {
    let mut c = HashMap::new();
    for w in doc {
        *c.entry(w.as_str()).or_insert(0) += 1;
    }
    c
}

/// Term statistics over a corpus, reusable across many maxtf-idf queries.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    docs: usize,
    doc_freq: HashMap<String, usize>,
    max_freq: HashMap<String, usize>,
}

impl CorpusIndex {
    pub fn new<D: AsRef<[String]>>(corpus: &[D]) -> Self {
        let mut doc_freq = HashMap::new();
        let mut max_freq: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            for (w, c) in counts(doc.as_ref()) {
                *doc_freq.entry(w.to_owned()).or_insert(0) += 1;
                let m = max_freq.entry(w.to_owned()).or_insert(0);
                *m = (*m).max(c);
            }
        }
        CorpusIndex {
            docs: corpus.len(),
            doc_freq,
            max_freq,
        }
    }

    /// `maxtf(t, d, D) * idf(t, D)` with
    /// `maxtf = 0.5 + (0.5 + max_{d'} f(t, d')) / max_{w in d} f(w, d)` and
    /// `idf = ln(N / |{d : t in d}|)`.
    ///
    /// The numerator takes the term's largest raw frequency anywhere in the
    /// corpus, independent of `doc`.
    pub fn maxtf_idf(&self, term: &str, doc: &[String]) -> Result<f64> {
        let doc_max = counts(doc)
            .into_values()
            .max()
            .ok_or_else(|| Error::Empty("maxtf-idf needs a nonempty document".into()))?;
        let df = *self
            .doc_freq
            .get(term)
            .ok_or_else(|| Error::TermAbsent(term.to_owned()))?;
        let corpus_max = self.max_freq[term] as f64;
        let maxtf = 0.5 + (0.5 + corpus_max) / doc_max as f64;
        let idf = (self.docs as f64 / df as f64).ln();
        Ok(maxtf * idf)
    }
}

/// See [`CorpusIndex::maxtf_idf`].
pub fn maxtf_idf<D: AsRef<[String]>>(term: &str, doc: &[String], corpus: &[D]) -> Result<f64> {
    CorpusIndex::new(corpus).maxtf_idf(term, doc)
}

/// A vocabulary word with its normalized `1 - maxtf-idf` score.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulationScore {
    pub word: String,
    pub score: f64,
}

/// Ranks the vocabulary by min-max normalized `1 - maxtf-idf`, highest
/// (most articulation-like) first; ties lexicographic.
///
/// A word's maxtf-idf is its largest value over the documents containing
/// it. When every word scores the same, each gets 1.
pub fn rank_articulation_words<D: AsRef<[String]>>(corpus: &[D]) -> Result<Vec<ArticulationScore>> {
    if corpus.is_empty() {
        return Err(Error::Empty("articulation ranking needs at least one document".into()));
    }
    let index = CorpusIndex::new(corpus);
    let mut raw: BTreeMap<&str, f64> = BTreeMap::new();
    for doc in corpus {
        let doc = doc.as_ref();
        if doc.is_empty() {
            continue;
        }
        for w in doc {
            let s = index.maxtf_idf(w, doc)?;
            let e = raw.entry(w.as_str()).or_insert(f64::NEG_INFINITY);
            *e = e.max(s);
        }
    }
    let lo = raw.values().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut ranked: Vec<ArticulationScore> = raw
        .into_iter()
        .map(|(w, s)| {
            let normalized = if span > 0.0 { (s - lo) / span } else { 0.0 };
            ArticulationScore {
                word: w.to_owned(),
                score: 1.0 - normalized,
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.word.cmp(&b.word)));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn preprocess_examples() {
        let stop = Stoplist::from_words(["at", "the"]);
        let st = WordStemmer::english();
        assert_eq!(preprocess_headline("Nelson Mandela dies at 95", &stop, &st), ["nelson", "mandela", "die", "95"]);
        assert!(preprocess_headline("", &stop, &st).is_empty());
        assert!(preprocess_headline("THE the The", &stop, &st).is_empty());
        assert_eq!(preprocess_headline("Dies, dies, DIES!", &stop, &st), ["die"]);
    }

    #[test]
    fn learned_stems_are_removed() {
        let stop = Stoplist::from_words(["say"]);
        let st = WordStemmer::english();
        assert_eq!(preprocess_headline("Obama says Syria", &stop, &st), ["obama", "syria"]);
    }

    #[test]
    fn detect_two_headlines() {
        let hs = vec![doc(&["nelson", "mandela", "dies"]), doc(&["nelson", "mandela", "dead"])];
        let sets = detect_keywords(&hs, 6, 2).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].words, ["mandela", "nelson"].iter().map(|s| s.to_string()).collect());
        assert_eq!(sets[0].total_score, 2);
    }

    #[test]
    fn detect_disjoint_and_degenerate() {
        let hs = vec![doc(&["a", "b"]), doc(&["c", "d"])];
        assert!(detect_keywords(&hs, 6, 2).unwrap().is_empty());
        assert!(detect_keywords(&hs[..1], 6, 2).unwrap().is_empty());
        assert!(detect_keywords(&hs, 6, 1).is_err());
    }

    #[test]
    fn merge_only_sharpens() {
        // {a,b,c} from the first pair, then {a,b,d}∩... narrows to {a,b}
        let hs = vec![doc(&["a", "b", "c", "x"]), doc(&["a", "b", "c", "y"]), doc(&["a", "b", "z"])];
        let sets = detect_keywords(&hs, 6, 2).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].words.len(), 2);
        assert!(sets[0].word_scores.keys().all(|w| sets[0].words.contains(w)));
    }

    #[test]
    fn top_pairs() {
        let set = ItemSet {
            words: ["nelson", "mandela", "dies"].iter().map(|s| s.to_string()).collect(),
            word_scores: [("nelson", 5), ("mandela", 5), ("dies", 1)]
                .iter()
                .map(|(w, s)| (w.to_string(), *s))
                .collect(),
            total_score: 11,
        };
        let pairs = top_keyword_pairs(std::slice::from_ref(&set), 6, 7);
        assert_eq!(pairs, [KeywordPair::new("mandela", "nelson", 7).unwrap()]);
        assert!(top_keyword_pairs(&[], 6, 0).is_empty());
        let many = vec![set; 8];
        assert_eq!(top_keyword_pairs(&many, 6, 0).len(), 6);
    }

    #[test]
    fn pair_is_canonical() {
        let p = KeywordPair::new("syria", "obama", 1).unwrap();
        assert_eq!((p.first.as_str(), p.second.as_str()), ("obama", "syria"));
        assert!(KeywordPair::new("a", "a", 1).is_err());
    }

    #[test]
    fn maxtf_idf_examples() {
        let corpus = vec![doc(&["live", "fire"]), doc(&["live", "vote"])];
        assert_eq!(maxtf_idf("live", &corpus[0], &corpus).unwrap(), 0.0);
        assert_eq!(maxtf_idf("live", &corpus[1], &corpus).unwrap(), 0.0);
        let fire = maxtf_idf("fire", &corpus[0], &corpus).unwrap();
        assert!((fire - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(matches!(maxtf_idf("absent", &corpus[0], &corpus), Err(Error::TermAbsent(_))));
        assert!(maxtf_idf("live", &[], &corpus).is_err());
    }

    #[test]
    fn maxtf_with_repeated_terms() {
        // doc max frequency 3, term's corpus max frequency 3
        let d = doc(&["x", "x", "x", "y"]);
        let corpus = vec![d.clone(), doc(&["y"])];
        let got = maxtf_idf("x", &d, &corpus).unwrap();
        let expected = (0.5 + 3.5 / 3.0) * 2f64.ln();
        assert!((got - expected).abs() < 1e-12);
        assert!((0.5f64 + 3.5 / 3.0 - 1.666_666_666_666_7).abs() < 1e-12);
    }

    #[test]
    fn articulation_ranking_basics() {
        let corpus = vec![doc(&["live", "fire"]), doc(&["live", "vote"]), doc(&["live", "harvard"])];
        let r = rank_articulation_words(&corpus).unwrap();
        assert_eq!(r[0].word, "live");
        assert_eq!(r[0].score, 1.0);

        let single = vec![doc(&["only"])];
        let r = rank_articulation_words(&single).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].score, 1.0);
        assert!(rank_articulation_words::<Vec<String>>(&[]).is_err());
    }

    /// Independent scorer: recomputes every quantity from scratch per word.
    fn brute_force_rank(corpus: &[Vec<String>]) -> Vec<String> {
        let n = corpus.len() as f64;
        let vocab: BTreeSet<&String> = corpus.iter().flatten().collect();
        let mut scores: Vec<(String, f64)> = vocab
            .iter()
            .map(|&t| {
                let df = corpus.iter().filter(|d| d.contains(t)).count() as f64;
                let cmax = corpus.iter().map(|d| d.iter().filter(|w| *w == t).count()).max().unwrap() as f64;
                let best = corpus
                    .iter()
                    .filter(|d| d.contains(t))
                    .map(|d| {
                        let dmax = d.iter().map(|w| d.iter().filter(|v| *v == w).count()).max().unwrap() as f64;
                        (0.5 + (0.5 + cmax) / dmax) * (n / df).ln()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                (t.clone(), best)
            })
            .collect();
        // ascending maxtf-idf == descending normalized 1 - maxtf-idf
        scores.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        scores.into_iter().map(|(w, _)| w).collect()
    }

    #[test]
    fn articulation_ranking_matches_brute_force() {
        let corpus = vec![
            doc(&["live", "harvard", "evacuated", "harvard"]),
            doc(&["live", "xinjiang", "attack", "police"]),
            doc(&["says", "obama", "syria", "says"]),
            doc(&["says", "live", "update", "oscar"]),
            doc(&["obama", "syria", "strike", "update", "update", "update"]),
        ];
        let r: Vec<String> = rank_articulation_words(&corpus).unwrap().into_iter().map(|s| s.word).collect();
        assert_eq!(r, brute_force_rank(&corpus));
    }

    proptest! {
        #[test]
        fn maxtf_bounds(docs in prop::collection::vec(prop::collection::vec(0u8..6, 1..8), 1..6)) {
            let corpus: Vec<Vec<String>> = docs.iter().map(|d| d.iter().map(|c| format!("w{c}")).collect()).collect();
            let index = CorpusIndex::new(&corpus);
            for d in &corpus {
                for t in d {
                    let s = index.maxtf_idf(t, d).unwrap();
                    prop_assert!(s >= 0.0);
                }
            }
            let ranked = rank_articulation_words(&corpus).unwrap();
            let mut words: Vec<String> = ranked.into_iter().map(|s| s.word).collect();
            words.sort();
            let vocab: Vec<String> = corpus.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
            prop_assert_eq!(words, vocab);
        }

        #[test]
        fn detected_pairs_come_from_intersections(hs in prop::collection::vec(prop::collection::btree_set(0u8..8, 2..5), 2..8)) {
            let heads: Vec<Vec<String>> = hs.iter().map(|h| h.iter().map(|c| format!("w{c}")).collect()).collect();
            let sets = detect_keywords(&heads, 6, 2).unwrap();
            for p in top_keyword_pairs(&sets, 6, 0) {
                let ok = heads.iter().enumerate().any(|(i, a)| heads[i + 1..].iter().any(|b| {
                    a.contains(&p.first) && a.contains(&p.second) && b.contains(&p.first) && b.contains(&p.second)
                }));
                prop_assert!(ok);
            }
        }
    }
}
