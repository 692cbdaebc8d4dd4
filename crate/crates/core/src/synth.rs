//! Synthetic corpora with planted activity tiers and feature contrasts.
//!
//! Every event draws from its own random stream, so events can be
//! generated independently and in any order, including in parallel, with
//! identical results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::DateTime;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, LogNormal, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Event, HeadlineRecord, Message};
use crate::error::{Error, Result};
use crate::seeded_rng;

/// 2016-04-01T00:00:00Z.
pub const DEFAULT_START: u64 = 1_459_468_800;
const HASHTAG_PROB: f64 = 0.4;
const MENTION_PROB: f64 = 0.2;
const URL_PROB: f64 = 0.3;
const USER_SPACE: u64 = 100_000;

const FILLER: &[&str] = &[
    "report", "city", "people", "today", "update", "video", "photo", "police", "officials", "crowd", "street",
    "market", "school", "team", "minister", "vote", "morning", "night", "road", "river", "station", "storm",
    "game", "court", "bridge", "center", "office", "weather", "traffic", "power", "water", "price", "north",
    "south", "east", "west", "local", "region", "county", "state",
];
const POSITIVE: &[&str] = &["great", "happy", "love", "amazing", "hope", "excellent", "proud", "win"];
const NEGATIVE: &[&str] = &["sad", "terrible", "angry", "awful", "fear", "tragic", "worst", "hate"];

/// Interarrival distribution of a tier, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Law {
    Exponential { mean: f64 },
    /// Heavy-tailed alternative; requires `shape > 1` for a finite mean.
    Pareto { mean: f64, shape: f64 },
}

impl Law {
    pub fn mean(&self) -> f64 {
        match *self {
            Law::Exponential { mean } | Law::Pareto { mean, .. } => mean,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            Law::Pareto { mean, shape } => mean > 0.0 && mean.is_finite() && shape > 1.0 && shape.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid interarrival law {self:?}")))
        }
    }

    fn sampler(&self) -> Box<dyn Fn(&mut ChaCha8Rng) -> f64 + Send + Sync> {
        match *self {
            Law::Exponential { mean } => {
                let d = Exp::new(1.0 / mean).expect("validated");
                Box::new(move |r| d.sample(r))
            }
            Law::Pareto { mean, shape } => {
                // Pareto(scale, shape) starts at `scale`; shift so gaps can be near zero
                let scale = mean * (shape - 1.0) / shape;
                let d = Pareto::new(scale, shape).expect("validated");
                Box::new(move |r| d.sample(r) - scale)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    pub label: String,
    pub fraction: f64,
    pub law: Law,
}

/// Event properties that differ between the high tier and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Contrast {
    RetweetFraction,
    ReplyFraction,
    /// Number of distinct hashtags an event draws from.
    HashtagPool,
    MeanRetweetCount,
    PositiveFraction,
    NegativeFraction,
}

impl Contrast {
    pub const ALL: [Contrast; 6] = [
        Contrast::RetweetFraction,
        Contrast::ReplyFraction,
        Contrast::HashtagPool,
        Contrast::MeanRetweetCount,
        Contrast::PositiveFraction,
        Contrast::NegativeFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Contrast::RetweetFraction => "retweet_fraction",
            Contrast::ReplyFraction => "reply_fraction",
            Contrast::HashtagPool => "hashtag_pool",
            Contrast::MeanRetweetCount => "mean_retweet_count",
            Contrast::PositiveFraction => "positive_fraction",
            Contrast::NegativeFraction => "negative_fraction",
        }
    }
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Contrast {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Contrast::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown contrast `{s}`")))
    }
}

/// Log-normal message counts with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageCountLaw {
    pub median: f64,
    pub sigma: f64,
    pub min: usize,
}

impl Default for MessageCountLaw {
    fn default() -> Self {
        MessageCountLaw {
            median: 2474.0,
            sigma: 1.0,
            min: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_events: usize,
    pub tiers: Vec<TierSpec>,
    /// Label of the tier that counts as high activity.
    pub high_label: String,
    /// `(high tier value, other tiers value)`.
    pub contrasts: BTreeMap<Contrast, (f64, f64)>,
    pub message_count: MessageCountLaw,
    pub start: u64,
    /// Seconds between the starts of consecutive events.
    pub event_spacing: u64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        let contrasts = [
            (Contrast::RetweetFraction, (0.6, 0.3)),
            (Contrast::ReplyFraction, (0.05, 0.2)),
            (Contrast::HashtagPool, (5.0, 35.0)),
            (Contrast::MeanRetweetCount, (2.205, 1.473)),
            (Contrast::PositiveFraction, (0.15, 0.2)),
            (Contrast::NegativeFraction, (0.3, 0.15)),
        ]
        .into_iter()
        .collect();
        GeneratorSpec {
            n_events: 500,
            tiers: vec![
                TierSpec {
                    label: "high".into(),
                    fraction: 0.08,
                    law: Law::Exponential { mean: 1.0 },
                },
                TierSpec {
                    label: "low".into(),
                    fraction: 0.92,
                    law: Law::Exponential { mean: 600.0 },
                },
            ],
            high_label: "high".into(),
            contrasts,
            message_count: MessageCountLaw::default(),
            start: DEFAULT_START,
            event_spacing: 3600,
            seed: 0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{key}` expects a number, got `{value}`")))
}

impl GeneratorSpec {
    fn tier_mut(&mut self, label: &str) -> Result<&mut TierSpec> {
        self.tiers
            .iter_mut()
            .find(|t| t.label == label)
            .ok_or_else(|| Error::InvalidArgument(format!("no tier labelled `{label}`")))
    }

    /// Applies one `key=value` setting.
    ///
    /// Keys: `n_events`, `seed`, `start`, `event_spacing`,
    /// `median_messages`, `sigma_messages`, `min_messages`,
    /// `<tier>.fraction`, `<tier>.mean`, `<tier>.pareto_shape` (switches
    /// the tier to a Pareto law), and `contrast.<name>` with value
    /// `high,other`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_events" => self.n_events = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "start" => self.start = parse_num(key, value)?,
            "event_spacing" => self.event_spacing = parse_num(key, value)?,
            "median_messages" => self.message_count.median = parse_num(key, value)?,
            "sigma_messages" => self.message_count.sigma = parse_num(key, value)?,
            "min_messages" => self.message_count.min = parse_num(key, value)?,
            _ => {
                if let Some(name) = key.strip_prefix("contrast.") {
                    let c: Contrast = name.parse()?;
                    let (h, o) = value
                        .split_once(',')
                        .ok_or_else(|| Error::InvalidArgument(format!("`{key}` expects `high,other`")))?;
                    self.contrasts.insert(c, (parse_num(key, h)?, parse_num(key, o)?));
                } else if let Some((tier, field)) = key.split_once('.') {
                    let t = self.tier_mut(tier)?;
                    match field {
                        "fraction" => t.fraction = parse_num(key, value)?,
                        "mean" => {
                            let m = parse_num(key, value)?;
                            match &mut t.law {
                                Law::Exponential { mean } | Law::Pareto { mean, .. } => *mean = m,
                            }
                        }
                        "pareto_shape" => {
                            t.law = Law::Pareto {
                                mean: t.law.mean(),
                                shape: parse_num(key, value)?,
                            }
                        }
                        _ => return Err(Error::InvalidArgument(format!("unknown generator key `{key}`"))),
                    }
                } else {
                    return Err(Error::InvalidArgument(format!("unknown generator key `{key}`")));
                }
            }
        }
        Ok(())
    }

    fn contrast(&self, c: Contrast, high: bool) -> f64 {
        let default = GeneratorSpec::default();
        let (h, o) = self.contrasts.get(&c).or(default.contrasts.get(&c)).copied().expect("default has all");
        if high {
            h
        } else {
            o
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_events == 0 {
            return bad("n_events must be positive".into());
        }
        if self.tiers.is_empty() {
            return bad("at least one tier is required".into());
        }
        let total: f64 = self.tiers.iter().map(|t| t.fraction).sum();
        if (total - 1.0).abs() > 1e-9 || self.tiers.iter().any(|t| t.fraction.is_nan() || t.fraction < 0.0) {
            return bad(format!("tier fractions must be nonnegative and sum to 1, got {total}"));
        }
        let labels: BTreeSet<&str> = self.tiers.iter().map(|t| t.label.as_str()).collect();
        if labels.len() != self.tiers.len() {
            return bad("tier labels must be distinct".into());
        }
        for t in &self.tiers {
            t.law.validate()?;
        }
        let m = self.message_count;
        if !(m.median > 0.0 && m.sigma >= 0.0 && m.sigma.is_finite()) || m.min < 2 {
            return bad("message counts need median > 0, sigma >= 0 and min >= 2".into());
        }
        for high in [true, false] {
            let f = |c| self.contrast(c, high);
            let fractions = [
                Contrast::RetweetFraction,
                Contrast::ReplyFraction,
                Contrast::PositiveFraction,
                Contrast::NegativeFraction,
            ];
            if let Some(c) = fractions.into_iter().find(|&c| !(0.0..=1.0).contains(&f(c))) {
                return bad(format!("{c} must lie in [0, 1], got {}", f(c)));
            }
            if f(Contrast::RetweetFraction) + f(Contrast::ReplyFraction) > 1.0 {
                return bad("retweet and reply fractions together exceed 1".into());
            }
            if f(Contrast::PositiveFraction) + f(Contrast::NegativeFraction) > 1.0 {
                return bad("positive and negative fractions together exceed 1".into());
            }
            if f(Contrast::HashtagPool).is_nan() || f(Contrast::HashtagPool) < 1.0 {
                return bad("hashtag_pool must be at least 1".into());
            }
            if !(f(Contrast::MeanRetweetCount) >= 0.0 && f(Contrast::MeanRetweetCount).is_finite()) {
                return bad("mean_retweet_count must be finite and nonnegative".into());
            }
        }
        Ok(())
    }
}

/// Ground truth for one generated event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedLabel {
    pub event_id: String,
    pub tier: String,
    pub high: bool,
}

/// What the generator put into one event, for checking extractors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlantedCounts {
    pub retweets: usize,
    pub replies: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEvent {
    pub event: Event,
    pub label: PlantedLabel,
    pub planted: PlantedCounts,
}

/// Deterministic event factory for a validated spec.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    tier_of: Vec<usize>,
}

pub fn event_id(index: usize) -> String {
    format!("synth-{index:04}")
}

/// Keywords are letter-suffixed event numbers so they survive stemming
/// and never collide across events.
pub fn event_keywords(index: usize) -> [String; 2] {
    [format!("k{index:04}x"), format!("k{index:04}z")]
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        // exact tier sizes by largest remainder, then a seeded shuffle
        let n = spec.n_events;
        let mut sizes: Vec<usize> = spec.tiers.iter().map(|t| (t.fraction * n as f64).floor() as usize).collect();
        let mut order: Vec<usize> = (0..spec.tiers.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = spec.tiers[a].fraction * n as f64 - sizes[a] as f64;
            let rb = spec.tiers[b].fraction * n as f64 - sizes[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let short = n - sizes.iter().sum::<usize>();
        for &t in order.iter().take(short) {
            sizes[t] += 1;
        }
        let mut tier_of: Vec<usize> = sizes.iter().enumerate().flat_map(|(t, &s)| std::iter::repeat_n(t, s)).collect();
        use rand::seq::SliceRandom;
        tier_of.shuffle(&mut seeded_rng(spec.seed, 0));
        Ok(Generator { spec, tier_of })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.n_events
    }

    pub fn is_empty(&self) -> bool {
        self.spec.n_events == 0
    }

    pub fn label(&self, index: usize) -> PlantedLabel {
        let tier = &self.spec.tiers[self.tier_of[index]];
        PlantedLabel {
            event_id: event_id(index),
            tier: tier.label.clone(),
            high: tier.label == self.spec.high_label,
        }
    }

    pub fn labels(&self) -> Vec<PlantedLabel> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// Timestamps only, without building any message text.
    pub fn timestamps(&self, index: usize) -> Vec<u64> {
        let mut rng = seeded_rng(self.spec.seed, 1 + index as u64);
        self.draw_timestamps(index, &mut rng)
    }

    fn draw_timestamps(&self, index: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let m = self.spec.message_count;
        let n = if m.sigma > 0.0 {
            let d = LogNormal::new(m.median.ln(), m.sigma).expect("validated");
            (d.sample(rng).round() as usize).max(m.min)
        } else {
            (m.median.round() as usize).max(m.min)
        };
        let gap = self.spec.tiers[self.tier_of[index]].law.sampler();
        let start = self.start_of(index) as f64;
        let mut t = 0.0;
        (0..n)
            .map(|i| {
                if i > 0 {
                    t += gap(rng);
                }
                (start + t).floor() as u64
            })
            .collect()
    }

    fn start_of(&self, index: usize) -> u64 {
        self.spec.start + index as u64 * self.spec.event_spacing
    }

    /// Builds event `index` with its messages.
    pub fn event(&self, index: usize) -> SynthEvent {
        let mut rng = seeded_rng(self.spec.seed, 1 + index as u64);
        let timestamps = self.draw_timestamps(index, &mut rng);
        let label = self.label(index);
        let c = |k| self.spec.contrast(k, label.high);
        let (p_rt, p_reply) = (c(Contrast::RetweetFraction), c(Contrast::ReplyFraction));
        let (p_pos, p_neg) = (c(Contrast::PositiveFraction), c(Contrast::NegativeFraction));
        let pool = c(Contrast::HashtagPool).round() as usize;
        let rt_mean = c(Contrast::MeanRetweetCount);
        let rt_dist = Geometric::new(1.0 / (1.0 + rt_mean)).expect("validated");
        let fav_dist = Geometric::new(0.5).expect("constant");
        let [k1, k2] = event_keywords(index);

        let mut planted = PlantedCounts::default();
        let mut messages: Vec<Message> = Vec::with_capacity(timestamps.len());
        let mut authors: Vec<String> = Vec::with_capacity(timestamps.len());
        for (i, &ts) in timestamps.iter().enumerate() {
            let author_n = rng.random_range(0..USER_SPACE);
            let author = format!("user{author_n}");
            let mut words: Vec<String> = Vec::new();
            let mut mentions = Vec::new();
            let mut hashtags = Vec::new();
            let mut urls = Vec::new();
            let mut reply_to_id = None;

            let kind: f64 = rng.random();
            let is_retweet = i > 0 && kind < p_rt;
            let is_reply = i > 0 && !is_retweet && kind < p_rt + p_reply;
            if is_retweet || is_reply {
                let target = rng.random_range(0..i);
                let who = authors[target].clone();
                if is_retweet {
                    words.push("RT".into());
                    planted.retweets += 1;
                } else {
                    reply_to_id = Some(messages[target].id.clone());
                    planted.replies += 1;
                }
                words.push(format!("@{who}"));
                mentions.push(who);
            } else if rng.random_bool(MENTION_PROB) {
                let who = format!("user{}", rng.random_range(0..USER_SPACE));
                words.push(format!("@{who}"));
                mentions.push(who);
            }
            words.push(k1.clone());
            for _ in 0..rng.random_range(2..6) {
                words.push(FILLER.choose(&mut rng).expect("nonempty").to_string());
            }
            words.push(k2.clone());
            let mood: f64 = rng.random();
            if mood < p_pos {
                words.push(POSITIVE.choose(&mut rng).expect("nonempty").to_string());
                planted.positive += 1;
            } else if mood < p_pos + p_neg {
                words.push(NEGATIVE.choose(&mut rng).expect("nonempty").to_string());
                planted.negative += 1;
            }
            if rng.random_bool(HASHTAG_PROB) {
                let tag = format!("tag{index}_{}", rng.random_range(0..pool));
                words.push(format!("#{tag}"));
                hashtags.push(tag);
            }
            if rng.random_bool(URL_PROB) {
                let url = format!("http://example.com/{index}/{}", rng.random_range(0..3));
                words.push(url.clone());
                urls.push(url);
            }
            let mut m = Message::new(format!("{index}-{i}"), ts, words.join(" "));
            m.author_verified = author_n % 97 == 0;
            m.author = author.clone();
            m.is_retweet = is_retweet;
            m.retweet_count = rt_dist.sample(&mut rng);
            m.favorite_count = fav_dist.sample(&mut rng);
            m.reply_to_id = reply_to_id;
            m.mentions = mentions;
            m.hashtags = hashtags;
            m.urls = urls;
            authors.push(author);
            messages.push(m);
        }
        let date = DateTime::from_timestamp(self.start_of(index) as i64, 0)
            .expect("start fits a date")
            .date_naive();
        let (event, _) = Event::new(label.event_id.clone(), [k1, k2].into_iter().collect(), messages, date)
            .expect("two distinct keywords");
        SynthEvent { event, label, planted }
    }

    /// All events, generated in parallel.
    pub fn events(&self) -> Vec<SynthEvent> {
        (0..self.len()).into_par_iter().map(|i| self.event(i)).collect()
    }

    /// Three headlines per event, published in the hour the event starts.
    /// Each carries both keywords plus filler words not shared with the
    /// other two, so the keywords are exactly their common words.
    pub fn headlines(&self, index: usize) -> Vec<HeadlineRecord> {
        let mut rng = seeded_rng(self.spec.seed, u64::MAX - index as u64);
        let [k1, k2] = event_keywords(index);
        let start = self.start_of(index);
        let filler: Vec<&str> = FILLER.choose_multiple(&mut rng, 9).copied().collect();
        filler
            .chunks(3)
            .enumerate()
            .map(|(j, extra)| {
                let mut words = vec![k1.as_str()];
                words.extend_from_slice(extra);
                words.push(k2.as_str());
                HeadlineRecord {
                    timestamp: start - start % 3600 + j as u64 * 60,
                    account: format!("news{j}"),
                    text: words.join(" "),
                }
            })
            .collect()
    }
}

/// One-shot generation: every event and its planted label.
pub fn generate(spec: GeneratorSpec) -> Result<(Vec<Event>, Vec<PlantedLabel>)> {
    let g = Generator::new(spec)?;
    let (events, labels) = g.events().into_iter().map(|s| (s.event, s.label)).unzip();
    Ok((events, labels))
}

/// `event_id,tier,high` rows.
pub fn labels_csv(labels: &[PlantedLabel]) -> String {
    let mut s = String::from("event_id,tier,high\n");
    for l in labels {
        s += &format!("{},{},{}\n", l.event_id, l.tier, l.high);
    }
    s
}

pub fn parse_labels_csv(text: &str) -> Result<Vec<PlantedLabel>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, FeatureWindow, Lexicon};
    use crate::vq_model::{interarrivals, learn_codebook, quantize};

    fn small(n: usize) -> GeneratorSpec {
        GeneratorSpec {
            n_events: n,
            message_count: MessageCountLaw {
                median: 150.0,
                sigma: 0.3,
                min: 50,
            },
            ..GeneratorSpec::default()
        }
    }

    #[test]
    fn tier_sizes_are_exact() {
        let g = Generator::new(GeneratorSpec::default()).unwrap();
        assert_eq!(g.labels().iter().filter(|l| l.high).count(), 40);
    }

    #[test]
    fn deterministic_and_order_free() {
        let g = Generator::new(small(6)).unwrap();
        let a = g.events();
        let b: Vec<SynthEvent> = (0..6).rev().map(|i| g.event(i)).collect();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert_eq!(x, y);
        }
        assert_eq!(g.timestamps(3), a[3].event.messages().iter().map(|m| m.timestamp).collect::<Vec<_>>());
    }

    #[test]
    fn timestamps_sorted_and_counts_floored() {
        let g = Generator::new(small(20)).unwrap();
        for i in 0..20 {
            let ts = g.timestamps(i);
            assert!(ts.len() >= 50);
            assert!(ts.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn infeasible_contrasts_rejected() {
        let mut s = small(5);
        s.set("contrast.retweet_fraction", "1.2,0.3").unwrap();
        assert!(Generator::new(s).is_err());
        let mut s = small(5);
        s.set("contrast.retweet_fraction", "0.7,0.3").unwrap();
        s.set("contrast.reply_fraction", "0.5,0.1").unwrap();
        assert!(Generator::new(s).is_err());
        let mut s = small(5);
        s.set("high.fraction", "0.5").unwrap();
        assert!(Generator::new(s).is_err());
        assert!(small(5).set("bogus", "1").is_err());
        assert!(small(5).set("n_events", "x").is_err());
    }

    #[test]
    fn pareto_switch() {
        let mut s = small(4);
        s.set("low.pareto_shape", "1.5").unwrap();
        assert_eq!(s.tiers[1].law, Law::Pareto { mean: 600.0, shape: 1.5 });
        let g = Generator::new(s).unwrap();
        assert!(g.timestamps(0).windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn planted_sentiment_matches_extractor() {
        let mut s = small(1);
        s.message_count = MessageCountLaw { median: 100.0, sigma: 0.0, min: 100 };
        let g = Generator::new(s).unwrap();
        let e = g.event(0);
        assert_eq!(e.event.len(), 100);
        let (pos, neg) = crate::features::sentiment_counts(e.event.messages(), &Lexicon::english()).unwrap();
        assert_eq!((pos, neg), (e.planted.positive, e.planted.negative));
        let f = extract_features(&e.event, FeatureWindow::Full, &Lexicon::english()).unwrap();
        let rt = f.get("total_retweets").unwrap();
        assert!((rt - ((e.planted.retweets as f64).ln() - 100f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn all_high_mostly_near_zero_codeword() {
        let mix = Generator::new(small(60)).unwrap();
        let mix_series: Vec<_> = mix.events().iter().map(|e| interarrivals(&e.event).unwrap()).collect();
        let cb = learn_codebook(&mix_series, crate::vq_model::DEFAULT_K, 0).unwrap();
        let mut s = small(10);
        s.set("high.fraction", "1").unwrap();
        s.set("low.fraction", "0").unwrap();
        let g = Generator::new(s).unwrap();
        let series: Vec<_> = g.events().iter().map(|e| interarrivals(&e.event).unwrap()).collect();
        let total: f64 = series.iter().map(|s| s.len() as f64).sum();
        let mass: f64 = series
            .iter()
            .map(|s| quantize(s, &cb).unwrap().weights[0] * s.len() as f64)
            .sum::<f64>()
            / total;
        assert!(mass >= 0.6, "{mass}");
    }

    #[test]
    fn labels_round_trip() {
        let g = Generator::new(small(12)).unwrap();
        let csv = labels_csv(&g.labels());
        assert_eq!(parse_labels_csv(&csv).unwrap(), g.labels());
    }

    #[test]
    fn headlines_share_keywords() {
        let g = Generator::new(small(3)).unwrap();
        let h = g.headlines(2);
        assert_eq!(h.len(), 3);
        assert!(h.iter().all(|r| r.text.contains("k0002x") && r.text.contains("k0002z")));
    }
}
