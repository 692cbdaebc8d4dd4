//! Per-event feature catalog and group comparisons between high-activity
//! events and the rest.
//!
//! Most features are a raw count `x` normalized by another count `y` as
//! `ln(x) - ln(y)`; zero counts are replaced by `1e-8` first so every
//! value stays finite. Sentiment features use the plain ratio `x / y`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::early_window;
use crate::corpus::{Event, Message};
use crate::error::{Error, Result};
use crate::stats::welch_t_test;
use crate::text::tokenize;

/// Substitute for zero counts before normalizing.
pub const ZERO_REPLACEMENT: f64 = 1e-8;

const DEFAULT_LEXICON: &str = include_str!("../data/sentiment_lexicon.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Normalization {
    None,
    LogRatio(Raw),
    Ratio(Raw),
}

/// Raw per-window counts feeding the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Raw {
    ComponentSize,
    TotalSeconds,
    Tweets,
    Retweets,
    TweetsRetweeted,
    RetweetsMostRetweeted,
    Mentions,
    UniqueMentions,
    TweetsWithMention,
    TweetsWithTopMention,
    Hashtags,
    UniqueHashtags,
    TweetsWithHashtag,
    TweetsWithTopHashtag,
    Urls,
    UniqueUrls,
    TweetsWithUrl,
    TweetsWithTopUrl,
    UniqueVerifiedUsers,
    VerifiedUsers,
    UniqueUsers,
    Replies,
    TweetsFirstReplied,
    UniqueUsersReplied,
    TweetsReplied,
    Words,
    UniqueWords,
    Characters,
    RtCount,
    FavCount,
    Positive,
    Negative,
}

/// Feature names in catalog order with their normalization.
const CATALOG: [(&str, Raw, Normalization); 32] = {
    use Normalization::*;
    use Raw::*;
    [
        ("component_size", ComponentSize, None),
        ("total_seconds", TotalSeconds, LogRatio(Tweets)),
        ("total_tweets", Tweets, None),
        ("total_retweets", Retweets, LogRatio(Tweets)),
        ("total_tweets_retweeted", TweetsRetweeted, LogRatio(Tweets)),
        ("retweets_most_retweeted", RetweetsMostRetweeted, LogRatio(Retweets)),
        ("total_mentions", Mentions, LogRatio(Tweets)),
        ("total_unique_mentions", UniqueMentions, LogRatio(Mentions)),
        ("total_tweets_with_mention", TweetsWithMention, LogRatio(Tweets)),
        ("total_tweets_with_mostfrequent_mention", TweetsWithTopMention, LogRatio(TweetsWithMention)),
        ("total_hashtags", Hashtags, LogRatio(Tweets)),
        ("total_unique_hashtags", UniqueHashtags, LogRatio(Hashtags)),
        ("total_tweets_with_hashtag", TweetsWithHashtag, LogRatio(Tweets)),
        ("total_tweets_with_mostfrequent_hashtag", TweetsWithTopHashtag, LogRatio(TweetsWithHashtag)),
        ("total_urls", Urls, LogRatio(Tweets)),
        ("total_unique_urls", UniqueUrls, LogRatio(Urls)),
        ("total_tweets_with_url", TweetsWithUrl, LogRatio(Tweets)),
        ("total_tweets_with_mostfrequent_url", TweetsWithTopUrl, LogRatio(TweetsWithUrl)),
        ("total_unique_verified_users", UniqueVerifiedUsers, LogRatio(VerifiedUsers)),
        ("total_verified_users", VerifiedUsers, LogRatio(Tweets)),
        ("total_unique_users", UniqueUsers, LogRatio(Tweets)),
        ("total_replies", Replies, LogRatio(UniqueUsers)),
        ("total_tweets_first_replied", TweetsFirstReplied, LogRatio(Tweets)),
        ("total_unique_users_replied", UniqueUsersReplied, LogRatio(UniqueUsers)),
        ("total_tweets_replied", TweetsReplied, LogRatio(Tweets)),
        ("total_words", Words, LogRatio(Tweets)),
        ("total_unique_words", UniqueWords, LogRatio(Words)),
        ("total_characters", Characters, LogRatio(Tweets)),
        ("total_rt_count", RtCount, LogRatio(Tweets)),
        ("total_fav_count", FavCount, LogRatio(Tweets)),
        ("total_positive_sentiment", Positive, Ratio(Tweets)),
        ("total_negative_sentiment", Negative, Ratio(Tweets)),
    ]
};

/// Names of every feature, in column order.
pub fn feature_names() -> Vec<&'static str> {
    CATALOG.iter().map(|(n, _, _)| *n).collect()
}

pub fn feature_index(name: &str) -> Option<usize> {
    CATALOG.iter().position(|(n, _, _)| *n == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Word polarity list. Lines are `word +1` or `word -1`; `#` starts a
/// comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    words: HashMap<String, Polarity>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(word), Some(pol)) = (parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("lexicon line {}: expected `word polarity`", i + 1)));
            };
            let polarity = match pol {
                "+1" | "1" | "+" | "positive" => Polarity::Positive,
                "-1" | "-" | "negative" => Polarity::Negative,
                other => return Err(Error::Parse(format!("lexicon line {}: unknown polarity `{other}`", i + 1))),
            };
            words.insert(word.to_lowercase(), polarity);
        }
        Ok(Lexicon { words })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The small English list bundled with the crate.
    pub fn english() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }

    pub fn from_pairs<I: IntoIterator<Item = (S, Polarity)>, S: Into<String>>(pairs: I) -> Self {
        Lexicon {
            words: pairs.into_iter().map(|(w, p)| (w.into(), p)).collect(),
        }
    }

    pub fn polarity(&self, word: &str) -> Option<Polarity> {
        self.words.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Messages with strictly more positive than negative lexicon tokens count
/// as positive, and vice versa; the rest are neutral.
pub fn sentiment_counts(messages: &[Message], lexicon: &Lexicon) -> Result<(usize, usize)> {
    if lexicon.is_empty() {
        return Err(Error::Empty("sentiment lexicon has no entries".into()));
    }
    let mut pos = 0;
    let mut neg = 0;
    for m in messages {
        let (mut p, mut n) = (0usize, 0usize);
        for tok in tokenize(&m.text) {
            match lexicon.polarity(&tok) {
                Some(Polarity::Positive) => p += 1,
                Some(Polarity::Negative) => n += 1,
                None => {}
            }
        }
        if p > n {
            pos += 1;
        } else if n > p {
            neg += 1;
        }
    }
    Ok((pos, neg))
}

/// Which part of an event the features describe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureWindow {
    Full,
    /// The earliest fraction of messages by count.
    Early(f64),
}

impl fmt::Display for FeatureWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureWindow::Full => f.write_str("full"),
            FeatureWindow::Early(x) => write!(f, "early({x})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub event_id: String,
    pub window: FeatureWindow,
    /// In [`feature_names`] order.
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    /// `(name, value)` pairs in catalog order.
    pub fn named(&self) -> BTreeMap<&'static str, f64> {
        feature_names().into_iter().zip(self.values.iter().copied()).collect()
    }
}

fn most_frequent_count<'a>(lists: impl Iterator<Item = &'a [String]>) -> (usize, usize, usize, usize) {
    // (total entities, unique entities, messages with any, messages with the top entity)
    let lists: Vec<&[String]> = lists.collect();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0;
    for l in &lists {
        total += l.len();
        for e in l.iter() {
            *freq.entry(e.as_str()).or_insert(0) += 1;
        }
    }
    let with_any = lists.iter().filter(|l| !l.is_empty()).count();
    // BTreeMap iteration makes the lexicographically smallest entity win ties
    let top = freq.iter().fold(None, |best: Option<(&str, usize)>, (e, &c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((e, c)),
    });
    let with_top = top.map_or(0, |(e, _)| lists.iter().filter(|l| l.iter().any(|x| x == e)).count());
    (total, freq.len(), with_any, with_top)
}

fn raw_counts(event: &Event, messages: &[Message], lexicon: &Lexicon) -> Result<HashMap<Raw, f64>> {
    use Raw::*;
    let n = messages.len();
    let mut r = HashMap::new();
    let mut put = |k: Raw, v: usize| {
        r.insert(k, v as f64);
    };
    put(ComponentSize, event.keywords.len());
    put(TotalSeconds, (messages[n - 1].timestamp - messages[0].timestamp) as usize);
    put(Tweets, n);
    put(Retweets, messages.iter().filter(|m| m.is_retweet).count());
    put(TweetsRetweeted, messages.iter().filter(|m| !m.is_retweet && m.retweet_count > 0).count());
    put(RetweetsMostRetweeted, messages.iter().map(|m| m.retweet_count).max().unwrap_or(0) as usize);

    let (t, u, w, top) = most_frequent_count(messages.iter().map(|m| m.mentions.as_slice()));
    put(Mentions, t);
    put(UniqueMentions, u);
    put(TweetsWithMention, w);
    put(TweetsWithTopMention, top);
    let (t, u, w, top) = most_frequent_count(messages.iter().map(|m| m.hashtags.as_slice()));
    put(Hashtags, t);
    put(UniqueHashtags, u);
    put(TweetsWithHashtag, w);
    put(TweetsWithTopHashtag, top);
    let (t, u, w, top) = most_frequent_count(messages.iter().map(|m| m.urls.as_slice()));
    put(Urls, t);
    put(UniqueUrls, u);
    put(TweetsWithUrl, w);
    put(TweetsWithTopUrl, top);

    let verified: Vec<&Message> = messages.iter().filter(|m| m.author_verified).collect();
    put(VerifiedUsers, verified.len());
    put(UniqueVerifiedUsers, verified.iter().map(|m| &m.author).collect::<HashSet<_>>().len());
    put(UniqueUsers, messages.iter().map(|m| &m.author).collect::<HashSet<_>>().len());

    let replies: Vec<&Message> = messages.iter().filter(|m| m.reply_to_id.is_some()).collect();
    let reply_ids: HashSet<&str> = replies.iter().map(|m| m.id.as_str()).collect();
    put(Replies, replies.len());
    put(
        TweetsFirstReplied,
        replies
            .iter()
            .filter(|m| !reply_ids.contains(m.reply_to_id.as_deref().unwrap_or_default()))
            .count(),
    );
    put(UniqueUsersReplied, replies.iter().map(|m| &m.author).collect::<HashSet<_>>().len());
    put(TweetsReplied, replies.iter().filter_map(|m| m.reply_to_id.as_deref()).collect::<HashSet<_>>().len());

    let mut words = 0;
    let mut vocab = BTreeSet::new();
    let mut chars = 0;
    for m in messages {
        let toks = tokenize(&m.text);
        words += toks.len();
        vocab.extend(toks);
        chars += m.text.chars().count();
    }
    put(Words, words);
    put(UniqueWords, vocab.len());
    put(Characters, chars);
    put(RtCount, messages.iter().map(|m| m.retweet_count).sum::<u64>() as usize);
    put(FavCount, messages.iter().map(|m| m.favorite_count).sum::<u64>() as usize);

    let (pos, neg) = sentiment_counts(messages, lexicon)?;
    put(Positive, pos);
    put(Negative, neg);
    Ok(r)
}

fn nonzero(x: f64) -> f64 {
    if x == 0.0 {
        ZERO_REPLACEMENT
    } else {
        x
    }
}

/// Computes the whole catalog for `event` restricted to `window`.
pub fn extract_features(event: &Event, window: FeatureWindow, lexicon: &Lexicon) -> Result<FeatureVector> {
    let scoped;
    let messages = match window {
        FeatureWindow::Full => event.messages(),
        FeatureWindow::Early(f) => {
            scoped = early_window(event, f)?;
            scoped.messages()
        }
    };
    if messages.is_empty() {
        return Err(Error::Empty(format!("event `{}` has no messages in the {window} window", event.event_id)));
    }
    let raw = raw_counts(event, messages, lexicon)?;
    let values = CATALOG
        .iter()
        .map(|(_, x, norm)| {
            let x = raw[x];
            match norm {
                Normalization::None => x,
                Normalization::LogRatio(y) => nonzero(x).ln() - nonzero(raw[y]).ln(),
                Normalization::Ratio(y) => nonzero(x) / nonzero(raw[y]),
            }
        })
        .collect();
    Ok(FeatureVector {
        event_id: event.event_id.clone(),
        window,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub feature_name: String,
    pub mean_high: f64,
    pub mean_other: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

/// Welch two-tailed t-test of every feature, high-activity vs the rest,
/// sorted by ascending p-value (ties by catalog order).
pub fn compare_categories(high: &[FeatureVector], other: &[FeatureVector]) -> Result<Vec<ComparisonRow>> {
    if high.is_empty() || other.is_empty() {
        return Err(Error::Empty("both groups need at least one event".into()));
    }
    let column = |vs: &[FeatureVector], j: usize| -> Vec<f64> { vs.iter().map(|v| v.values[j]).collect() };
    let mut rows: Vec<ComparisonRow> = feature_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let r = welch_t_test(&column(high, j), &column(other, j)).expect("groups are nonempty");
            ComparisonRow {
                feature_name: name.to_owned(),
                mean_high: r.mean_a,
                mean_other: r.mean_b,
                t_statistic: r.t,
                p_value: r.p_value,
            }
        })
        .collect();
    // stable sort keeps catalog order among equal p-values
    rows.sort_by(|a, b| a.p_value.total_cmp(&b.p_value));
    Ok(rows)
}
