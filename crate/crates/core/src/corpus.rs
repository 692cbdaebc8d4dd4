//! Messages, headlines and events: the data model, line-delimited ingestion
//! and the cleaning steps applied before any modelling.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::text::scan_entities;

/// One timestamped social post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    /// UTC seconds since the epoch.
    pub timestamp: u64,
    pub text: String,
    pub author: String,
    pub is_retweet: bool,
    pub retweet_count: u64,
    pub favorite_count: u64,
    pub reply_to_id: Option<String>,
    pub mentions: Vec<String>,
    pub hashtags: Vec<String>,
    pub urls: Vec<String>,
    pub author_verified: bool,
}

impl Message {
    /// A plain message with no engagement metadata.
    pub fn new(id: impl Into<String>, timestamp: u64, text: impl Into<String>) -> Self {
        Message {
            id: id.into(),
            timestamp,
            text: text.into(),
            author: String::new(),
            is_retweet: false,
            retweet_count: 0,
            favorite_count: 0,
            reply_to_id: None,
            mentions: Vec::new(),
            hashtags: Vec::new(),
            urls: Vec::new(),
            author_verified: false,
        }
    }

    /// Parses one line-delimited record. Unknown fields are ignored.
    ///
    /// `id`, `timestamp`, `text` and `author` are required. Entity lists
    /// absent from the record are recovered by scanning the text.
    pub fn from_json_line(line: &str) -> std::result::Result<Self, String> {
        let raw: RawMessage = serde_json::from_str(line).map_err(|e| e.to_string())?;
        raw.into_message()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("message serialization is infallible")
    }
}

#[derive(Deserialize)]
struct RawMessage {
    id: Option<Value>,
    timestamp: Option<Value>,
    text: Option<String>,
    author: Option<String>,
    #[serde(default)]
    is_retweet: bool,
    #[serde(default)]
    retweet_count: u64,
    #[serde(default)]
    favorite_count: u64,
    #[serde(default)]
    reply_to_id: Option<Value>,
    mentions: Option<Vec<String>>,
    hashtags: Option<Vec<String>>,
    urls: Option<Vec<String>>,
    #[serde(default)]
    author_verified: bool,
}

impl RawMessage {
    fn into_message(self) -> std::result::Result<Message, String> {
        let id = self
            .id
            .as_ref()
            .and_then(id_string)
            .ok_or("missing or empty `id`")?;
        let timestamp = parse_timestamp(self.timestamp.as_ref().ok_or("missing `timestamp`")?)?;
        let text = self.text.ok_or("missing `text`")?;
        let author = self.author.ok_or("missing `author`")?;
        let reply_to_id = self.reply_to_id.as_ref().and_then(id_string);

        let scanned = if self.mentions.is_none() || self.hashtags.is_none() || self.urls.is_none() {
            scan_entities(&text)
        } else {
            Default::default()
        };
        let clean = |v: Option<Vec<String>>, fallback: Vec<String>| -> Vec<String> {
            v.unwrap_or(fallback)
                .into_iter()
                .map(|s| s.trim().to_owned())
                .filter(|s| !s.is_empty())
                .collect()
        };

        Ok(Message {
            id,
            timestamp,
            author,
            is_retweet: self.is_retweet,
            retweet_count: self.retweet_count,
            favorite_count: self.favorite_count,
            reply_to_id,
            mentions: clean(self.mentions, scanned.mentions),
            hashtags: clean(self.hashtags, scanned.hashtags),
            urls: clean(self.urls, scanned.urls),
            author_verified: self.author_verified,
            text,
        })
    }
}

fn id_string(v: &Value) -> Option<String> {
    let s = match v {
        Value::String(s) => s.trim().to_owned(),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    (!s.is_empty()).then_some(s)
}

/// Integer seconds, fractional seconds (truncated) or an RFC 3339 string,
/// all normalized to UTC seconds.
fn parse_timestamp(v: &Value) -> std::result::Result<u64, String> {
    match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                Ok(u)
            } else {
                match n.as_f64() {
                    Some(f) if f >= 0.0 && f.is_finite() => Ok(f.trunc() as u64),
                    _ => Err(format!("negative or invalid timestamp {n}")),
                }
            }
        }
        Value::String(s) => {
            let dt = DateTime::parse_from_rfc3339(s.trim())
                .map_err(|e| format!("bad timestamp `{s}`: {e}"))?;
            u64::try_from(dt.timestamp()).map_err(|_| format!("timestamp `{s}` precedes the epoch"))
        }
        other => Err(format!("timestamp has unsupported type: {other}")),
    }
}

/// How ingestion treats malformed lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strictness {
    /// Skip and count.
    #[default]
    Lenient,
    /// Fail on the first malformed line.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadOutcome<T> {
    pub records: Vec<T>,
    pub skipped: Vec<SkippedLine>,
}

fn load_lines<T>(
    path: &Path,
    strictness: Strictness,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<LoadOutcome<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse(&line) {
            Ok(r) => records.push(r),
            Err(reason) => {
                if strictness == Strictness::Strict {
                    return Err(Error::Malformed {
                        path: path.to_owned(),
                        line: idx + 1,
                        reason,
                    });
                }
                skipped.push(SkippedLine {
                    line: idx + 1,
                    reason,
                });
            }
        }
    }
    Ok(LoadOutcome { records, skipped })
}

/// Reads line-delimited message records in file order.
pub fn load_messages(path: &Path, strictness: Strictness) -> Result<LoadOutcome<Message>> {
    load_lines(path, strictness, Message::from_json_line)
}

/// A raw headline record as published by a news account.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadlineRecord {
    pub timestamp: u64,
    pub account: String,
    pub text: String,
}

/// A preprocessed headline: normalized, stopword-free, stemmed tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Headline {
    pub timestamp: u64,
    pub source_account: String,
    pub tokens: Vec<String>,
}

pub fn load_headlines(path: &Path, strictness: Strictness) -> Result<LoadOutcome<HeadlineRecord>> {
    load_lines(path, strictness, |line| {
        #[derive(Deserialize)]
        struct Raw {
            timestamp: Value,
            account: String,
            text: String,
        }
        let raw: Raw = serde_json::from_str(line).map_err(|e| e.to_string())?;
        Ok(HeadlineRecord {
            timestamp: parse_timestamp(&raw.timestamp)?,
            account: raw.account,
            text: raw.text,
        })
    })
}

/// One real-world occurrence: its keywords and its messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub event_id: String,
    pub keywords: BTreeSet<String>,
    messages: Vec<Message>,
    pub collected_date: NaiveDate,
}

/// Counts produced while cleaning messages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub loaded: usize,
    pub skipped_malformed: usize,
    pub duplicates_removed: usize,
    pub kept: usize,
}

impl CleaningReport {
    pub fn absorb(&mut self, other: &CleaningReport) {
        self.loaded += other.loaded;
        self.skipped_malformed += other.skipped_malformed;
        self.duplicates_removed += other.duplicates_removed;
        self.kept += other.kept;
    }
}

impl fmt::Display for CleaningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records loaded:      {}", self.loaded)?;
        writeln!(f, "malformed skipped:   {}", self.skipped_malformed)?;
        writeln!(f, "duplicate ids:       {}", self.duplicates_removed)?;
        writeln!(f, "messages kept:       {}", self.kept)
    }
}

/// Stable sort by timestamp, then drop repeated ids keeping the first.
/// Returns the number of duplicates removed.
pub fn sort_and_dedup(messages: &mut Vec<Message>) -> usize {
    messages.sort_by_key(|m| m.timestamp);
    let before = messages.len();
    let mut seen = HashSet::with_capacity(messages.len());
    messages.retain(|m| seen.insert(m.id.clone()));
    before - messages.len()
}

impl Event {
    /// Builds an event, sorting messages by timestamp and removing repeated
    /// ids. Requires at least two keywords.
    pub fn new(
        event_id: impl Into<String>,
        keywords: BTreeSet<String>,
        mut messages: Vec<Message>,
        collected_date: NaiveDate,
    ) -> Result<(Self, CleaningReport)> {
        let event_id = event_id.into();
        if keywords.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "event `{event_id}` needs at least two keywords, got {}",
                keywords.len()
            )));
        }
        let loaded = messages.len();
        let duplicates_removed = sort_and_dedup(&mut messages);
        let report = CleaningReport {
            loaded,
            skipped_malformed: 0,
            duplicates_removed,
            kept: messages.len(),
        };
        Ok((
            Event {
                event_id,
                keywords,
                messages,
                collected_date,
            },
            report,
        ))
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Seconds between the first and last message.
    pub fn duration_secs(&self) -> u64 {
        match (self.messages.first(), self.messages.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0,
        }
    }

    /// Same event restricted to `messages[range]`; order is preserved.
    pub(crate) fn with_slice(&self, range: std::ops::Range<usize>) -> Event {
        Event {
            event_id: self.event_id.clone(),
            keywords: self.keywords.clone(),
            messages: self.messages[range].to_vec(),
            collected_date: self.collected_date,
        }
    }
}

/// `ceil(fraction * n)` computed so that products like `0.07 * 100` that
/// land a hair above an integer do not round up.
pub fn ceil_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let c = (x - 1e-9 * x.abs().max(1.0)).ceil();
    (c.max(0.0) as usize).min(n)
}

/// Removes the earliest `ceil(fraction * n)` messages, discarding stale
/// posts returned by retrospective search. `fraction` must lie in `[0, 1)`.
pub fn drop_head_fraction(event: &Event, fraction: f64) -> Result<Event> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "head-drop fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let n = event.len();
    Ok(event.with_slice(ceil_count(fraction, n)..n))
}

/// Minimum, mean, median (lower middle for even counts) and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        Some(Summary {
            min: sorted[0],
            mean: sorted.iter().sum::<f64>() / n as f64,
            median: sorted[(n - 1) / 2],
            max: sorted[n - 1],
        })
    }
}

/// Collection-level description of a set of events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub events: usize,
    pub total_messages: usize,
    pub messages: Summary,
    pub keywords: Summary,
    pub duration_hours: Summary,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "events: {}  messages: {}", self.events, self.total_messages)?;
        writeln!(
            f,
            "{:<28}{:>12}{:>12}{:>12}{:>12}",
            "statistic", "minimum", "mean", "median", "maximum"
        )?;
        for (name, s) in [
            ("# of posts (per event)", &self.messages),
            ("# of keywords (per event)", &self.keywords),
            ("event duration (hours)", &self.duration_hours),
        ] {
            writeln!(
                f,
                "{:<28}{:>12.2}{:>12.2}{:>12.2}{:>12.2}",
                name, s.min, s.mean, s.median, s.max
            )?;
        }
        Ok(())
    }
}

pub fn dataset_stats(events: &[Event]) -> Result<DatasetStats> {
    let shapes: Vec<EventShape> = events.iter().map(EventShape::of).collect();
    dataset_stats_from_shapes(&shapes)
}

/// The per-event quantities behind [`DatasetStats`], so statistics can be
/// gathered without keeping every event in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventShape {
    pub messages: usize,
    pub keywords: usize,
    pub duration_secs: u64,
}

impl EventShape {
    pub fn of(e: &Event) -> Self {
        EventShape {
            messages: e.len(),
            keywords: e.keywords.len(),
            duration_secs: e.duration_secs(),
        }
    }
}

pub fn dataset_stats_from_shapes(shapes: &[EventShape]) -> Result<DatasetStats> {
    if shapes.is_empty() {
        return Err(Error::Empty("dataset statistics need at least one event".into()));
    }
    let counts: Vec<f64> = shapes.iter().map(|e| e.messages as f64).collect();
    let keywords: Vec<f64> = shapes.iter().map(|e| e.keywords as f64).collect();
    let hours: Vec<f64> = shapes.iter().map(|e| e.duration_secs as f64 / 3600.0).collect();
    Ok(DatasetStats {
        events: shapes.len(),
        total_messages: shapes.iter().map(|e| e.messages).sum(),
        messages: Summary::of(&counts).expect("nonempty"),
        keywords: Summary::of(&keywords).expect("nonempty"),
        duration_hours: Summary::of(&hours).expect("nonempty"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 12, 5).unwrap()
    }

    fn kw(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn event_with(timestamps: &[u64]) -> Event {
        let msgs = timestamps
            .iter()
            .enumerate()
            .map(|(i, &t)| Message::new(format!("m{i}"), t, "x"))
            .collect();
        Event::new("e", kw(&["a", "b"]), msgs, date()).unwrap().0
    }

    const GOOD: &str = r#"{"id":"1","timestamp":100,"text":"hi @Bob #News","author":"a"}"#;

    #[test]
    fn loads_valid_lines() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for i in 0..3 {
            writeln!(f, r#"{{"id":"{i}","timestamp":{i},"text":"t","author":"a","extra":1}}"#).unwrap();
        }
        let out = load_messages(f.path(), Strictness::Lenient).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn skips_line_missing_timestamp() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{GOOD}").unwrap();
        writeln!(f, r#"{{"id":"2","text":"t","author":"a"}}"#).unwrap();
        writeln!(f, r#"{{"id":"3","timestamp":5,"text":"t","author":"a"}}"#).unwrap();
        let out = load_messages(f.path(), Strictness::Lenient).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].line, 2);

        let err = load_messages(f.path(), Strictness::Strict).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_messages(Path::new("/nonexistent/messages.jsonl"), Strictness::Lenient);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn parses_timestamps_and_entities() {
        let m = Message::from_json_line(GOOD).unwrap();
        assert_eq!(m.mentions, ["bob"]);
        assert_eq!(m.hashtags, ["news"]);
        let m = Message::from_json_line(
            r#"{"id":7,"timestamp":12.9,"text":"x","author":"a","hashtags":["", "h"],"mentions":[],"urls":[]}"#,
        )
        .unwrap();
        assert_eq!(m.id, "7");
        assert_eq!(m.timestamp, 12);
        assert_eq!(m.hashtags, ["h"]);
        let m = Message::from_json_line(
            r#"{"id":"z","timestamp":"1970-01-01T01:00:00.75+01:00","text":"x","author":"a"}"#,
        )
        .unwrap();
        assert_eq!(m.timestamp, 0);
        assert!(Message::from_json_line(r#"{"id":"z","timestamp":-3,"text":"x","author":"a"}"#).is_err());
        assert!(Message::from_json_line(r#"{"id":"","timestamp":3,"text":"x","author":"a"}"#).is_err());
    }

    #[test]
    fn json_line_roundtrip() {
        let mut m = Message::new("a", 5, "hello");
        m.reply_to_id = Some("b".into());
        m.hashtags = vec!["x".into()];
        assert_eq!(Message::from_json_line(&m.to_json_line()).unwrap(), m);
    }

    #[test]
    fn event_requires_two_keywords_and_dedups() {
        assert!(Event::new("e", kw(&["a"]), vec![], date()).is_err());
        let msgs = vec![
            Message::new("x", 10, "late"),
            Message::new("y", 5, "early"),
            Message::new("x", 1, "dup, earliest"),
        ];
        let (e, report) = Event::new("e", kw(&["a", "b"]), msgs, date()).unwrap();
        assert_eq!(report.duplicates_removed, 1);
        let ids: Vec<_> = e.messages().iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["x", "y"]);
        assert_eq!(e.messages()[0].text, "dup, earliest");
    }

    #[test]
    fn head_drop_examples() {
        let e = event_with(&(0..100).collect::<Vec<_>>());
        assert_eq!(drop_head_fraction(&e, 0.05).unwrap().len(), 95);
        assert_eq!(drop_head_fraction(&e, 0.0).unwrap(), e);

        let e7 = event_with(&(0..7).collect::<Vec<_>>());
        let oracle = (0.05f64 * 7.0).ceil() as usize;
        assert_eq!(oracle, 1);
        assert_eq!(drop_head_fraction(&e7, 0.05).unwrap().len(), 7 - oracle);

        assert!(drop_head_fraction(&e, 1.0).is_err());
        assert!(drop_head_fraction(&e, -0.1).is_err());
    }

    #[test]
    fn ceil_count_ignores_float_fuzz() {
        assert_eq!(ceil_count(0.07, 100), 7);
        assert_eq!(ceil_count(0.05, 200), 10);
        assert_eq!(ceil_count(0.051, 100), 6);
        assert_eq!(ceil_count(1.0, 3), 3);
    }

    #[test]
    fn stats_single_event() {
        let ts: Vec<u64> = (0..1000).map(|i| i * 25_920 / 999).collect();
        let e = event_with(&ts);
        let s = dataset_stats(&[e]).unwrap();
        assert_eq!(s.messages.min, 1000.0);
        assert_eq!(s.messages.mean, 1000.0);
        assert_eq!(s.messages.median, 1000.0);
        assert_eq!(s.messages.max, 1000.0);
        assert!((s.duration_hours.mean - 7.2).abs() < 1e-12);
    }

    #[test]
    fn stats_three_events() {
        let events: Vec<_> = [10u64, 20, 90]
            .iter()
            .map(|&n| event_with(&(0..n).collect::<Vec<_>>()))
            .collect();
        let s = dataset_stats(&events).unwrap();
        assert_eq!(s.messages.mean, 40.0);
        assert_eq!(s.messages.median, 20.0);
        assert!(dataset_stats(&[]).is_err());
    }

    #[test]
    fn even_median_is_lower_middle() {
        assert_eq!(Summary::of(&[4.0, 1.0, 3.0, 2.0]).unwrap().median, 2.0);
    }

    proptest! {
        #[test]
        fn head_drop_is_suffix(ts in prop::collection::vec(0u64..10_000, 1..200), f in 0.0f64..0.99) {
            let e = event_with(&ts);
            let d = drop_head_fraction(&e, f).unwrap();
            let n = e.len();
            prop_assert_eq!(d.messages(), &e.messages()[n - d.len()..]);
        }

        #[test]
        fn sorting_is_idempotent(ts in prop::collection::vec(0u64..1_000, 0..100)) {
            let mut once: Vec<Message> = ts.iter().enumerate().map(|(i, &t)| Message::new(format!("{i}"), t, "")).collect();
            sort_and_dedup(&mut once);
            let mut twice = once.clone();
            sort_and_dedup(&mut twice);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn summary_is_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = Summary::of(&v).unwrap();
            prop_assert!(s.min <= s.median && s.median <= s.max);
            prop_assert!(s.min <= s.mean + 1e-6 && s.mean <= s.max + 1e-6);
        }
    }
}
