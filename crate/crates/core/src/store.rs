//! On-disk formats shared by the pipeline stages.
//!
//! An events store is a directory holding `events.jsonl`, one record per
//! event, and `messages/<event_id>.jsonl` with that event's messages in
//! the line-delimited message format.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::activity_cluster::{ActivityTier, CdfTable, TierLabel};
use crate::corpus::{load_messages, Event, Strictness};
use crate::error::{Error, Result};
use crate::event_graph::ValidationRow;
use crate::features::{feature_names, ComparisonRow, FeatureVector, FeatureWindow};
use crate::keyword_mining::KeywordPair;
use crate::vq_model::{EventVector, Histogram};

pub const EVENTS_INDEX: &str = "events.jsonl";
pub const MESSAGES_DIR: &str = "messages";

/// Writes `contents` next to `path` and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EventRecord {
    event_id: String,
    keywords: BTreeSet<String>,
    collected_date: NaiveDate,
    messages_file: String,
}

fn messages_file(event_id: &str) -> String {
    format!("{MESSAGES_DIR}/{event_id}.jsonl")
}

/// Writes one event's message file, then returns its index line.
pub fn write_event(dir: &Path, event: &Event) -> Result<String> {
    let rel = messages_file(&event.event_id);
    let mut body = String::new();
    for m in event.messages() {
        body += &m.to_json_line();
        body.push('\n');
    }
    write_atomic(&dir.join(&rel), body.as_bytes())?;
    let rec = EventRecord {
        event_id: event.event_id.clone(),
        keywords: event.keywords.clone(),
        collected_date: event.collected_date,
        messages_file: rel,
    };
    Ok(serde_json::to_string(&rec)?)
}

/// Writes the index after every message file, so a store with an index is
/// always complete.
pub fn write_events_index(dir: &Path, index_lines: &[String]) -> Result<()> {
    let mut body = index_lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    write_atomic(&dir.join(EVENTS_INDEX), body.as_bytes())
}

pub fn write_events_store(dir: &Path, events: &[Event]) -> Result<()> {
    let lines = events.iter().map(|e| write_event(dir, e)).collect::<Result<Vec<_>>>()?;
    write_events_index(dir, &lines)
}

/// Lazily loaded events store: the index is read up front, messages only
/// when an event is requested.
#[derive(Debug, Clone)]
pub struct EventsStore {
    dir: PathBuf,
    records: Vec<EventRecord>,
}

impl EventsStore {
    pub fn open(dir: &Path) -> Result<Self> {
        Ok(EventsStore {
            dir: dir.to_path_buf(),
            records: read_index(dir)?,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.event_id.as_str())
    }

    pub fn load(&self, index: usize) -> Result<Event> {
        let r = &self.records[index];
        let loaded = load_messages(&self.dir.join(&r.messages_file), Strictness::Strict)?;
        Ok(Event::new(r.event_id.clone(), r.keywords.clone(), loaded.records, r.collected_date)?.0)
    }
}

fn read_index(dir: &Path) -> Result<Vec<EventRecord>> {
    let path = dir.join(EVENTS_INDEX);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Malformed {
                path: path.clone(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Loads every event of a store, messages included.
pub fn read_events_store(dir: &Path) -> Result<Vec<Event>> {
    let store = EventsStore::open(dir)?;
    (0..store.len()).map(|i| store.load(i)).collect()
}

fn csv_string<F>(header: &[String], rows: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    rows(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn pairs_csv(pairs: &[KeywordPair]) -> Result<String> {
    csv_string(&strings(&["first", "second", "batch_hour"]), |w| {
        for p in pairs {
            w.serialize(p)?;
        }
        Ok(())
    })
}

pub fn parse_pairs_csv(text: &str) -> Result<Vec<KeywordPair>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize::<KeywordPair>()
        .map(|p| {
            let p = p?;
            KeywordPair::new(&p.first, &p.second, p.batch_hour)
        })
        .collect()
}

/// `event_id,w0,..,w{k-1}`.
pub fn vectors_csv(vectors: &[EventVector]) -> Result<String> {
    let k = vectors.first().map_or(0, |v| v.weights.len());
    let mut header = vec!["event_id".to_owned()];
    header.extend((0..k).map(|i| format!("w{i}")));
    csv_string(&header, |w| {
        for v in vectors {
            let mut rec = vec![v.event_id.clone()];
            rec.extend(v.weights.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn parse_vectors_csv(text: &str) -> Result<Vec<EventVector>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records()
        .map(|rec| {
            let rec = rec?;
            let event_id = rec.get(0).unwrap_or_default().to_owned();
            let weights = rec
                .iter()
                .skip(1)
                .map(|x| x.parse().map_err(|_| Error::Parse(format!("bad weight `{x}` for `{event_id}`"))))
                .collect::<Result<_>>()?;
            Ok(EventVector { event_id, weights })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierAssignment {
    pub event_id: String,
    pub rank: usize,
    pub label: TierLabel,
}

/// One row per event, ordered by rank then id.
pub fn tiers_csv(tiers: &[ActivityTier]) -> Result<String> {
    csv_string(&strings(&["event_id", "rank", "label"]), |w| {
        for t in tiers {
            for id in &t.member_ids {
                w.serialize(TierAssignment {
                    event_id: id.clone(),
                    rank: t.rank,
                    label: t.label,
                })?;
            }
        }
        Ok(())
    })
}

pub fn parse_tiers_csv(text: &str) -> Result<Vec<TierAssignment>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Event vectors ordered by tier rank, then by descending first weight:
/// the data behind a tier heatmap.
pub fn heatmap_csv(tiers: &[ActivityTier], vectors: &[EventVector]) -> Result<String> {
    let k = vectors.first().map_or(0, |v| v.weights.len());
    let mut header = strings(&["rank", "label", "event_id"]);
    header.extend((0..k).map(|i| format!("w{i}")));
    csv_string(&header, |w| {
        for t in tiers {
            let mut members: Vec<&EventVector> = vectors.iter().filter(|v| t.member_ids.contains(&v.event_id)).collect();
            members.sort_by(|a, b| b.weights[0].total_cmp(&a.weights[0]).then(a.event_id.cmp(&b.event_id)));
            for v in members {
                let mut rec = vec![t.rank.to_string(), t.label.to_string(), v.event_id.clone()];
                rec.extend(v.weights.iter().map(|x| x.to_string()));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })
}

pub fn histogram_csv(h: &Histogram) -> Result<String> {
    csv_string(&strings(&["bin_start", "frequency"]), |w| {
        for (s, f) in &h.bins {
            w.write_record([s.to_string(), f.to_string()])?;
        }
        w.write_record(["beyond_cutoff".to_owned(), h.beyond_cutoff.to_string()])?;
        Ok(())
    })
}

pub fn cdf_csv(t: &CdfTable) -> Result<String> {
    csv_string(&strings(&["seconds", "cdf", "log_survival"]), |w| {
        let mut surv = t.log_survival.iter().peekable();
        for (s, f) in &t.cdf {
            let ls = match surv.peek() {
                Some((ts, v)) if ts == s => {
                    let v = v.to_string();
                    surv.next();
                    v
                }
                _ => String::new(),
            };
            w.write_record([s.to_string(), f.to_string(), ls])?;
        }
        Ok(())
    })
}

pub fn validation_csv(rows: &[ValidationRow]) -> Result<String> {
    csv_string(&strings(&["day", "metric", "true_value", "baseline_mean", "true_is_better"]), |w| {
        for r in rows {
            // ties within rounding count as no worse
            let slack = 1e-9 * r.true_value.abs().max(r.baseline_mean.abs());
            let better = if r.metric.higher_is_better() {
                r.true_value >= r.baseline_mean - slack
            } else {
                r.true_value <= r.baseline_mean + slack
            };
            w.write_record([
                r.day.to_string(),
                r.metric.name().to_owned(),
                r.true_value.to_string(),
                r.baseline_mean.to_string(),
                better.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// `event_id` followed by every catalog feature.
pub fn features_csv(vectors: &[FeatureVector]) -> Result<String> {
    let mut header = vec!["event_id".to_owned()];
    header.extend(feature_names().into_iter().map(str::to_owned));
    csv_string(&header, |w| {
        for v in vectors {
            let mut rec = vec![v.event_id.clone()];
            rec.extend(v.values.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn parse_features_csv(text: &str, window: FeatureWindow) -> Result<Vec<FeatureVector>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let expected: Vec<&str> = std::iter::once("event_id").chain(feature_names()).collect();
    if header != expected {
        return Err(Error::Parse("feature matrix columns do not match the catalog".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let event_id = rec.get(0).unwrap_or_default().to_owned();
            let values = rec
                .iter()
                .skip(1)
                .map(|x| x.parse().map_err(|_| Error::Parse(format!("bad feature `{x}` for `{event_id}`"))))
                .collect::<Result<_>>()?;
            Ok(FeatureVector {
                event_id,
                window,
                values,
            })
        })
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    csv_string(
        &strings(&["feature_name", "mean_high", "mean_other", "t_statistic", "p_value"]),
        |w| {
            for r in rows {
                w.serialize(r)?;
            }
            Ok(())
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Message;

    fn event(id: &str) -> Event {
        let mut m = Message::new(format!("{id}-1"), 5, "hello #x @y");
        m.hashtags = vec!["x".into()];
        m.mentions = vec!["y".into()];
        let msgs = vec![m, Message::new(format!("{id}-0"), 1, "first")];
        let kws = ["a", "b"].iter().map(|s| s.to_string()).collect();
        Event::new(id, kws, msgs, NaiveDate::from_ymd_opt(2016, 4, 1).unwrap()).unwrap().0
    }

    #[test]
    fn events_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let events = vec![event("e1"), event("e2")];
        write_events_store(dir.path(), &events).unwrap();
        assert_eq!(read_events_store(dir.path()).unwrap(), events);
        let store = EventsStore::open(dir.path()).unwrap();
        assert_eq!(store.ids().collect::<Vec<_>>(), ["e1", "e2"]);
        assert_eq!(store.load(1).unwrap(), events[1]);
        assert!(read_events_store(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"abc").unwrap();
        write_atomic(&p, b"xyz").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "xyz");
        assert_eq!(fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }

    #[test]
    fn csv_round_trips() {
        let pairs = vec![KeywordPair::new("b", "a", 7).unwrap()];
        assert_eq!(parse_pairs_csv(&pairs_csv(&pairs).unwrap()).unwrap(), pairs);
        let vs = vec![EventVector {
            event_id: "e".into(),
            weights: vec![0.1, 0.9],
        }];
        assert_eq!(parse_vectors_csv(&vectors_csv(&vs).unwrap()).unwrap(), vs);
        let fv = vec![FeatureVector {
            event_id: "e".into(),
            window: FeatureWindow::Full,
            values: (0..32).map(|i| i as f64 / 3.0).collect(),
        }];
        assert_eq!(parse_features_csv(&features_csv(&fv).unwrap(), FeatureWindow::Full).unwrap(), fv);
        assert!(parse_features_csv("event_id,x\ne,1\n", FeatureWindow::Full).is_err());
    }
}
