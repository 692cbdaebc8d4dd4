//! The VQ-event model: interarrival times, a codebook of representative
//! interarrival times, and the per-event relative-frequency vector over
//! codewords.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Event;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_1d, KMeansConfig, WeightedPoints};

/// Default number of codewords.
pub const DEFAULT_K: usize = 20;

/// Seconds between consecutive messages of one event. The first entry is
/// always 0 (the first message is its own predecessor).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterarrivalSeries {
    pub event_id: String,
    pub deltas: Vec<u64>,
}

impl InterarrivalSeries {
    /// Builds a series from timestamps, which must be nondecreasing.
    pub fn from_timestamps(event_id: impl Into<String>, timestamps: &[u64]) -> Result<Self> {
        let event_id = event_id.into();
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Unsorted(event_id));
        }
        let deltas = timestamps
            .iter()
            .enumerate()
            .map(|(i, &t)| if i == 0 { 0 } else { t - timestamps[i - 1] })
            .collect();
        Ok(InterarrivalSeries { event_id, deltas })
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

pub fn interarrivals(event: &Event) -> Result<InterarrivalSeries> {
    let ts: Vec<u64> = event.messages().iter().map(|m| m.timestamp).collect();
    InterarrivalSeries::from_timestamps(event.event_id.clone(), &ts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub iterations: usize,
    pub inertia: f64,
}

/// Learned representative interarrival times, strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    centroids: Vec<f64>,
    pub training_meta: TrainingMeta,
}

impl Codebook {
    pub fn new(centroids: Vec<f64>, training_meta: TrainingMeta) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a codebook needs at least 2 codewords, got {}",
                centroids.len()
            )));
        }
        if centroids.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("codewords must be finite and nonnegative".into()));
        }
        if centroids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("codewords must be strictly ascending".into()));
        }
        Ok(Codebook { centroids, training_meta })
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest codeword; exact midpoints go to the smaller one.
    pub fn nearest(&self, delta: f64) -> usize {
        let c = &self.centroids;
        let idx = c.partition_point(|&x| x < delta);
        if idx == 0 {
            return 0;
        }
        if idx == c.len() {
            return c.len() - 1;
        }
        if delta - c[idx - 1] <= c[idx] - delta {
            idx - 1
        } else {
            idx
        }
    }

    /// Text form: a `k=.. seed=.. iterations=.. inertia=..` header line
    /// followed by one codeword per line.
    pub fn to_file_contents(&self) -> String {
        let m = &self.training_meta;
        let mut out = format!("k={} seed={} iterations={} inertia={}\n", self.k(), m.seed, m.iterations, m.inertia);
        for c in &self.centroids {
            writeln!(out, "{c}").expect("writing to a String");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty codebook file".into()))?;
        let mut fields = BTreeMap::new();
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad codebook header field `{kv}`")))?;
            fields.insert(k, v);
        }
        let get = |name: &str| -> Result<&str> {
            fields
                .get(name)
                .copied()
                .ok_or_else(|| Error::Parse(format!("codebook header lacks `{name}`")))
        };
        let num = |name: &str| -> Result<f64> { get(name)?.parse().map_err(|e| Error::Parse(format!("{name}: {e}"))) };
        let k = num("k")? as usize;
        let meta = TrainingMeta {
            seed: get("seed")?.parse().map_err(|e| Error::Parse(format!("seed: {e}")))?,
            iterations: num("iterations").unwrap_or(0.0) as usize,
            inertia: num("inertia").unwrap_or(f64::NAN),
        };
        let centroids = lines
            .map(|l| l.trim().parse::<f64>().map_err(|e| Error::Parse(format!("codeword `{l}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if centroids.len() != k {
            return Err(Error::Parse(format!("header says k={k} but {} codewords follow", centroids.len())));
        }
        Codebook::new(centroids, meta)
    }
}

/// Pools the deltas of every series and clusters them into `k` codewords
/// with multi-restart 1-D k-means.
pub fn learn_codebook(series: &[InterarrivalSeries], k: usize, seed: u64) -> Result<Codebook> {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for s in series {
        for &d in &s.deltas {
            *counts.entry(d).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::Empty("no interarrival times to learn a codebook from".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("a codebook needs k >= 2, got {k}")));
    }
    let points = WeightedPoints::from_counts(counts);
    let fit = kmeans_1d(&points, KMeansConfig::new(k, seed))?;
    Codebook::new(
        fit.centroids,
        TrainingMeta {
            seed,
            iterations: fit.iterations,
            inertia: fit.inertia,
        },
    )
}

/// Share of an event's interarrival times assigned to each codeword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventVector {
    pub event_id: String,
    pub weights: Vec<f64>,
}

/// Assigns every delta to its nearest codeword and returns the relative
/// frequencies.
pub fn quantize(series: &InterarrivalSeries, codebook: &Codebook) -> Result<EventVector> {
    if series.is_empty() {
        return Err(Error::Empty(format!("event `{}` has no interarrival times", series.event_id)));
    }
    let mut counts = vec![0u64; codebook.k()];
    for &d in &series.deltas {
        counts[codebook.nearest(d as f64)] += 1;
    }
    let n = series.len() as f64;
    Ok(EventVector {
        event_id: series.event_id.clone(),
        weights: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Relative-frequency histogram of interarrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    /// `(bin start in seconds, relative frequency)` for bins starting at or
    /// below the cutoff.
    pub bins: Vec<(u64, f64)>,
    /// Mass of bins beyond the cutoff; bins plus this sum to 1.
    pub beyond_cutoff: f64,
}

/// Bins `series` with width `bin_width`. The cutoff limits the displayed
/// bins only; frequencies are always relative to the full series.
pub fn histogram_export(series: &InterarrivalSeries, bin_width: u64, cutoff: u64) -> Result<Histogram> {
    if bin_width == 0 {
        return Err(Error::InvalidArgument("bin width must be at least 1 second".into()));
    }
    let shown = (cutoff / bin_width + 1) as usize;
    let mut counts = vec![0u64; shown];
    let mut beyond = 0u64;
    for &d in &series.deltas {
        match counts.get_mut((d / bin_width) as usize) {
            Some(c) => *c += 1,
            None => beyond += 1,
        }
    }
    let n = series.len().max(1) as f64;
    Ok(Histogram {
        bin_width,
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (i as u64 * bin_width, c as f64 / n))
            .collect(),
        beyond_cutoff: beyond as f64 / n,
    })
}
