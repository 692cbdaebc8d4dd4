//! Activity tiers: events clustered by their VQ vectors and ranked by how
//! much of their mass sits at the smallest codeword.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans_nd, KMeansConfig};
use crate::vq_model::{EventVector, InterarrivalSeries};

pub const DEFAULT_TIERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TierLabel {
    High,
    MediumHigh,
    MediumLow,
    Low,
}

impl TierLabel {
    /// Label for `rank` out of `n_tiers`: first is high, last is low, and
    /// the middle ranks split between medium-high and medium-low.
    pub fn for_rank(rank: usize, n_tiers: usize) -> TierLabel {
        if rank == 0 {
            TierLabel::High
        } else if rank + 1 >= n_tiers {
            TierLabel::Low
        } else if rank <= (n_tiers - 2).div_ceil(2) {
            TierLabel::MediumHigh
        } else {
            TierLabel::MediumLow
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TierLabel::High => "high",
            TierLabel::MediumHigh => "medium-high",
            TierLabel::MediumLow => "medium-low",
            TierLabel::Low => "low",
        }
    }
}

impl fmt::Display for TierLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TierLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "high" => Ok(TierLabel::High),
            "medium-high" => Ok(TierLabel::MediumHigh),
            "medium-low" => Ok(TierLabel::MediumLow),
            "low" => Ok(TierLabel::Low),
            other => Err(Error::Parse(format!("unknown tier label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTier {
    /// 0 is the highest activity.
    pub rank: usize,
    pub label: TierLabel,
    pub member_ids: BTreeSet<String>,
    pub mean_vector: Vec<f64>,
}

impl ActivityTier {
    /// Mean weight at the smallest codeword.
    pub fn bin0(&self) -> f64 {
        self.mean_vector.first().copied().unwrap_or(0.0)
    }
}

/// Clusters event vectors into `n_tiers` groups and orders them by
/// descending mean weight at the smallest codeword.
pub fn cluster_events(vectors: &[EventVector], n_tiers: usize, seed: u64) -> Result<Vec<ActivityTier>> {
    if n_tiers < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 tiers, got {n_tiers}")));
    }
    if vectors.len() < n_tiers {
        return Err(Error::InvalidArgument(format!(
            "{} events cannot fill {n_tiers} tiers",
            vectors.len()
        )));
    }
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.weights.clone()).collect();
    let fit = kmeans_nd(&points, KMeansConfig::new(n_tiers, seed)).map_err(|e| match e {
        Error::Degenerate(msg) => Error::Degenerate(format!(
            "{msg}; the event vectors are too similar to form {n_tiers} tiers, try fewer"
        )),
        other => other,
    })?;

    let dim = points[0].len();
    let mut groups: Vec<(BTreeSet<String>, Vec<f64>)> = vec![(BTreeSet::new(), vec![0.0; dim]); n_tiers];
    for (v, &a) in vectors.iter().zip(&fit.assignments) {
        groups[a].0.insert(v.event_id.clone());
        for (s, w) in groups[a].1.iter_mut().zip(&v.weights) {
            *s += w;
        }
    }
    if groups.iter().any(|g| g.0.is_empty()) {
        return Err(Error::Degenerate(format!("clustering produced an empty tier out of {n_tiers}")));
    }
    for g in &mut groups {
        let n = g.0.len() as f64;
        g.1.iter_mut().for_each(|s| *s /= n);
    }
    groups.sort_by(|a, b| b.1[0].total_cmp(&a.1[0]).then_with(|| a.0.iter().next().cmp(&b.0.iter().next())));
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(rank, (member_ids, mean_vector))| ActivityTier {
            rank,
            label: TierLabel::for_rank(rank, n_tiers),
            member_ids,
            mean_vector,
        })
        .collect())
}

/// Per-codeword mean and population standard deviation over a tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSummary {
    pub rank: usize,
    pub label: TierLabel,
    pub members: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn tier_summary(tier: &ActivityTier, vectors: &[EventVector]) -> Result<TierSummary> {
    let members: Vec<&EventVector> = vectors.iter().filter(|v| tier.member_ids.contains(&v.event_id)).collect();
    if members.is_empty() {
        return Err(Error::Empty(format!("tier {} has no member vectors", tier.label)));
    }
    let dim = members[0].weights.len();
    let n = members.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in &members {
        for (m, w) in mean.iter_mut().zip(&v.weights) {
            *m += w;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in &members {
        for ((s, w), m) in var.iter_mut().zip(&v.weights).zip(&mean) {
            *s += (w - m) * (w - m);
        }
    }
    Ok(TierSummary {
        rank: tier.rank,
        label: tier.label,
        members: members.len(),
        mean,
        std: var.into_iter().map(|s| (s / n).sqrt()).collect(),
    })
}

/// Average empirical CDF of a tier's interarrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    /// `(seconds, average CDF)` for every integer second up to the largest
    /// observed delta.
    pub cdf: Vec<(u64, f64)>,
    /// `(seconds, ln(1 - CDF))`, rows where the CDF reached 1 omitted.
    pub log_survival: Vec<(u64, f64)>,
}

pub fn cdf_export(tier: &ActivityTier, series: &[InterarrivalSeries]) -> Result<CdfTable> {
    let mut members: Vec<Vec<u64>> = series
        .iter()
        .filter(|s| tier.member_ids.contains(&s.event_id) && !s.is_empty())
        .map(|s| s.deltas.clone())
        .collect();
    if members.is_empty() {
        return Err(Error::Empty(format!("tier {} has no interarrival series", tier.label)));
    }
    members.iter_mut().for_each(|d| d.sort_unstable());
    let horizon = members.iter().filter_map(|d| d.last().copied()).max().unwrap_or(0);
    let m = members.len() as f64;
    let mut cursors = vec![0usize; members.len()];
    let mut cdf = Vec::with_capacity(horizon as usize + 1);
    for t in 0..=horizon {
        let mut acc = 0.0;
        for (d, c) in members.iter().zip(cursors.iter_mut()) {
            while *c < d.len() && d[*c] <= t {
                *c += 1;
            }
            acc += *c as f64 / d.len() as f64;
        }
        cdf.push((t, acc / m));
    }
    let log_survival = cdf
        .iter()
        .filter(|(_, f)| *f < 1.0)
        .map(|&(t, f)| (t, (1.0 - f).ln()))
        .collect();
    Ok(CdfTable { cdf, log_survival })
}

/// Planted-label purity: the share of items whose cluster's majority label
/// matches their own.
pub fn purity<L: Eq + std::hash::Hash + Clone>(tiers: &[ActivityTier], labels: &HashMap<String, L>) -> f64 {
    let mut agree = 0usize;
    let mut total = 0usize;
    for t in tiers {
        let mut counts: HashMap<L, usize> = HashMap::new();
        for id in &t.member_ids {
            if let Some(l) = labels.get(id) {
                *counts.entry(l.clone()).or_insert(0) += 1;
                total += 1;
            }
        }
        agree += counts.values().copied().max().unwrap_or(0);
    }
    if total == 0 {
        0.0
    } else {
        agree as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str, w: &[f64]) -> EventVector {
        EventVector {
            event_id: id.into(),
            weights: w.to_vec(),
        }
    }

    fn tier(ids: &[&str]) -> ActivityTier {
        ActivityTier {
            rank: 0,
            label: TierLabel::High,
            member_ids: ids.iter().map(|s| s.to_string()).collect(),
            mean_vector: vec![],
        }
    }

    #[test]
    fn labels_by_rank() {
        let four: Vec<_> = (0..4).map(|r| TierLabel::for_rank(r, 4)).collect();
        assert_eq!(four, [TierLabel::High, TierLabel::MediumHigh, TierLabel::MediumLow, TierLabel::Low]);
        assert_eq!(TierLabel::for_rank(1, 2), TierLabel::Low);
        assert_eq!(TierLabel::for_rank(1, 3), TierLabel::MediumHigh);
        assert_eq!("medium-low".parse::<TierLabel>().unwrap(), TierLabel::MediumLow);
    }

    #[test]
    fn ranks_by_bin0() {
        let mut vs = Vec::new();
        for i in 0..10 {
            let e = i as f64 * 0.005;
            vs.push(ev(&format!("b{i}"), &[0.9 - e, 0.1 + e]));
            vs.push(ev(&format!("s{i}"), &[0.05 + e, 0.95 - e]));
        }
        let tiers = cluster_events(&vs, 2, 1).unwrap();
        assert_eq!(tiers[0].label, TierLabel::High);
        assert!(tiers[0].member_ids.iter().all(|id| id.starts_with('b')));
        assert!(tiers[0].bin0() > tiers[1].bin0());
        let covered: usize = tiers.iter().map(|t| t.member_ids.len()).sum();
        assert_eq!(covered, 20);
    }

    #[test]
    fn rejects_bad_requests() {
        let vs = vec![ev("a", &[1.0, 0.0]); 5];
        assert!(cluster_events(&vs, 1, 0).is_err());
        assert!(cluster_events(&vs[..1], 2, 0).is_err());
        assert!(matches!(cluster_events(&vs, 2, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn summary_examples() {
        let vs = vec![ev("a", &[0.3, 0.7]), ev("b", &[0.3, 0.7])];
        let s = tier_summary(&tier(&["a", "b"]), &vs).unwrap();
        assert_eq!(s.std, [0.0, 0.0]);
        let vs = vec![ev("a", &[1.0, 0.0]), ev("b", &[0.0, 1.0])];
        let s = tier_summary(&tier(&["a", "b"]), &vs).unwrap();
        assert_eq!(s.mean, [0.5, 0.5]);
        assert_eq!(s.std, [0.5, 0.5]);
        assert!(tier_summary(&tier(&["zz"]), &vs).is_err());
    }

    #[test]
    fn cdf_single_event() {
        let s = InterarrivalSeries {
            event_id: "a".into(),
            deltas: vec![0, 0, 60],
        };
        let t = cdf_export(&tier(&["a"]), &[s]).unwrap();
        assert!((t.cdf[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.cdf[60], (60, 1.0));
        assert!(t.cdf.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(t.log_survival.len(), 60);
    }

    #[test]
    fn purity_counts_majorities() {
        let tiers = vec![tier(&["a", "b", "c"]), tier(&["d"])];
        let labels: HashMap<String, u8> = [("a", 1), ("b", 1), ("c", 0), ("d", 0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        assert_eq!(purity(&tiers, &labels), 0.75);
    }
}
