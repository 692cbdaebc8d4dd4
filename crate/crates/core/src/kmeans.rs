//! Lloyd's k-means with k-means++ seeding and best-of-n restarts.
//!
//! The one-dimensional variant works on sorted distinct values with
//! multiplicities, so pooling millions of integer interarrival times costs
//! no more than the number of distinct values. Cells in 1-D are contiguous
//! intervals, which turns every Lloyd step into a handful of binary
//! searches over prefix sums.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeded_rng;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Result of a one-dimensional fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit1d {
    /// Strictly ascending.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    pub iterations: usize,
}

/// Distinct values (ascending) with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    values: Vec<f64>,
    weights: Vec<f64>,
    // prefix sums of w and w*x, length n + 1
    cum_w: Vec<f64>,
    cum_wx: Vec<f64>,
}

impl WeightedPoints {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().collect();
        v.sort_by(f64::total_cmp);
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for x in v {
            match pairs.last_mut() {
                Some((last, w)) if *last == x => *w += 1.0,
                _ => pairs.push((x, 1.0)),
            }
        }
        Self::from_sorted_pairs(pairs)
    }

    /// `pairs` must be ascending in value with no repeats.
    pub fn from_counts(counts: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut pairs: Vec<(f64, f64)> = counts.into_iter().map(|(v, c)| (v as f64, c as f64)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::from_sorted_pairs(pairs)
    }

    fn from_sorted_pairs(pairs: Vec<(f64, f64)>) -> Self {
        let (values, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut cum_w = Vec::with_capacity(values.len() + 1);
        let mut cum_wx = Vec::with_capacity(values.len() + 1);
        let (mut sw, mut swx) = (0.0, 0.0);
        cum_w.push(0.0);
        cum_wx.push(0.0);
        for (x, w) in values.iter().zip(&weights) {
            sw += w;
            swx += w * x;
            cum_w.push(sw);
            cum_wx.push(swx);
        }
        WeightedPoints {
            values,
            weights,
            cum_w,
            cum_wx,
        }
    }

    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> Option<f64> {
        self.values.first().copied()
    }

    pub fn max(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Index of the first value assigned past each boundary: value `x`
    /// belongs to centroid `j` when `m_{j-1} < x <= m_j` with `m` the
    /// midpoints, so ties go to the smaller centroid.
    fn cell_ends(&self, centroids: &[f64]) -> Vec<usize> {
        let mut ends: Vec<usize> = centroids
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.values.partition_point(|&x| x <= mid)
            })
            .collect();
        ends.push(self.values.len());
        ends
    }

    fn inertia(&self, centroids: &[f64]) -> f64 {
        let ends = self.cell_ends(centroids);
        let mut start = 0;
        let mut total = 0.0;
        for (c, &end) in centroids.iter().zip(&ends) {
            for i in start..end {
                let d = self.values[i] - c;
                total += self.weights[i] * d * d;
            }
            start = end;
        }
        total
    }
}

fn kmeans_pp_1d<R: Rng>(points: &WeightedPoints, k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.distinct();
    let mut chosen = Vec::with_capacity(k);
    let first = sample_weighted(&points.weights, rng);
    chosen.push(points.values[first]);
    let mut d2: Vec<f64> = points.values.iter().map(|x| (x - chosen[0]).powi(2)).collect();
    while chosen.len() < k {
        let scores: Vec<f64> = (0..n).map(|i| points.weights[i] * d2[i]).collect();
        let next = sample_weighted(&scores, rng);
        let c = points.values[next];
        chosen.push(c);
        for (d, x) in d2.iter_mut().zip(&points.values) {
            *d = d.min((x - c).powi(2));
        }
    }
    chosen.sort_by(f64::total_cmp);
    chosen
}

/// Index drawn with probability proportional to `weights`.
fn sample_weighted<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    last_positive
}

fn lloyd_1d(points: &WeightedPoints, mut centroids: Vec<f64>, max_iter: usize) -> Fit1d {
    let mut ends = points.cell_ends(&centroids);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut start = 0;
        let mut empty = Vec::new();
        for (j, &end) in ends.iter().enumerate() {
            let w = points.cum_w[end] - points.cum_w[start];
            if w > 0.0 {
                centroids[j] = (points.cum_wx[end] - points.cum_wx[start]) / w;
            } else {
                empty.push(j);
            }
            start = end;
        }
        // an empty cell takes over the value farthest from its centroid
        for j in empty {
            let far = farthest_value(points, &centroids);
            centroids[j] = far;
            centroids.sort_by(f64::total_cmp);
        }
        let new_ends = points.cell_ends(&centroids);
        if new_ends == ends {
            break;
        }
        ends = new_ends;
    }
    let inertia = points.inertia(&centroids);
    Fit1d {
        centroids,
        inertia,
        iterations,
    }
}

fn farthest_value(points: &WeightedPoints, centroids: &[f64]) -> f64 {
    let ends = points.cell_ends(centroids);
    let mut best = (f64::NEG_INFINITY, points.values[0]);
    let mut start = 0;
    for (c, &end) in centroids.iter().zip(&ends) {
        for &x in &points.values[start..end] {
            let d = (x - c).abs();
            if d > best.0 && !centroids.contains(&x) {
                best = (d, x);
            }
        }
        start = end;
    }
    best.1
}

/// Weighted 1-D k-means; keeps the lowest-inertia restart (earliest on
/// ties). Requires `1 <= k <= distinct values`.
pub fn kmeans_1d(points: &WeightedPoints, config: KMeansConfig) -> Result<Fit1d> {
    if config.k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if config.k > points.distinct() {
        return Err(Error::TooFewDistinct {
            k: config.k,
            distinct: points.distinct(),
        });
    }
    let mut best: Option<Fit1d> = None;
    for r in 0..config.restarts.max(1) {
        let mut rng = seeded_rng(config.seed, r as u64);
        let init = kmeans_pp_1d(points, config.k, &mut rng);
        let fit = lloyd_1d(points, init, config.max_iter);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Result of a multi-dimensional fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitNd {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp_nd<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let uniform = vec![1.0; points.len()];
    let mut chosen = vec![points[sample_weighted(&uniform, rng)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &chosen[0])).collect();
    while chosen.len() < k {
        let next = sample_weighted(&d2, rng);
        let c = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        chosen.push(c);
    }
    chosen
}

fn lloyd_nd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> FitNd {
    let dim = points[0].len();
    let k = centroids.len();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // reseed at the point worst served by the current centroids
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, nearest(p, &centroids).1))
                    .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
                centroids[j] = points[far].clone();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    let inertia = points.iter().zip(&assignments).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
    FitNd {
        centroids,
        assignments,
        inertia,
        iterations,
    }
}

/// Multi-dimensional k-means over equal-length points.
pub fn kmeans_nd(points: &[Vec<f64>], config: KMeansConfig) -> Result<FitNd> {
    if config.k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if points.len() < config.k {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot form {} clusters",
            points.len(),
            config.k
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidArgument("points have differing dimensions".into()));
    }
    let mut distinct: Vec<&Vec<f64>> = points.iter().collect();
    distinct.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < config.k {
        return Err(Error::Degenerate(format!(
            "only {} distinct points for {} clusters",
            distinct.len(),
            config.k
        )));
    }
    let mut best: Option<FitNd> = None;
    for r in 0..config.restarts.max(1) {
        let mut rng = seeded_rng(config.seed, r as u64);
        let init = kmeans_pp_nd(points, config.k, &mut rng);
        let fit = lloyd_nd(points, init, config.max_iter);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}
