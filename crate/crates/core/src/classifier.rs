//! L2-regularized logistic regression for predicting high-activity events,
//! plus evaluation and repeated random 60/20/20 splits.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ceil_count, Event};
use crate::error::{Error, Result};
use crate::seeded_rng;

pub const DEFAULT_L2_GRID: [f64; 5] = [0.001, 0.01, 0.1, 1.0, 10.0];
pub const DEFAULT_ROUNDS: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_EARLY_FRACTION: f64 = 0.05;
const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 10_000;
const SPLIT_RETRIES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub event_id: String,
    pub features: Vec<f64>,
    pub label: bool,
}

impl LabeledExample {
    pub fn new(event_id: impl Into<String>, features: Vec<f64>, label: bool) -> Self {
        LabeledExample {
            event_id: event_id.into(),
            features,
            label,
        }
    }
}

/// The earliest `ceil(fraction * n)` messages of a cleaned event.
pub fn early_window(event: &Event, fraction: f64) -> Result<Event> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "early-window fraction must lie in (0, 1], got {fraction}"
        )));
    }
    Ok(event.with_slice(0..ceil_count(fraction, event.len())))
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted mean negative log-likelihood plus `l2/2 * |w|^2`.
///
/// Parameters are packed as `[w_0, .., w_{d-1}, bias]`; the bias is not
/// penalized.
#[derive(Debug, Clone)]
pub struct Objective {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    sample_weights: Vec<f64>,
    l2: f64,
}

impl Objective {
    pub fn new(rows: Vec<Vec<f64>>, labels: &[bool], l2: f64) -> Result<Self> {
        Self::weighted(rows, labels, l2, 1.0)
    }

    /// Positive examples count `positive_weight` times.
    pub fn weighted(rows: Vec<Vec<f64>>, labels: &[bool], l2: f64, positive_weight: f64) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if rows.is_empty() {
            return Err(Error::Empty("no training rows".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("feature dimension differs between rows".into()));
        }
        if !(l2 >= 0.0 && l2.is_finite()) || !(positive_weight > 0.0 && positive_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "l2 must be finite and nonnegative and the class weight positive, got {l2} and {positive_weight}"
            )));
        }
        let targets = labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
        let sample_weights = labels.iter().map(|&y| if y { positive_weight } else { 1.0 }).collect();
        Ok(Objective {
            rows,
            targets,
            sample_weights,
            l2,
        })
    }

    /// Number of parameters, features plus bias.
    pub fn dim(&self) -> usize {
        self.rows[0].len() + 1
    }

    fn margin(&self, theta: &[f64], row: &[f64]) -> f64 {
        let d = row.len();
        row.iter().zip(&theta[..d]).map(|(x, w)| x * w).sum::<f64>() + theta[d]
    }

    fn total_weight(&self) -> f64 {
        self.sample_weights.iter().sum()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let d = self.dim() - 1;
        let nll: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .zip(&self.sample_weights)
            .map(|((r, &y), &s)| {
                let z = self.margin(theta, r);
                s * (softplus(z) - y * z)
            })
            .sum();
        let penalty: f64 = theta[..d].iter().map(|w| w * w).sum();
        nll / self.total_weight() + 0.5 * self.l2 * penalty
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim() - 1;
        let mut g = vec![0.0; d + 1];
        for ((r, &y), &s) in self.rows.iter().zip(&self.targets).zip(&self.sample_weights) {
            let resid = s * (sigmoid(self.margin(theta, r)) - y);
            for (gj, x) in g.iter_mut().zip(r) {
                *gj += resid * x;
            }
            g[d] += resid;
        }
        let total = self.total_weight();
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= total;
            if j < d {
                *gj += self.l2 * theta[j];
            }
        }
        g
    }

    /// Inverse of a diagonal curvature bound per coordinate. Scaling the
    /// gradient by it keeps strongly penalized weights and the free bias on
    /// comparable step sizes.
    fn preconditioner(&self) -> Vec<f64> {
        let d = self.dim() - 1;
        let total = self.total_weight();
        let mut diag = vec![0.0; d + 1];
        for (r, &s) in self.rows.iter().zip(&self.sample_weights) {
            for (dj, x) in diag.iter_mut().zip(r) {
                *dj += s * x * x;
            }
        }
        diag[d] = total;
        diag.iter()
            .enumerate()
            .map(|(j, &v)| {
                let penalty = if j < d { self.l2 } else { 0.0 };
                1.0 / (0.25 * v / total + penalty + 1e-12)
            })
            .collect()
    }

    /// Diagonally preconditioned gradient descent with Armijo backtracking
    /// from `theta`. Stops when the gradient norm falls below 1e-6 or after
    /// 10,000 iterations.
    pub fn minimize(&self, mut theta: Vec<f64>) -> Minimum {
        let scale = self.preconditioner();
        let mut loss = self.loss(&theta);
        let mut step: f64 = 1.0;
        let mut iterations = 0;
        let mut grad = self.gradient(&theta);
        while iterations < MAX_ITER {
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() < GRAD_TOL {
                break;
            }
            iterations += 1;
            let dir: Vec<f64> = grad.iter().zip(&scale).map(|(g, s)| g * s).collect();
            let decrease: f64 = grad.iter().zip(&dir).map(|(g, p)| g * p).sum();
            // let the step grow again after a run of accepted steps
            step = (step * 2.0).min(1e3);
            loop {
                let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, p)| t - step * p).collect();
                let trial_loss = self.loss(&trial);
                if trial_loss <= loss - 0.5 * step * decrease {
                    theta = trial;
                    loss = trial_loss;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    // no decrease representable in floating point
                    return Minimum { theta, loss, iterations };
                }
            }
            grad = self.gradient(&theta);
        }
        Minimum { theta, loss, iterations }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
}

impl Model {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn standardize(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    /// Predicted probability of the high-activity class.
    pub fn predict_proba(&self, features: &[f64]) -> f64 {
        let z: f64 = self
            .standardize(features)
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("{} names for {} weights", names.len(), self.dim())));
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Plain-text form: `l2=`, `bias=`, then one tab-separated
    /// `name mean std weight` line per feature.
    pub fn to_file_contents(&self) -> String {
        let mut s = format!("l2={}\nbias={}\n", self.l2, self.bias);
        for i in 0..self.dim() {
            s += &format!(
                "{}\t{}\t{}\t{}\n",
                self.feature_names[i], self.means[i], self.stds[i], self.weights[i]
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<f64> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("model file lacks `{key}=`")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("expected `{key}=<number>`, got `{line}`")))
        };
        let l2 = header("l2")?;
        let bias = header("bias")?;
        let mut m = Model {
            feature_names: vec![],
            means: vec![],
            stds: vec![],
            weights: vec![],
            bias,
            l2,
        };
        for line in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            let nums: Option<Vec<f64>> = cols.get(1..).map(|c| c.iter().filter_map(|v| v.parse().ok()).collect());
            match (cols.len(), nums) {
                (4, Some(n)) if n.len() == 3 => {
                    m.feature_names.push(cols[0].to_owned());
                    m.means.push(n[0]);
                    m.stds.push(n[1]);
                    m.weights.push(n[2]);
                }
                _ => return Err(Error::Parse(format!("bad model line `{line}`"))),
            }
        }
        if m.weights.is_empty() {
            return Err(Error::Parse("model file has no weights".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub l2: f64,
    pub seed: u64,
    /// Weight of positive examples in the loss; 1.0 means unweighted.
    pub positive_weight: f64,
}

impl TrainConfig {
    pub fn new(l2: f64, seed: u64) -> Self {
        TrainConfig {
            l2,
            seed,
            positive_weight: 1.0,
        }
    }
}

pub fn train(examples: &[LabeledExample], l2: f64, seed: u64) -> Result<Model> {
    train_with(examples, &TrainConfig::new(l2, seed))
}

/// Fits a model. Standardization statistics come from `examples` only;
/// the seed picks a small random starting point.
pub fn train_with(examples: &[LabeledExample], cfg: &TrainConfig) -> Result<Model> {
    if examples.is_empty() {
        return Err(Error::Empty("no training examples".into()));
    }
    let pos = examples.iter().filter(|e| e.label).count();
    if pos == 0 || pos == examples.len() {
        return Err(Error::SingleClass);
    }
    let d = examples[0].features.len();
    if examples.iter().any(|e| e.features.len() != d) {
        return Err(Error::InvalidArgument("feature dimension differs between examples".into()));
    }
    if examples.iter().any(|e| e.features.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidArgument("features must be finite".into()));
    }
    let n = examples.len() as f64;
    let means: Vec<f64> = (0..d).map(|j| examples.iter().map(|e| e.features[j]).sum::<f64>() / n).collect();
    let stds: Vec<f64> = (0..d)
        .map(|j| {
            let v = examples.iter().map(|e| (e.features[j] - means[j]).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut model = Model {
        feature_names: (0..d).map(|j| format!("x{j}")).collect(),
        means,
        stds,
        weights: vec![],
        bias: 0.0,
        l2: cfg.l2,
    };
    let rows = examples.iter().map(|e| model.standardize(&e.features)).collect();
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    let objective = Objective::weighted(rows, &labels, cfg.l2, cfg.positive_weight)?;
    let mut rng = seeded_rng(cfg.seed, 0);
    let start = (0..=d).map(|_| rng.random_range(-0.01..0.01)).collect();
    let min = objective.minimize(start);
    model.bias = min.theta[d];
    model.weights = min.theta[..d].to_vec();
    Ok(model)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Same counts seen from the negative class.
    pub fn flipped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    fn add(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Metrics for the high-activity class. Undefined ratios are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub roc_area: f64,
    pub confusion: Confusion,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion, roc_area: f64) -> Self {
        let c = confusion;
        EvalReport {
            fp_rate: ratio(c.fp, c.fp + c.tn),
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            roc_area,
            confusion,
        }
    }

    /// The same evaluation with the negative class treated as positive.
    /// ROC area is symmetric under the swap.
    pub fn others(&self) -> EvalReport {
        EvalReport::from_confusion(self.confusion.flipped(), self.roc_area)
    }

    /// Table with one row per class followed by the confusion matrix.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,fp_rate,precision,recall,roc_area\n");
        for (name, r) in [("high-activity", *self), ("others", self.others())] {
            s += &format!("{name},{:.3},{:.3},{:.3},{:.3}\n", r.fp_rate, r.precision, r.recall, r.roc_area);
        }
        let c = self.confusion;
        s += "\nactual\\predicted,high-activity,others\n";
        s += &format!("high-activity,{},{}\nothers,{},{}\n", c.tp, c.fn_, c.fp, c.tn);
        s
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>8} {:>9} {:>7} {:>8}", "class", "FP-rate", "precision", "recall", "ROC-area")?;
        for (name, r) in [("high-activity", *self), ("others", self.others())] {
            writeln!(
                f,
                "{name:<14} {:>8.3} {:>9.3} {:>7.3} {:>8.3}",
                r.fp_rate, r.precision, r.recall, r.roc_area
            )?;
        }
        let c = self.confusion;
        writeln!(f, "confusion: TP {} FN {} FP {} TN {}", c.tp, c.fn_, c.fp, c.tn)
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted half. 0.5 when either class is missing.
pub fn roc_area(scores: &[f64], labels: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    // sum of midranks of positives (Mann-Whitney U)
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    u / (pos as f64 * neg as f64)
}

/// Confusion at `threshold` (score >= threshold predicts positive) and the
/// rank-statistic ROC area.
pub fn evaluate_scores(scores: &[f64], labels: &[bool], threshold: f64) -> EvalReport {
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    EvalReport::from_confusion(c, roc_area(scores, labels))
}

pub fn evaluate(model: &Model, examples: &[LabeledExample], threshold: f64) -> EvalReport {
    let scores: Vec<f64> = examples.iter().map(|e| model.predict_proba(&e.features)).collect();
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    evaluate_scores(&scores, &labels, threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub seed: u64,
    pub rounds: usize,
    pub l2_grid: Vec<f64>,
    pub threshold: f64,
    pub positive_weight: f64,
}

impl SplitConfig {
    pub fn new(seed: u64) -> Self {
        SplitConfig {
            seed,
            rounds: DEFAULT_ROUNDS,
            l2_grid: DEFAULT_L2_GRID.to_vec(),
            threshold: DEFAULT_THRESHOLD,
            positive_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub l2: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSummary {
    pub rounds: Vec<RoundReport>,
    /// Arithmetic mean of every metric; the confusion matrix is summed.
    pub mean: EvalReport,
}

pub fn split_and_run(dataset: &[LabeledExample], seed: u64, rounds: usize) -> Result<SplitSummary> {
    split_and_run_with(dataset, &SplitConfig { rounds, ..SplitConfig::new(seed) })
}

fn both_classes(part: &[LabeledExample]) -> bool {
    part.iter().any(|e| e.label) && part.iter().any(|e| !e.label)
}

fn run_round(dataset: &[LabeledExample], cfg: &SplitConfig, round: usize) -> Result<RoundReport> {
    let mut rng = seeded_rng(cfg.seed, 1 + round as u64);
    let n = dataset.len();
    let n_train = n * 6 / 10;
    let n_val = n * 2 / 10;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..SPLIT_RETRIES {
        order.shuffle(&mut rng);
        let pick = |r: std::ops::Range<usize>| -> Vec<LabeledExample> { order[r].iter().map(|&i| dataset[i].clone()).collect() };
        let train_set = pick(0..n_train);
        let val = pick(n_train..n_train + n_val);
        let test = pick(n_train + n_val..n);
        if !(both_classes(&train_set) && both_classes(&val) && both_classes(&test)) {
            continue;
        }
        let mut best: Option<(f64, f64, Model)> = None;
        for &l2 in &cfg.l2_grid {
            let model = train_with(
                &train_set,
                &TrainConfig {
                    l2,
                    seed: cfg.seed ^ round as u64,
                    positive_weight: cfg.positive_weight,
                },
            )?;
            let auc = evaluate(&model, &val, cfg.threshold).roc_area;
            // first grid value wins ties
            if best.as_ref().is_none_or(|(b, _, _)| auc > *b) {
                best = Some((auc, l2, model));
            }
        }
        let (_, l2, model) = best.ok_or_else(|| Error::InvalidArgument("empty l2 grid".into()))?;
        return Ok(RoundReport {
            round,
            l2,
            report: evaluate(&model, &test, cfg.threshold),
        });
    }
    Err(Error::SplitFailed(SPLIT_RETRIES))
}

/// Repeated 60/20/20 train/validation/test splits. Each round tunes `l2`
/// on validation ROC area and reports test metrics.
pub fn split_and_run_with(dataset: &[LabeledExample], cfg: &SplitConfig) -> Result<SplitSummary> {
    if dataset.len() < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 examples, got {}", dataset.len())));
    }
    if cfg.rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be positive".into()));
    }
    if !both_classes(dataset) {
        return Err(Error::SingleClass);
    }
    let rounds = (0..cfg.rounds)
        .into_par_iter()
        .map(|r| run_round(dataset, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let k = rounds.len() as f64;
    let avg = |f: fn(&EvalReport) -> f64| rounds.iter().map(|r| f(&r.report)).sum::<f64>() / k;
    let mut confusion = Confusion::default();
    for r in &rounds {
        confusion.add(&r.report.confusion);
    }
    let mean = EvalReport {
        fp_rate: avg(|r| r.fp_rate),
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        roc_area: avg(|r| r.roc_area),
        confusion,
    };
    Ok(SplitSummary { rounds, mean })
}
