//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.
//!
//! Run with `cargo test -p vqevent --test acceptance`.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vqevent::activity_cluster::{cluster_events, purity};
use vqevent::classifier::{evaluate_scores, split_and_run, LabeledExample, Objective};
use vqevent::corpus::{drop_head_fraction, Message};
use vqevent::event_graph::{
    connected_components, sample_per_pair, split_on_articulation, validate_window, Component, KeywordGraph, Metric,
    QualityOptions,
};
use vqevent::features::{extract_features, FeatureWindow, Lexicon};
use vqevent::keyword_mining::{detect_keywords, maxtf_idf, top_keyword_pairs, KeywordPair};
use vqevent::kmeans::{kmeans_1d, KMeansConfig, WeightedPoints};
use vqevent::synth::{Generator, GeneratorSpec};
use vqevent::text::Stoplist;
use vqevent::vq_model::{learn_codebook, quantize, InterarrivalSeries, DEFAULT_K};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|s| s.to_string()).collect()
}

fn reference_confusion() -> Outcome {
    // scores realizing TP 194, FP 43, FN 232, TN 4765 at threshold 0.5
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (n, score, label) in [(194, 0.9, true), (43, 0.9, false), (232, 0.1, true), (4765, 0.1, false)] {
        scores.extend(std::iter::repeat_n(score, n));
        labels.extend(std::iter::repeat_n(label, n));
    }
    let r = evaluate_scores(&scores, &labels, 0.5);
    let pass = (r.precision - 0.819).abs() <= 1e-3 && (r.recall - 0.455).abs() <= 1e-3;
    outcome(pass, format!("precision {:.4}, recall {:.4}", r.precision, r.recall))
}

fn nearest_by_scan(centroids: &[f64], d: f64) -> usize {
    let mut best = 0;
    for (j, c) in centroids.iter().enumerate() {
        if (d - c).abs() < (d - centroids[best]).abs() {
            best = j;
        }
    }
    best
}

fn vq_correctness() -> Outcome {
    let mut r = rng(2);
    let series: Vec<InterarrivalSeries> = (0..1000)
        .map(|i| {
            let n = r.random_range(2..200);
            let scale = [1.0, 30.0, 900.0][i % 3];
            let mut t = 0u64;
            let ts: Vec<u64> = (0..n)
                .map(|_| {
                    t += (r.random::<f64>() * scale * 2.0) as u64;
                    t
                })
                .collect();
            InterarrivalSeries::from_timestamps(format!("e{i}"), &ts).unwrap()
        })
        .collect();
    let codebook = learn_codebook(&series, DEFAULT_K, 5).unwrap();
    let mut mismatches = 0;
    let mut worst_sum = 0.0f64;
    for s in &series {
        let v = quantize(s, &codebook).unwrap();
        let mut counts = vec![0usize; codebook.k()];
        for &d in &s.deltas {
            counts[nearest_by_scan(codebook.centroids(), d as f64)] += 1;
        }
        let oracle: Vec<f64> = counts.iter().map(|&c| c as f64 / s.len() as f64).collect();
        if v.weights != oracle {
            mismatches += 1;
        }
        worst_sum = worst_sum.max((v.weights.iter().sum::<f64>() - 1.0).abs());
    }
    outcome(
        mismatches == 0 && worst_sum <= 1e-9,
        format!("{mismatches} mismatching events, max |sum - 1| = {worst_sum:.1e}"),
    )
}

fn exhaustive_sse(points: &[f64], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l] += p;
            counts[l] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            let sse: f64 = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| (p - sums[l] / counts[l] as f64).powi(2))
                .sum();
            best = best.min(sse);
        }
        // next assignment in base k
        let mut i = 0;
        while i < n && labels[i] == k - 1 {
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
        labels[i] += 1;
    }
}

fn multisets(grid: &[f64], size: usize, from: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    for i in from..grid.len() {
        cur.push(grid[i]);
        multisets(grid, size, i, cur, out);
        cur.pop();
    }
}

fn codebook_optimality() -> Outcome {
    let grid = [0.0, 1.0, 2.5, 6.0, 13.0];
    let mut sets = Vec::new();
    for size in 1..=8 {
        multisets(&grid, size, 0, &mut Vec::new(), &mut sets);
    }
    let mut r = rng(3);
    for _ in 0..300 {
        let size = r.random_range(1..=8);
        sets.push((0..size).map(|_| (r.random::<f64>() * 100.0).round() / 4.0).collect());
    }
    let mut checked = 0;
    let mut failures = 0;
    for set in &sets {
        let points = WeightedPoints::from_values(set.iter().copied());
        for k in 1..=3.min(points.distinct()) {
            let fit = kmeans_1d(&points, KMeansConfig::new(k, 11)).unwrap();
            let opt = exhaustive_sse(set, k);
            checked += 1;
            if (fit.inertia - opt).abs() > 1e-9 * opt.max(1.0) {
                failures += 1;
            }
        }
    }
    outcome(failures == 0, format!("{checked} (set, k) cases, {failures} above the optimum"))
}

fn planted_tiers() -> Outcome {
    let g = Generator::new(GeneratorSpec::default()).unwrap();
    let series: Vec<InterarrivalSeries> = (0..g.len())
        .into_par_iter()
        .map(|i| InterarrivalSeries::from_timestamps(g.label(i).event_id, &g.timestamps(i)).unwrap())
        .collect();
    let codebook = learn_codebook(&series, DEFAULT_K, 1).unwrap();
    let vectors: Vec<_> = series.par_iter().map(|s| quantize(s, &codebook).unwrap()).collect();
    let planted: HashMap<String, bool> = g.labels().into_iter().map(|l| (l.event_id, l.high)).collect();
    let two = cluster_events(&vectors, 2, 1).unwrap();
    let p = purity(&two, &planted);
    let four = cluster_events(&vectors, 4, 1).unwrap();
    let gap = four[0].bin0() - four[3].bin0();
    outcome(
        p >= 0.95 && gap >= 0.4,
        format!(
            "purity {p:.3} with 2 tiers; bin-0 weight top {:.3} vs bottom {:.3}",
            four[0].bin0(),
            four[3].bin0()
        ),
    )
}

fn early_prediction() -> Outcome {
    let g = Generator::new(GeneratorSpec {
        seed: 8,
        ..GeneratorSpec::default()
    })
    .unwrap();
    let lexicon = Lexicon::english();
    let rows: Vec<(LabeledExample, LabeledExample)> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let s = g.event(i);
            let cleaned = drop_head_fraction(&s.event, 0.05).unwrap();
            let early = extract_features(&cleaned, FeatureWindow::Early(0.05), &lexicon).unwrap();
            let full = extract_features(&cleaned, FeatureWindow::Full, &lexicon).unwrap();
            (
                LabeledExample::new(&s.label.event_id, early.values, s.label.high),
                LabeledExample::new(&s.label.event_id, full.values, s.label.high),
            )
        })
        .collect();
    let (early, full): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let e = split_and_run(&early, 21, 5).unwrap().mean;
    let f = split_and_run(&full, 21, 5).unwrap().mean;
    let close = (e.precision - f.precision).abs() <= 0.1
        && (e.recall - f.recall).abs() <= 0.1
        && (e.roc_area - f.roc_area).abs() <= 0.1;
    outcome(
        e.precision >= 0.9 && e.roc_area >= 0.9 && close,
        format!(
            "early P {:.3} R {:.3} ROC {:.3}; full P {:.3} R {:.3} ROC {:.3}",
            e.precision, e.recall, e.roc_area, f.precision, f.recall, f.roc_area
        ),
    )
}

fn logistic_numerics() -> Outcome {
    let mut r = rng(6);
    let n = 120;
    let labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            let shift = if y { 0.8 } else { 0.0 };
            (0..4).map(|j| r.random_range(-1.0..1.0) + shift * (j % 2) as f64).collect()
        })
        .collect();
    let obj = Objective::new(rows, &labels, 0.1).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let theta: Vec<f64> = (0..obj.dim()).map(|_| r.random_range(-2.0..2.0)).collect();
        let g = obj.gradient(&theta);
        let fd: Vec<f64> = (0..theta.len())
            .map(|j| {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[j] += h;
                dn[j] -= h;
                (obj.loss(&up) - obj.loss(&dn)) / (2.0 * h)
            })
            .collect();
        let err = fd.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-12);
        worst = worst.max(err / scale);
    }
    let losses: Vec<f64> = (0..5)
        .map(|_| {
            let start = (0..obj.dim()).map(|_| r.random_range(-5.0..5.0)).collect();
            obj.minimize(start).loss
        })
        .collect();
    let spread = losses.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - losses.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    outcome(
        worst < 1e-6 && spread <= 1e-8,
        format!("max relative gradient error {worst:.1e}; final loss spread {spread:.1e}"),
    )
}

fn keyword_traces() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();

    let one = detect_keywords(&[words(&["nelson", "mandela", "dies"]), words(&["nelson", "mandela", "dead"])], 10, 2).unwrap();
    let first_ok = one.len() == 1
        && one[0].words == ["mandela", "nelson"].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>()
        && one[0].total_score == 2;
    ok &= first_ok;
    notes.push(format!("mandela trace {}", if first_ok { "ok" } else { "wrong" }));

    let disjoint = detect_keywords(&[words(&["a", "b", "c"]), words(&["d", "e", "f"])], 10, 2).unwrap();
    ok &= disjoint.is_empty();
    notes.push(format!("disjoint trace {}", if disjoint.is_empty() { "ok" } else { "wrong" }));

    let headlines = vec![
        words(&["plane", "missing", "ocean"]),
        words(&["plane", "missing", "search"]),
        words(&["plane", "missing", "malaysia"]),
        words(&["obama", "syria", "strike"]),
        words(&["obama", "syria", "vote"]),
    ];
    let ranked = detect_keywords(&headlines, 10, 2).unwrap();
    let set = |ws: &[&str]| ws.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let third_ok = ranked.len() == 2
        && ranked[0].words == set(&["missing", "plane"])
        && ranked[1].words == set(&["obama", "syria"])
        && ranked[0].total_score > ranked[1].total_score;
    ok &= third_ok;
    notes.push(format!("plane/syria trace {}", if third_ok { "ok" } else { "wrong" }));

    let reference = top_keyword_pairs(&ranked, 6, 0);
    let mut r = rng(7);
    let mut shuffled = headlines.clone();
    let mut stable = 0;
    for _ in 0..50 {
        shuffled.shuffle(&mut r);
        let again = detect_keywords(&shuffled, 10, 2).unwrap();
        if again == ranked && top_keyword_pairs(&again, 6, 0) == reference {
            stable += 1;
        }
    }
    ok &= stable == 50;
    notes.push(format!("{stable}/50 shuffles identical"));
    outcome(ok, notes.join(", "))
}

fn pair(a: &str, b: &str) -> KeywordPair {
    KeywordPair::new(a, b, 0).unwrap()
}

fn closure_classes(n: usize, edges: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        reach[a][b] = true;
        reach[b][a] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).map(|i| (0..n).filter(|&j| reach[i][j]).collect()).collect()
}

fn pieces_by_search(nodes: &BTreeSet<String>, edges: &BTreeSet<(String, String)>) -> Vec<BTreeSet<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in nodes {
        if seen.contains(start) {
            continue;
        }
        let mut piece = BTreeSet::from([start.clone()]);
        let mut frontier = vec![start.clone()];
        while let Some(x) = frontier.pop() {
            for (a, b) in edges {
                let other = if *a == x { b } else if *b == x { a } else { continue };
                if piece.insert(other.clone()) {
                    frontier.push(other.clone());
                }
            }
        }
        seen.extend(piece.iter().cloned());
        out.push(piece);
    }
    out
}

/// Tries candidate words strictly in rank order on every fragment and
/// recomputes connectivity from scratch after each trial removal.
fn split_oracle(nodes: BTreeSet<String>, edges: BTreeSet<(String, String)>, ranked: &[&str]) -> BTreeSet<BTreeSet<String>> {
    for w in ranked.iter().filter(|w| nodes.contains(**w)) {
        let rest: BTreeSet<String> = nodes.iter().filter(|n| n != w).cloned().collect();
        let rest_edges: BTreeSet<(String, String)> = edges.iter().filter(|(a, b)| a != w && b != w).cloned().collect();
        let pieces = pieces_by_search(&rest, &rest_edges);
        if pieces.len() > 1 {
            return pieces
                .into_iter()
                .filter(|p| p.len() >= 2)
                .flat_map(|p| {
                    let e = rest_edges.iter().filter(|(a, _)| p.contains(a)).cloned().collect();
                    split_oracle(p, e, ranked)
                })
                .collect();
        }
    }
    BTreeSet::from([nodes])
}

fn graph_oracles() -> Outcome {
    let mut r = rng(8);
    let mut cc_fail = 0;
    for _ in 0..200 {
        let n = r.random_range(1..=50);
        let m = r.random_range(0..=n * 2);
        let edges: Vec<(usize, usize)> = (0..m)
            .map(|_| (r.random_range(0..n), r.random_range(0..n)))
            .filter(|(a, b)| a != b)
            .collect();
        let name = |i: usize| format!("n{i:02}");
        let mut g = KeywordGraph::new(0, 86_400);
        for i in 0..n {
            g.add_node(&name(i));
        }
        for &(a, b) in &edges {
            g.add_edge(pair(&name(a), &name(b)));
        }
        let got: BTreeSet<BTreeSet<String>> = connected_components(&g).into_iter().map(|c| c.keywords).collect();
        let want: BTreeSet<BTreeSet<String>> = closure_classes(n, &edges)
            .into_iter()
            .map(|c| c.into_iter().map(name).collect())
            .collect();
        if got != want {
            cc_fail += 1;
        }
    }

    // (edges, ranked candidate words)
    type Case<'a> = (Vec<(&'a str, &'a str)>, Vec<&'a str>);
    let hand: Vec<Case> = vec![
        (vec![("harvard", "evacuated"), ("harvard", "live"), ("live", "xinjiang")], vec!["live", "harvard"]),
        (vec![("a", "b")], vec!["a", "b"]),
        (
            vec![
                ("a", "b"),
                ("b", "c"),
                ("c", "a"),
                ("c", "live"),
                ("live", "d"),
                ("d", "e"),
                ("e", "f"),
                ("f", "d"),
                ("f", "says"),
                ("says", "g"),
                ("g", "h"),
                ("h", "i"),
                ("i", "g"),
            ],
            vec!["says", "live", "a", "d", "g"],
        ),
        (
            vec![("x", "hub"), ("y", "hub"), ("z", "hub"), ("x", "y"), ("z", "w"), ("w", "v"), ("v", "z")],
            vec!["hub", "z", "x"],
        ),
        (
            vec![("p", "q"), ("q", "r"), ("r", "s"), ("s", "t"), ("t", "u"), ("u", "p"), ("p", "s")],
            vec!["p", "s", "q", "r", "t", "u"],
        ),
    ];
    let mut split_fail = 0;
    for (edges, ranked) in &hand {
        let comp = Component {
            keywords: edges.iter().flat_map(|(a, b)| [a.to_string(), b.to_string()]).collect(),
            pairs: edges.iter().map(|(a, b)| pair(a, b)).collect(),
            messages: vec![],
        };
        let ranked_owned: Vec<String> = ranked.iter().map(|s| s.to_string()).collect();
        let got: BTreeSet<BTreeSet<String>> = split_on_articulation(&comp, &ranked_owned)
            .fragments
            .into_iter()
            .map(|f| f.keywords)
            .collect();
        let edge_set = edges
            .iter()
            .map(|(a, b)| {
                let (x, y) = if a < b { (a, b) } else { (b, a) };
                (x.to_string(), y.to_string())
            })
            .collect();
        let want = split_oracle(comp.keywords.clone(), edge_set, ranked);
        if got != want {
            split_fail += 1;
        }
    }
    outcome(
        cc_fail == 0 && split_fail == 0,
        format!("{cc_fail}/200 component mismatches, {split_fail}/{} split mismatches", hand.len()),
    )
}

fn topic_corpus(seed: u64) -> (Vec<Component>, HashMap<KeywordPair, Vec<Message>>) {
    let mut r = rng(100 + seed);
    let topics: [&[&str]; 4] = [
        &["quake", "magnitude", "tremor", "rubble", "rescue", "aftershock", "epicenter", "collapse"],
        &["election", "ballot", "senate", "poll", "candidate", "campaign", "turnout", "debate"],
        &["final", "goal", "striker", "league", "keeper", "penalty", "trophy", "coach"],
        &["storm", "hurricane", "flood", "rainfall", "evacuation", "landfall", "surge", "winds"],
    ];
    let shared = ["today", "news", "update", "video"];
    let mut comps = Vec::new();
    let mut per_pair = HashMap::new();
    for (t, vocab) in topics.iter().enumerate() {
        let keys = &vocab[..4];
        let pairs = [pair(keys[0], keys[1]), pair(keys[1], keys[2]), pair(keys[2], keys[3])];
        for p in &pairs {
            let msgs = (0..20)
                .map(|i| {
                    let mut text = words(&p.words());
                    for _ in 0..4 {
                        text.push(vocab[r.random_range(0..vocab.len())].to_string());
                    }
                    text.push(shared[r.random_range(0..shared.len())].to_string());
                    Message::new(format!("{t}-{}-{}-{i}", p.first, p.second), i as u64, text.join(" "))
                })
                .collect();
            per_pair.insert(p.clone(), msgs);
        }
        comps.push(Component {
            keywords: keys.iter().map(|s| s.to_string()).collect(),
            pairs: pairs.into_iter().collect(),
            messages: vec![],
        });
    }
    (comps, per_pair)
}

fn metric_directionality() -> Outcome {
    let day = NaiveDate::from_ymd_opt(2016, 4, 1).unwrap();
    let stoplist = Stoplist::english();
    let mut violations = Vec::new();
    for seed in 1..=3 {
        let (comps, per_pair) = topic_corpus(seed);
        let sample = sample_per_pair(&per_pair, 10, seed);
        let rows = validate_window(day, &comps, &sample, &[seed, seed + 10, seed + 20], QualityOptions::default(), &stoplist).unwrap();
        for row in rows {
            let ok = match row.metric {
                Metric::I1 | Metric::I2 | Metric::H1 | Metric::H2 => row.true_value >= row.baseline_mean,
                Metric::G1 | Metric::G1Prime => row.true_value <= row.baseline_mean,
                Metric::E1 => true,
            };
            if !ok {
                violations.push(format!("{}@{seed}", row.metric));
            }
        }
    }
    outcome(
        violations.is_empty(),
        if violations.is_empty() {
            "I1 I2 H1 H2 at or above and G1 G1' at or below the baseline for 3 seeds".to_owned()
        } else {
            format!("violations: {}", violations.join(" "))
        },
    )
}

fn maxtf_examples() -> Outcome {
    let corpus = vec![words(&["live", "fire"]), words(&["live", "vote"])];
    let zero = maxtf_idf("live", &corpus[0], &corpus).unwrap();
    let fire = maxtf_idf("fire", &corpus[0], &corpus).unwrap();
    let want = 2.0 * 2f64.ln();
    outcome(
        zero == 0.0 && (fire - want).abs() <= 1e-12,
        format!("live {zero}, fire {fire:.15} (target {want:.15})"),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("reference confusion matrix metrics", Duration::from_secs(1), reference_confusion),
        ("quantization matches linear scan", Duration::from_secs(5), vq_correctness),
        ("1-D k-means reaches exhaustive optimum", Duration::from_secs(10), codebook_optimality),
        ("planted tier recovery", Duration::from_secs(30), planted_tiers),
        ("early prediction on planted contrasts", Duration::from_secs(60), early_prediction),
        ("logistic regression numerics", Duration::from_secs(60), logistic_numerics),
        ("keyword detection traces", Duration::from_secs(60), keyword_traces),
        ("graph oracles", Duration::from_secs(60), graph_oracles),
        ("validation metric directionality", Duration::from_secs(60), metric_directionality),
        ("maxtf-idf worked examples", Duration::from_secs(1), maxtf_examples),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked"));
        let took = start.elapsed();
        let in_time = took <= *budget;
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {} [{:.2}s of {}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
