//! Statistical comparison of datasets and of feature-versus-load
//! relationships.
//!
//! Spearman's rank correlation is the workhorse: ranks use average ranks
//! for ties, the coefficient is the Pearson correlation of the ranked
//! values, and the p-value comes from the t-distribution approximation
//! with n−2 degrees of freedom (adequate at the sample sizes involved; a
//! seeded permutation test is available for small n).

use std::collections::BTreeMap;
use std::io::Write;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{summarize, EdgeList, EventCounts};
use crate::discrepancy::{star_discrepancy_approx, DiscrepancyConfig, PointSet};
use crate::error::{Error, Result};
use crate::features::FeaturePoints;
use crate::followgraph::{assemble_graph, FollowSet, InteractionGraph};
use crate::replay::UserCost;

/// A correlation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
}

/// Average ranks (1-based; ties share the mean of their rank block).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman rank correlation with average-rank tie handling and the
/// two-sided t-approximation p-value. Requires at least three samples;
/// constant inputs are an error (the coefficient is undefined for them).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 samples, got {}",
            x.len()
        )));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    // identical (or exactly opposite) rank vectors are the perfect
    // monotone cases; return ±1 exactly instead of a rounded Pearson
    let n1 = (x.len() + 1) as f64;
    let rho = if rx == ry && rx.iter().any(|&r| r != rx[0]) {
        1.0
    } else if rx.iter().zip(&ry).all(|(a, b)| a + b == n1) && rx.iter().any(|&r| r != rx[0]) {
        -1.0
    } else {
        pearson(&rx, &ry)?.clamp(-1.0, 1.0)
    };
    let n = x.len() as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
        let df = n - 2.0;
        // two-sided: P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
        incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    };
    Ok(Spearman { rho, p_value })
}

/// Seeded permutation test: the fraction of label shuffles whose |rho|
/// reaches the observed one. Useful when n is too small for the
/// t-approximation to be trusted.
pub fn spearman_permutation_p(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> Result<f64> {
    let observed = spearman(x, y)?.rho.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled: Vec<f64> = y.to_vec();
    let mut hits = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        if let Ok(r) = pearson(&average_ranks(x), &average_ranks(&shuffled)) {
            if r.abs() >= observed - 1e-15 {
                hits += 1;
            }
        }
    }
    Ok((hits as f64 + 1.0) / (permutations as f64 + 1.0))
}

/// Regularised incomplete beta function I_x(a, b) via the Lentz continued
/// fraction.
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation of ln Γ(x).
fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for g in G {
        y += 1.0;
        ser += g / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// The 3×3 feature-versus-load correlation table.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    /// Rows: centrality, pagerank, event_code. Columns: cpu, mem, latency.
    pub cells: Vec<CorrelationCell>,
    pub users: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationCell {
    pub feature: &'static str,
    pub metric: &'static str,
    /// `None` when the correlation is undefined (constant inputs).
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
}

pub const FEATURE_NAMES: [&str; 3] = ["centrality", "pagerank", "event_code"];
pub const METRIC_NAMES: [&str; 3] = ["cpu", "mem", "latency"];

/// Correlates each raw user feature with each per-user load metric.
///
/// `users` must name exactly the users present in `metrics`; the rows of
/// `points` correspond to `users` in order. Latency enters as the per-user
/// mean per request; cpu and memory as cumulative totals.
pub fn correlation_report(
    users: &[String],
    points: &FeaturePoints,
    metrics: &BTreeMap<String, UserCost>,
) -> Result<CorrelationReport> {
    if users.len() != points.len() {
        return Err(Error::LengthMismatch {
            left: users.len(),
            right: points.len(),
        });
    }
    let mut missing: Vec<&str> = users
        .iter()
        .filter(|u| !metrics.contains_key(*u))
        .map(|u| u.as_str())
        .collect();
    if metrics.len() != users.len() {
        missing.extend(
            metrics
                .keys()
                .filter(|k| !users.contains(k))
                .map(|k| k.as_str()),
        );
    }
    if !missing.is_empty() {
        return Err(Error::UserSetMismatch(missing.join(", ")));
    }

    let feature_cols: [Vec<f64>; 3] = [
        points.degree.clone(),
        points.pagerank.clone(),
        points.event_code.iter().map(|&c| c as f64).collect(),
    ];
    let metric_cols: [Vec<f64>; 3] = {
        let cost = |u: &String| metrics[u];
        [
            users.iter().map(|u| cost(u).cpu).collect(),
            users.iter().map(|u| cost(u).mem).collect(),
            users
                .iter()
                .map(|u| {
                    let c = cost(u);
                    if c.requests == 0 {
                        0.0
                    } else {
                        c.latency / c.requests as f64
                    }
                })
                .collect(),
        ]
    };

    let mut cells = Vec::with_capacity(9);
    for (fi, feature) in FEATURE_NAMES.iter().enumerate() {
        for (mi, metric) in METRIC_NAMES.iter().enumerate() {
            let cell = match spearman(&feature_cols[fi], &metric_cols[mi]) {
                Ok(s) => CorrelationCell {
                    feature,
                    metric,
                    rho: Some(s.rho),
                    p_value: Some(s.p_value),
                },
                Err(Error::ConstantInput) => CorrelationCell {
                    feature,
                    metric,
                    rho: None,
                    p_value: None,
                },
                Err(e) => return Err(e),
            };
            cells.push(cell);
        }
    }
    Ok(CorrelationReport {
        cells,
        users: users.len(),
    })
}

/// Writes the correlation table as CSV: `feature,metric,rho,p_value`.
pub fn write_correlation_csv<W: Write>(report: &CorrelationReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "metric", "rho", "p_value"])?;
    for cell in &report.cells {
        w.write_record([
            cell.feature.to_string(),
            cell.metric.to_string(),
            cell.rho
                .map(|v| v.to_string())
                .unwrap_or_else(|| "undefined".into()),
            cell.p_value
                .map(|v| v.to_string())
                .unwrap_or_else(|| "undefined".into()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scatter data behind the correlation table: one row per user with the
/// feature-cube coordinates and the load metrics
/// (`user,c_scaled,p_scaled,t_scaled,cpu,mem,latency`).
pub fn write_plot_data<W: Write>(
    users: &[String],
    points: &FeaturePoints,
    metrics: &BTreeMap<String, UserCost>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "user", "c_scaled", "p_scaled", "t_scaled", "cpu", "mem", "latency",
    ])?;
    for (i, user) in users.iter().enumerate() {
        let m = metrics.get(user).copied().unwrap_or_default();
        let p = points.points[i];
        w.write_record([
            user.clone(),
            p[0].to_string(),
            p[1].to_string(),
            p[2].to_string(),
            m.cpu.to_string(),
            m.mem.to_string(),
            m.latency.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One dataset's row in a comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetRow {
    pub name: String,
    pub counts: EventCounts,
    /// Ordered follow arcs (stored rows or an explicitly provided set).
    pub follow_arcs: usize,
    pub discrepancy: f64,
    /// Grid divisions the score was evaluated at; scores are only
    /// comparable at equal grids.
    pub grid_divisions: u32,
}

/// Summarises one or more datasets side by side: per-type counts plus the
/// star-discrepancy score of each dataset's feature embedding.
///
/// An entry may carry an explicit follow set (for adjusted baselines);
/// otherwise stored follow rows are used when present, and follows are
/// derived when not. Stored follow rows are always split off the base
/// list first, so they are never double counted.
pub fn dataset_summary(
    sets: &[(String, EdgeList, Option<FollowSet>)],
    cfg: &DiscrepancyConfig,
) -> Result<Vec<DatasetRow>> {
    if sets.is_empty() {
        return Err(Error::EmptyDataset("no datasets to summarise".into()));
    }
    let mut rows = Vec::with_capacity(sets.len());
    for (name, edges, follows) in sets {
        let (base, stored) = if edges.follow_event_count() > 0 {
            let (base, stored) = edges.split_follows()?;
            (base, Some(stored))
        } else {
            (edges.clone(), None)
        };
        let follow_set = match (follows, stored) {
            (Some(f), _) => f.clone(),
            (None, Some(stored)) => stored,
            (None, None) => assemble_graph(&base).follows,
        };
        let mut counts = summarize(&base);
        counts.follow = follow_set.arc_count();
        counts.total = base.non_follow_count() + follow_set.arc_count();
        let graph = InteractionGraph::with_follows(&base, follow_set.clone())?;
        let feats = crate::features::feature_points(&graph)?;
        let score = star_discrepancy_approx(&PointSet::from_points3(&feats.points)?, cfg)?;
        rows.push(DatasetRow {
            name: name.clone(),
            counts,
            follow_arcs: follow_set.arc_count(),
            discrepancy: score,
            grid_divisions: cfg.grid_divisions,
        });
    }
    Ok(rows)
}

/// Writes a comparison table as CSV:
/// `dataset,push,watch,pull_request,fork,follow,total,users,repos,discrepancy,grid`.
pub fn write_summary_csv<W: Write>(rows: &[DatasetRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "dataset",
        "push",
        "watch",
        "pull_request",
        "fork",
        "follow",
        "total",
        "users",
        "repos",
        "discrepancy",
        "grid",
    ])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.counts.push.to_string(),
            r.counts.watch.to_string(),
            r.counts.pull_request.to_string(),
            r.counts.fork.to_string(),
            r.follow_arcs.to_string(),
            r.counts.total.to_string(),
            r.counts.users.to_string(),
            r.counts.repos.to_string(),
            r.discrepancy.to_string(),
            r.grid_divisions.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// O(n²) rank assignment: rank = |{j : x_j < x_i}| + (|{j : x_j = x_i}| + 1)/2.
    /// Independent of the sort-based implementation.
    fn counting_ranks(values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|&v| {
                let less = values.iter().filter(|&&w| w < v).count() as f64;
                let equal = values.iter().filter(|&&w| w == v).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }

    fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
        let rx = counting_ranks(x);
        let ry = counting_ranks(y);
        let n = x.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
        sxy / (sxx.sqrt() * syy.sqrt())
    }

    #[test]
    fn perfect_monotone_is_plus_one() {
        let x = [1.0, 2.0, 5.0, 9.0];
        let y = [10.0, 20.0, 21.0, 40.0];
        let s = spearman(&x, &y).unwrap();
        assert_eq!(s.rho, 1.0);
        assert_eq!(s.p_value, 0.0);
    }

    #[test]
    fn reversed_is_minus_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [9.0, 7.0, 5.0, 1.0];
        assert_eq!(spearman(&x, &y).unwrap().rho, -1.0);
    }

    #[test]
    fn ties_match_the_counting_oracle() {
        let x = [1.0, 2.0, 2.0, 4.0];
        let y = [10.0, 20.0, 30.0, 40.0];
        let s = spearman(&x, &y).unwrap();
        assert!((s.rho - oracle_spearman(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn random_vectors_with_ties_match_the_oracle() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(3..40);
            // coarse quantisation forces plenty of ties
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            match spearman(&x, &y) {
                Ok(s) => assert!((s.rho - oracle_spearman(&x, &y)).abs() < 1e-12),
                Err(Error::ConstantInput) => {
                    let constant = x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]);
                    assert!(constant);
                }
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    #[test]
    fn symmetry_and_monotone_invariance() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = rng.random_range(4..30);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let a = spearman(&x, &y).unwrap();
            let b = spearman(&y, &x).unwrap();
            assert!((a.rho - b.rho).abs() < 1e-12);
            // strictly monotone transform of x leaves rho unchanged
            let tx: Vec<f64> = x.iter().map(|&v| (3.0 * v + 1.0).exp()).collect();
            let c = spearman(&tx, &y).unwrap();
            assert!((a.rho - c.rho).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_vectors_concentrate_near_zero() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let s = spearman(&x, &y).unwrap();
        assert!(s.rho.abs() < 0.2, "rho = {}", s.rho);
    }

    #[test]
    fn length_mismatch_and_short_inputs_error() {
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(spearman(&[1.0, 2.0], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn constant_vector_is_reported_undefined() {
        let x = [1.0, 1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(spearman(&x, &y), Err(Error::ConstantInput)));
    }

    // Reference p-values computed with scipy.stats.spearmanr (t-distribution
    // mode), frozen here.
    #[test]
    fn p_values_match_reference_constants() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        let s = spearman(&x, &y).unwrap();
        assert!((s.rho - 0.3914537831560393).abs() < 1e-12);
        assert!((s.p_value - 0.2632875529923414).abs() < 1e-9);

        let y2 = [1.0, 3.0, 2.0, 5.0, 4.0, 7.0, 6.0, 8.0, 10.0, 9.0];
        let s2 = spearman(&x, &y2).unwrap();
        assert!((s2.rho - 0.9515151515151514).abs() < 1e-12);
        assert!((s2.p_value - 2.279854920641689e-05).abs() < 1e-10);
    }

    #[test]
    fn permutation_p_detects_strong_association() {
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 2.0 + 1.0).collect();
        let p = spearman_permutation_p(&x, &y, 500, 5).unwrap();
        assert!(p < 0.01, "p = {p}");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let p2 = spearman_permutation_p(&x, &noise, 500, 5).unwrap();
        assert!(p2 > 0.05, "p2 = {p2}");
    }

    fn fixture_points(metric_order: &[f64]) -> (Vec<String>, FeaturePoints) {
        let users: Vec<String> = (0..metric_order.len()).map(|i| format!("u{i}")).collect();
        let n = users.len();
        let points = FeaturePoints {
            degree: (0..n).map(|i| i as f64).collect(),
            pagerank: metric_order.to_vec(),
            event_code: vec![8; n],
            points: (0..n).map(|i| [i as f64 / n as f64; 3]).collect(),
            pagerank_converged: true,
        };
        (users, points)
    }

    #[test]
    fn metrics_decreasing_in_pagerank_give_minus_one() {
        let (users, points) = fixture_points(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let mut metrics = BTreeMap::new();
        for (i, u) in users.iter().enumerate() {
            metrics.insert(
                u.clone(),
                UserCost {
                    cpu: 100.0 - i as f64, // strictly decreasing in pagerank
                    mem: 1.0,
                    latency: 1.0,
                    requests: 1,
                },
            );
        }
        let report = correlation_report(&users, &points, &metrics).unwrap();
        let cell = report
            .cells
            .iter()
            .find(|c| c.feature == "pagerank" && c.metric == "cpu")
            .unwrap();
        assert_eq!(cell.rho, Some(-1.0));
        // constant memory column is undefined
        let mem_cell = report
            .cells
            .iter()
            .find(|c| c.feature == "pagerank" && c.metric == "mem")
            .unwrap();
        assert_eq!(mem_cell.rho, None);
    }

    #[test]
    fn user_set_mismatch_is_an_error() {
        let (users, points) = fixture_points(&[0.1, 0.2, 0.3]);
        let metrics = BTreeMap::new();
        assert!(matches!(
            correlation_report(&users, &points, &metrics),
            Err(Error::UserSetMismatch(_))
        ));
    }

    #[test]
    fn summary_of_quartet_matches_summarize() {
        use crate::dataset::{EventType, NamedEvent};
        let named: Vec<NamedEvent> = (0..12)
            .map(|i| NamedEvent {
                source: format!("u{}", i % 4),
                target: format!("o/r{}", i % 3),
                kind: EventType::NON_FOLLOW[i % 4],
            })
            .collect();
        let e = EdgeList::from_named_events(&named).unwrap();
        let g = assemble_graph(&e);
        let sets = vec![
            ("plain".to_string(), e.clone(), None),
            ("explicit".to_string(), e.clone(), Some(g.follows.clone())),
        ];
        let rows = dataset_summary(&sets, &DiscrepancyConfig::default()).unwrap();
        let counts = summarize(&e);
        for row in &rows {
            assert_eq!(row.counts.push, counts.push);
            assert_eq!(row.counts.watch, counts.watch);
            assert_eq!(row.follow_arcs, g.follows.arc_count());
            assert!((0.0..=1.0).contains(&row.discrepancy));
        }
        assert_eq!(rows[0].discrepancy, rows[1].discrepancy);
    }
}
