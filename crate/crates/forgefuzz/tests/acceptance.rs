//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its evidence once its assertions hold (run with
//! `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Criterion 10 (end-to-end pipeline determinism) exercises the command
//! line and lives in the CLI crate's `acceptance_e2e` test.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forgefuzz::analysis::{correlation_report, spearman};
use forgefuzz::baselines::{gen_random, gen_simple};
use forgefuzz::dataset::{read_edge_list, summarize, EdgeList, EventType, NamedEvent};
use forgefuzz::discrepancy::{
    star_discrepancy_approx, star_discrepancy_exact, DiscrepancyConfig, PointSet,
};
use forgefuzz::evolve::{run_ea, EaConfig};
use forgefuzz::features::{event_type_code, feature_points};
use forgefuzz::followgraph::{assemble_graph, build_count_matrix, derive_follows, FollowSet};
use forgefuzz::replay::{replay, CommitCorpus, PrStatus, ReplayEvent, ReplayOrder};
use forgefuzz::simforge::{CostModel, CostSample, OpKind, SimForge};
use forgefuzz::synth::synthetic_community;

fn random_point_set(rng: &mut ChaCha8Rng) -> PointSet {
    let dim = rng.random_range(1..=3);
    let n = rng.random_range(1..=32);
    let mut coords = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        let c: f64 = match rng.random_range(0..4) {
            // grid-aligned and duplicated coordinates stress the boundary
            // comparisons where closed and open counts differ
            0 => rng.random_range(0..=16) as f64 / 16.0,
            1 => rng.random_range(0..=4) as f64 / 4.0,
            _ => rng.random(),
        };
        coords.push(c);
    }
    PointSet::from_flat(dim, coords).unwrap()
}

#[test]
fn criterion_01_discrepancy_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15C);
    let mut max_gap = f64::NEG_INFINITY;
    for _ in 0..500 {
        let p = random_point_set(&mut rng);
        let exact = star_discrepancy_exact(&p).unwrap();
        for g in [1u32, 4, 16] {
            let loose = star_discrepancy_approx(
                &p,
                &DiscrepancyConfig {
                    grid_divisions: g,
                    include_point_coordinates: false,
                },
            )
            .unwrap();
            assert!(
                loose <= exact + 1e-12,
                "approximation exceeded the oracle: {loose} > {exact} (G={g}, n={}, d={})",
                p.len(),
                p.dim()
            );
            max_gap = max_gap.max(loose - exact);
            let tight = star_discrepancy_approx(
                &p,
                &DiscrepancyConfig {
                    grid_divisions: g,
                    include_point_coordinates: true,
                },
            )
            .unwrap();
            assert_eq!(
                tight, exact,
                "point-coordinate corners must reproduce the oracle exactly (G={g})"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget is 60 s");
    println!(
        "criterion 01 discrepancy oracle equivalence: PASS \
         (500 sets, worst approx-exact gap {max_gap:.3e}, {:.2} s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_02_known_discrepancy_values() {
    for n in [1usize, 2, 4, 8] {
        let coords: Vec<f64> = (1..=n)
            .map(|i| (2 * i - 1) as f64 / (2 * n) as f64)
            .collect();
        let p = PointSet::from_flat(1, coords).unwrap();
        let d = star_discrepancy_exact(&p).unwrap();
        assert!(
            (d - 1.0 / (2 * n) as f64).abs() <= 1e-12,
            "midpoint lattice n={n}: expected {}, got {d}",
            1.0 / (2 * n) as f64
        );
    }
    let single = PointSet::from_flat(1, vec![0.5]).unwrap();
    assert_eq!(star_discrepancy_exact(&single).unwrap(), 0.5);
    println!(
        "criterion 02 known discrepancy values: PASS \
         (midpoint lattices n=1,2,4,8 at 1/(2n); single point 0.5)"
    );
}

#[test]
fn criterion_03_ea_trend_at_desk_scale() {
    let started = Instant::now();
    let seed_list = synthetic_community(60, 12, 300, 0xEA5EED).unwrap();
    let cfg = EaConfig {
        lambda: 20,
        generations: 300,
        rng_seed: 0xEA5EED,
        discrepancy: DiscrepancyConfig {
            grid_divisions: 16,
            include_point_coordinates: false,
        },
        ..EaConfig::default()
    };
    let (best, log) = run_ea(&seed_list, &cfg).unwrap();
    best.validate().unwrap();

    let initial = log.initial_score;
    let final_score = log.final_score();
    let mut previous = initial;
    for r in &log.records {
        assert!(
            r.parent_score <= previous,
            "best-so-far increased at generation {}: {} > {}",
            r.generation,
            r.parent_score,
            previous
        );
        previous = r.parent_score;
    }
    assert!(
        final_score <= 0.7 * initial,
        "discrepancy did not drop enough: {initial} -> {final_score}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget is 5 min");
    println!(
        "criterion 03 evolution trend at desk scale: PASS \
         (score {initial:.3} -> {final_score:.3} over 300 generations, {:.1} s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_04_original_dataset_fidelity() {
    let raw = include_str!("../../../data/original.csv");
    let e = read_edge_list(raw.as_bytes(), false).unwrap();
    let c = summarize(&e);
    assert_eq!(c.push, 4234);
    assert_eq!(c.watch, 1206);
    assert_eq!(c.pull_request, 852);
    assert_eq!(c.fork, 450);
    assert_eq!(c.total, 6742);
    assert_eq!(c.users, 1523);
    assert_eq!(c.repos, 156);
    println!(
        "criterion 04 original dataset fidelity: PASS \
         (push 4234, watch 1206, pull_request 852, fork 450; 1523 users, 156 repos)"
    );
}

#[test]
fn criterion_05_baseline_exactness() {
    let original = synthetic_community(40, 8, 120, 0xBA5E).unwrap();
    let support = |e: &EdgeList| -> std::collections::BTreeSet<(u32, u32)> {
        e.events().iter().map(|ev| (ev.source, ev.target)).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xBA5E);

    for (target_nf, target_f) in [(150usize, 200usize), (400, 600), (120, 0)] {
        let s = gen_simple(&original, target_nf, target_f, &mut rng).unwrap();
        assert_eq!(s.edges.non_follow_count(), target_nf);
        assert_eq!(s.follows.arc_count(), target_f);
        assert_eq!(
            support(&s.edges),
            support(&original),
            "new support pair introduced"
        );
        let r = gen_random(&original, target_nf, target_f, &mut rng).unwrap();
        assert_eq!(r.edges.non_follow_count(), target_nf);
        assert_eq!(r.follows.arc_count(), target_f);
    }

    // uniformity of the random baseline's added events, 3 sigma bound
    let added = 8000usize;
    let r = gen_random(&original, original.non_follow_count() + added, 0, &mut rng).unwrap();
    let tail = &r.edges.events()[original.events().len()..];
    let expected = added as f64 / 4.0;
    let sigma = (added as f64 * 0.25 * 0.75).sqrt();
    for kind in EventType::NON_FOLLOW {
        let count = tail.iter().filter(|e| e.kind == kind).count() as f64;
        assert!(
            (count - expected).abs() <= 3.0 * sigma,
            "{kind:?} count {count} outside {expected} +- {:.1}",
            3.0 * sigma
        );
    }
    println!(
        "criterion 05 baseline exactness: PASS \
         (targets hit exactly, no new support pairs, per-type counts within 3 sigma)"
    );
}

#[test]
fn criterion_06_feature_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFEA7);
    for i in 0..200 {
        let users = rng.random_range(2..25);
        let repos = rng.random_range(1..8);
        let events = users.max(repos) + rng.random_range(0..40);
        let e = synthetic_community(users, repos, events, i).unwrap();
        let g = assemble_graph(&e);
        let pr = forgefuzz::features::pagerank(&g, &Default::default()).unwrap();
        let sum: f64 = pr.scores.iter().sum();
        assert!(
            (sum - 1.0).abs() <= 1e-8,
            "pagerank sum {sum} off unity on graph {i}"
        );
    }

    // multiplying every arc multiplicity (base and follow alike) by 3 must
    // leave the scaled degree and pagerank coordinates unchanged
    let e = synthetic_community(15, 5, 60, 99).unwrap();
    let g = assemble_graph(&e);
    let mut arcs: Vec<(u32, u32)> = e.events().iter().map(|ev| (ev.source, ev.target)).collect();
    for (a, b) in g.follows.arcs() {
        arcs.push((e.user_node(a as usize), e.user_node(b as usize)));
    }
    let tripled_arcs: Vec<(u32, u32)> = arcs
        .iter()
        .flat_map(|&a| std::iter::repeat_n(a, 3))
        .collect();

    let scale = |values: &[f64]| -> Vec<f64> {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        values.iter().map(|&v| (v - min) / (max - min)).collect()
    };
    let degree = |arcs: &[(u32, u32)]| -> Vec<f64> {
        let mut d = vec![0.0; e.num_nodes()];
        for &(s, t) in arcs {
            d[s as usize] += 1.0;
            d[t as usize] += 1.0;
        }
        d[e.num_repos()..].to_vec()
    };
    let rank = |arcs: &[(u32, u32)]| -> Vec<f64> {
        forgefuzz::features::pagerank_arcs(e.num_nodes(), arcs.to_vec(), &Default::default())
            .unwrap()
            .scores[e.num_repos()..]
            .to_vec()
    };
    let mut max_drift = 0.0f64;
    for (a, b) in scale(&degree(&arcs))
        .iter()
        .zip(scale(&degree(&tripled_arcs)).iter())
    {
        max_drift = max_drift.max((a - b).abs());
    }
    for (a, b) in scale(&rank(&arcs))
        .iter()
        .zip(scale(&rank(&tripled_arcs)).iter())
    {
        max_drift = max_drift.max((a - b).abs());
    }
    assert!(max_drift <= 1e-12, "scaled features drifted by {max_drift}");

    // duplicating dataset events must not change any event-type code
    let named: Vec<NamedEvent> = e
        .events()
        .iter()
        .flat_map(|ev| {
            std::iter::repeat_n(
                NamedEvent {
                    source: e.node_name(ev.source).to_string(),
                    target: e.node_name(ev.target).to_string(),
                    kind: ev.kind,
                },
                3,
            )
        })
        .collect();
    let duplicated = EdgeList::from_named_events(&named).unwrap();
    assert_eq!(
        event_type_code(&e).unwrap(),
        event_type_code(&duplicated).unwrap(),
        "event codes must ignore multiplicity"
    );
    println!(
        "criterion 06 feature invariants: PASS \
         (200 pagerank sums within 1e-8, tripling drift {max_drift:.2e}, codes stable)"
    );
}

#[test]
fn criterion_07_replay_state_machine() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5AFE);
    let users: Vec<String> = (0..12).map(|i| format!("u{i:02}")).collect();
    let repos: Vec<String> = (0..5).map(|i| format!("org/r{i}")).collect();
    let corpus = CommitCorpus::builtin();
    let mut forge = SimForge::new().with_follow_limit(Some(4));

    let mut events = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let source = users[rng.random_range(0..users.len())].clone();
        let kind = match rng.random_range(0..5) {
            0 => EventType::Push,
            1 => EventType::Watch,
            2 => EventType::PullRequest,
            3 => EventType::Fork,
            _ => EventType::Follow,
        };
        let target = if kind == EventType::Follow {
            // occasionally a self-follow, which the forge must reject
            users[rng.random_range(0..users.len())].clone()
        } else {
            repos[rng.random_range(0..repos.len())].clone()
        };
        events.push(ReplayEvent {
            source,
            target,
            kind,
        });
    }

    let mut wf = forgefuzz::replay::WorkflowState::default();
    let mut applied = 0usize;
    let mut skipped = 0usize;
    let mut pr_history: BTreeMap<u64, PrStatus> = BTreeMap::new();
    for (seq, ev) in events.iter().enumerate() {
        let out = forgefuzz::replay::process_event(seq, ev, &mut forge, &corpus, &mut rng, &mut wf);
        if out.applied {
            applied += 1;
        } else {
            skipped += 1;
        }
        forge
            .check_invariants()
            .unwrap_or_else(|e| panic!("invariant broken after event {seq}: {e}"));
        for (id, status) in forge.pr_statuses() {
            if let Some(prev) = pr_history.insert(id, status) {
                let legal = prev == status
                    || matches!(
                        (prev, status),
                        (PrStatus::Open, PrStatus::Merged)
                            | (PrStatus::Open, PrStatus::Closed)
                            | (PrStatus::Closed, PrStatus::Open)
                    );
                assert!(
                    legal,
                    "illegal PR transition {prev:?} -> {status:?} on {id}"
                );
            }
        }
    }
    assert_eq!(applied + skipped, events.len());
    println!(
        "criterion 07 replay state machine: PASS \
         (10000 events, {applied} applied + {skipped} skipped, invariants held throughout)"
    );
}

#[test]
fn criterion_08_follow_limit_reproduction() {
    // one user whose derived relationships exceed 300
    let mut named = Vec::new();
    for i in 0..340 {
        named.push(NamedEvent {
            source: "hub".into(),
            target: format!("org/r{i:03}"),
            kind: EventType::Push,
        });
        named.push(NamedEvent {
            source: format!("peer{i:03}"),
            target: format!("org/r{i:03}"),
            kind: EventType::Watch,
        });
    }
    let e = EdgeList::from_named_events(&named).unwrap();
    let follows = derive_follows(&build_count_matrix(&e));
    let corpus = CommitCorpus::builtin();

    let mut limited = SimForge::new(); // default limit 300
    let report = replay(&e, &follows, &mut limited, &corpus, ReplayOrder::Listed, 1).unwrap();
    let tally = report.error_tally.get("follow_limit").copied().unwrap_or(0);
    assert!(tally > 0, "expected follow-limit errors at limit 300");
    assert_eq!(tally, 40, "hub has 340 followees, 40 beyond the limit");

    let mut unlimited = SimForge::new().with_follow_limit(None);
    let report2 = replay(
        &e,
        &follows,
        &mut unlimited,
        &corpus,
        ReplayOrder::Listed,
        1,
    )
    .unwrap();
    assert_eq!(report2.error_tally.get("follow_limit"), None);
    assert_eq!(report2.skipped, 0);
    println!(
        "criterion 08 follow limit reproduction: PASS \
         ({tally} follow-limit errors at limit 300, none when unlimited)"
    );
}

#[test]
fn criterion_09_spearman_correctness_and_sign_consistency() {
    // brute-force oracle: O(n^2) counting ranks, then textbook Pearson
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
    fn oracle(x: &[f64], y: &[f64]) -> Option<f64> {
        let rx = counting_ranks(x);
        let ry = counting_ranks(y);
        let n = x.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
        if sxx == 0.0 || syy == 0.0 {
            None
        } else {
            Some(sxy / (sxx.sqrt() * syy.sqrt()))
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x0C0C);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        match (spearman(&x, &y), oracle(&x, &y)) {
            (Ok(s), Some(reference)) => {
                assert!(
                    (s.rho - reference).abs() <= 1e-12,
                    "rho {} vs oracle {reference}",
                    s.rho
                );
                checked += 1;
            }
            (Err(forgefuzz::Error::ConstantInput), None) => {} // both undefined
            (a, b) => panic!("disagreement on definedness: {a:?} vs {b:?}"),
        }
    }

    let inc: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let dec: Vec<f64> = (0..10).map(|i| (20 - i) as f64).collect();
    assert_eq!(spearman(&inc, &inc.clone()).unwrap().rho, 1.0);
    assert_eq!(spearman(&inc, &dec).unwrap().rho, -1.0);

    // sign consistency on the simulator: with a cost model where only
    // follow operations cost anything and their cost grows with the
    // followee count, the best-connected user must show the most load, so
    // pagerank correlates positively with cpu.
    let mut named = Vec::new();
    for i in 0..8 {
        named.push(NamedEvent {
            source: "hub".into(),
            target: format!("org/r{i}"),
            kind: EventType::Push,
        });
        named.push(NamedEvent {
            source: format!("spoke{i}"),
            target: format!("org/r{i}"),
            kind: EventType::Watch,
        });
    }
    let e = EdgeList::from_named_events(&named).unwrap();
    let g = assemble_graph(&e);

    let mut model = CostModel::default();
    for kind in OpKind::ALL {
        model.set_base_cost(
            kind,
            CostSample {
                cpu: 0.0,
                mem: 0.0,
                latency: 0.0,
            },
        );
    }
    model.set_base_cost(
        OpKind::Follow,
        CostSample {
            cpu: 2.0,
            mem: 1.0,
            latency: 4.0,
        },
    );
    model.follow_per_followee = 0.5;
    let mut forge = SimForge::new()
        .with_follow_limit(None)
        .with_cost_model(model);
    let report = replay(
        &e,
        &g.follows,
        &mut forge,
        &CommitCorpus::builtin(),
        ReplayOrder::Listed,
        2,
    )
    .unwrap();

    let feats = feature_points(&g).unwrap();
    let table = correlation_report(e.user_names(), &feats, &report.user_metrics).unwrap();
    let cell = table
        .cells
        .iter()
        .find(|c| c.feature == "pagerank" && c.metric == "cpu")
        .unwrap();
    let rho = cell.rho.expect("correlation defined");
    assert!(
        rho > 0.0,
        "followee-linear cost must correlate positively with pagerank, got {rho}"
    );
    println!(
        "criterion 09 spearman correctness: PASS \
         (200 tie-heavy vectors within 1e-12 of the oracle, monotone cases exactly ±1, \
          simulator sign check rho={rho:.2})"
    );
}

/// The follow-adjustment invariant spans criteria 5 and 8: adjusted sets
/// stay symmetric under replay-facing exports.
#[test]
fn follow_adjustment_keeps_symmetry() {
    let original = synthetic_community(20, 6, 60, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = gen_random(&original, 100, 150, &mut rng).unwrap();
    let arcs: Vec<(u32, u32)> = b.follows.arcs().collect();
    let set: std::collections::BTreeSet<(u32, u32)> = arcs.iter().copied().collect();
    for (x, y) in arcs {
        assert!(set.contains(&(y, x)));
    }
    let _ = FollowSet::from_arcs(set).unwrap();
}
