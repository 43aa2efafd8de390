//! Seeded synthetic communities for experiments, demos and tests.
//!
//! Activity is heavy-tailed (a handful of prolific users and popular
//! repositories, a long quiet tail) so the derived features span a useful
//! range instead of collapsing onto a point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{EdgeList, Event, EventType};
use crate::error::{Error, Result};

/// Generates a community with exactly `users` users, `repos` repositories
/// and `events` base events. Every user and repository gets at least one
/// event; the rest are sampled with heavy-tailed weights.
pub fn synthetic_community(
    users: usize,
    repos: usize,
    events: usize,
    seed: u64,
) -> Result<EdgeList> {
    if users == 0 || repos == 0 {
        return Err(Error::Config("need at least one user and one repo".into()));
    }
    if events < users || events < repos {
        return Err(Error::Config(format!(
            "need at least max(users, repos) events to cover every node \
             ({events} < max({users}, {repos}))"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let user_names: Vec<String> = (0..users).map(|i| format!("user{i:04}")).collect();
    let repo_names: Vec<String> = (0..repos)
        .map(|i| format!("org{i:03}/repo{i:03}"))
        .collect();

    // heavy-tailed weights over a shuffled identity so name order and
    // activity rank are unrelated
    let weights = |n: usize, exponent: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut w: Vec<f64> = (0..n)
            .map(|i| 1.0 / ((i + 1) as f64).powf(exponent))
            .collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            w.swap(i, j);
        }
        w
    };
    let user_w = cumulative(weights(users, 0.9, &mut rng));
    let repo_w = cumulative(weights(repos, 0.8, &mut rng));

    let pick = |cum: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let x: f64 = rng.random::<f64>() * cum.last().unwrap();
        cum.partition_point(|&c| c < x).min(cum.len() - 1)
    };
    let kind = |rng: &mut ChaCha8Rng| -> EventType {
        // roughly forge-like mix: pushes dominate
        match rng.random_range(0..100) {
            0..=59 => EventType::Push,
            60..=79 => EventType::Watch,
            80..=91 => EventType::PullRequest,
            _ => EventType::Fork,
        }
    };

    let mut events_out: Vec<Event> = Vec::with_capacity(events);
    // coverage first: one event per user (the first ones on distinct
    // repositories), then one event per still-uncovered repository
    for u in 0..users {
        let r = if u < repos {
            u
        } else {
            pick(&repo_w, &mut rng)
        };
        events_out.push(Event {
            source: (repos + u) as u32,
            target: r as u32,
            kind: kind(&mut rng),
        });
    }
    for r in users..repos {
        events_out.push(Event {
            source: (repos + pick(&user_w, &mut rng)) as u32,
            target: r as u32,
            kind: kind(&mut rng),
        });
    }
    while events_out.len() < events {
        events_out.push(Event {
            source: (repos + pick(&user_w, &mut rng)) as u32,
            target: pick(&repo_w, &mut rng) as u32,
            kind: kind(&mut rng),
        });
    }
    // shuffle so replay order is not sorted by user
    for i in (1..events_out.len()).rev() {
        let j = rng.random_range(0..=i);
        events_out.swap(i, j);
    }

    let list = EdgeList {
        repo_names,
        user_names,
        events: events_out,
    };
    list.validate()?;
    Ok(list)
}

fn cumulative(weights: Vec<f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}
