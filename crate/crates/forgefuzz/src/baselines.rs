//! Size-matched comparison datasets.
//!
//! Evolved datasets are much larger than their seed, so like-for-like
//! replay comparisons need inflated versions of the original: `simple`
//! duplicates existing events, `random` appends uniformly random new ones.
//! Both are then brought to an exact follow-arc target, since follow arcs
//! dominate the event volume and must match across datasets for the
//! comparison to be fair.

use rand::Rng;

use crate::dataset::{EdgeList, Event, EventType};
use crate::error::{Error, Result};
use crate::followgraph::{build_count_matrix, derive_follows, FollowSet};

/// An inflated dataset with its (adjusted) follow arcs.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub edges: EdgeList,
    pub follows: FollowSet,
}

fn check_targets(original: &EdgeList, target_nonfollow: usize) -> Result<usize> {
    let have = original.non_follow_count();
    if original.follow_event_count() != 0 {
        return Err(Error::Invariant(
            "baseline source must be a base edge list without stored follows".into(),
        ));
    }
    if target_nonfollow < have {
        return Err(Error::InvalidTarget(format!(
            "target {target_nonfollow} below the original event count {have}"
        )));
    }
    Ok(target_nonfollow - have)
}

/// Inflates by duplicating existing events, sampled uniformly with
/// replacement; introduces no new (user, repo) interaction pair.
pub fn gen_simple<R: Rng>(
    original: &EdgeList,
    target_nonfollow: usize,
    target_follow: usize,
    rng: &mut R,
) -> Result<Baseline> {
    let extra = check_targets(original, target_nonfollow)?;
    let mut edges = original.clone();
    let n = original.events().len();
    for _ in 0..extra {
        let ev = edges.events[rng.random_range(0..n)];
        edges.events.push(ev);
    }
    let follows = adjusted_follows(&edges, target_follow, rng)?;
    Ok(Baseline { edges, follows })
}

/// Inflates by appending uniformly random events over the existing node
/// set: uniform user, uniform repository, uniform base event type.
pub fn gen_random<R: Rng>(
    original: &EdgeList,
    target_nonfollow: usize,
    target_follow: usize,
    rng: &mut R,
) -> Result<Baseline> {
    let extra = check_targets(original, target_nonfollow)?;
    let mut edges = original.clone();
    let users = edges.num_users();
    let repos = edges.num_repos();
    for _ in 0..extra {
        let u = rng.random_range(0..users);
        let r = rng.random_range(0..repos);
        let kind = EventType::NON_FOLLOW[rng.random_range(0..4)];
        edges.events.push(Event {
            source: edges.user_node(u),
            target: r as u32,
            kind,
        });
    }
    let follows = adjusted_follows(&edges, target_follow, rng)?;
    Ok(Baseline { edges, follows })
}

/// Derives follows from the inflated list and then adds or removes random
/// symmetric pairs until the ordered arc count hits the target exactly.
///
/// Symmetry means arcs come in twos, so the target must share the derived
/// count's parity (even); an odd target is rejected rather than silently
/// breaking the symmetry invariant.
fn adjusted_follows<R: Rng>(
    edges: &EdgeList,
    target_follow: usize,
    rng: &mut R,
) -> Result<FollowSet> {
    let mut follows = derive_follows(&build_count_matrix(edges));
    if !target_follow.is_multiple_of(2) {
        return Err(Error::InvalidTarget(format!(
            "follow target {target_follow} is odd; arcs are symmetric pairs"
        )));
    }
    let users = edges.num_users();
    let max_arcs = users * users.saturating_sub(1);
    if target_follow > max_arcs {
        return Err(Error::InvalidTarget(format!(
            "follow target {target_follow} exceeds the {max_arcs} possible arcs \
             between {users} users"
        )));
    }

    while follows.arc_count() < target_follow {
        // rejection-sample an absent pair; fall back to enumeration when
        // the graph is nearly complete
        let mut inserted = false;
        for _ in 0..1000 {
            let a = rng.random_range(0..users) as u32;
            let b = rng.random_range(0..users) as u32;
            if a != b && !follows.contains(a, b) {
                follows.insert_pair(a, b);
                inserted = true;
                break;
            }
        }
        if !inserted {
            let mut absent = Vec::new();
            for a in 0..users as u32 {
                for b in (a + 1)..users as u32 {
                    if !follows.contains(a, b) {
                        absent.push((a, b));
                    }
                }
            }
            let (a, b) = absent[rng.random_range(0..absent.len())];
            follows.insert_pair(a, b);
        }
    }
    while follows.arc_count() > target_follow {
        let pairs: Vec<(u32, u32)> = follows.unordered_pairs().collect();
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        follows.remove_pair(a, b);
    }
    Ok(follows)
}
