//! Interaction counting and follow-arc derivation.
//!
//! Users are related through the repositories they touch: the user×repo
//! count matrix records how many events connect each user to each repo
//! (every event weighs one, regardless of type). Two distinct users whose
//! interaction vectors have positive cosine similarity follow each other.
//! Because all counts are non-negative, the cosine is positive exactly when
//! the two support sets intersect, which is how the derivation is computed;
//! the result is identical to evaluating the cosine threshold.

use std::collections::BTreeSet;

use crate::dataset::EdgeList;
use crate::error::{Error, Result};

/// Dense user×repo interaction counts. Rows are user positions, columns
/// repo indices; row sums equal each user's non-follow event count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRepoMatrix {
    users: usize,
    repos: usize,
    counts: Vec<u32>,
}

impl UserRepoMatrix {
    pub fn zero(users: usize, repos: usize) -> UserRepoMatrix {
        UserRepoMatrix {
            users,
            repos,
            counts: vec![0; users * repos],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn repos(&self) -> usize {
        self.repos
    }

    pub fn count(&self, user_pos: usize, repo: usize) -> u32 {
        self.counts[user_pos * self.repos + repo]
    }

    pub fn row(&self, user_pos: usize) -> &[u32] {
        &self.counts[user_pos * self.repos..(user_pos + 1) * self.repos]
    }
}

/// Counts non-follow events between each user and repository.
pub fn build_count_matrix(e: &EdgeList) -> UserRepoMatrix {
    let mut m = UserRepoMatrix::zero(e.num_users(), e.num_repos());
    for ev in e.events() {
        if ev.kind.is_follow() {
            continue;
        }
        let u = e.user_pos(ev.source);
        m.counts[u * m.repos + ev.target as usize] += 1;
    }
    m
}

/// A symmetric set of directed follow arcs between user positions.
///
/// Arcs are stored as ordered pairs and the set is closed under reversal;
/// [`FollowSet::arc_count`] therefore reports ordered pairs (twice the
/// number of follow relationships).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FollowSet {
    arcs: BTreeSet<(u32, u32)>,
}

impl FollowSet {
    pub fn new() -> FollowSet {
        FollowSet::default()
    }

    /// Builds a set from explicit arcs, validating symmetry and
    /// irreflexivity.
    pub fn from_arcs(arcs: BTreeSet<(u32, u32)>) -> Result<FollowSet> {
        for &(a, b) in &arcs {
            if a == b {
                return Err(Error::Invariant(format!("self-follow arc ({a},{a})")));
            }
            if !arcs.contains(&(b, a)) {
                return Err(Error::Invariant(format!(
                    "follow arcs not symmetric: ({a},{b}) present, ({b},{a}) missing"
                )));
            }
        }
        Ok(FollowSet { arcs })
    }

    /// Inserts both directions of a relationship.
    pub fn insert_pair(&mut self, a: u32, b: u32) {
        debug_assert_ne!(a, b);
        self.arcs.insert((a, b));
        self.arcs.insert((b, a));
    }

    /// Removes both directions of a relationship.
    pub fn remove_pair(&mut self, a: u32, b: u32) {
        self.arcs.remove(&(a, b));
        self.arcs.remove(&(b, a));
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        self.arcs.contains(&(a, b))
    }

    /// Number of ordered arcs.
    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Ordered arcs in deterministic (sorted) order.
    pub fn arcs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.arcs.iter().copied()
    }

    /// Unordered relationships (a < b), in deterministic order.
    pub fn unordered_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.arcs.iter().copied().filter(|&(a, b)| a < b)
    }
}

/// Derives the follow set from an interaction matrix.
///
/// A pair of distinct users follows each other iff the cosine similarity of
/// their matrix rows is positive. Rows are non-negative, so this holds iff
/// some repository is in both supports; the implementation intersects
/// supports via per-repo occupant lists, which is exactly equivalent.
/// Users with an all-zero row are similar to nobody.
pub fn derive_follows(m: &UserRepoMatrix) -> FollowSet {
    let mut occupants: Vec<Vec<u32>> = vec![Vec::new(); m.repos()];
    for u in 0..m.users() {
        let row = m.row(u);
        for (r, &c) in row.iter().enumerate() {
            if c > 0 {
                occupants[r].push(u as u32);
            }
        }
    }
    let mut set = FollowSet::new();
    for users in &occupants {
        for (i, &a) in users.iter().enumerate() {
            for &b in &users[i + 1..] {
                set.insert_pair(a, b);
            }
        }
    }
    set
}

/// An edge list together with its follow arcs, viewed as a directed
/// multigraph: every event is an arc source→target, every follow arc a
/// user→user arc of weight one.
#[derive(Debug, Clone)]
pub struct InteractionGraph<'a> {
    pub base: &'a EdgeList,
    pub follows: FollowSet,
}

impl<'a> InteractionGraph<'a> {
    /// Wraps an edge list with an explicitly provided follow set (used for
    /// persisted derived datasets whose follows were adjusted).
    pub fn with_follows(base: &'a EdgeList, follows: FollowSet) -> Result<InteractionGraph<'a>> {
        let users = base.num_users() as u32;
        for (a, b) in follows.arcs() {
            if a >= users || b >= users {
                return Err(Error::Invariant(format!(
                    "follow arc ({a},{b}) outside the user range 0..{users}"
                )));
            }
        }
        Ok(InteractionGraph { base, follows })
    }

    /// Total number of arcs: base events plus ordered follow arcs.
    pub fn arc_count(&self) -> usize {
        self.base.events().len() + self.follows.arc_count()
    }
}

/// Builds the full interaction graph of an edge list: count matrix, derived
/// follows, multigraph view. Any follow events stored in the list are
/// ignored by the derivation (follows are always recomputed from the base
/// interactions).
pub fn assemble_graph(e: &EdgeList) -> InteractionGraph<'_> {
    let follows = derive_follows(&build_count_matrix(e));
    InteractionGraph { base: e, follows }
}

/// Appends a follow set to an edge list as explicit follow events (in
/// sorted arc order), for persisting derived datasets. The inverse of
/// [`EdgeList::split_follows`].
pub fn attach_follow_events(base: &EdgeList, follows: &FollowSet) -> EdgeList {
    let mut out = base.clone();
    for (a, b) in follows.arcs() {
        out.events.push(crate::dataset::Event {
            source: base.user_node(a as usize),
            target: base.user_node(b as usize),
            kind: crate::dataset::EventType::Follow,
        });
    }
    out
}
