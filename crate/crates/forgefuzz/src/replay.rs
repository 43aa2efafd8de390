//! Event replay through a forge backend.
//!
//! [`ForgeClient`] is the backend contract: a small set of forge operations
//! (account/repository creation, stars, forks, pushes, pull requests,
//! follows), each returning success or a typed error, with per-user cost
//! accounting behind [`ForgeClient::snapshot_metrics`]. The in-memory
//! backend lives in [`crate::simforge`]; remote adapters implement the same
//! trait.
//!
//! [`replay`] feeds a dataset through the workflow event by event: the
//! acting user and the target entity are created on demand, then the event
//! dispatches to its action. Backend errors never abort a run; they are
//! recorded per event and tallied.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::time::Instant;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EdgeList, EventType};
use crate::error::{Error, Result};
use crate::followgraph::FollowSet;

/// Pull request lifecycle. Legal transitions: open→merged, open→closed,
/// closed→open. Merged is terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrStatus {
    Open,
    Merged,
    Closed,
}

/// Line counts reported by a push.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushStats {
    pub lines_added: usize,
    pub lines_deleted: usize,
}

/// Typed failures a forge can report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ForgeError {
    #[error("unknown {kind}: {name}")]
    UnknownEntity { kind: String, name: String },
    #[error("{user} is not a member of {repo}")]
    NotMember { user: String, repo: String },
    /// The followee-count restriction; the analog of the HTTP 304 failures
    /// a real forge returns when the follow page stops loading.
    #[error("{user} reached the follow limit of {limit}")]
    FollowLimit { user: String, limit: u32 },
    #[error("{user} cannot follow themselves")]
    SelfFollow { user: String },
    #[error("pull request {id} not found")]
    PrNotFound { id: u64 },
    #[error("pull request {id} is {from:?}; cannot {action}")]
    InvalidTransition {
        id: u64,
        from: PrStatus,
        action: String,
    },
    #[error("an open pull request already exists on {repo}:{branch}")]
    OpenPrExists { repo: String, branch: String },
    #[error("backend failure: {0}")]
    Backend(String),
}

impl ForgeError {
    /// Stable short code used in tallies and request logs.
    pub fn code(&self) -> &'static str {
        match self {
            ForgeError::UnknownEntity { .. } => "unknown_entity",
            ForgeError::NotMember { .. } => "not_member",
            ForgeError::FollowLimit { .. } => "follow_limit",
            ForgeError::SelfFollow { .. } => "self_follow",
            ForgeError::PrNotFound { .. } => "pr_not_found",
            ForgeError::InvalidTransition { .. } => "invalid_transition",
            ForgeError::OpenPrExists { .. } => "open_pr_exists",
            ForgeError::Backend(_) => "backend",
        }
    }
}

/// Cumulative per-user resource usage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UserCost {
    pub cpu: f64,
    pub mem: f64,
    pub latency: f64,
    pub requests: u64,
}

impl UserCost {
    pub fn add(&mut self, cpu: f64, mem: f64, latency: f64) {
        self.cpu += cpu;
        self.mem += mem;
        self.latency += latency;
        self.requests += 1;
    }
}

/// Aggregated metrics a backend reports: per-user cumulative costs plus a
/// request-rate series over the backend's virtual clock.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForgeMetrics {
    pub per_user: BTreeMap<String, UserCost>,
    pub totals: UserCost,
    /// Requests per clock bucket (bucket width is backend configuration).
    pub request_buckets: Vec<u64>,
}

/// The backend contract. Every operation carries the acting user so the
/// backend can attribute its cost.
pub trait ForgeClient {
    fn user_exists(&mut self, name: &str) -> std::result::Result<bool, ForgeError>;
    /// Idempotent; creating an existing user is a success.
    fn create_user(&mut self, name: &str) -> std::result::Result<(), ForgeError>;
    fn repo_exists(&mut self, actor: &str, name: &str) -> std::result::Result<bool, ForgeError>;
    /// Idempotent, like `create_user`.
    fn create_repo(&mut self, actor: &str, name: &str) -> std::result::Result<(), ForgeError>;
    /// Idempotent: starring twice is a no-op success.
    fn star(&mut self, user: &str, repo: &str) -> std::result::Result<(), ForgeError>;
    /// Idempotent per (user, repo): repeated forks return the existing fork.
    fn fork(&mut self, user: &str, repo: &str) -> std::result::Result<String, ForgeError>;
    fn ensure_member(&mut self, user: &str, repo: &str) -> std::result::Result<(), ForgeError>;
    fn push(
        &mut self,
        user: &str,
        repo: &str,
        branch: &str,
        text: &str,
    ) -> std::result::Result<PushStats, ForgeError>;
    fn find_open_pr(
        &mut self,
        actor: &str,
        repo: &str,
        branch: &str,
    ) -> std::result::Result<Option<u64>, ForgeError>;
    /// The most recently opened pull request on a branch, any status.
    fn latest_pr(
        &mut self,
        actor: &str,
        repo: &str,
        branch: &str,
    ) -> std::result::Result<Option<(u64, PrStatus)>, ForgeError>;
    fn open_pr(
        &mut self,
        user: &str,
        repo: &str,
        branch: &str,
        text: &str,
    ) -> std::result::Result<u64, ForgeError>;
    fn merge_pr(&mut self, actor: &str, id: u64) -> std::result::Result<(), ForgeError>;
    fn close_pr(&mut self, actor: &str, id: u64) -> std::result::Result<(), ForgeError>;
    fn reopen_pr(&mut self, actor: &str, id: u64) -> std::result::Result<(), ForgeError>;
    fn follow(&mut self, user: &str, target: &str) -> std::result::Result<(), ForgeError>;
    fn snapshot_metrics(&mut self) -> std::result::Result<ForgeMetrics, ForgeError>;
}

/// Text snippets pushed as commit and pull-request content.
#[derive(Debug, Clone)]
pub struct CommitCorpus {
    snippets: Vec<String>,
}

impl CommitCorpus {
    pub fn new(snippets: Vec<String>) -> Result<CommitCorpus> {
        if snippets.is_empty() {
            return Err(Error::EmptyDataset("commit corpus is empty".into()));
        }
        Ok(CommitCorpus { snippets })
    }

    /// One snippet per non-empty line.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<CommitCorpus> {
        let mut snippets = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                snippets.push(line);
            }
        }
        CommitCorpus::new(snippets)
    }

    /// The corpus bundled with the toolkit.
    pub fn builtin() -> CommitCorpus {
        CommitCorpus::from_reader(include_str!("../../../data/commit_corpus.txt").as_bytes())
            .expect("bundled corpus is non-empty")
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> &str {
        &self.snippets[rng.random_range(0..self.snippets.len())]
    }
}

/// Execution order of a replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayOrder {
    /// Base events in list order, then follow arcs in sorted order.
    Listed,
    /// Seeded shuffle of the combined sequence.
    Shuffled,
}

/// An event in replay form (names instead of node indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEvent {
    pub source: String,
    pub target: String,
    pub kind: EventType,
}

/// Outcome of one replayed event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub seq: usize,
    #[serde(flatten)]
    pub event: ReplayEvent,
    pub applied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything a replay run produces.
#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub total: usize,
    pub applied: usize,
    pub skipped: usize,
    pub error_tally: BTreeMap<String, usize>,
    pub user_metrics: BTreeMap<String, UserCost>,
    pub outcomes: Vec<EventOutcome>,
    /// Wall-clock duration in seconds. Not serialized: report files must be
    /// byte-identical across reruns with the same seeds.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Per-user/repo pull-request branch counters; branch names are a
/// deterministic function of (user, repo, completed cycles).
#[derive(Debug, Default)]
pub struct WorkflowState {
    pr_seq: BTreeMap<(String, String), u64>,
}

impl WorkflowState {
    fn branch(&self, user: &str, repo: &str) -> String {
        let seq = self
            .pr_seq
            .get(&(user.to_string(), repo.to_string()))
            .copied()
            .unwrap_or(0);
        format!("{user}/pr-{seq}")
    }

    fn bump(&mut self, user: &str, repo: &str) {
        *self
            .pr_seq
            .entry((user.to_string(), repo.to_string()))
            .or_insert(0) += 1;
    }
}

fn dispatch<R: Rng>(
    ev: &ReplayEvent,
    forge: &mut dyn ForgeClient,
    corpus: &CommitCorpus,
    rng: &mut R,
    wf: &mut WorkflowState,
) -> std::result::Result<(), ForgeError> {
    let user = ev.source.as_str();
    forge.create_user(user)?;
    match ev.kind {
        EventType::Follow => forge.create_user(&ev.target)?,
        _ => forge.create_repo(user, &ev.target)?,
    }
    match ev.kind {
        EventType::Watch => forge.star(user, &ev.target),
        EventType::Fork => forge.fork(user, &ev.target).map(|_| ()),
        EventType::Push => {
            forge.ensure_member(user, &ev.target)?;
            let text = corpus.sample(rng).to_string();
            forge.push(user, &ev.target, user, &text).map(|_| ())
        }
        EventType::PullRequest => {
            let repo = ev.target.as_str();
            let branch = wf.branch(user, repo);
            if let Some(id) = forge.find_open_pr(user, repo, &branch)? {
                forge.merge_pr(user, id)?;
                wf.bump(user, repo);
                Ok(())
            } else if let Some((id, PrStatus::Closed)) = forge.latest_pr(user, repo, &branch)? {
                forge.reopen_pr(user, id)
            } else {
                let text = corpus.sample(rng).to_string();
                forge
                    .open_pr(user, repo, &branch, text.as_str())
                    .map(|_| ())
            }
        }
        EventType::Follow => forge.follow(user, &ev.target),
    }
}

/// Validates-and-creates entities for one event and performs its action.
/// Backend errors are turned into a skipped outcome, never a panic or an
/// aborted run.
pub fn process_event<R: Rng>(
    seq: usize,
    ev: &ReplayEvent,
    forge: &mut dyn ForgeClient,
    corpus: &CommitCorpus,
    rng: &mut R,
    wf: &mut WorkflowState,
) -> EventOutcome {
    match dispatch(ev, forge, corpus, rng, wf) {
        Ok(()) => EventOutcome {
            seq,
            event: ev.clone(),
            applied: true,
            error: None,
        },
        Err(e) => EventOutcome {
            seq,
            event: ev.clone(),
            applied: false,
            error: Some(e.code().to_string()),
        },
    }
}

/// Flattens a dataset into replay form: base events in list order followed
/// by the follow arcs in sorted order.
pub fn replay_sequence(e: &EdgeList, follows: &FollowSet) -> Vec<ReplayEvent> {
    let mut seq: Vec<ReplayEvent> = e
        .events()
        .iter()
        .map(|ev| ReplayEvent {
            source: e.node_name(ev.source).to_string(),
            target: e.node_name(ev.target).to_string(),
            kind: ev.kind,
        })
        .collect();
    for (a, b) in follows.arcs() {
        seq.push(ReplayEvent {
            source: e.user_names()[a as usize].clone(),
            target: e.user_names()[b as usize].clone(),
            kind: EventType::Follow,
        });
    }
    seq
}

/// Replays a dataset through a forge backend and collects the report.
///
/// Deterministic given the order mode and seed: the seed drives both the
/// optional shuffle and the corpus sampling.
pub fn replay(
    e: &EdgeList,
    follows: &FollowSet,
    forge: &mut dyn ForgeClient,
    corpus: &CommitCorpus,
    order: ReplayOrder,
    seed: u64,
) -> Result<ReplayReport> {
    let started = Instant::now();
    let mut events = replay_sequence(e, follows);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if order == ReplayOrder::Shuffled {
        events.shuffle(&mut rng);
    }

    let mut wf = WorkflowState::default();
    let mut outcomes = Vec::with_capacity(events.len());
    let mut error_tally: BTreeMap<String, usize> = BTreeMap::new();
    let mut applied = 0usize;

    for (seq, ev) in events.iter().enumerate() {
        let outcome = process_event(seq, ev, forge, corpus, &mut rng, &mut wf);
        if outcome.applied {
            applied += 1;
        } else if let Some(code) = &outcome.error {
            *error_tally.entry(code.clone()).or_insert(0) += 1;
        }
        outcomes.push(outcome);
    }

    let metrics = forge
        .snapshot_metrics()
        .map_err(|e| Error::Invariant(format!("metrics snapshot failed: {e}")))?;

    Ok(ReplayReport {
        total: outcomes.len(),
        applied,
        skipped: outcomes.len() - applied,
        error_tally,
        user_metrics: metrics.per_user,
        outcomes,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
