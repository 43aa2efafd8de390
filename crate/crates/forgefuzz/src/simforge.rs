//! In-memory simulated Git forge.
//!
//! Implements the [`ForgeClient`](crate::replay::ForgeClient) contract with
//! configurable limits and a synthetic per-request cost model. The cost
//! model is explicitly synthetic: it exists so that feature-versus-load
//! analyses have something deterministic and non-degenerate to chew on, not
//! to predict any real forge's resource usage. Follow cost grows linearly
//! with the follower's followee count; account creation grows with the
//! number of accounts; pushes grow with the lines they touch.
//!
//! Every operation is appended to a request log (`seq,user,op,cpu,mem,
//! latency,outcome`) attributed to the acting user, and a virtual clock
//! advanced by each request's latency buckets the request rate.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{ForgeClient, ForgeError, ForgeMetrics, PrStatus, PushStats, UserCost};

/// Operation kinds, used for cost lookup and request-log rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    UserExists,
    CreateUser,
    RepoExists,
    CreateRepo,
    Star,
    Fork,
    EnsureMember,
    Push,
    FindOpenPr,
    LatestPr,
    OpenPr,
    MergePr,
    ClosePr,
    ReopenPr,
    Follow,
}

impl OpKind {
    pub const ALL: [OpKind; 15] = [
        OpKind::UserExists,
        OpKind::CreateUser,
        OpKind::RepoExists,
        OpKind::CreateRepo,
        OpKind::Star,
        OpKind::Fork,
        OpKind::EnsureMember,
        OpKind::Push,
        OpKind::FindOpenPr,
        OpKind::LatestPr,
        OpKind::OpenPr,
        OpKind::MergePr,
        OpKind::ClosePr,
        OpKind::ReopenPr,
        OpKind::Follow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::UserExists => "user_exists",
            OpKind::CreateUser => "create_user",
            OpKind::RepoExists => "repo_exists",
            OpKind::CreateRepo => "create_repo",
            OpKind::Star => "star",
            OpKind::Fork => "fork",
            OpKind::EnsureMember => "ensure_member",
            OpKind::Push => "push",
            OpKind::FindOpenPr => "find_open_pr",
            OpKind::LatestPr => "latest_pr",
            OpKind::OpenPr => "open_pr",
            OpKind::MergePr => "merge_pr",
            OpKind::ClosePr => "close_pr",
            OpKind::ReopenPr => "reopen_pr",
            OpKind::Follow => "follow",
        }
    }

    pub fn from_name(s: &str) -> Option<OpKind> {
        OpKind::ALL.iter().copied().find(|k| k.as_str() == s)
    }

    fn index(self) -> usize {
        OpKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

/// One forge operation in wire form; what a remote adapter posts to a
/// forge service and what [`SimForge::apply`] consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ForgeOp {
    UserExists {
        name: String,
    },
    CreateUser {
        name: String,
    },
    RepoExists {
        actor: String,
        name: String,
    },
    CreateRepo {
        actor: String,
        name: String,
    },
    Star {
        user: String,
        repo: String,
    },
    Fork {
        user: String,
        repo: String,
    },
    EnsureMember {
        user: String,
        repo: String,
    },
    Push {
        user: String,
        repo: String,
        branch: String,
        text: String,
    },
    FindOpenPr {
        actor: String,
        repo: String,
        branch: String,
    },
    LatestPr {
        actor: String,
        repo: String,
        branch: String,
    },
    OpenPr {
        user: String,
        repo: String,
        branch: String,
        text: String,
    },
    MergePr {
        actor: String,
        id: u64,
    },
    ClosePr {
        actor: String,
        id: u64,
    },
    ReopenPr {
        actor: String,
        id: u64,
    },
    Follow {
        user: String,
        target: String,
    },
}

impl ForgeOp {
    pub fn kind(&self) -> OpKind {
        match self {
            ForgeOp::UserExists { .. } => OpKind::UserExists,
            ForgeOp::CreateUser { .. } => OpKind::CreateUser,
            ForgeOp::RepoExists { .. } => OpKind::RepoExists,
            ForgeOp::CreateRepo { .. } => OpKind::CreateRepo,
            ForgeOp::Star { .. } => OpKind::Star,
            ForgeOp::Fork { .. } => OpKind::Fork,
            ForgeOp::EnsureMember { .. } => OpKind::EnsureMember,
            ForgeOp::Push { .. } => OpKind::Push,
            ForgeOp::FindOpenPr { .. } => OpKind::FindOpenPr,
            ForgeOp::LatestPr { .. } => OpKind::LatestPr,
            ForgeOp::OpenPr { .. } => OpKind::OpenPr,
            ForgeOp::MergePr { .. } => OpKind::MergePr,
            ForgeOp::ClosePr { .. } => OpKind::ClosePr,
            ForgeOp::ReopenPr { .. } => OpKind::ReopenPr,
            ForgeOp::Follow { .. } => OpKind::Follow,
        }
    }

    /// The user the operation's cost is attributed to.
    pub fn actor(&self) -> &str {
        match self {
            ForgeOp::UserExists { name } | ForgeOp::CreateUser { name } => name,
            ForgeOp::RepoExists { actor, .. }
            | ForgeOp::CreateRepo { actor, .. }
            | ForgeOp::FindOpenPr { actor, .. }
            | ForgeOp::LatestPr { actor, .. }
            | ForgeOp::MergePr { actor, .. }
            | ForgeOp::ClosePr { actor, .. }
            | ForgeOp::ReopenPr { actor, .. } => actor,
            ForgeOp::Star { user, .. }
            | ForgeOp::Fork { user, .. }
            | ForgeOp::EnsureMember { user, .. }
            | ForgeOp::Push { user, .. }
            | ForgeOp::OpenPr { user, .. }
            | ForgeOp::Follow { user, .. } => user,
        }
    }
}

/// Response payload of a successful operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ForgeResponse {
    Unit,
    Bool(bool),
    ForkRepo(String),
    Push(PushStats),
    PrId(u64),
    MaybePr(Option<u64>),
    LatestPr(Option<(u64, PrStatus)>),
}

/// Cost of one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub cpu: f64,
    pub mem: f64,
    pub latency: f64,
}

/// Per-operation base costs plus size-dependent growth factors.
///
/// Effective cost of a request is `base * (1 + scale * size)` where the
/// size term depends on the operation: current account count for
/// `create_user`, the follower's followee count for `follow`, lines
/// touched for `push`, zero otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    base: [CostSample; 15],
    pub create_user_per_user: f64,
    pub follow_per_followee: f64,
    pub push_per_line: f64,
    /// Width of one request-rate bucket on the virtual (latency) clock.
    pub bucket_width: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        let c = |cpu: f64, mem: f64, latency: f64| CostSample { cpu, mem, latency };
        let mut base = [c(0.5, 0.2, 2.0); 15];
        base[OpKind::UserExists.index()] = c(0.3, 0.1, 1.0);
        base[OpKind::CreateUser.index()] = c(4.0, 6.0, 12.0);
        base[OpKind::RepoExists.index()] = c(0.3, 0.1, 1.0);
        base[OpKind::CreateRepo.index()] = c(6.0, 8.0, 18.0);
        base[OpKind::Star.index()] = c(0.8, 0.4, 3.0);
        base[OpKind::Fork.index()] = c(7.0, 9.0, 25.0);
        base[OpKind::EnsureMember.index()] = c(1.0, 0.5, 4.0);
        base[OpKind::Push.index()] = c(3.0, 2.0, 10.0);
        base[OpKind::FindOpenPr.index()] = c(0.6, 0.3, 2.0);
        base[OpKind::LatestPr.index()] = c(0.6, 0.3, 2.0);
        base[OpKind::OpenPr.index()] = c(4.0, 3.0, 14.0);
        base[OpKind::MergePr.index()] = c(5.0, 3.5, 16.0);
        base[OpKind::ClosePr.index()] = c(1.5, 0.8, 5.0);
        base[OpKind::ReopenPr.index()] = c(1.5, 0.8, 5.0);
        base[OpKind::Follow.index()] = c(1.5, 0.8, 5.0);
        CostModel {
            base,
            create_user_per_user: 0.002,
            follow_per_followee: 0.05,
            push_per_line: 0.02,
            bucket_width: 1000.0,
        }
    }
}

impl CostModel {
    pub fn base_cost(&self, kind: OpKind) -> CostSample {
        self.base[kind.index()]
    }

    pub fn set_base_cost(&mut self, kind: OpKind, cost: CostSample) {
        self.base[kind.index()] = cost;
    }

    fn scaled(&self, kind: OpKind, size: f64) -> CostSample {
        let scale = match kind {
            OpKind::CreateUser => self.create_user_per_user,
            OpKind::Follow => self.follow_per_followee,
            OpKind::Push => self.push_per_line,
            _ => 0.0,
        };
        let f = 1.0 + scale * size;
        let b = self.base[kind.index()];
        CostSample {
            cpu: b.cpu * f,
            mem: b.mem * f,
            latency: b.latency * f,
        }
    }

    /// Parses the key-value parameter format:
    ///
    /// ```text
    /// # comment
    /// follow.cpu = 1.5
    /// growth.follow_per_followee = 0.05
    /// metrics.bucket_width = 1000
    /// ```
    pub fn from_params<R: std::io::BufRead>(reader: R) -> Result<CostModel> {
        let mut model = CostModel::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = i + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| Error::BadRow {
                row,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| Error::BadRow {
                row,
                message: format!("bad number {:?}", value.trim()),
            })?;
            match key {
                "growth.create_user_per_user" => model.create_user_per_user = value,
                "growth.follow_per_followee" => model.follow_per_followee = value,
                "growth.push_per_line" => model.push_per_line = value,
                "metrics.bucket_width" => model.bucket_width = value,
                _ => {
                    let (op, field) = key.rsplit_once('.').ok_or_else(|| Error::BadRow {
                        row,
                        message: format!("unknown key {key:?}"),
                    })?;
                    let kind = OpKind::from_name(op).ok_or_else(|| Error::BadRow {
                        row,
                        message: format!("unknown operation {op:?}"),
                    })?;
                    let cost = &mut model.base[kind.index()];
                    match field {
                        "cpu" => cost.cpu = value,
                        "mem" => cost.mem = value,
                        "latency" => cost.latency = value,
                        _ => {
                            return Err(Error::BadRow {
                                row,
                                message: format!("unknown field {field:?}"),
                            })
                        }
                    }
                }
            }
            if value < 0.0 {
                return Err(Error::BadRow {
                    row,
                    message: "costs must be non-negative".into(),
                });
            }
        }
        Ok(model)
    }
}

/// One request-log entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestRecord {
    pub seq: u64,
    pub user: String,
    pub op: OpKind,
    pub cpu: f64,
    pub mem: f64,
    pub latency: f64,
    /// `ok` or the error code.
    pub outcome: String,
}

#[derive(Debug, Clone, Default)]
struct UserState {
    followees: std::collections::BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
struct BranchState {
    lines: usize,
    commits: usize,
}

#[derive(Debug, Clone, Default)]
struct RepoState {
    members: std::collections::BTreeSet<String>,
    stars: std::collections::BTreeSet<String>,
    fork_of: Option<String>,
    /// user -> name of that user's fork of this repo
    forks: BTreeMap<String, String>,
    branches: BTreeMap<String, BranchState>,
}

#[derive(Debug, Clone, PartialEq)]
struct PrState {
    id: u64,
    repo: String,
    branch: String,
    author: String,
    status: PrStatus,
}

/// The simulated forge.
#[derive(Debug, Clone)]
pub struct SimForge {
    users: BTreeMap<String, UserState>,
    repos: BTreeMap<String, RepoState>,
    prs: Vec<PrState>,
    log: Vec<RequestRecord>,
    per_user: BTreeMap<String, UserCost>,
    totals: UserCost,
    buckets: Vec<u64>,
    clock: f64,
    cost: CostModel,
    /// `None` means unlimited.
    follow_limit: Option<u32>,
}

impl Default for SimForge {
    fn default() -> Self {
        SimForge::new()
    }
}

pub const DEFAULT_FOLLOW_LIMIT: u32 = 300;

impl SimForge {
    /// A fresh forge with the default cost model and the default follow
    /// limit of 300.
    pub fn new() -> SimForge {
        SimForge {
            users: BTreeMap::new(),
            repos: BTreeMap::new(),
            prs: Vec::new(),
            log: Vec::new(),
            per_user: BTreeMap::new(),
            totals: UserCost::default(),
            buckets: Vec::new(),
            clock: 0.0,
            cost: CostModel::default(),
            follow_limit: Some(DEFAULT_FOLLOW_LIMIT),
        }
    }

    pub fn with_follow_limit(mut self, limit: Option<u32>) -> SimForge {
        self.follow_limit = limit;
        self
    }

    pub fn with_cost_model(mut self, cost: CostModel) -> SimForge {
        self.cost = cost;
        self
    }

    /// Returns the forge to its initial empty state (the container-restart
    /// analog); configuration is retained.
    pub fn reset(&mut self) {
        self.users.clear();
        self.repos.clear();
        self.prs.clear();
        self.log.clear();
        self.per_user.clear();
        self.totals = UserCost::default();
        self.buckets.clear();
        self.clock = 0.0;
    }

    pub fn request_log(&self) -> &[RequestRecord] {
        &self.log
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_repos(&self) -> usize {
        self.repos.len()
    }

    pub fn pr_status(&self, id: u64) -> Option<PrStatus> {
        self.prs.iter().find(|p| p.id == id).map(|p| p.status)
    }

    pub fn pr_statuses(&self) -> Vec<(u64, PrStatus)> {
        self.prs.iter().map(|p| (p.id, p.status)).collect()
    }

    /// Applies one operation: state transition, cost accounting, request
    /// logging. Failed operations are logged too (the server still did the
    /// work of rejecting them).
    pub fn apply(
        &mut self,
        op: &ForgeOp,
    ) -> (std::result::Result<ForgeResponse, ForgeError>, CostSample) {
        let size = self.size_factor(op);
        let cost = self.cost.scaled(op.kind(), size);
        let result = self.transition(op);
        let outcome = match &result {
            Ok(_) => "ok".to_string(),
            Err(e) => e.code().to_string(),
        };
        self.record(op, cost, outcome);
        (result, cost)
    }

    fn size_factor(&self, op: &ForgeOp) -> f64 {
        match op {
            ForgeOp::CreateUser { .. } => self.users.len() as f64,
            ForgeOp::Follow { user, .. } => self
                .users
                .get(user)
                .map(|u| u.followees.len() as f64)
                .unwrap_or(0.0),
            ForgeOp::Push {
                repo, branch, text, ..
            } => {
                let new_lines = text.lines().count();
                let old_lines = self
                    .repos
                    .get(repo)
                    .and_then(|r| r.branches.get(branch))
                    .map(|b| b.lines)
                    .unwrap_or(0);
                (new_lines + old_lines) as f64
            }
            _ => 0.0,
        }
    }

    fn record(&mut self, op: &ForgeOp, cost: CostSample, outcome: String) {
        let user = op.actor().to_string();
        self.per_user
            .entry(user.clone())
            .or_default()
            .add(cost.cpu, cost.mem, cost.latency);
        self.totals.add(cost.cpu, cost.mem, cost.latency);
        self.clock += cost.latency;
        let bucket = (self.clock / self.cost.bucket_width) as usize;
        if bucket >= self.buckets.len() {
            self.buckets.resize(bucket + 1, 0);
        }
        self.buckets[bucket] += 1;
        self.log.push(RequestRecord {
            seq: self.log.len() as u64,
            user,
            op: op.kind(),
            cpu: cost.cpu,
            mem: cost.mem,
            latency: cost.latency,
            outcome,
        });
    }

    fn require_user(&self, name: &str) -> std::result::Result<(), ForgeError> {
        if self.users.contains_key(name) {
            Ok(())
        } else {
            Err(ForgeError::UnknownEntity {
                kind: "user".into(),
                name: name.into(),
            })
        }
    }

    fn repo_mut(&mut self, name: &str) -> std::result::Result<&mut RepoState, ForgeError> {
        self.repos
            .get_mut(name)
            .ok_or_else(|| ForgeError::UnknownEntity {
                kind: "repo".into(),
                name: name.into(),
            })
    }

    fn transition(&mut self, op: &ForgeOp) -> std::result::Result<ForgeResponse, ForgeError> {
        match op {
            ForgeOp::UserExists { name } => Ok(ForgeResponse::Bool(self.users.contains_key(name))),
            ForgeOp::CreateUser { name } => {
                self.users.entry(name.clone()).or_default();
                Ok(ForgeResponse::Unit)
            }
            ForgeOp::RepoExists { name, .. } => {
                Ok(ForgeResponse::Bool(self.repos.contains_key(name)))
            }
            ForgeOp::CreateRepo { actor, name } => {
                self.require_user(actor)?;
                self.repos.entry(name.clone()).or_default();
                Ok(ForgeResponse::Unit)
            }
            ForgeOp::Star { user, repo } => {
                self.require_user(user)?;
                let user = user.clone();
                self.repo_mut(repo)?.stars.insert(user);
                Ok(ForgeResponse::Unit)
            }
            ForgeOp::Fork { user, repo } => {
                self.require_user(user)?;
                if !self.repos.contains_key(repo) {
                    return Err(ForgeError::UnknownEntity {
                        kind: "repo".into(),
                        name: repo.clone(),
                    });
                }
                if let Some(existing) = self.repos[repo].forks.get(user) {
                    return Ok(ForgeResponse::ForkRepo(existing.clone()));
                }
                let fork_name = format!("{user}/fork-of-{}", repo.replace('/', "-"));
                let mut fork = RepoState {
                    fork_of: Some(repo.clone()),
                    ..RepoState::default()
                };
                fork.members.insert(user.clone());
                self.repos.insert(fork_name.clone(), fork);
                self.repos
                    .get_mut(repo)
                    .unwrap()
                    .forks
                    .insert(user.clone(), fork_name.clone());
                Ok(ForgeResponse::ForkRepo(fork_name))
            }
            ForgeOp::EnsureMember { user, repo } => {
                self.require_user(user)?;
                let user = user.clone();
                self.repo_mut(repo)?.members.insert(user);
                Ok(ForgeResponse::Unit)
            }
            ForgeOp::Push {
                user,
                repo,
                branch,
                text,
            } => {
                self.require_user(user)?;
                let key = branch.clone();
                let new_lines = text.lines().count();
                let repo_state = self.repo_mut(repo)?;
                if !repo_state.members.contains(user) {
                    return Err(ForgeError::NotMember {
                        user: user.clone(),
                        repo: repo.clone(),
                    });
                }
                let branch_state = repo_state.branches.entry(key).or_default();
                let lines_deleted = branch_state.lines;
                branch_state.lines = new_lines;
                branch_state.commits += 1;
                Ok(ForgeResponse::Push(PushStats {
                    lines_added: new_lines,
                    lines_deleted,
                }))
            }
            ForgeOp::FindOpenPr { repo, branch, .. } => Ok(ForgeResponse::MaybePr(
                self.prs
                    .iter()
                    .find(|p| p.repo == *repo && p.branch == *branch && p.status == PrStatus::Open)
                    .map(|p| p.id),
            )),
            ForgeOp::LatestPr { repo, branch, .. } => Ok(ForgeResponse::LatestPr(
                self.prs
                    .iter()
                    .rev()
                    .find(|p| p.repo == *repo && p.branch == *branch)
                    .map(|p| (p.id, p.status)),
            )),
            ForgeOp::OpenPr {
                user, repo, branch, ..
            } => {
                self.require_user(user)?;
                if self
                    .prs
                    .iter()
                    .any(|p| p.repo == *repo && p.branch == *branch && p.status == PrStatus::Open)
                {
                    return Err(ForgeError::OpenPrExists {
                        repo: repo.clone(),
                        branch: branch.clone(),
                    });
                }
                let (user, repo, branch) = (user.clone(), repo.clone(), branch.clone());
                // the branch is created on demand, like a push to a new branch
                self.repo_mut(&repo)?
                    .branches
                    .entry(branch.clone())
                    .or_default();
                let id = self.prs.len() as u64 + 1;
                self.prs.push(PrState {
                    id,
                    repo,
                    branch,
                    author: user,
                    status: PrStatus::Open,
                });
                Ok(ForgeResponse::PrId(id))
            }
            ForgeOp::MergePr { id, .. } => {
                self.pr_transition(*id, PrStatus::Open, PrStatus::Merged, "merge")
            }
            ForgeOp::ClosePr { id, .. } => {
                self.pr_transition(*id, PrStatus::Open, PrStatus::Closed, "close")
            }
            ForgeOp::ReopenPr { id, .. } => {
                self.pr_transition(*id, PrStatus::Closed, PrStatus::Open, "reopen")
            }
            ForgeOp::Follow { user, target } => {
                self.require_user(user)?;
                self.require_user(target)?;
                if user == target {
                    return Err(ForgeError::SelfFollow { user: user.clone() });
                }
                let limit = self.follow_limit;
                let followees = &mut self.users.get_mut(user).unwrap().followees;
                if followees.contains(target) {
                    return Ok(ForgeResponse::Unit); // already following
                }
                if let Some(limit) = limit {
                    if followees.len() as u32 >= limit {
                        return Err(ForgeError::FollowLimit {
                            user: user.clone(),
                            limit,
                        });
                    }
                }
                followees.insert(target.clone());
                Ok(ForgeResponse::Unit)
            }
        }
    }

    fn pr_transition(
        &mut self,
        id: u64,
        from: PrStatus,
        to: PrStatus,
        action: &str,
    ) -> std::result::Result<ForgeResponse, ForgeError> {
        let pr = self
            .prs
            .iter_mut()
            .find(|p| p.id == id)
            .ok_or(ForgeError::PrNotFound { id })?;
        if pr.status != from {
            return Err(ForgeError::InvalidTransition {
                id,
                from: pr.status,
                action: action.into(),
            });
        }
        pr.status = to;
        Ok(ForgeResponse::Unit)
    }

    /// Checks the structural invariants of the forge state; used by the
    /// state-machine test suite.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if let Some(limit) = self.follow_limit {
            for (name, u) in &self.users {
                if u.followees.len() as u32 > limit {
                    return Err(format!("{name} exceeds the follow limit"));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for pr in &self.prs {
            if !seen.insert(pr.id) {
                return Err(format!("duplicate pull request id {}", pr.id));
            }
            if !self.repos.contains_key(&pr.repo) {
                return Err(format!(
                    "pull request {} on unknown repo {}",
                    pr.id, pr.repo
                ));
            }
        }
        // fork links must be acyclic and point at existing repos
        for (name, repo) in &self.repos {
            let mut hops = 0;
            let mut cursor = repo.fork_of.as_deref();
            while let Some(parent) = cursor {
                hops += 1;
                if hops > self.repos.len() {
                    return Err(format!("fork cycle reachable from {name}"));
                }
                match self.repos.get(parent) {
                    Some(p) => cursor = p.fork_of.as_deref(),
                    None => return Err(format!("{name} forked from unknown repo {parent}")),
                }
            }
        }
        Ok(())
    }
}

impl ForgeClient for SimForge {
    fn user_exists(&mut self, name: &str) -> std::result::Result<bool, ForgeError> {
        match self.apply(&ForgeOp::UserExists { name: name.into() }).0? {
            ForgeResponse::Bool(b) => Ok(b),
            _ => unreachable!(),
        }
    }

    fn create_user(&mut self, name: &str) -> std::result::Result<(), ForgeError> {
        self.apply(&ForgeOp::CreateUser { name: name.into() })
            .0
            .map(|_| ())
    }

    fn repo_exists(&mut self, actor: &str, name: &str) -> std::result::Result<bool, ForgeError> {
        let op = ForgeOp::RepoExists {
            actor: actor.into(),
            name: name.into(),
        };
        match self.apply(&op).0? {
            ForgeResponse::Bool(b) => Ok(b),
            _ => unreachable!(),
        }
    }

    fn create_repo(&mut self, actor: &str, name: &str) -> std::result::Result<(), ForgeError> {
        let op = ForgeOp::CreateRepo {
            actor: actor.into(),
            name: name.into(),
        };
        self.apply(&op).0.map(|_| ())
    }

    fn star(&mut self, user: &str, repo: &str) -> std::result::Result<(), ForgeError> {
        let op = ForgeOp::Star {
            user: user.into(),
            repo: repo.into(),
        };
        self.apply(&op).0.map(|_| ())
    }

    fn fork(&mut self, user: &str, repo: &str) -> std::result::Result<String, ForgeError> {
        let op = ForgeOp::Fork {
            user: user.into(),
            repo: repo.into(),
        };
        match self.apply(&op).0? {
            ForgeResponse::ForkRepo(name) => Ok(name),
            _ => unreachable!(),
        }
    }

    fn ensure_member(&mut self, user: &str, repo: &str) -> std::result::Result<(), ForgeError> {
        let op = ForgeOp::EnsureMember {
            user: user.into(),
            repo: repo.into(),
        };
        self.apply(&op).0.map(|_| ())
    }

    fn push(
        &mut self,
        user: &str,
        repo: &str,
        branch: &str,
        text: &str,
    ) -> std::result::Result<PushStats, ForgeError> {
        let op = ForgeOp::Push {
            user: user.into(),
            repo: repo.into(),
            branch: branch.into(),
            text: text.into(),
        };
        match self.apply(&op).0? {
            ForgeResponse::Push(stats) => Ok(stats),
            _ => unreachable!(),
        }
    }

    fn find_open_pr(
        &mut self,
        actor: &str,
        repo: &str,
        branch: &str,
    ) -> std::result::Result<Option<u64>, ForgeError> {
        let op = ForgeOp::FindOpenPr {
            actor: actor.into(),
            repo: repo.into(),
            branch: branch.into(),
        };
        match self.apply(&op).0? {
            ForgeResponse::MaybePr(id) => Ok(id),
            _ => unreachable!(),
        }
    }

    fn latest_pr(
        &mut self,
        actor: &str,
        repo: &str,
        branch: &str,
    ) -> std::result::Result<Option<(u64, PrStatus)>, ForgeError> {
        let op = ForgeOp::LatestPr {
            actor: actor.into(),
            repo: repo.into(),
            branch: branch.into(),
        };
        match self.apply(&op).0? {
            ForgeResponse::LatestPr(r) => Ok(r),
            _ => unreachable!(),
        }
    }

    fn open_pr(
        &mut self,
        user: &str,
        repo: &str,
        branch: &str,
        text: &str,
    ) -> std::result::Result<u64, ForgeError> {
        let op = ForgeOp::OpenPr {
            user: user.into(),
            repo: repo.into(),
            branch: branch.into(),
            text: text.into(),
        };
        match self.apply(&op).0? {
            ForgeResponse::PrId(id) => Ok(id),
            _ => unreachable!(),
        }
    }

    fn merge_pr(&mut self, actor: &str, id: u64) -> std::result::Result<(), ForgeError> {
        let op = ForgeOp::MergePr {
            actor: actor.into(),
            id,
        };
        self.apply(&op).0.map(|_| ())
    }

    fn close_pr(&mut self, actor: &str, id: u64) -> std::result::Result<(), ForgeError> {
        let op = ForgeOp::ClosePr {
            actor: actor.into(),
            id,
        };
        self.apply(&op).0.map(|_| ())
    }

    fn reopen_pr(&mut self, actor: &str, id: u64) -> std::result::Result<(), ForgeError> {
        let op = ForgeOp::ReopenPr {
            actor: actor.into(),
            id,
        };
        self.apply(&op).0.map(|_| ())
    }

    fn follow(&mut self, user: &str, target: &str) -> std::result::Result<(), ForgeError> {
        let op = ForgeOp::Follow {
            user: user.into(),
            target: target.into(),
        };
        self.apply(&op).0.map(|_| ())
    }

    fn snapshot_metrics(&mut self) -> std::result::Result<ForgeMetrics, ForgeError> {
        Ok(ForgeMetrics {
            per_user: self.per_user.clone(),
            totals: self.totals,
            request_buckets: self.buckets.clone(),
        })
    }
}

/// Writes the request log as CSV: `seq,user,op,cpu,mem,latency,outcome`.
pub fn write_request_log<W: Write>(log: &[RequestRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["seq", "user", "op", "cpu", "mem", "latency", "outcome"])?;
    for r in log {
        w.write_record([
            r.seq.to_string(),
            r.user.clone(),
            r.op.as_str().to_string(),
            r.cpu.to_string(),
            r.mem.to_string(),
            r.latency.to_string(),
            r.outcome.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a request log CSV back (used by the analysis stage).
pub fn read_request_log<R: std::io::Read>(reader: R) -> Result<Vec<(String, CostSample, String)>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let num = |j: usize| -> Result<f64> {
            record[j].parse().map_err(|_| Error::BadRow {
                row,
                message: format!("bad number {:?}", &record[j]),
            })
        };
        out.push((
            record[1].to_string(),
            CostSample {
                cpu: num(3)?,
                mem: num(4)?,
                latency: num(5)?,
            },
            record[6].to_string(),
        ));
    }
    Ok(out)
}
