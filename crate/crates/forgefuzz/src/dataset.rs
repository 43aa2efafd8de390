//! Event datasets: GitHub-Archive-style ingestion, the canonical edge-list
//! CSV format, and summary statistics.
//!
//! A dataset is an ordered multiset of typed events between named nodes
//! (users and repositories). Node identity is the string name; indices are
//! dense and assigned lexicographically within kind, repositories first,
//! so that two parses of the same input always agree.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The event types carried by a dataset.
///
/// `Follow` never occurs in a stored base edge list; follow arcs are always
/// derived from interaction similarity (see [`crate::followgraph`]) and only
/// persisted explicitly when a derived dataset is written out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    Push,
    Watch,
    PullRequest,
    Fork,
    Follow,
}

impl EventType {
    /// The four base (non-follow) event types, in their canonical order.
    pub const NON_FOLLOW: [EventType; 4] = [
        EventType::Push,
        EventType::Watch,
        EventType::PullRequest,
        EventType::Fork,
    ];

    /// Wire name as it appears in archive streams and edge-list CSV files.
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Push => "PushEvent",
            EventType::Watch => "WatchEvent",
            EventType::PullRequest => "PullRequestEvent",
            EventType::Fork => "ForkEvent",
            EventType::Follow => "FollowEvent",
        }
    }

    pub fn from_wire(s: &str) -> Option<EventType> {
        match s {
            "PushEvent" => Some(EventType::Push),
            "WatchEvent" => Some(EventType::Watch),
            "PullRequestEvent" => Some(EventType::PullRequest),
            "ForkEvent" => Some(EventType::Fork),
            "FollowEvent" => Some(EventType::Follow),
            _ => None,
        }
    }

    pub fn is_follow(self) -> bool {
        matches!(self, EventType::Follow)
    }
}

/// Node kind. Repositories occupy dense indices `0..R`, users `R..R+U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    User,
    Repo,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::User => "user",
            NodeKind::Repo => "repo",
        }
    }
}

/// A typed event between two dense node indices of an [`EdgeList`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub source: u32,
    pub target: u32,
    pub kind: EventType,
}

/// An event described by node names, before index assignment.
///
/// The source is always a user. For non-follow events the target is a
/// repository; for follow events it is another user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedEvent {
    pub source: String,
    pub target: String,
    pub kind: EventType,
}

/// An ordered multiset of events over a fixed node set.
///
/// Event order is meaningful (it is the replay order) and duplicates are
/// allowed. Every user and every repository is incident to at least one
/// non-follow event; isolated nodes cannot be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub(crate) repo_names: Vec<String>,
    pub(crate) user_names: Vec<String>,
    pub(crate) events: Vec<Event>,
}

impl EdgeList {
    /// An edge list with no nodes and no events.
    pub fn empty() -> EdgeList {
        EdgeList {
            repo_names: Vec::new(),
            user_names: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Builds an edge list from named events, assigning dense indices.
    ///
    /// Node names are collected from the events themselves; indices are
    /// assigned by sorting names lexicographically within kind, with
    /// repositories before users. Fails if a follow event is a self-loop or
    /// if any node would end up without an incident non-follow event.
    pub fn from_named_events(named: &[NamedEvent]) -> Result<EdgeList> {
        let mut users: BTreeSet<&str> = BTreeSet::new();
        let mut repos: BTreeSet<&str> = BTreeSet::new();
        for ev in named {
            if ev.source.is_empty() || ev.target.is_empty() {
                return Err(Error::Invariant("empty node name".into()));
            }
            users.insert(&ev.source);
            if ev.kind.is_follow() {
                if ev.source == ev.target {
                    return Err(Error::Invariant(format!(
                        "user {:?} cannot follow themselves",
                        ev.source
                    )));
                }
                users.insert(&ev.target);
            } else {
                repos.insert(&ev.target);
            }
        }

        let repo_names: Vec<String> = repos.iter().map(|s| s.to_string()).collect();
        let user_names: Vec<String> = users.iter().map(|s| s.to_string()).collect();
        let repo_index: BTreeMap<&str, u32> = repo_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as u32))
            .collect();
        let offset = repo_names.len() as u32;
        let user_index: BTreeMap<&str, u32> = user_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), offset + i as u32))
            .collect();

        let events: Vec<Event> = named
            .iter()
            .map(|ev| Event {
                source: user_index[ev.source.as_str()],
                target: if ev.kind.is_follow() {
                    user_index[ev.target.as_str()]
                } else {
                    repo_index[ev.target.as_str()]
                },
                kind: ev.kind,
            })
            .collect();

        let list = EdgeList {
            repo_names,
            user_names,
            events,
        };
        list.validate()?;
        Ok(list)
    }

    pub fn num_repos(&self) -> usize {
        self.repo_names.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_names.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.repo_names.len() + self.user_names.len()
    }

    pub fn repo_names(&self) -> &[String] {
        &self.repo_names
    }

    pub fn user_names(&self) -> &[String] {
        &self.user_names
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_user(&self, node: u32) -> bool {
        node as usize >= self.repo_names.len()
    }

    pub fn node_kind(&self, node: u32) -> NodeKind {
        if self.is_user(node) {
            NodeKind::User
        } else {
            NodeKind::Repo
        }
    }

    pub fn node_name(&self, node: u32) -> &str {
        let node = node as usize;
        if node < self.repo_names.len() {
            &self.repo_names[node]
        } else {
            &self.user_names[node - self.repo_names.len()]
        }
    }

    /// Global node index of the user at position `pos` (0-based among users).
    pub fn user_node(&self, pos: usize) -> u32 {
        (self.repo_names.len() + pos) as u32
    }

    /// User position of a global node index. Panics if `node` is a repo.
    pub fn user_pos(&self, node: u32) -> usize {
        debug_assert!(self.is_user(node));
        node as usize - self.repo_names.len()
    }

    pub fn non_follow_count(&self) -> usize {
        self.events.iter().filter(|e| !e.kind.is_follow()).count()
    }

    pub fn follow_event_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind.is_follow()).count()
    }

    /// Per-user and per-repo counts of incident non-follow events, indexed
    /// by user position and repo index respectively.
    pub fn non_follow_incidence(&self) -> (Vec<u32>, Vec<u32>) {
        let mut user_counts = vec![0u32; self.num_users()];
        let mut repo_counts = vec![0u32; self.num_repos()];
        for ev in &self.events {
            if ev.kind.is_follow() {
                continue;
            }
            user_counts[self.user_pos(ev.source)] += 1;
            repo_counts[ev.target as usize] += 1;
        }
        (user_counts, repo_counts)
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<()> {
        let r = self.repo_names.len();
        let n = self.num_nodes();
        for w in self.repo_names.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Invariant("repo names not sorted/unique".into()));
            }
        }
        for w in self.user_names.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Invariant("user names not sorted/unique".into()));
            }
        }
        for ev in &self.events {
            if ev.source as usize >= n || ev.target as usize >= n {
                return Err(Error::Invariant("event endpoint out of range".into()));
            }
            if (ev.source as usize) < r {
                return Err(Error::Invariant("event source must be a user".into()));
            }
            if ev.kind.is_follow() {
                if (ev.target as usize) < r {
                    return Err(Error::Invariant("follow target must be a user".into()));
                }
                if ev.source == ev.target {
                    return Err(Error::Invariant("self-follow".into()));
                }
            } else if ev.target as usize >= r {
                return Err(Error::Invariant(
                    "non-follow target must be a repository".into(),
                ));
            }
        }
        let (user_counts, repo_counts) = self.non_follow_incidence();
        if let Some(pos) = user_counts.iter().position(|&c| c == 0) {
            return Err(Error::Invariant(format!(
                "user {:?} has no incident non-follow event",
                self.user_names[pos]
            )));
        }
        if let Some(pos) = repo_counts.iter().position(|&c| c == 0) {
            return Err(Error::Invariant(format!(
                "repo {:?} has no incident non-follow event",
                self.repo_names[pos]
            )));
        }
        Ok(())
    }

    /// Splits a list that carries persisted follow rows into its base list
    /// and the follow arc set. The node set is unchanged. Fails if the
    /// stored arcs are not symmetric.
    pub fn split_follows(&self) -> Result<(EdgeList, crate::followgraph::FollowSet)> {
        let mut base = self.clone();
        let mut arcs: BTreeSet<(u32, u32)> = BTreeSet::new();
        base.events.retain(|ev| {
            if ev.kind.is_follow() {
                arcs.insert((
                    ev.source - self.repo_names.len() as u32,
                    ev.target - self.repo_names.len() as u32,
                ));
                false
            } else {
                true
            }
        });
        let follows = crate::followgraph::FollowSet::from_arcs(arcs)?;
        base.validate()?;
        Ok((base, follows))
    }
}

/// Tallies produced by [`summarize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    pub push: usize,
    pub watch: usize,
    pub pull_request: usize,
    pub fork: usize,
    pub follow: usize,
    pub users: usize,
    pub repos: usize,
    pub total: usize,
}

/// Exact per-type event counts plus node counts.
pub fn summarize(e: &EdgeList) -> EventCounts {
    let mut c = EventCounts {
        push: 0,
        watch: 0,
        pull_request: 0,
        fork: 0,
        follow: 0,
        users: e.num_users(),
        repos: e.num_repos(),
        total: e.events.len(),
    };
    for ev in &e.events {
        match ev.kind {
            EventType::Push => c.push += 1,
            EventType::Watch => c.watch += 1,
            EventType::PullRequest => c.pull_request += 1,
            EventType::Fork => c.fork += 1,
            EventType::Follow => c.follow += 1,
        }
    }
    c
}

/// Lines of an archive stream that did not contribute an event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SkippedLines {
    /// Not parseable as JSON.
    pub malformed: usize,
    /// JSON object missing `type`, `actor.login` or `repo.name`.
    pub missing_fields: usize,
    /// Event types outside the retained set, including FollowEvent records
    /// (stored follows are always discarded and re-derived).
    pub filtered: usize,
}

impl SkippedLines {
    pub fn total(&self) -> usize {
        self.malformed + self.missing_fields + self.filtered
    }
}

/// Result of parsing an archive stream.
#[derive(Debug)]
pub struct ParsedStream {
    pub edges: EdgeList,
    pub skipped: SkippedLines,
}

#[derive(Deserialize)]
struct RawActor {
    login: Option<String>,
}

#[derive(Deserialize)]
struct RawRepo {
    name: Option<String>,
}

#[derive(Deserialize)]
struct RawEvent {
    #[serde(rename = "type")]
    ty: Option<String>,
    actor: Option<RawActor>,
    repo: Option<RawRepo>,
}

/// Parses a stream of JSON objects, one per line, in the GitHub v3 event
/// envelope subset (`type`, `actor.login`, `repo.name`).
///
/// Only Push/Watch/PullRequest/Fork events are retained; FollowEvent records
/// and unrelated event types are counted as filtered. Event order follows
/// input line order. Parsing an input with no valid event is an error.
pub fn parse_gharchive_lines<R: BufRead>(reader: R) -> Result<ParsedStream> {
    let mut named: Vec<NamedEvent> = Vec::new();
    let mut skipped = SkippedLines::default();

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEvent = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(_) => {
                skipped.malformed += 1;
                continue;
            }
        };
        let ty = match raw.ty {
            Some(ty) => ty,
            None => {
                skipped.missing_fields += 1;
                continue;
            }
        };
        let kind = match EventType::from_wire(&ty) {
            Some(EventType::Follow) | None => {
                skipped.filtered += 1;
                continue;
            }
            Some(kind) => kind,
        };
        let login = raw.actor.and_then(|a| a.login).filter(|s| !s.is_empty());
        let repo = raw.repo.and_then(|r| r.name).filter(|s| !s.is_empty());
        match (login, repo) {
            (Some(login), Some(repo)) => named.push(NamedEvent {
                source: login,
                target: repo,
                kind,
            }),
            _ => skipped.missing_fields += 1,
        }
    }

    if named.is_empty() {
        return Err(Error::EmptyDataset(
            "archive stream contained no usable events".into(),
        ));
    }
    Ok(ParsedStream {
        edges: EdgeList::from_named_events(&named)?,
        skipped,
    })
}

const CSV_HEADER: [&str; 5] = [
    "source_kind",
    "source_name",
    "target_kind",
    "target_name",
    "event_type",
];

/// Writes an edge list in the canonical CSV format, one event per row in
/// event order. Follow events are written as `user,…,user,…,FollowEvent`.
pub fn write_edge_list<W: Write>(e: &EdgeList, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for ev in &e.events {
        w.write_record([
            NodeKind::User.as_str(),
            e.node_name(ev.source),
            e.node_kind(ev.target).as_str(),
            e.node_name(ev.target),
            ev.kind.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the canonical CSV format back into an [`EdgeList`].
///
/// Follow rows are rejected unless `with_follows` is set; they only appear
/// in persisted derived datasets. Row numbers in errors are 1-based file
/// lines (the header is line 1).
pub fn read_edge_list<R: Read>(reader: R, with_follows: bool) -> Result<EdgeList> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = r.headers()?;
        if headers != &csv::StringRecord::from(CSV_HEADER.to_vec()) {
            return Err(Error::BadRow {
                row: 1,
                message: format!("unexpected header {:?}", headers),
            });
        }
    }

    let mut named: Vec<NamedEvent> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() != 5 {
            return Err(Error::BadRow {
                row,
                message: format!("expected 5 fields, got {}", record.len()),
            });
        }
        let kind = EventType::from_wire(&record[4]).ok_or_else(|| Error::UnknownEventType {
            row,
            value: record[4].to_string(),
        })?;
        if kind.is_follow() && !with_follows {
            return Err(Error::FollowRowWithoutFlag { row });
        }
        let expected_target = if kind.is_follow() { "user" } else { "repo" };
        if &record[0] != "user" {
            return Err(Error::BadRow {
                row,
                message: format!("source kind must be \"user\", got {:?}", &record[0]),
            });
        }
        if &record[2] != expected_target {
            return Err(Error::BadRow {
                row,
                message: format!(
                    "target kind for {} must be {:?}, got {:?}",
                    kind.as_str(),
                    expected_target,
                    &record[2]
                ),
            });
        }
        if kind.is_follow() && record[1] == record[3] {
            return Err(Error::BadRow {
                row,
                message: "a user cannot follow themselves".into(),
            });
        }
        named.push(NamedEvent {
            source: record[1].to_string(),
            target: record[3].to_string(),
            kind,
        });
    }

    if named.is_empty() {
        return Err(Error::EmptyDataset("edge-list file has no rows".into()));
    }
    EdgeList::from_named_events(&named)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(source: &str, target: &str, kind: EventType) -> NamedEvent {
        NamedEvent {
            source: source.into(),
            target: target.into(),
            kind,
        }
    }

    #[test]
    fn single_watch_line_maps_directly() {
        let input = r#"{"type":"WatchEvent","actor":{"login":"a"},"repo":{"name":"o/r"}}"#;
        let parsed = parse_gharchive_lines(input.as_bytes()).unwrap();
        assert_eq!(parsed.edges.events().len(), 1);
        assert_eq!(parsed.edges.events()[0].kind, EventType::Watch);
        assert_eq!(parsed.edges.user_names(), ["a"]);
        assert_eq!(parsed.edges.repo_names(), ["o/r"]);
        assert_eq!(parsed.skipped.total(), 0);
    }

    #[test]
    fn follow_lines_are_filtered() {
        let input = concat!(
            r#"{"type":"FollowEvent","actor":{"login":"a"}}"#,
            "\n",
            r#"{"type":"PushEvent","actor":{"login":"a"},"repo":{"name":"o/r"}}"#
        );
        let parsed = parse_gharchive_lines(input.as_bytes()).unwrap();
        assert_eq!(parsed.edges.events().len(), 1);
        assert_eq!(parsed.skipped.filtered, 1);
    }

    #[test]
    fn follow_only_input_is_empty_dataset() {
        let input = r#"{"type":"FollowEvent","actor":{"login":"a"}}"#;
        let err = parse_gharchive_lines(input.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    // Hand count of data/sample_events.jsonl:
    //   valid: 6 Push, 4 Watch, 3 PullRequest, 2 Fork = 15 events
    //   users alice/bob/carol/dave, repos acme/lib acme/site blue/app
    //   skipped: 2 FollowEvent + 1 IssuesEvent filtered, 1 malformed,
    //   1 WatchEvent without actor
    #[test]
    fn bundled_sample_file_counts() {
        let raw = include_str!("../../../data/sample_events.jsonl");
        let parsed = parse_gharchive_lines(raw.as_bytes()).unwrap();
        let counts = summarize(&parsed.edges);
        assert_eq!(counts.push, 6);
        assert_eq!(counts.watch, 4);
        assert_eq!(counts.pull_request, 3);
        assert_eq!(counts.fork, 2);
        assert_eq!(counts.follow, 0);
        assert_eq!(counts.total, 15);
        assert_eq!(counts.users, 4);
        assert_eq!(counts.repos, 3);
        assert_eq!(parsed.skipped.filtered, 3);
        assert_eq!(parsed.skipped.malformed, 1);
        assert_eq!(parsed.skipped.missing_fields, 1);
    }

    #[test]
    fn node_indices_are_lexicographic_repos_first() {
        let named = vec![
            ev("zoe", "beta/app", EventType::Push),
            ev("amy", "alpha/app", EventType::Watch),
        ];
        let e = EdgeList::from_named_events(&named).unwrap();
        assert_eq!(e.repo_names(), ["alpha/app", "beta/app"]);
        assert_eq!(e.user_names(), ["amy", "zoe"]);
        // zoe -> beta/app is (node 3 -> node 1)
        assert_eq!(e.events()[0].source, 3);
        assert_eq!(e.events()[0].target, 1);
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let named = vec![
            ev("a", "o/r, with comma", EventType::Push),
            ev("b", "o/r, with comma", EventType::Fork),
            ev("a", "plain/repo", EventType::Watch),
            ev("a", "plain/repo", EventType::Watch),
        ];
        let e = EdgeList::from_named_events(&named).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&e, &mut buf).unwrap();
        let back = read_edge_list(buf.as_slice(), false).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn unknown_event_type_names_the_row() {
        let csv = "source_kind,source_name,target_kind,target_name,event_type\n\
                   user,a,repo,o/r,PushEvent\n\
                   user,b,repo,o/r,StarEvent\n";
        let err = read_edge_list(csv.as_bytes(), false).unwrap_err();
        match err {
            Error::UnknownEventType { row, value } => {
                assert_eq!(row, 3);
                assert_eq!(value, "StarEvent");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn header_only_file_is_empty_dataset() {
        let csv = "source_kind,source_name,target_kind,target_name,event_type\n";
        let err = read_edge_list(csv.as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn follow_row_requires_flag() {
        let csv = "source_kind,source_name,target_kind,target_name,event_type\n\
                   user,a,repo,o/r,PushEvent\n\
                   user,b,repo,o/r,PushEvent\n\
                   user,a,user,b,FollowEvent\n\
                   user,b,user,a,FollowEvent\n";
        let err = read_edge_list(csv.as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::FollowRowWithoutFlag { row: 4 }));
        let e = read_edge_list(csv.as_bytes(), true).unwrap();
        assert_eq!(e.follow_event_count(), 2);
        let (base, follows) = e.split_follows().unwrap();
        assert_eq!(base.events().len(), 2);
        assert_eq!(follows.arc_count(), 2);
    }

    #[test]
    fn endpoint_kind_violation_is_rejected() {
        let csv = "source_kind,source_name,target_kind,target_name,event_type\n\
                   user,a,user,b,PushEvent\n";
        let err = read_edge_list(csv.as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::BadRow { row: 2, .. }));
    }

    #[test]
    fn summarize_empty_is_all_zero() {
        let c = summarize(&EdgeList::empty());
        assert_eq!(c.total, 0);
        assert_eq!(c.push + c.watch + c.pull_request + c.fork + c.follow, 0);
        assert_eq!(c.users, 0);
        assert_eq!(c.repos, 0);
    }

    #[test]
    fn parse_order_is_input_order() {
        let input = concat!(
            r#"{"type":"ForkEvent","actor":{"login":"a"},"repo":{"name":"o/r"}}"#,
            "\n",
            r#"{"type":"PushEvent","actor":{"login":"a"},"repo":{"name":"o/r"}}"#,
            "\n",
            r#"{"type":"WatchEvent","actor":{"login":"a"},"repo":{"name":"o/r"}}"#
        );
        let parsed = parse_gharchive_lines(input.as_bytes()).unwrap();
        let kinds: Vec<EventType> = parsed.edges.events().iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventType::Fork, EventType::Push, EventType::Watch]);
    }

    #[test]
    fn reparse_yields_identical_indices() {
        let raw = include_str!("../../../data/sample_events.jsonl");
        let a = parse_gharchive_lines(raw.as_bytes()).unwrap().edges;
        let b = parse_gharchive_lines(raw.as_bytes()).unwrap().edges;
        assert_eq!(a, b);
    }
}
