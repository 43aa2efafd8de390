//! Per-user behaviour features and their unit-cube embedding.
//!
//! Each user is characterised by three metrics computed on the interaction
//! graph (base events plus follow arcs):
//!
//! * degree centrality — incident arc count, in plus out, counting
//!   multiplicity, follow arcs included;
//! * PageRank — damped, over the full node set, with arc multiplicity as
//!   weight and dangling mass redistributed uniformly;
//! * event-type code — which of the four base event types the user has
//!   ever produced, packed into an integer 1..=15.
//!
//! Degree and PageRank are min-max scaled across users; the event-type code
//! uses the fixed affine map `(code - 1) / 14` so the fifteen classes keep
//! stable positions regardless of which codes a dataset happens to contain.

use std::io::Write;

use crate::dataset::EdgeList;
use crate::error::{Error, Result};
use crate::followgraph::InteractionGraph;

/// Parameters of the PageRank iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

impl PageRankConfig {
    pub fn validate(&self) -> Result<()> {
        let damping_ok = self.damping.is_finite() && self.damping > 0.0 && self.damping < 1.0;
        if !damping_ok {
            return Err(Error::Config(format!(
                "damping must be in (0,1), got {}",
                self.damping
            )));
        }
        let tolerance_ok = self.tolerance.is_finite() && self.tolerance > 0.0;
        if !tolerance_ok {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Scores per node, in node-index order.
#[derive(Debug, Clone)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Multiplicity-weighted total degree (in + out) per node, follow arcs
/// included.
pub fn degree_raw(g: &InteractionGraph<'_>) -> Vec<f64> {
    let e = g.base;
    let mut deg = vec![0.0; e.num_nodes()];
    for ev in e.events() {
        deg[ev.source as usize] += 1.0;
        deg[ev.target as usize] += 1.0;
    }
    for (a, b) in g.follows.arcs() {
        deg[e.user_node(a as usize) as usize] += 1.0;
        deg[e.user_node(b as usize) as usize] += 1.0;
    }
    deg
}

/// Damped PageRank by power iteration over the weighted directed multigraph.
///
/// Arc weight is event multiplicity (follow arcs weigh one each). Dangling
/// nodes redistribute their mass uniformly over all nodes. Iteration stops
/// when the L1 change drops below the tolerance; if the iteration budget
/// runs out first, the result is returned with `converged` unset.
pub fn pagerank(g: &InteractionGraph<'_>, cfg: &PageRankConfig) -> Result<PageRankResult> {
    let e = g.base;
    let mut arcs: Vec<(u32, u32)> = e.events().iter().map(|ev| (ev.source, ev.target)).collect();
    for (a, b) in g.follows.arcs() {
        arcs.push((e.user_node(a as usize), e.user_node(b as usize)));
    }
    pagerank_arcs(e.num_nodes(), arcs, cfg)
}

/// The underlying iteration on a plain multigraph arc list. Repeated arcs
/// accumulate weight.
pub fn pagerank_arcs(
    n: usize,
    mut arcs: Vec<(u32, u32)>,
    cfg: &PageRankConfig,
) -> Result<PageRankResult> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset("pagerank over an empty graph".into()));
    }
    arcs.sort_unstable_by_key(|&(s, t)| (t, s));

    let mut out_weight = vec![0.0f64; n];
    for &(s, _) in &arcs {
        out_weight[s as usize] += 1.0;
    }

    // (source, transition probability) runs per target, deduplicated;
    // storing w/W instead of w keeps the iteration invariant under uniform
    // weight scaling.
    let mut in_heads = vec![0usize; n + 1];
    let mut in_arcs: Vec<(u32, f64)> = Vec::new();
    {
        let mut i = 0;
        for t in 0..n as u32 {
            while i < arcs.len() && arcs[i].1 == t {
                let s = arcs[i].0;
                let mut w = 0.0;
                while i < arcs.len() && arcs[i].1 == t && arcs[i].0 == s {
                    w += 1.0;
                    i += 1;
                }
                in_arcs.push((s, w / out_weight[s as usize]));
            }
            in_heads[t as usize + 1] = in_arcs.len();
        }
    }

    let inv_n = 1.0 / n as f64;
    let d = cfg.damping;
    let mut x = vec![inv_n; n];
    let mut next = vec![0.0f64; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| out_weight[i] == 0.0).map(|i| x[i]).sum();
        let base = (1.0 - d) * inv_n + d * dangling * inv_n;
        for (t, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(s, p) in &in_arcs[in_heads[t]..in_heads[t + 1]] {
                acc += x[s as usize] * p;
            }
            *slot = base + d * acc;
        }
        let delta: f64 = x.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(PageRankResult {
        scores: x,
        converged,
        iterations,
    })
}

/// Bit values of the event-type code, in canonical type order.
/// Push=8, Watch=4, PullRequest=2, Fork=1.
pub fn event_type_bit(kind: crate::dataset::EventType) -> Option<u8> {
    use crate::dataset::EventType::*;
    match kind {
        Push => Some(8),
        Watch => Some(4),
        PullRequest => Some(2),
        Fork => Some(1),
        Follow => None,
    }
}

/// The combination of base event types each user participates in, as an
/// integer in 1..=15. A user with no base events violates the edge-list
/// invariants and is an error.
pub fn event_type_code(e: &EdgeList) -> Result<Vec<u8>> {
    let mut codes = vec![0u8; e.num_users()];
    for ev in e.events() {
        if let Some(bit) = event_type_bit(ev.kind) {
            codes[e.user_pos(ev.source)] |= bit;
        }
    }
    if let Some(pos) = codes.iter().position(|&c| c == 0) {
        return Err(Error::Invariant(format!(
            "user {:?} has no base event; event-type code undefined",
            e.user_names()[pos]
        )));
    }
    Ok(codes)
}

/// Per-user features: raw metrics plus the scaled point in the unit cube.
/// Row order matches user position order (lexicographic by name).
#[derive(Debug, Clone)]
pub struct FeaturePoints {
    pub degree: Vec<f64>,
    pub pagerank: Vec<f64>,
    pub event_code: Vec<u8>,
    /// Scaled coordinates: 0 = degree centrality, 1 = PageRank,
    /// 2 = event-type code.
    pub points: Vec<[f64; 3]>,
    pub pagerank_converged: bool,
}

impl FeaturePoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if max > min {
        let span = max - min;
        values.iter().map(|&v| (v - min) / span).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Computes the three features for every user and scales them into the
/// unit cube with the default PageRank configuration.
pub fn feature_points(g: &InteractionGraph<'_>) -> Result<FeaturePoints> {
    feature_points_with(g, &PageRankConfig::default())
}

pub fn feature_points_with(
    g: &InteractionGraph<'_>,
    cfg: &PageRankConfig,
) -> Result<FeaturePoints> {
    let e = g.base;
    if e.num_users() == 0 {
        return Err(Error::EmptyDataset("no users to featurise".into()));
    }
    let deg_all = degree_raw(g);
    let pr = pagerank(g, cfg)?;
    let codes = event_type_code(e)?;

    let repos = e.num_repos();
    let degree: Vec<f64> = deg_all[repos..].to_vec();
    let rank: Vec<f64> = pr.scores[repos..].to_vec();

    let deg_scaled = min_max_scale(&degree);
    let rank_scaled = min_max_scale(&rank);
    let points: Vec<[f64; 3]> = (0..e.num_users())
        .map(|u| {
            [
                deg_scaled[u],
                rank_scaled[u],
                (codes[u] as f64 - 1.0) / 14.0,
            ]
        })
        .collect();

    Ok(FeaturePoints {
        degree,
        pagerank: rank,
        event_code: codes,
        points,
        pagerank_converged: pr.converged,
    })
}

/// Writes the per-user feature table as CSV:
/// `user,centrality,pagerank,event_code,c_scaled,p_scaled,t_scaled`.
pub fn write_feature_csv<W: Write>(e: &EdgeList, f: &FeaturePoints, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "user",
        "centrality",
        "pagerank",
        "event_code",
        "c_scaled",
        "p_scaled",
        "t_scaled",
    ])?;
    for (u, name) in e.user_names().iter().enumerate() {
        w.write_record([
            name.as_str(),
            &f.degree[u].to_string(),
            &f.pagerank[u].to_string(),
            &f.event_code[u].to_string(),
            &f.points[u][0].to_string(),
            &f.points[u][1].to_string(),
            &f.points[u][2].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature CSV back into `(user names, FeaturePoints)`.
pub fn read_feature_csv<R: std::io::Read>(reader: R) -> Result<(Vec<String>, FeaturePoints)> {
    let mut r = csv::Reader::from_reader(reader);
    let mut users = Vec::new();
    let mut degree = Vec::new();
    let mut rank = Vec::new();
    let mut codes = Vec::new();
    let mut points = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let field = |j: usize| -> Result<f64> {
            record[j].parse().map_err(|_| Error::BadRow {
                row,
                message: format!("bad number {:?}", &record[j]),
            })
        };
        users.push(record[0].to_string());
        degree.push(field(1)?);
        rank.push(field(2)?);
        codes.push(field(3)? as u8);
        points.push([field(4)?, field(5)?, field(6)?]);
    }
    Ok((
        users,
        FeaturePoints {
            degree,
            pagerank: rank,
            event_code: codes,
            points,
            pagerank_converged: true,
        },
    ))
}
