//! Browser demo bindings.
//!
//! Three interactive operations, all returning JSON strings so the page
//! needs nothing beyond `JSON.parse`:
//!
//! * [`Demo::generate`] — seed a synthetic community and embed its users
//!   in the feature cube;
//! * [`Demo::evolve_steps`] — advance the (1+λ) diversity evolution a few
//!   generations at a time, for animating the convergence curve;
//! * [`Demo::replay`] — run the current community through the simulated
//!   forge and report per-user load and the follow-limit error tally.
//!
//! Build with `wasm-pack build --target web` (see the repository README).

use serde::Serialize;
use wasm_bindgen::prelude::*;

use forgefuzz::dataset::{summarize, EdgeList};
use forgefuzz::discrepancy::{star_discrepancy_approx, DiscrepancyConfig, PointSet};
use forgefuzz::evolve::{EaConfig, EvolutionState};
use forgefuzz::features::feature_points;
use forgefuzz::followgraph::assemble_graph;
use forgefuzz::replay::{replay, CommitCorpus, ReplayOrder};
use forgefuzz::simforge::SimForge;
use forgefuzz::synth::synthetic_community;

#[derive(Serialize)]
struct CommunityView {
    users: Vec<String>,
    points: Vec<[f64; 3]>,
    discrepancy: f64,
    events: usize,
    follow_arcs: usize,
    push: usize,
    watch: usize,
    pull_request: usize,
    fork: usize,
}

#[derive(Serialize)]
struct StepView {
    generation: usize,
    score: f64,
    rate: f64,
    mean_mutations: f64,
    accepted: bool,
    events: usize,
}

#[derive(Serialize)]
struct EvolveView {
    steps: Vec<StepView>,
    community: CommunityView,
}

#[derive(Serialize)]
struct ReplayUser {
    user: String,
    cpu: f64,
    mem: f64,
    latency: f64,
    requests: u64,
}

#[derive(Serialize)]
struct ReplayView {
    total: usize,
    applied: usize,
    skipped: usize,
    follow_limit_errors: usize,
    users: Vec<ReplayUser>,
    request_buckets: Vec<u64>,
}

fn community_view(e: &EdgeList, grid: u32) -> Result<CommunityView, forgefuzz::Error> {
    let graph = assemble_graph(e);
    let feats = feature_points(&graph)?;
    let cfg = DiscrepancyConfig {
        grid_divisions: grid,
        include_point_coordinates: false,
    };
    let discrepancy = star_discrepancy_approx(&PointSet::from_points3(&feats.points)?, &cfg)?;
    let counts = summarize(e);
    Ok(CommunityView {
        users: e.user_names().to_vec(),
        points: feats.points,
        discrepancy,
        events: e.events().len(),
        follow_arcs: graph.follows.arc_count(),
        push: counts.push,
        watch: counts.watch,
        pull_request: counts.pull_request,
        fork: counts.fork,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// The demo session: one community and its (optional) running evolution.
#[wasm_bindgen]
pub struct Demo {
    seed: u64,
    grid: u32,
    community: EdgeList,
    evolution: Option<EvolutionState>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo {
            seed: 0,
            grid: 16,
            community: synthetic_community(40, 8, 200, 0).expect("default community"),
            evolution: None,
        }
    }

    /// Seeds a fresh community and returns its feature-cube view.
    pub fn generate(
        &mut self,
        users: u32,
        repos: u32,
        events: u32,
        seed: u64,
    ) -> Result<String, JsError> {
        let e = synthetic_community(users as usize, repos as usize, events as usize, seed)
            .map_err(js_err)?;
        self.seed = seed;
        self.community = e;
        self.evolution = None;
        to_json(&community_view(&self.community, self.grid).map_err(js_err)?)
    }

    /// Advances the diversity evolution by `generations` and returns the
    /// new log slice plus the updated community view. `lambda` takes
    /// effect when a run starts; regenerate the community to change it
    /// mid-experiment.
    pub fn evolve_steps(&mut self, generations: u32, lambda: u32) -> Result<String, JsError> {
        if self.evolution.is_none() {
            let cfg = EaConfig {
                lambda: lambda.max(1) as usize,
                rng_seed: self.seed,
                discrepancy: DiscrepancyConfig {
                    grid_divisions: self.grid,
                    include_point_coordinates: false,
                },
                ..EaConfig::default()
            };
            self.evolution = Some(EvolutionState::new(&self.community, cfg).map_err(js_err)?);
        }
        let state = self.evolution.as_mut().expect("initialised above");
        let mut steps = Vec::with_capacity(generations as usize);
        for _ in 0..generations {
            let r = state.step().map_err(js_err)?;
            steps.push(StepView {
                generation: r.generation,
                score: r.parent_score,
                rate: r.rate_after,
                mean_mutations: r.mean_mutations,
                accepted: r.accepted,
                events: r.non_follow_events,
            });
        }
        let current = state.parent().clone();
        let view = EvolveView {
            steps,
            community: community_view(&current, self.grid).map_err(js_err)?,
        };
        to_json(&view)
    }

    /// Replays the current community (evolved if evolution has run) through
    /// the simulated forge. `follow_limit == 0` lifts the limit.
    pub fn replay(&mut self, follow_limit: u32, seed: u64) -> Result<String, JsError> {
        let current = self
            .evolution
            .as_ref()
            .map(|s| s.parent().clone())
            .unwrap_or_else(|| self.community.clone());
        let graph = assemble_graph(&current);
        let limit = if follow_limit == 0 {
            None
        } else {
            Some(follow_limit)
        };
        let mut forge = SimForge::new().with_follow_limit(limit);
        let report = replay(
            &current,
            &graph.follows,
            &mut forge,
            &CommitCorpus::builtin(),
            ReplayOrder::Listed,
            seed,
        )
        .map_err(js_err)?;
        let buckets = {
            use forgefuzz::replay::ForgeClient;
            forge.snapshot_metrics().map_err(js_err)?.request_buckets
        };
        let view = ReplayView {
            total: report.total,
            applied: report.applied,
            skipped: report.skipped,
            follow_limit_errors: report.error_tally.get("follow_limit").copied().unwrap_or(0),
            users: report
                .user_metrics
                .into_iter()
                .map(|(user, c)| ReplayUser {
                    user,
                    cpu: c.cpu,
                    mem: c.mem,
                    latency: c.latency,
                    requests: c.requests,
                })
                .collect(),
            request_buckets: buckets,
        };
        to_json(&view)
    }
}

impl Default for Demo {
    fn default() -> Self {
        Demo::new()
    }
}
