//! The (1+λ) evolutionary search that spreads user behaviour over the
//! feature cube by minimising star discrepancy.
//!
//! One parent edge list produces λ mutated offspring per generation; the
//! best offspring replaces the parent when it is not worse. The per-edge
//! mutation rate adapts multiplicatively: success multiplies it by
//! `rate_increase`, failure by `rate_decrease`, clamped to
//! `[rate_min, rate_max]`.
//!
//! Each offspring draws from its own RNG substream keyed by
//! `(seed, generation, offspring index)`, so results are identical whether
//! offspring are evaluated sequentially or in parallel.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dataset::{EdgeList, Event, EventType};
use crate::discrepancy::{star_discrepancy_approx, DiscrepancyConfig, PointSet};
use crate::error::{Error, Result};
use crate::features::feature_points;
use crate::followgraph::assemble_graph;

/// Parameters of the evolutionary run.
#[derive(Debug, Clone, PartialEq)]
pub struct EaConfig {
    /// Offspring per generation.
    pub lambda: usize,
    pub generations: usize,
    /// Multiplier applied to the mutation rate after a successful
    /// generation.
    pub rate_increase: f64,
    /// Multiplier applied after an unsuccessful generation.
    pub rate_decrease: f64,
    /// Initial per-edge mutation rate; `None` means `1/n` with `n` the
    /// seed's non-follow event count.
    pub initial_rate: Option<f64>,
    /// Lower clamp; `None` means `1/(10 n)`.
    pub rate_min: Option<f64>,
    /// Upper clamp.
    pub rate_max: f64,
    /// Floor on the number of mutations applied per offspring.
    pub min_mutations: usize,
    /// Accept only strictly better offspring instead of not-worse ones.
    pub strict_improvement: bool,
    pub rng_seed: u64,
    pub discrepancy: DiscrepancyConfig,
}

impl Default for EaConfig {
    fn default() -> Self {
        EaConfig {
            lambda: 20,
            generations: 1000,
            rate_increase: 2.0,
            rate_decrease: 0.5,
            initial_rate: None,
            rate_min: None,
            rate_max: 0.25,
            min_mutations: 1,
            strict_improvement: false,
            rng_seed: 0,
            discrepancy: DiscrepancyConfig::default(),
        }
    }
}

impl EaConfig {
    fn resolve(&self, n: usize) -> Result<(f64, f64, f64)> {
        if self.lambda == 0 {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.min_mutations == 0 {
            return Err(Error::Config("min_mutations must be positive".into()));
        }
        let increase_ok = self.rate_increase.is_finite() && self.rate_increase > 1.0;
        if !increase_ok {
            return Err(Error::Config("rate_increase must exceed 1".into()));
        }
        let decrease_ok =
            self.rate_decrease.is_finite() && self.rate_decrease > 0.0 && self.rate_decrease < 1.0;
        if !decrease_ok {
            return Err(Error::Config("rate_decrease must be in (0,1)".into()));
        }
        let n = n.max(1) as f64;
        let initial = self.initial_rate.unwrap_or(1.0 / n);
        let min = self.rate_min.unwrap_or(1.0 / (10.0 * n));
        let max = self.rate_max;
        let rates_ok = min.is_finite()
            && initial.is_finite()
            && max.is_finite()
            && min > 0.0
            && min <= initial
            && initial <= max
            && max <= 1.0;
        if !rates_ok {
            return Err(Error::Config(format!(
                "rates must satisfy 0 < min <= initial <= max <= 1 \
                 (min {min}, initial {initial}, max {max})"
            )));
        }
        Ok((initial, min, max))
    }
}

/// One generation of the evolution log.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Parent score after selection; non-increasing over the run.
    pub parent_score: f64,
    pub best_offspring: f64,
    pub accepted: bool,
    /// Rate the offspring of this generation were produced with.
    pub rate: f64,
    /// Rate after the success-based update.
    pub rate_after: f64,
    /// Mean mutations applied per offspring.
    pub mean_mutations: f64,
    pub non_follow_events: usize,
    pub follow_arcs: usize,
}

/// Per-generation records of an evolutionary run.
#[derive(Debug, Clone, Default)]
pub struct EvolutionLog {
    pub initial_score: f64,
    pub records: Vec<GenerationRecord>,
}

impl EvolutionLog {
    pub fn final_score(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.parent_score)
            .unwrap_or(self.initial_score)
    }
}

/// Writes the log in the CSV layout used for convergence plots:
/// `generation,parent_score,best_offspring,accepted,rate,mutations`.
pub fn write_evolution_log<W: Write>(log: &EvolutionLog, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "generation",
        "parent_score",
        "best_offspring",
        "accepted",
        "rate",
        "mutations",
    ])?;
    for r in &log.records {
        w.write_record([
            r.generation.to_string(),
            r.parent_score.to_string(),
            r.best_offspring.to_string(),
            (r.accepted as u8).to_string(),
            r.rate.to_string(),
            r.mean_mutations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Derives the RNG for offspring `offspring` of generation `generation`.
///
/// SplitMix64 over the packed key gives well-separated streams for
/// neighbouring indices while staying reproducible across versions.
pub fn offspring_rng(seed: u64, generation: u64, offspring: u64) -> ChaCha8Rng {
    let mut z = seed
        ^ generation.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ offspring.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Applies one batch of random edge mutations to a copy of `parent`.
///
/// The number of mutations is binomial over the parent's non-follow events
/// with probability `rate` and floored at `min_mutations`. Each mutation
/// flips a fair coin: add one uniformly random event (existing user,
/// existing repo, uniform base type), or delete one uniformly random event.
/// Deletions that would leave a user or repository without any incident
/// event are resampled, up to 100 times, after which the mutation becomes
/// an addition. The node set never changes.
pub fn mutate<R: Rng>(
    parent: &EdgeList,
    rate: f64,
    min_mutations: usize,
    rng: &mut R,
) -> (EdgeList, usize) {
    debug_assert!(rate > 0.0 && rate <= 1.0);
    debug_assert_eq!(parent.follow_event_count(), 0);

    let mut child = parent.clone();
    let n = child.events.len() as u64;
    let binom = Binomial::new(n, rate.min(1.0)).expect("valid binomial parameters");
    let k = (binom.sample(rng) as usize).max(min_mutations);

    let (mut user_counts, mut repo_counts) = child.non_follow_incidence();
    let users = child.num_users();
    let repos = child.num_repos();

    for _ in 0..k {
        let mut add = rng.random::<bool>();
        if !add {
            let mut deleted = false;
            for _ in 0..100 {
                let i = rng.random_range(0..child.events.len());
                let ev = child.events[i];
                let u = child.user_pos(ev.source);
                let r = ev.target as usize;
                if user_counts[u] <= 1 || repo_counts[r] <= 1 {
                    continue; // would disconnect a node: resample
                }
                user_counts[u] -= 1;
                repo_counts[r] -= 1;
                child.events.remove(i);
                deleted = true;
                break;
            }
            if !deleted {
                add = true;
            }
        }
        if add {
            let u = rng.random_range(0..users);
            let r = rng.random_range(0..repos);
            let kind = EventType::NON_FOLLOW[rng.random_range(0..4)];
            user_counts[u] += 1;
            repo_counts[r] += 1;
            child.events.push(Event {
                source: child.user_node(u),
                target: r as u32,
                kind,
            });
        }
    }
    (child, k)
}

/// Follow derivation, feature embedding and discrepancy scoring of one
/// edge list; the objective the evolution minimises.
pub fn evaluate(e: &EdgeList, cfg: &DiscrepancyConfig) -> Result<f64> {
    let graph = assemble_graph(e);
    let feats = feature_points(&graph)?;
    star_discrepancy_approx(&PointSet::from_points3(&feats.points)?, cfg)
}

/// Runs the (1+λ) evolution and returns the final edge list plus the
/// per-generation log.
pub fn run_ea(seed_list: &EdgeList, cfg: &EaConfig) -> Result<(EdgeList, EvolutionLog)> {
    run_ea_with(seed_list, cfg, |e| evaluate(e, &cfg.discrepancy))
}

/// The generic loop behind [`run_ea`], parameterised over the objective so
/// the selection and rate-update machinery can be exercised in isolation.
pub(crate) fn run_ea_with<F>(
    seed_list: &EdgeList,
    cfg: &EaConfig,
    objective: F,
) -> Result<(EdgeList, EvolutionLog)>
where
    F: Fn(&EdgeList) -> Result<f64> + Sync,
{
    let mut state = EvolutionState::with_objective(seed_list, cfg.clone(), &objective)?;
    let mut log = EvolutionLog {
        initial_score: state.parent_score(),
        records: Vec::with_capacity(cfg.generations),
    };
    for _ in 0..cfg.generations {
        log.records.push(state.step_with(&objective)?);
    }
    Ok((state.parent, log))
}

/// Resumable (1+λ) evolution: one [`step`](EvolutionState::step) runs one
/// generation, so callers can interleave evolution with inspection (or
/// drive an animation) without redoing earlier work.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    cfg: EaConfig,
    parent: EdgeList,
    parent_score: f64,
    rate: f64,
    rate_min: f64,
    rate_max: f64,
    generation: usize,
}

impl EvolutionState {
    pub fn new(seed_list: &EdgeList, cfg: EaConfig) -> Result<EvolutionState> {
        let discrepancy = cfg.discrepancy;
        Self::with_objective(seed_list, cfg, &|e: &EdgeList| evaluate(e, &discrepancy))
    }

    fn with_objective<F>(
        seed_list: &EdgeList,
        cfg: EaConfig,
        objective: &F,
    ) -> Result<EvolutionState>
    where
        F: Fn(&EdgeList) -> Result<f64> + Sync + ?Sized,
    {
        seed_list.validate()?;
        if seed_list.follow_event_count() != 0 {
            return Err(Error::Invariant(
                "evolution seed must not contain stored follow events".into(),
            ));
        }
        if seed_list.events().is_empty() {
            return Err(Error::EmptyDataset(
                "cannot evolve an empty edge list".into(),
            ));
        }
        let (initial_rate, rate_min, rate_max) = cfg.resolve(seed_list.non_follow_count())?;
        let parent_score = objective(seed_list)?;
        Ok(EvolutionState {
            cfg,
            parent: seed_list.clone(),
            parent_score,
            rate: initial_rate,
            rate_min,
            rate_max,
            generation: 0,
        })
    }

    pub fn parent(&self) -> &EdgeList {
        &self.parent
    }

    pub fn parent_score(&self) -> f64 {
        self.parent_score
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Runs one generation against the configured discrepancy objective.
    pub fn step(&mut self) -> Result<GenerationRecord> {
        let discrepancy = self.cfg.discrepancy;
        self.step_with(&|e: &EdgeList| evaluate(e, &discrepancy))
    }

    fn step_with<F>(&mut self, objective: &F) -> Result<GenerationRecord>
    where
        F: Fn(&EdgeList) -> Result<f64> + Sync + ?Sized,
    {
        let offspring = produce_offspring(
            &self.parent,
            &self.cfg,
            self.rate,
            self.generation,
            objective,
        )?;

        let mut best_idx = 0;
        for i in 1..offspring.len() {
            if offspring[i].1 < offspring[best_idx].1 {
                best_idx = i;
            }
        }
        let best_score = offspring[best_idx].1;
        let accepted = if self.cfg.strict_improvement {
            best_score < self.parent_score
        } else {
            best_score <= self.parent_score
        };
        let mean_mutations =
            offspring.iter().map(|o| o.2 as f64).sum::<f64>() / offspring.len() as f64;

        if accepted {
            let (child, score, _) = offspring.into_iter().nth(best_idx).expect("index in range");
            self.parent = child;
            self.parent_score = score;
        }
        let rate_before = self.rate;
        self.rate = if accepted {
            (self.rate * self.cfg.rate_increase).min(self.rate_max)
        } else {
            (self.rate * self.cfg.rate_decrease).max(self.rate_min)
        };

        let follow_arcs = assemble_graph(&self.parent).follows.arc_count();
        let record = GenerationRecord {
            generation: self.generation,
            parent_score: self.parent_score,
            best_offspring: best_score,
            accepted,
            rate: rate_before,
            rate_after: self.rate,
            mean_mutations,
            non_follow_events: self.parent.non_follow_count(),
            follow_arcs,
        };
        self.generation += 1;
        Ok(record)
    }
}

fn produce_offspring<F>(
    parent: &EdgeList,
    cfg: &EaConfig,
    rate: f64,
    generation: usize,
    objective: &F,
) -> Result<Vec<(EdgeList, f64, usize)>>
where
    F: Fn(&EdgeList) -> Result<f64> + Sync + ?Sized,
{
    let make = |i: usize| -> Result<(EdgeList, f64, usize)> {
        let mut rng = offspring_rng(cfg.rng_seed, generation as u64, i as u64);
        let (child, mutations) = mutate(parent, rate, cfg.min_mutations, &mut rng);
        let score = objective(&child)?;
        Ok((child, score, mutations))
    };

    #[cfg(feature = "parallel")]
    {
        (0..cfg.lambda).into_par_iter().map(make).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.lambda).map(make).collect()
    }
}
