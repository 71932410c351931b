//! The `run` command: one agent, one grid, a batch of seeded episodes.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use sr_aif::efe::efe_reward_vector;
use sr_aif::gridworld::{GridWorld, TrajectoryStep, NUM_ACTIONS};
use sr_aif::model::Controller;
use sr_aif::planner::PlannerAgent;
use sr_aif::successor::{default_transition, successor_matrix, DefaultPolicy, SrAgent};
use sr_aif::Warning;

use crate::{derive_seed, AgentKind, HarnessError, RunConfig, SEED_DERIVATION, TOOL_NAME, TOOL_VERSION};

/// A constructed controller plus what it cost to build.
pub struct AgentSetup {
    pub controller: Box<dyn Controller>,
    /// One-time successor construction; 0 for the planner.
    pub setup_time_ms: f64,
    /// Successor value per cell, for the SR agent only.
    pub value_field: Option<Vec<f64>>,
    pub warnings: Vec<Warning>,
}

pub fn build_agent(cfg: &RunConfig, world: &GridWorld, kind: AgentKind) -> Result<AgentSetup, HarnessError> {
    let model = world.model();
    match kind {
        AgentKind::Sr => {
            let timer = Instant::now();
            let b_tilde = default_transition(model, &DefaultPolicy::uniform(NUM_ACTIONS))?;
            let successor = successor_matrix(b_tilde.view(), cfg.successor_gamma())?;
            let warnings = successor.warning().into_iter().collect();
            let agent = SrAgent::from_successor(model.clone(), successor, cfg.weights(), cfg.beta)?;
            let setup_time_ms = timer.elapsed().as_secs_f64() * 1e3;
            Ok(AgentSetup {
                value_field: Some(agent.state_values().to_vec()),
                controller: Box::new(agent),
                setup_time_ms,
                warnings,
            })
        }
        AgentKind::Planner => {
            let reward = efe_reward_vector(model, cfg.weights())?;
            let agent = PlannerAgent::new(model, cfg.planner_config(), reward)?;
            Ok(AgentSetup {
                controller: Box::new(agent),
                setup_time_ms: 0.0,
                value_field: None,
                warnings: Vec::new(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub start: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub reached_goal: bool,
    pub wall_time_ms: f64,
    pub trajectory: Vec<TrajectoryStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub mean_reward: f64,
    /// Sample standard deviation (0 for a single episode).
    pub stddev_reward: f64,
    pub success_rate: f64,
    pub mean_steps: f64,
    pub mean_wall_time_ms: f64,
}

impl Aggregates {
    pub fn from_episodes(episodes: &[EpisodeRecord]) -> Self {
        let n = episodes.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| episodes.iter().map(f).sum::<f64>() / n;
        let mean_reward = mean(&|e| e.total_reward);
        let stddev_reward = if episodes.len() > 1 {
            let ss: f64 = episodes
                .iter()
                .map(|e| (e.total_reward - mean_reward).powi(2))
                .sum();
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean_reward,
            stddev_reward,
            success_rate: mean(&|e| f64::from(u8::from(e.reached_goal))),
            mean_steps: mean(&|e| e.steps as f64),
            mean_wall_time_ms: mean(&|e| e.wall_time_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarningEntry {
    #[serde(flatten)]
    pub warning: Warning,
    pub message: String,
    pub count: usize,
}

/// Collapses repeated warnings, keeping first-seen order.
pub fn summarize_warnings(warnings: impl IntoIterator<Item = Warning>) -> Vec<WarningEntry> {
    let mut out: Vec<WarningEntry> = Vec::new();
    for w in warnings {
        match out.iter_mut().find(|e| e.warning == w) {
            Some(entry) => entry.count += 1,
            None => out.push(WarningEntry {
                message: w.to_string(),
                warning: w,
                count: 1,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed_derivation: &'static str,
    pub config: RunConfig,
    pub setup_time_ms: f64,
    /// SR state values as an N×N row-major grid.
    pub value_field: Option<Vec<Vec<f64>>>,
    pub episodes: Vec<EpisodeRecord>,
    pub aggregates: Aggregates,
    pub warnings: Vec<WarningEntry>,
}

/// Runs `cfg.episodes` episodes of `cfg.agent` on the `cfg.grid_size` grid.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let world = GridWorld::new(cfg.grid_spec())?;
    let mut setup = build_agent(cfg, &world, cfg.agent)?;
    let episodes = run_episodes(cfg, &world, setup.controller.as_mut(), &mut setup.warnings)?;
    let n = cfg.grid_size;
    Ok(RunReport {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        seed_derivation: SEED_DERIVATION,
        config: cfg.clone(),
        setup_time_ms: setup.setup_time_ms,
        value_field: setup
            .value_field
            .map(|v| v.chunks(n).map(<[f64]>::to_vec).collect()),
        aggregates: Aggregates::from_episodes(&episodes),
        episodes,
        warnings: summarize_warnings(setup.warnings),
    })
}

/// Episode `i` draws its start and observations from `derive_seed(cfg.seed, i)`.
pub fn run_episodes(
    cfg: &RunConfig,
    world: &GridWorld,
    controller: &mut dyn Controller,
    warnings: &mut Vec<Warning>,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    (0..cfg.episodes)
        .map(|i| {
            let seed = derive_seed(cfg.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ep = world.run_episode(controller, &mut rng)?;
            warnings.extend(ep.warnings);
            Ok(EpisodeRecord {
                episode: i,
                seed,
                start: ep.start,
                steps: ep.steps,
                total_reward: ep.total_reward,
                reached_goal: ep.reached_goal,
                wall_time_ms: ep.wall_time_ms,
                trajectory: ep.trajectory,
            })
        })
        .collect()
}

/// Removes every `*_time_ms` field, recursively, so that two reports of the
/// same configuration compare equal.
pub fn strip_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_time_ms"));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}
