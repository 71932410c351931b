//! The `bench` command: sizes × agents × episodes, one CSV row per episode.

use std::io::{Read, Write};

use serde::Serialize;
use sr_aif::gridworld::GridWorld;

use crate::format::sig6;
use crate::run::{build_agent, run_episodes};
use crate::{derive_seed, AgentKind, HarnessError, RunConfig};

/// Column order of the benchmark CSV. `error` is empty on success.
pub const CSV_HEADER: [&str; 10] = [
    "grid_size",
    "agent",
    "episode",
    "seed",
    "steps",
    "total_reward",
    "reached_goal",
    "wall_time_ms",
    "setup_time_ms",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub grid_size: usize,
    pub agent: AgentKind,
    pub episode: usize,
    pub seed: u64,
    pub steps: usize,
    pub total_reward: f64,
    pub reached_goal: bool,
    pub wall_time_ms: f64,
    /// One-time successor construction for this grid size; 0 for the planner.
    pub setup_time_ms: f64,
    pub error: Option<String>,
}

impl BenchRecord {
    fn key(&self) -> (usize, AgentKind, usize) {
        (self.grid_size, self.agent, self.episode)
    }
}

/// Runs the sweep. A failure in one (size, agent) cell is recorded on that
/// cell's rows and the sweep continues.
pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<BenchRecord>, HarnessError> {
    cfg.validate_bench()?;
    let mut records = Vec::with_capacity(cfg.sizes.len() * cfg.agents.len() * cfg.episodes);
    for &n in &cfg.sizes {
        for &agent in &cfg.agents {
            records.extend(bench_cell(cfg, n, agent));
        }
    }
    records.sort_by_key(BenchRecord::key);
    Ok(records)
}

fn bench_cell(cfg: &RunConfig, n: usize, agent: AgentKind) -> Vec<BenchRecord> {
    let failed = |msg: String| {
        (0..cfg.episodes)
            .map(|i| BenchRecord {
                grid_size: n,
                agent,
                episode: i,
                seed: derive_seed(cfg.seed, i as u64),
                steps: 0,
                total_reward: 0.0,
                reached_goal: false,
                wall_time_ms: 0.0,
                setup_time_ms: 0.0,
                error: Some(msg.clone()),
            })
            .collect()
    };
    let world = match GridWorld::new(cfg.grid_spec_for(n)) {
        Ok(w) => w,
        Err(e) => return failed(e.to_string()),
    };
    let mut setup = match build_agent(cfg, &world, agent) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let mut warnings = Vec::new();
    match run_episodes(cfg, &world, setup.controller.as_mut(), &mut warnings) {
        Ok(episodes) => episodes
            .into_iter()
            .map(|e| BenchRecord {
                grid_size: n,
                agent,
                episode: e.episode,
                seed: e.seed,
                steps: e.steps,
                total_reward: e.total_reward,
                reached_goal: e.reached_goal,
                wall_time_ms: e.wall_time_ms,
                setup_time_ms: setup.setup_time_ms,
                error: None,
            })
            .collect(),
        Err(e) => failed(e.to_string()),
    }
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.grid_size.to_string(),
            r.agent.name().to_string(),
            r.episode.to_string(),
            r.seed.to_string(),
            r.steps.to_string(),
            sig6(r.total_reward),
            r.reached_goal.to_string(),
            sig6(r.wall_time_ms),
            sig6(r.setup_time_ms),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[BenchRecord]) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(csv_error(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|row| {
            let row = row?;
            let field = |i: usize| row.get(i).unwrap_or_default();
            Ok(BenchRecord {
                grid_size: parse(field(0), "grid_size")?,
                agent: field(1).parse().map_err(csv_error)?,
                episode: parse(field(2), "episode")?,
                seed: parse(field(3), "seed")?,
                steps: parse(field(4), "steps")?,
                total_reward: parse(field(5), "total_reward")?,
                reached_goal: parse(field(6), "reached_goal")?,
                wall_time_ms: parse(field(7), "wall_time_ms")?,
                setup_time_ms: parse(field(8), "setup_time_ms")?,
                error: Some(field(9)).filter(|s| !s.is_empty()).map(str::to_string),
            })
        })
        .collect()
}

fn parse<T: std::str::FromStr>(s: &str, column: &str) -> Result<T, HarnessError> {
    s.parse()
        .map_err(|_| csv_error(format!("bad value `{s}` in column {column}")))
}

fn csv_error(msg: String) -> HarnessError {
    HarnessError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}
