//! Run configuration: documented defaults, a flat JSON file, then CLI flags,
//! in increasing precedence.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use sr_aif::efe::EfeWeights;
use sr_aif::gridworld::GridSpec;
use sr_aif::model::ActionPrecision;
use sr_aif::planner::{PlannerConfig, DEFAULT_HORIZON, DEFAULT_POLICY_CAP};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Sr,
    Planner,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Sr => "sr",
            AgentKind::Planner => "planner",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sr" => Ok(AgentKind::Sr),
            "planner" => Ok(AgentKind::Planner),
            other => Err(format!("unknown agent `{other}` (expected `sr` or `planner`)")),
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid_size: usize,
    /// Defaults to the bottom-right corner of each grid.
    pub goal: Option<usize>,
    pub unknowable: BTreeSet<usize>,
    pub step_reward: f64,
    pub goal_reward: f64,
    /// Defaults to 4N².
    pub max_steps: Option<usize>,
    pub c_goal: f64,
    pub agent: AgentKind,
    pub episodes: usize,
    pub seed: u64,
    pub gamma: f64,
    /// Discount used only for the successor matrix (may exceed 1).
    pub sr_gamma: Option<f64>,
    pub beta: ActionPrecision,
    pub horizon: usize,
    pub policy_cap: u64,
    pub w_utility: f64,
    pub w_epistemic: f64,
    pub sizes: Vec<usize>,
    pub agents: Vec<AgentKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_size: 3,
            goal: None,
            unknowable: BTreeSet::new(),
            step_reward: -1.0,
            goal_reward: 10.0,
            max_steps: None,
            c_goal: 2.0,
            agent: AgentKind::Sr,
            episodes: 20,
            seed: 0,
            gamma: 0.99,
            sr_gamma: None,
            beta: ActionPrecision::default(),
            horizon: DEFAULT_HORIZON,
            policy_cap: DEFAULT_POLICY_CAP,
            w_utility: 1.0,
            w_epistemic: 1.0,
            sizes: (3..=10).collect(),
            agents: vec![AgentKind::Sr, AgentKind::Planner],
        }
    }
}

fn config_error(key: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    /// Grid spec for side length `n` with this config's overrides applied.
    pub fn grid_spec_for(&self, n: usize) -> GridSpec {
        let mut spec = GridSpec::new(n);
        if let Some(goal) = self.goal {
            spec.goal = goal;
        }
        if let Some(max_steps) = self.max_steps {
            spec.max_steps = max_steps;
        }
        spec.unknowable = self.unknowable.clone();
        spec.step_reward = self.step_reward;
        spec.goal_reward = self.goal_reward;
        spec.c_goal = self.c_goal;
        spec
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid_spec_for(self.grid_size)
    }

    pub fn weights(&self) -> EfeWeights {
        EfeWeights {
            w_utility: self.w_utility,
            w_epistemic: self.w_epistemic,
        }
    }

    /// Discount for the successor matrix.
    pub fn successor_gamma(&self) -> f64 {
        self.sr_gamma.unwrap_or(self.gamma)
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            horizon: self.horizon,
            precision: self.beta,
            gamma: self.gamma,
            policy_cap: self.policy_cap,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.episodes == 0 {
            return Err(config_error("episodes", "must be at least 1"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(config_error(
                "gamma",
                format!("must be positive, got {}", self.gamma),
            ));
        }
        if self.gamma > 1.0 && self.agent == AgentKind::Planner {
            return Err(config_error(
                "gamma",
                "planner discount must be <= 1; use sr_gamma for the successor heuristic",
            ));
        }
        if let Some(g) = self.sr_gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(config_error("sr_gamma", format!("must be positive, got {g}")));
            }
        }
        if self.horizon == 0 {
            return Err(config_error("horizon", "must be at least 1"));
        }
        if let Err(e) = self.weights().validate() {
            let key = if self.w_utility.is_finite() && self.w_utility >= 0.0 {
                "w_epistemic"
            } else {
                "w_utility"
            };
            return Err(config_error(key, e.to_string()));
        }
        self.validate_grid(self.grid_size)
    }

    /// Extra checks for a benchmark sweep over `sizes` × `agents`.
    pub fn validate_bench(&self) -> Result<(), HarnessError> {
        let mut single = self.clone();
        single.agent = AgentKind::Sr;
        single.validate()?;
        if self.sizes.is_empty() {
            return Err(config_error("sizes", "must list at least one grid size"));
        }
        if self.agents.is_empty() {
            return Err(config_error("agents", "must list at least one agent"));
        }
        if self.gamma > 1.0 && self.agents.contains(&AgentKind::Planner) {
            return Err(config_error(
                "gamma",
                "planner discount must be <= 1; use sr_gamma for the successor heuristic",
            ));
        }
        self.sizes.iter().try_for_each(|&n| self.validate_grid(n))
    }

    fn validate_grid(&self, n: usize) -> Result<(), HarnessError> {
        self.grid_spec_for(n).validate().map_err(|e| {
            let key = match &e {
                sr_aif::Error::InvalidSpec(msg) if msg.contains("unknowable") => "unknowable",
                sr_aif::Error::InvalidSpec(msg) if msg.contains("goal") => "goal",
                sr_aif::Error::InvalidSpec(msg) if msg.contains("max_steps") => "max_steps",
                _ => "grid_size",
            };
            config_error(key, format!("grid size {n}: {e}"))
        })
    }
}

/// Partially specified configuration, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub grid_size: Option<usize>,
    pub goal: Option<usize>,
    pub unknowable: Option<Vec<usize>>,
    pub step_reward: Option<f64>,
    pub goal_reward: Option<f64>,
    pub max_steps: Option<usize>,
    pub c_goal: Option<f64>,
    pub agent: Option<AgentKind>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub sr_gamma: Option<f64>,
    pub beta: Option<ActionPrecision>,
    pub horizon: Option<usize>,
    pub policy_cap: Option<u64>,
    pub w_utility: Option<f64>,
    pub w_epistemic: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub agents: Option<Vec<AgentKind>>,
}

macro_rules! overlay {
    ($target:expr, $src:expr; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $src.$field.clone() { $target.$field = v.into(); })*
    };
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        overlay!(cfg, self; grid_size, step_reward, goal_reward, c_goal, agent, episodes, seed, gamma,
                 beta, horizon, policy_cap, w_utility, w_epistemic, sizes, agents);
        if let Some(g) = self.goal {
            cfg.goal = Some(g);
        }
        if let Some(m) = self.max_steps {
            cfg.max_steps = Some(m);
        }
        if let Some(g) = self.sr_gamma {
            cfg.sr_gamma = Some(g);
        }
        if let Some(u) = &self.unknowable {
            cfg.unknowable = u.iter().copied().collect();
        }
    }

    /// Parses a flat JSON object. Keys are the long flag names, with either
    /// `-` or `_` as separator; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            config_error(
                "<file>",
                format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()),
            )
        })?;
        let Value::Object(map) = value else {
            return Err(config_error("<file>", "expected a JSON object at the top level"));
        };
        Self::from_map(&map)
    }

    fn from_map(map: &Map<String, Value>) -> Result<Self, HarnessError> {
        let mut o = Self::default();
        for (raw_key, value) in map {
            let key = raw_key.replace('-', "_");
            let k = key.as_str();
            match k {
                "grid_size" => o.grid_size = Some(as_usize(k, value)?),
                "goal" => o.goal = Some(as_usize(k, value)?),
                "unknowable" => o.unknowable = Some(as_usize_list(k, value)?),
                "step_reward" => o.step_reward = Some(as_f64(k, value)?),
                "goal_reward" => o.goal_reward = Some(as_f64(k, value)?),
                "max_steps" => o.max_steps = Some(as_usize(k, value)?),
                "c_goal" => o.c_goal = Some(as_f64(k, value)?),
                "agent" => o.agent = Some(as_agent(k, value)?),
                "episodes" => o.episodes = Some(as_usize(k, value)?),
                "seed" => o.seed = Some(as_u64(k, value)?),
                "gamma" => o.gamma = Some(as_f64(k, value)?),
                "sr_gamma" => o.sr_gamma = Some(as_f64(k, value)?),
                "beta" => {
                    o.beta = Some(
                        ActionPrecision::deserialize(value).map_err(|e| config_error(k, e.to_string()))?,
                    )
                }
                "horizon" => o.horizon = Some(as_usize(k, value)?),
                "policy_cap" => o.policy_cap = Some(as_u64(k, value)?),
                "w_utility" => o.w_utility = Some(as_f64(k, value)?),
                "w_epistemic" => o.w_epistemic = Some(as_f64(k, value)?),
                "sizes" => o.sizes = Some(as_usize_list(k, value)?),
                "agents" => {
                    let items = value
                        .as_array()
                        .ok_or_else(|| config_error(k, "expected an array of agent names"))?;
                    o.agents = Some(items.iter().map(|v| as_agent(k, v)).collect::<Result<_, _>>()?);
                }
                _ => return Err(config_error(raw_key, "unknown configuration key")),
            }
        }
        Ok(o)
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, HarnessError> {
    v.as_f64()
        .ok_or_else(|| config_error(key, format!("expected a number, got {v}")))
}

fn as_u64(key: &str, v: &Value) -> Result<u64, HarnessError> {
    v.as_u64()
        .ok_or_else(|| config_error(key, format!("expected a nonnegative integer, got {v}")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize, HarnessError> {
    as_u64(key, v).and_then(|n| usize::try_from(n).map_err(|_| config_error(key, "value too large")))
}

fn as_usize_list(key: &str, v: &Value) -> Result<Vec<usize>, HarnessError> {
    match v {
        Value::Array(items) => items.iter().map(|i| as_usize(key, i)).collect(),
        Value::String(s) => parse_usize_list(s).map_err(|e| config_error(key, e)),
        _ => Err(config_error(
            key,
            format!("expected an array of integers, got {v}"),
        )),
    }
}

fn as_agent(key: &str, v: &Value) -> Result<AgentKind, HarnessError> {
    let s = v
        .as_str()
        .ok_or_else(|| config_error(key, format!("expected a string, got {v}")))?;
    s.parse().map_err(|e: String| config_error(key, e))
}

/// `"1,4, 7"` -> `[1, 4, 7]`; empty string -> `[]`.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| format!("`{t}` is not a nonnegative integer"))
        })
        .collect()
}

/// Reads a config file and resolves it against the defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    resolve(Some(path), &ConfigOverrides::default())
}

/// defaults <- file <- flags, then validation.
pub fn resolve(path: Option<&Path>, flags: &ConfigOverrides) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("config", format!("cannot read {}: {e}", path.display())))?;
        ConfigOverrides::from_json(&text)?.apply(&mut cfg);
    }
    flags.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(err: HarnessError) -> String {
        match err {
            HarnessError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let o = ConfigOverrides::from_json(r#"{"grid_size":3,"agent":"sr"}"#).unwrap();
        let mut cfg = RunConfig::default();
        o.apply(&mut cfg);
        cfg.validate().unwrap();
        assert_eq!(cfg.grid_size, 3);
        assert_eq!(cfg.agent, AgentKind::Sr);
        assert_eq!(cfg.gamma, 0.99);
        assert_eq!(cfg.horizon, 7);
        assert_eq!(cfg.beta, ActionPrecision::Finite(8.0));
    }

    #[test]
    fn bad_agent_names_key() {
        let err = ConfigOverrides::from_json(r#"{"agent":"unknown"}"#).unwrap_err();
        assert_eq!(key_of(err), "agent");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ConfigOverrides::from_json(r#"{"grid_size":3,"gama":0.9}"#).unwrap_err();
        assert_eq!(key_of(err), "gama");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = ConfigOverrides::from_json("{\n  \"grid_size\": 3,\n  oops\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::from_json(r#"{"gamma":0.99}"#).unwrap();
        let flags = ConfigOverrides {
            gamma: Some(0.9),
            ..Default::default()
        };
        let mut cfg = RunConfig::default();
        file.apply(&mut cfg);
        flags.apply(&mut cfg);
        assert_eq!(cfg.gamma, 0.9);
    }

    #[test]
    fn kebab_keys_and_greedy_beta() {
        let o = ConfigOverrides::from_json(r#"{"grid-size":4,"beta":"greedy","unknowable":"1,2"}"#).unwrap();
        assert_eq!(o.grid_size, Some(4));
        assert_eq!(o.beta, Some(ActionPrecision::Greedy));
        assert_eq!(o.unknowable, Some(vec![1, 2]));
    }

    #[test]
    fn validation_names_the_key() {
        let bad = |f: &dyn Fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            key_of(c.validate().unwrap_err())
        };
        assert_eq!(bad(&|c| c.episodes = 0), "episodes");
        assert_eq!(bad(&|c| c.horizon = 0), "horizon");
        assert_eq!(bad(&|c| c.unknowable = [8].into()), "unknowable");
        assert_eq!(bad(&|c| c.grid_size = 1), "grid_size");
        assert_eq!(bad(&|c| c.w_utility = -1.0), "w_utility");
        assert_eq!(bad(&|c| c.sr_gamma = Some(-2.0)), "sr_gamma");
    }
}
