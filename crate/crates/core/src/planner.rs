//! Exhaustive-planning active inference baseline.
//!
//! Every action sequence of length `H` is rolled forward from the current
//! belief and scored by the discounted path integral of the same per-state
//! gain `g` the successor agent uses:
//!
//! ```text
//! cost(π) = Σ_{t=1..H} γ^t · (-gᵀ q_t),   q_t = B(u_t) q_{t-1}
//! ```
//!
//! The policy posterior is `softmax_cost(cost, beta)` and the agent acts on
//! its first-action marginal, replanning every step. Work grows as `U^H`.

use ndarray::Axis;
use rand::RngCore;

use crate::efe::EfeRewardVector;
use crate::error::{Error, Result};
use crate::model::{
    argmax, sample_categorical, softmax_cost, ActionPrecision, Belief, Controller, GenerativeModel,
};

pub const DEFAULT_HORIZON: usize = 7;
pub const DEFAULT_POLICY_CAP: u64 = 10_000_000;

/// Relative tolerance for treating two policy costs as tied in greedy mode.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidArgument(
                "policy must contain at least one action".into(),
            ));
        }
        if let Some(&bad) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: bad,
                len: num_actions,
            });
        }
        Ok(Self { actions })
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub precision: ActionPrecision,
    pub gamma: f64,
    pub policy_cap: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            precision: ActionPrecision::default(),
            gamma: 0.99,
            policy_cap: DEFAULT_POLICY_CAP,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("planning horizon must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "planner gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

fn policy_count(num_actions: usize, horizon: usize) -> u128 {
    (0..horizon).fold(1u128, |acc, _| acc.saturating_mul(num_actions as u128))
}

fn check_cap(num_actions: usize, horizon: usize, cap: u64) -> Result<usize> {
    let count = policy_count(num_actions, horizon);
    if count > cap as u128 {
        return Err(Error::ExplosionCap { count, cap });
    }
    Ok(count as usize)
}

/// Lexicographic iterator over all `U^H` action sequences.
#[derive(Debug, Clone)]
pub struct Policies {
    num_actions: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for Policies {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        // odometer increment, last position fastest
        let mut carry = true;
        for slot in succ.iter_mut().rev() {
            *slot += 1;
            if *slot < self.num_actions {
                carry = false;
                break;
            }
            *slot = 0;
        }
        if !carry {
            self.next = Some(succ);
        }
        Some(Policy { actions: current })
    }
}

pub fn enumerate_policies(num_actions: usize, horizon: usize, cap: u64) -> Result<Policies> {
    if num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidArgument(
            "need at least one action and horizon >= 1".into(),
        ));
    }
    check_cap(num_actions, horizon, cap)?;
    Ok(Policies {
        num_actions,
        next: Some(vec![0; horizon]),
    })
}

/// Dense rollout of a single policy; the reference scorer.
pub fn policy_efe(
    model: &GenerativeModel,
    belief: &Belief,
    policy: &Policy,
    g: &EfeRewardVector,
    gamma: f64,
) -> Result<f64> {
    check_dims(model, belief, g)?;
    let mut q = belief.probs().to_owned();
    let mut discount = 1.0;
    let mut cost = 0.0;
    for &u in policy.actions() {
        q = model.transition(u)?.dot(&q);
        discount *= gamma;
        cost -= discount * g.as_array().dot(&q);
    }
    Ok(cost)
}

fn check_dims(model: &GenerativeModel, belief: &Belief, g: &EfeRewardVector) -> Result<()> {
    let s = model.num_states();
    if belief.len() != s || g.len() != s {
        return Err(Error::ShapeMismatch(format!(
            "model has {s} states, belief {} and reward {}",
            belief.len(),
            g.len()
        )));
    }
    Ok(())
}

/// Nonzero entries of each `B(u)` column, indexed `[u][s]`.
#[derive(Debug, Clone)]
struct SparseTransitions {
    cols: Vec<Vec<Vec<(usize, f64)>>>,
}

impl SparseTransitions {
    fn new(model: &GenerativeModel) -> Self {
        let cols = model
            .transitions()
            .axis_iter(Axis(2))
            .map(|b| {
                b.axis_iter(Axis(1))
                    .map(|col| {
                        col.iter()
                            .enumerate()
                            .filter(|(_, &p)| p > 0.0)
                            .map(|(i, &p)| (i, p))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { cols }
    }
}

/// Depth-first rollout sharing prefixes between policies. Leaves are
/// visited in the same lexicographic order as [`enumerate_policies`].
struct TreeSearch<'a> {
    cols: &'a [Vec<Vec<(usize, f64)>>],
    gain: &'a [f64],
    discounts: Vec<f64>,
    scratch: Vec<f64>,
    supports: Vec<Vec<(usize, f64)>>,
    costs: Vec<f64>,
}

impl TreeSearch<'_> {
    fn descend(&mut self, depth: usize, cost: f64) {
        if depth == self.discounts.len() {
            self.costs.push(cost);
            return;
        }
        for u in 0..self.cols.len() {
            let (head, tail) = self.supports.split_at_mut(depth + 1);
            let parent = &head[depth];
            let child = &mut tail[0];
            child.clear();
            for &(s, p) in parent {
                for &(next, b) in &self.cols[u][s] {
                    if self.scratch[next] == 0.0 {
                        child.push((next, 0.0));
                    }
                    self.scratch[next] += p * b;
                }
            }
            let mut gain = 0.0;
            for entry in child.iter_mut() {
                entry.1 = self.scratch[entry.0];
                self.scratch[entry.0] = 0.0;
                gain += self.gain[entry.0] * entry.1;
            }
            self.descend(depth + 1, cost - self.discounts[depth] * gain);
        }
    }
}

/// Exhaustive-planning agent. Caches a sparse copy of `B` so a decision
/// costs `O(U^H · nnz)` instead of `O(U^H · H · S²)`.
#[derive(Debug, Clone)]
pub struct PlannerAgent {
    sparse: SparseTransitions,
    num_states: usize,
    config: PlannerConfig,
    reward: EfeRewardVector,
}

impl PlannerAgent {
    pub fn new(model: &GenerativeModel, config: PlannerConfig, reward: EfeRewardVector) -> Result<Self> {
        config.validate()?;
        check_cap(model.num_actions(), config.horizon, config.policy_cap)?;
        if reward.len() != model.num_states() {
            return Err(Error::ShapeMismatch(format!(
                "reward has length {}, model has {} states",
                reward.len(),
                model.num_states()
            )));
        }
        Ok(Self {
            sparse: SparseTransitions::new(model),
            num_states: model.num_states(),
            config,
            reward,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    fn num_actions(&self) -> usize {
        self.sparse.cols.len()
    }

    /// Costs of every policy, in lexicographic policy order.
    pub fn policy_costs(&self, belief: &Belief) -> Result<Vec<f64>> {
        if belief.len() != self.num_states {
            return Err(Error::ShapeMismatch(format!(
                "belief has {} states, model has {}",
                belief.len(),
                self.num_states
            )));
        }
        let h = self.config.horizon;
        let count = check_cap(self.num_actions(), h, self.config.policy_cap)?;
        let mut root: Vec<(usize, f64)> = belief
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (i, p))
            .collect();
        root.shrink_to_fit();
        let mut supports = vec![Vec::new(); h + 1];
        supports[0] = root;
        let gain = self.reward.as_array();
        let gain = gain.as_slice().expect("reward vector is contiguous");
        let mut search = TreeSearch {
            cols: &self.sparse.cols,
            gain,
            discounts: (1..=h).map(|t| self.config.gamma.powi(t as i32)).collect(),
            scratch: vec![0.0; self.num_states],
            supports,
            costs: Vec::with_capacity(count),
        };
        search.descend(0, 0.0);
        Ok(search.costs)
    }

    /// Marginal probability of each first action under the policy posterior.
    /// In greedy mode the posterior is uniform over the minimum-cost policies.
    pub fn first_action_distribution(&self, belief: &Belief) -> Result<Vec<f64>> {
        let costs = self.policy_costs(belief)?;
        let u = self.num_actions();
        let block = costs.len() / u;
        let weights = match self.config.precision {
            ActionPrecision::Finite(beta) => softmax_cost(&costs, beta)?,
            ActionPrecision::Greedy => {
                let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
                let tol = TIE_TOL * min.abs().max(1.0);
                let hits: Vec<f64> = costs
                    .iter()
                    .map(|&c| if c - min <= tol { 1.0 } else { 0.0 })
                    .collect();
                let n: f64 = hits.iter().sum();
                hits.into_iter().map(|h| h / n).collect()
            }
        };
        Ok(weights.chunks(block).map(|c| c.iter().sum()).collect())
    }

    pub fn plan(&self, belief: &Belief, rng: &mut dyn RngCore) -> Result<usize> {
        let marginal = self.first_action_distribution(belief)?;
        Ok(match self.config.precision {
            ActionPrecision::Greedy => argmax(&marginal),
            ActionPrecision::Finite(_) => sample_categorical(&marginal, rng),
        })
    }
}

impl Controller for PlannerAgent {
    fn act(&mut self, belief: &Belief, rng: &mut dyn RngCore) -> Result<usize> {
        self.plan(belief, rng)
    }
}

/// One receding-horizon decision: score all policies, marginalize the first
/// action, then sample it (or take the argmax in greedy mode).
pub fn plan_action(
    model: &GenerativeModel,
    belief: &Belief,
    config: &PlannerConfig,
    g: &EfeRewardVector,
    rng: &mut dyn RngCore,
) -> Result<usize> {
    check_dims(model, belief, g)?;
    PlannerAgent::new(model, *config, g.clone())?.plan(belief, rng)
}
