//! Numerical checks of the control/inference correspondence.
//!
//! * The desirability recursion `z_t = e^{-r} ⊙ γ P z_{t+1}` of a linearly
//!   solvable MDP is the same backward recursion as a filtering message with
//!   likelihood `e^{-r}`.
//! * Pushing the expectation out of the log at every step of that recursion
//!   gives the fixed-policy linear Bellman value with reward `log e^{-r}`.
//!   Because `log E[X] ≥ E[log X]`, the Bellman value is a lower bound on
//!   the log message, tight when the dynamics are deterministic.
//! * Row `s` of the truncated successor series is the discounted sum of the
//!   k-step occupancy distributions started from `s`.
//!
//! Matrices here are row-stochastic: `P[s, s'] = p(s' | s)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::successor::successor_matrix_truncated;

/// Messages below this trigger an underflow warning.
pub const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMdp {
    passive: Array2<f64>,
    state_cost: Array1<f64>,
    horizon: usize,
}

impl LinearMdp {
    pub fn new(passive: Array2<f64>, state_cost: Array1<f64>, horizon: usize) -> Result<Self> {
        let (r, c) = passive.dim();
        if r != c || r == 0 || state_cost.len() != r {
            return Err(Error::ShapeMismatch(format!(
                "passive dynamics {r}x{c}, state cost length {}",
                state_cost.len()
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        if passive.iter().chain(state_cost.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear MDP"));
        }
        for (index, row) in passive.axis_iter(Axis(0)).enumerate() {
            let sum = row.sum();
            if (sum - 1.0).abs() > 1e-10 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::NotStochastic {
                    what: "passive dynamics",
                    index,
                    sum,
                });
            }
        }
        if state_cost.iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidArgument("state costs must be nonnegative".into()));
        }
        Ok(Self {
            passive,
            state_cost,
            horizon,
        })
    }

    pub fn passive(&self) -> ArrayView2<'_, f64> {
        self.passive.view()
    }

    pub fn state_cost(&self) -> ArrayView1<'_, f64> {
        self.state_cost.view()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.state_cost.len()
    }

    /// `e^{-r}`, the likelihood this MDP corresponds to.
    pub fn exp_neg_cost(&self) -> Array1<f64> {
        self.state_cost.mapv(|r| (-r).exp())
    }

    /// Random instance: Dirichlet(1) rows (or a random deterministic map)
    /// and costs uniform on `[0, max_cost)`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        num_states: usize,
        horizon: usize,
        deterministic: bool,
        max_cost: f64,
    ) -> Result<Self> {
        let mut p = Array2::zeros((num_states, num_states));
        for mut row in p.axis_iter_mut(Axis(0)) {
            if deterministic {
                row[rng.random_range(0..num_states)] = 1.0;
            } else {
                // Dirichlet(1, ..., 1) via normalized exponentials
                row.mapv_inplace(|_| -(1.0 - rng.random::<f64>()).ln());
                let total = row.sum();
                row /= total;
            }
        }
        let cost = Array1::from_shape_fn(num_states, |_| rng.random::<f64>() * max_cost);
        Self::new(p, cost, horizon)
    }
}

/// Backward messages, row `t - 1` holding time `t` (t = 1..=T).
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    pub values: Array2<f64>,
    pub warning: Option<Warning>,
}

impl Messages {
    /// Message at `t = 1`.
    pub fn first(&self) -> ArrayView1<'_, f64> {
        self.values.row(0)
    }
}

/// Shared backward recursion: `m_T = terminal`, `m_t = factor ⊙ γ P m_{t+1}`.
fn backward_recursion(
    factor: ArrayView1<'_, f64>,
    passive: ArrayView2<'_, f64>,
    terminal: ArrayView1<'_, f64>,
    horizon: usize,
    gamma: f64,
) -> Messages {
    let n = factor.len();
    let mut values = Array2::zeros((horizon, n));
    values.row_mut(horizon - 1).assign(&terminal);
    for t in (0..horizon - 1).rev() {
        let next = passive.dot(&values.row(t + 1)) * gamma;
        let msg = &factor * &next;
        values.row_mut(t).assign(&msg);
    }
    let mut warning = None;
    for (t, row) in values.axis_iter(Axis(0)).enumerate() {
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        if min < UNDERFLOW {
            warning = Some(Warning::Underflow {
                time: t + 1,
                min_value: min,
            });
            break;
        }
    }
    Messages { values, warning }
}

/// Desirability `z_t` for `t = 1..=T`, with `z_T = e^{-r}`.
pub fn desirability_recursion(mdp: &LinearMdp, gamma: f64) -> Result<Messages> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    let factor = mdp.exp_neg_cost();
    Ok(backward_recursion(
        factor.view(),
        mdp.passive(),
        factor.view(),
        mdp.horizon,
        gamma,
    ))
}

/// Unnormalized backward filtering messages with the given per-state
/// likelihood (undiscounted).
pub fn filtering_recursion(
    likelihood: ArrayView1<'_, f64>,
    passive: ArrayView2<'_, f64>,
    terminal: ArrayView1<'_, f64>,
    horizon: usize,
) -> Result<Messages> {
    let n = likelihood.len();
    if passive.dim() != (n, n) || terminal.len() != n {
        return Err(Error::ShapeMismatch(
            "likelihood, dynamics and terminal disagree".into(),
        ));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if let Some(index) = likelihood.iter().position(|&l| !(l >= 0.0)) {
        return Err(Error::NonPositiveLikelihood { index });
    }
    Ok(backward_recursion(likelihood, passive, terminal, horizon, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenRecord {
    /// Log of the exact backward message at t = 1.
    pub log_message: f64,
    /// Fixed-policy Bellman value with reward = log-likelihood.
    pub bellman_value: f64,
    /// `bellman_value <= log_message + 1e-12`.
    pub holds: bool,
}

/// Compares the log backward message with its Jensen-unrolled counterpart
/// at every state (γ = 1).
pub fn jensen_bound_check(mdp: &LinearMdp) -> Result<Vec<JensenRecord>> {
    if mdp.horizon < 2 {
        return Err(Error::InvalidArgument("Jensen check needs horizon >= 2".into()));
    }
    let likelihood = mdp.exp_neg_cost();
    if let Some(index) = likelihood.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::NonPositiveLikelihood { index });
    }
    let messages = desirability_recursion(mdp, 1.0)?;
    let log_like = likelihood.mapv(f64::ln);
    let bellman = fixed_policy_value(log_like.view(), mdp.passive(), mdp.horizon);
    Ok(messages
        .first()
        .iter()
        .zip(bellman.iter())
        .map(|(&z, &v)| {
            let lhs = z.ln();
            JensenRecord {
                log_message: lhs,
                bellman_value: v,
                holds: v <= lhs + 1e-12,
            }
        })
        .collect())
}

/// `V_T = r`, `V_t = r + P V_{t+1}`, returned at t = 1.
///
/// Same rollout as the planner's path integral, with the expectation taken
/// over the passive dynamics instead of a chosen action sequence.
fn fixed_policy_value(
    reward: ArrayView1<'_, f64>,
    passive: ArrayView2<'_, f64>,
    horizon: usize,
) -> Array1<f64> {
    let mut v = reward.to_owned();
    for _ in 1..horizon {
        v = &reward + &passive.dot(&v);
    }
    v
}

/// Max-norm gap between the rows of the truncated successor series and the
/// explicitly propagated discounted occupancies.
pub fn occupancy_interpretation_check(
    b_tilde: ArrayView2<'_, f64>,
    gamma: f64,
    horizon: usize,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let series = successor_matrix_truncated(b_tilde, gamma, horizon)?;
    let n = b_tilde.nrows();
    let mut worst = 0.0f64;
    for s in 0..n {
        let mut dist = Array1::<f64>::zeros(n);
        dist[s] = 1.0;
        let mut occupancy = dist.clone();
        let mut discount = 1.0;
        for _ in 0..horizon {
            dist = b_tilde.dot(&dist);
            discount *= gamma;
            occupancy.scaled_add(discount, &dist);
        }
        for (a, b) in occupancy.iter().zip(series.row(s).iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
