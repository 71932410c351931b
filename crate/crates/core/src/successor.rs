//! Analytic successor representation under a fixed default policy.
//!
//! With column-conditioning storage (`B̃[s', s] = p(s' | s)`) the forward
//! operator on row vectors is `B̃ᵀ`, and the successor matrix
//!
//! ```text
//! M = Σ_k γ^k (B̃ᵀ)^k = (I - γ B̃ᵀ)^{-1}
//! ```
//!
//! has `M[s, s']` equal to the discounted expected number of visits to `s'`
//! starting from `s`. Values are then a single product, `V = M g`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::RngCore;

use crate::efe::{efe_reward_vector, EfeRewardVector, EfeWeights};
use crate::error::{Error, Result, Warning};
use crate::linalg::{max_abs, Lu};
use crate::model::{
    argmax, sample_categorical, softmax_cost, ActionPrecision, Belief, Controller, GenerativeModel,
    STOCHASTIC_TOL,
};

/// Post-solve bound on `‖(I - γB̃ᵀ)M - I‖_max`.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Fixed action distribution the successor matrix is computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultPolicy {
    weights: Vec<f64>,
}

impl DefaultPolicy {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::ShapeMismatch("empty default policy".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("default policy"));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-10 {
            return Err(Error::NotStochastic {
                what: "default policy",
                index: 0,
                sum,
            });
        }
        Ok(Self { weights })
    }

    pub fn uniform(num_actions: usize) -> Self {
        Self {
            weights: vec![1.0 / num_actions as f64; num_actions],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `B̃ = Σ_u p(u) B(u)`.
pub fn default_transition(model: &GenerativeModel, policy: &DefaultPolicy) -> Result<Array2<f64>> {
    if policy.weights.len() != model.num_actions() {
        return Err(Error::ShapeMismatch(format!(
            "default policy has {} actions, model has {}",
            policy.weights.len(),
            model.num_actions()
        )));
    }
    let s = model.num_states();
    let mut b_tilde = Array2::zeros((s, s));
    for (u, &w) in policy.weights.iter().enumerate() {
        if w != 0.0 {
            b_tilde.scaled_add(w, &model.transitions().index_axis(Axis(2), u));
        }
    }
    Ok(b_tilde)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorMatrix {
    m: Array2<f64>,
    gamma: f64,
    residual: f64,
}

impl SuccessorMatrix {
    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.m.view()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_states(&self) -> usize {
        self.m.nrows()
    }

    /// Max-norm residual of the defining linear system.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Whether the occupancy invariants (nonnegativity, unit diagonal floor,
    /// row sums `1/(1-γ)`) are expected to hold.
    pub fn has_occupancy_interpretation(&self) -> bool {
        self.gamma < 1.0
    }

    pub fn warning(&self) -> Option<Warning> {
        (!self.has_occupancy_interpretation()).then_some(Warning::DiscountAtLeastOne { gamma: self.gamma })
    }
}

fn check_square_stochastic(b_tilde: ArrayView2<'_, f64>) -> Result<()> {
    let (r, c) = b_tilde.dim();
    if r != c || r == 0 {
        return Err(Error::ShapeMismatch(format!("default transition is {r}x{c}")));
    }
    if b_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("default transition"));
    }
    for (index, col) in b_tilde.axis_iter(Axis(1)).enumerate() {
        let sum = col.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL || col.iter().any(|&p| p < 0.0) {
            return Err(Error::NotStochastic {
                what: "default transition",
                index,
                sum,
            });
        }
    }
    Ok(())
}

/// Solves `(I - γ B̃ᵀ) M = I` by LU and checks the residual.
///
/// `gamma > 1` is accepted (the result then carries a
/// [`Warning::DiscountAtLeastOne`]); any gamma that makes the system singular
/// to working precision, including `gamma = 1` on a stochastic matrix,
/// yields [`Error::NumericallySingular`].
pub fn successor_matrix(b_tilde: ArrayView2<'_, f64>, gamma: f64) -> Result<SuccessorMatrix> {
    check_square_stochastic(b_tilde)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let n = b_tilde.nrows();
    let eye = Array2::<f64>::eye(n);
    let op = &eye - &(b_tilde.t().to_owned() * gamma);
    let lu = Lu::factor(op.view()).ok_or(Error::NumericallySingular {
        gamma,
        residual: f64::INFINITY,
    })?;
    let m = lu.solve(eye.view());
    let residual = max_abs((op.dot(&m) - &eye).view());
    if !(residual <= SOLVE_RESIDUAL_TOL) || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericallySingular { gamma, residual });
    }
    Ok(SuccessorMatrix { m, gamma, residual })
}

/// Partial sum `Σ_{k=0..K} γ^k (B̃ᵀ)^k`.
pub fn successor_matrix_truncated(b_tilde: ArrayView2<'_, f64>, gamma: f64, k: usize) -> Result<Array2<f64>> {
    check_square_stochastic(b_tilde)?;
    if !(gamma < 1.0) {
        return Err(Error::DivergentSeries(gamma));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    let n = b_tilde.nrows();
    let forward = b_tilde.t();
    let mut term = Array2::<f64>::eye(n);
    let mut sum = term.clone();
    for _ in 0..k {
        term = term.dot(&forward) * gamma;
        sum += &term;
    }
    Ok(sum)
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

/// `V = M g`.
pub fn state_value(m: &SuccessorMatrix, g: &EfeRewardVector) -> Result<Array1<f64>> {
    check_len("reward vector", g.len(), m.num_states())?;
    Ok(m.m.dot(&g.as_array()))
}

/// `qᵀ M g`: the state value averaged under the current posterior.
pub fn observation_value(belief: &Belief, m: &SuccessorMatrix, g: &EfeRewardVector) -> Result<f64> {
    check_len("belief", belief.len(), m.num_states())?;
    Ok(belief.probs().dot(&state_value(m, g)?))
}

/// `Q[u] = (M g)ᵀ (B(u) q)`: the successor value of the one-step predicted
/// belief under each action.
pub fn action_values(
    model: &GenerativeModel,
    belief: &Belief,
    m: &SuccessorMatrix,
    g: &EfeRewardVector,
) -> Result<Vec<f64>> {
    check_len("successor matrix", m.num_states(), model.num_states())?;
    check_len("belief", belief.len(), model.num_states())?;
    let v = state_value(m, g)?;
    Ok(values_from_state_values(model, belief.probs(), v.view()))
}

fn values_from_state_values(
    model: &GenerativeModel,
    q: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Vec<f64> {
    // (B(u) q)·v = q·(B(u)ᵀ v)
    model
        .transitions()
        .axis_iter(Axis(2))
        .map(|b| b.t().dot(&v).dot(&q))
        .collect()
}

/// Draws from `softmax_cost(-Q, beta)`; greedy precision takes the argmax.
pub fn sample_action<R: rand::Rng + ?Sized>(
    q: &[f64],
    precision: ActionPrecision,
    rng: &mut R,
) -> Result<usize> {
    if q.is_empty() {
        return Err(Error::ShapeMismatch("no actions to choose from".into()));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("action values"));
    }
    match precision {
        ActionPrecision::Greedy => Ok(argmax(q)),
        ActionPrecision::Finite(beta) => {
            let costs: Vec<f64> = q.iter().map(|v| -v).collect();
            let p = softmax_cost(&costs, beta)?;
            Ok(sample_categorical(&p, rng))
        }
    }
}

/// Active-inference agent that scores actions with the analytic successor
/// matrix instead of tree search.
///
/// `M` is built once; [`SrAgent::set_weights`] re-prices the EFE reward and
/// value vector without recomputing it.
#[derive(Debug, Clone)]
pub struct SrAgent {
    model: GenerativeModel,
    successor: SuccessorMatrix,
    weights: EfeWeights,
    reward: EfeRewardVector,
    values: Array1<f64>,
    precision: ActionPrecision,
}

impl SrAgent {
    pub fn new(
        model: GenerativeModel,
        policy: &DefaultPolicy,
        gamma: f64,
        weights: EfeWeights,
        precision: ActionPrecision,
    ) -> Result<Self> {
        let b_tilde = default_transition(&model, policy)?;
        let successor = successor_matrix(b_tilde.view(), gamma)?;
        Self::from_successor(model, successor, weights, precision)
    }

    pub fn from_successor(
        model: GenerativeModel,
        successor: SuccessorMatrix,
        weights: EfeWeights,
        precision: ActionPrecision,
    ) -> Result<Self> {
        check_len("successor matrix", successor.num_states(), model.num_states())?;
        let reward = efe_reward_vector(&model, weights)?;
        let values = state_value(&successor, &reward)?;
        Ok(Self {
            model,
            successor,
            weights,
            reward,
            values,
            precision,
        })
    }

    pub fn set_weights(&mut self, weights: EfeWeights) -> Result<()> {
        let reward = efe_reward_vector(&self.model, weights)?;
        self.values = state_value(&self.successor, &reward)?;
        self.reward = reward;
        self.weights = weights;
        Ok(())
    }

    pub fn successor(&self) -> &SuccessorMatrix {
        &self.successor
    }

    pub fn reward(&self) -> &EfeRewardVector {
        &self.reward
    }

    pub fn weights(&self) -> EfeWeights {
        self.weights
    }

    pub fn state_values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn action_values(&self, belief: &Belief) -> Result<Vec<f64>> {
        check_len("belief", belief.len(), self.model.num_states())?;
        Ok(values_from_state_values(
            &self.model,
            belief.probs(),
            self.values.view(),
        ))
    }
}

impl Controller for SrAgent {
    fn act(&mut self, belief: &Belief, rng: &mut dyn RngCore) -> Result<usize> {
        let q = self.action_values(belief)?;
        sample_action(&q, self.precision, rng)
    }
}
