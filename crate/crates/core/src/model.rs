//! Discrete generative model, categorical beliefs and exact state inference.
//!
//! Matrices store the conditioning variable along columns:
//!
//! ```text
//! A[o, s]    = p(o  | x = s)
//! B[s', s, u] = p(x' | x = s, u)
//! ```
//!
//! so a belief is pushed forward by a plain matrix-vector product,
//! `q' = B(u) q`.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};

/// Column-sum tolerance accepted by [`GenerativeModel::new`].
pub const STOCHASTIC_TOL: f64 = 1e-8;

/// Sum tolerance for a [`Belief`].
pub const BELIEF_TOL: f64 = 1e-10;

/// Probabilities are clamped to this floor before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-16;

/// Below this unnormalized posterior mass an observation is treated as
/// impossible and inference falls back to the predicted prior.
pub const ZERO_EVIDENCE: f64 = 1e-300;

/// `ln(max(p, LOG_FLOOR))`.
#[inline]
pub fn safe_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    a: Array2<f64>,
    b: Array3<f64>,
    c: Array1<f64>,
}

impl GenerativeModel {
    /// Builds a model from its likelihood `a` (O×S), transition tensor `b`
    /// (S×S×U) and log-preferences `c` (length O), validating every
    /// invariant.
    pub fn new(a: Array2<f64>, b: Array3<f64>, c: Array1<f64>) -> Result<Self> {
        let model = Self { a, b, c };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let (num_obs, num_states) = self.a.dim();
        let (rows, cols, num_actions) = self.b.dim();
        if num_obs == 0 || num_states == 0 || num_actions == 0 {
            return Err(Error::ShapeMismatch("empty dimension".into()));
        }
        if rows != num_states || cols != num_states {
            return Err(Error::ShapeMismatch(format!(
                "A has {num_states} state columns but B is {rows}x{cols}x{num_actions}"
            )));
        }
        if self.c.len() != num_obs {
            return Err(Error::ShapeMismatch(format!(
                "C has length {} but A has {num_obs} observation rows",
                self.c.len()
            )));
        }
        if self.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("A"));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("B"));
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("C"));
        }
        check_column_stochastic(self.a.view(), "A")?;
        for u in 0..num_actions {
            check_column_stochastic(self.b.index_axis(Axis(2), u), "B")?;
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_obs(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.b.dim().2
    }

    pub fn likelihood(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn transitions(&self) -> &Array3<f64> {
        &self.b
    }

    /// `B(u)` as an S×S view.
    pub fn transition(&self, action: usize) -> Result<ArrayView2<'_, f64>> {
        self.check_action(action)?;
        Ok(self.b.index_axis(Axis(2), action))
    }

    pub fn preferences(&self) -> ArrayView1<'_, f64> {
        self.c.view()
    }

    /// Returns a copy with a different preference vector.
    pub fn with_preferences(&self, c: Array1<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c)
    }

    pub(crate) fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                len: self.num_actions(),
            });
        }
        Ok(())
    }
}

fn check_column_stochastic(m: ArrayView2<'_, f64>, what: &'static str) -> Result<()> {
    for (index, col) in m.axis_iter(Axis(1)).enumerate() {
        let sum = col.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL || col.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::NotStochastic { what, index, sum });
        }
    }
    Ok(())
}

/// Categorical distribution over hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Array1<f64>);

impl Belief {
    pub fn new(probs: Array1<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::ShapeMismatch("empty belief".into()));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("belief"));
        }
        let sum = probs.sum();
        if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > BELIEF_TOL {
            return Err(Error::NotStochastic {
                what: "belief",
                index: 0,
                sum,
            });
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn one_hot(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index,
                len: n,
            });
        }
        let mut p = Array1::zeros(n);
        p[index] = 1.0;
        Ok(Self(p))
    }

    /// Normalizes a nonnegative mass vector. Callers guarantee a positive
    /// total.
    pub(crate) fn from_mass(mut mass: Array1<f64>) -> Self {
        let total = mass.sum();
        mass /= total;
        Self(mass)
    }

    pub fn probs(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }
}

/// Anything that picks an action from the current belief.
///
/// Implementations must be deterministic given the belief and the state of
/// `rng`.
pub trait Controller {
    fn act(&mut self, belief: &Belief, rng: &mut dyn RngCore) -> Result<usize>;
}

/// Softmax precision for action selection. `Greedy` is the `beta = ∞`
/// limit: argmax with ties broken toward the lowest index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionPrecision {
    Finite(f64),
    Greedy,
}

impl ActionPrecision {
    /// Maps `f64::INFINITY` to [`ActionPrecision::Greedy`].
    pub fn from_beta(beta: f64) -> Result<Self> {
        if beta == f64::INFINITY {
            Ok(Self::Greedy)
        } else if beta > 0.0 && beta.is_finite() {
            Ok(Self::Finite(beta))
        } else {
            Err(Error::InvalidArgument(format!(
                "beta must be positive, got {beta}"
            )))
        }
    }
}

impl Default for ActionPrecision {
    fn default() -> Self {
        Self::Finite(8.0)
    }
}

impl std::fmt::Display for ActionPrecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(b) => write!(f, "{b}"),
            Self::Greedy => f.write_str("greedy"),
        }
    }
}

impl std::str::FromStr for ActionPrecision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("greedy") || s.eq_ignore_ascii_case("inf") {
            return Ok(Self::Greedy);
        }
        let beta: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("beta must be a number or `greedy`, got `{s}`")))?;
        Self::from_beta(beta)
    }
}

impl Serialize for ActionPrecision {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(b) => ser.serialize_f64(*b),
            Self::Greedy => ser.serialize_str("greedy"),
        }
    }
}

impl<'de> Deserialize<'de> for ActionPrecision {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(de)? {
            Raw::Num(b) => Self::from_beta(b),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `p_i ∝ exp(-beta * costs_i)`, evaluated with max-subtraction.
pub fn softmax_cost(costs: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "softmax precision must be positive and finite, got {beta}"
        )));
    }
    if costs.is_empty() {
        return Err(Error::ShapeMismatch("softmax over zero entries".into()));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("softmax costs"));
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = costs.iter().map(|&c| (-beta * (c - min)).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Draws an index from a (possibly unnormalized) nonnegative weight vector.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    // Round-off landed past the end: return the last index with mass.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Pushes a belief through `B(action)`.
pub fn predict_next(model: &GenerativeModel, belief: &Belief, action: usize) -> Result<Belief> {
    let b = model.transition(action)?;
    if belief.len() != model.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "belief has {} states, model has {}",
            belief.len(),
            model.num_states()
        )));
    }
    Ok(Belief::from_mass(b.dot(&belief.probs())))
}

/// Bayes update of a prior with a single observation. On zero evidence the
/// prior is returned together with a [`Warning::ZeroEvidence`].
pub fn update_belief(
    model: &GenerativeModel,
    prior: &Belief,
    obs: usize,
) -> Result<(Belief, Option<Warning>)> {
    if obs >= model.num_obs() {
        return Err(Error::IndexOutOfRange {
            what: "observation",
            index: obs,
            len: model.num_obs(),
        });
    }
    if prior.len() != model.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "belief has {} states, model has {}",
            prior.len(),
            model.num_states()
        )));
    }
    let mass = &model.likelihood().row(obs) * &prior.probs();
    let total = mass.sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("posterior mass"));
    }
    if total < ZERO_EVIDENCE {
        return Ok((prior.clone(), Some(Warning::ZeroEvidence { observation: obs })));
    }
    Ok((Belief::from_mass(mass), None))
}

/// Exact filtered posterior `q(x) ∝ A[obs, x] · (B(action) q_prev)[x]`.
///
/// For a single categorical factor this is the minimizer of the variational
/// free energy, so no iterative descent is needed.
pub fn infer_state(
    model: &GenerativeModel,
    prev: &Belief,
    action: usize,
    obs: usize,
) -> Result<(Belief, Option<Warning>)> {
    let predicted = predict_next(model, prev, action)?;
    update_belief(model, &predicted, obs)
}
