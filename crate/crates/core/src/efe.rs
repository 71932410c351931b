//! Per-state Expected Free Energy gain vectors.
//!
//! The gain `g[s] = w_utility * u[s] + w_epistemic * ε[s]` combines the
//! expected log-preference `u = Aᵀ C` with the likelihood-column entropy
//! `ε[s] = H(A[:, s])`. Higher is better; the cost-convention EFE is `-g`.
//!
//! Because the successor matrix does not depend on `g`, changing the weights
//! re-prices every state without touching `M`.

use ndarray::{Array1, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GenerativeModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfeWeights {
    pub w_utility: f64,
    pub w_epistemic: f64,
}

impl Default for EfeWeights {
    fn default() -> Self {
        Self {
            w_utility: 1.0,
            w_epistemic: 1.0,
        }
    }
}

impl EfeWeights {
    /// `w_utility` must be nonnegative. A negative `w_epistemic` is allowed
    /// and turns the entropy bonus into an ambiguity penalty.
    pub fn new(w_utility: f64, w_epistemic: f64) -> Result<Self> {
        let w = Self {
            w_utility,
            w_epistemic,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.w_utility.is_finite() || !self.w_epistemic.is_finite() {
            return Err(Error::NonFinite("EFE weights"));
        }
        if self.w_utility < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "w_utility must be >= 0, got {}",
                self.w_utility
            )));
        }
        Ok(())
    }
}

/// State-indexed EFE gain (nats, higher is better).
#[derive(Debug, Clone, PartialEq)]
pub struct EfeRewardVector(Array1<f64>);

impl EfeRewardVector {
    pub fn new(g: Array1<f64>) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("EFE reward vector"));
        }
        Ok(Self(g))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Array1::zeros(n))
    }

    pub fn as_array(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `u[s] = Σ_o A[o, s] C[o]`.
pub fn utility_vector(model: &GenerativeModel) -> Array1<f64> {
    model.likelihood().t().dot(&model.preferences())
}

/// Shannon entropy of each likelihood column, in nats.
pub fn epistemic_vector(model: &GenerativeModel) -> Array1<f64> {
    model
        .likelihood()
        .axis_iter(Axis(1))
        .map(|col| column_entropy(col.iter().copied()))
        .collect()
}

fn column_entropy(col: impl Iterator<Item = f64>) -> f64 {
    // 0 ln 0 = 0; clamping would leave a tiny positive residue on one-hot columns
    0.0 - col.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

pub fn efe_reward_vector(model: &GenerativeModel, weights: EfeWeights) -> Result<EfeRewardVector> {
    weights.validate()?;
    let g = utility_vector(model) * weights.w_utility + epistemic_vector(model) * weights.w_epistemic;
    EfeRewardVector::new(g)
}
