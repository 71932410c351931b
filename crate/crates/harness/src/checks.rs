//! The `duality` command: randomized checks of the control/inference
//! correspondence on small linearly solvable MDPs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sr_aif::duality::{
    desirability_recursion, filtering_recursion, jensen_bound_check, occupancy_interpretation_check,
    LinearMdp,
};

use crate::{HarnessError, SEED_DERIVATION, TOOL_NAME, TOOL_VERSION};

pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const JENSEN_EQUALITY_TOL: f64 = 1e-12;
pub const OCCUPANCY_TOL: f64 = 1e-10;
/// Discount of the desirability recursion; normalization removes it.
pub const DESIRABILITY_GAMMA: f64 = 0.9;
pub const OCCUPANCY_GAMMA: f64 = 0.9;
pub const OCCUPANCY_HORIZON: usize = 30;
pub const MAX_COST: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityConfig {
    /// Largest state count; each trial draws S uniformly from 1..=states.
    pub states: usize,
    pub trials: usize,
    /// Largest horizon; each trial draws T uniformly from 2..=horizon.
    pub horizon: usize,
    pub seed: u64,
}

impl Default for DualityConfig {
    fn default() -> Self {
        Self {
            states: 10,
            trials: 200,
            horizon: 6,
            seed: 0,
        }
    }
}

impl DualityConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |key: &str, reason: &str| HarnessError::Config {
            key: key.into(),
            reason: reason.into(),
        };
        if self.states == 0 {
            return Err(err("states", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(err("trials", "must be at least 1"));
        }
        if self.horizon < 2 {
            return Err(err("horizon", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub states: usize,
    pub horizon: usize,
    pub deterministic: bool,
    /// Max gap between normalized desirability and filtering messages.
    pub equivalence_gap: f64,
    /// Max of `bellman_value - log_message` over states (≤ 0 when the bound holds).
    pub jensen_slack: f64,
    /// Max `|log_message - bellman_value|`, the equality gap.
    pub jensen_gap: f64,
    pub occupancy_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckSummary {
    pub passed: usize,
    pub total: usize,
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed_derivation: &'static str,
    pub config: DualityConfig,
    pub equivalence: CheckSummary,
    pub jensen_bound: CheckSummary,
    /// Equality of the bound on deterministic-dynamics trials.
    pub jensen_equality: CheckSummary,
    pub occupancy: CheckSummary,
    pub all_passed: bool,
    pub trials: Vec<TrialRecord>,
}

impl DualityReport {
    pub fn failure(&self) -> Option<HarnessError> {
        (!self.all_passed).then(|| {
            HarnessError::CheckFailed(format!(
                "equivalence {}/{}, jensen bound {}/{}, jensen equality {}/{}, occupancy {}/{}",
                self.equivalence.passed,
                self.equivalence.total,
                self.jensen_bound.passed,
                self.jensen_bound.total,
                self.jensen_equality.passed,
                self.jensen_equality.total,
                self.occupancy.passed,
                self.occupancy.total,
            ))
        })
    }
}

/// Every fourth trial (0, 4, 8, ...) uses deterministic passive dynamics.
pub fn cmd_duality(cfg: &DualityConfig) -> Result<DualityReport, HarnessError> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .map(|i| run_trial(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;

    let summarize = |rows: &mut dyn Iterator<Item = &TrialRecord>, gap: fn(&TrialRecord) -> f64, tol: f64| {
        let mut s = CheckSummary {
            passed: 0,
            total: 0,
            max_discrepancy: 0.0,
        };
        for r in rows {
            let g = gap(r);
            s.total += 1;
            s.passed += usize::from(g <= tol);
            s.max_discrepancy = s.max_discrepancy.max(g);
        }
        s
    };
    let equivalence = summarize(&mut trials.iter(), |r| r.equivalence_gap, EQUIVALENCE_TOL);
    let jensen_bound = summarize(&mut trials.iter(), |r| r.jensen_slack.max(0.0), 1e-12);
    let jensen_equality = summarize(
        &mut trials.iter().filter(|r| r.deterministic),
        |r| r.jensen_gap,
        JENSEN_EQUALITY_TOL,
    );
    let occupancy = summarize(&mut trials.iter(), |r| r.occupancy_gap, OCCUPANCY_TOL);
    let all_passed = trials.iter().all(|r| r.passed);
    Ok(DualityReport {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        seed_derivation: SEED_DERIVATION,
        config: *cfg,
        equivalence,
        jensen_bound,
        jensen_equality,
        occupancy,
        all_passed,
        trials,
    })
}

fn run_trial(cfg: &DualityConfig, trial: usize) -> Result<TrialRecord, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(cfg.seed, trial as u64));
    let states = rng.random_range(1..=cfg.states);
    let horizon = rng.random_range(2..=cfg.horizon);
    let deterministic = trial % 4 == 0;
    let mdp = LinearMdp::random(&mut rng, states, horizon, deterministic, MAX_COST)?;

    let z = desirability_recursion(&mdp, DESIRABILITY_GAMMA)?;
    let like = mdp.exp_neg_cost();
    let f = filtering_recursion(like.view(), mdp.passive(), like.view(), horizon)?;
    let mut equivalence_gap = 0.0f64;
    for (zr, fr) in z.values.rows().into_iter().zip(f.values.rows()) {
        let (zs, fs) = (zr.sum(), fr.sum());
        for (a, b) in zr.iter().zip(fr.iter()) {
            equivalence_gap = equivalence_gap.max((a / zs - b / fs).abs());
        }
    }

    let jensen = jensen_bound_check(&mdp)?;
    let jensen_slack = jensen
        .iter()
        .map(|r| r.bellman_value - r.log_message)
        .fold(f64::NEG_INFINITY, f64::max);
    let jensen_gap = jensen
        .iter()
        .map(|r| (r.log_message - r.bellman_value).abs())
        .fold(0.0, f64::max);

    // the passive rows are distributions; their transpose is column-stochastic
    let b_tilde = mdp.passive().t().to_owned();
    let occupancy_gap = occupancy_interpretation_check(b_tilde.view(), OCCUPANCY_GAMMA, OCCUPANCY_HORIZON)?;

    let passed = equivalence_gap <= EQUIVALENCE_TOL
        && jensen.iter().all(|r| r.holds)
        && (!deterministic || jensen_gap <= JENSEN_EQUALITY_TOL)
        && occupancy_gap <= OCCUPANCY_TOL;
    Ok(TrialRecord {
        trial,
        states,
        horizon,
        deterministic,
        equivalence_gap,
        jensen_slack,
        jensen_gap,
        occupancy_gap,
        passed,
    })
}
