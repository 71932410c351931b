//! N×N gridworld POMDPs and the episode loop.
//!
//! Cells are numbered row-major, `index = row * N + col`, with row 0 at the
//! top. Moves off the grid leave the agent where it is. An "unknowable" cell
//! emits an observation drawn uniformly from the N cells of its own row.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::model::{infer_state, sample_categorical, update_belief, Belief, Controller, GenerativeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Stay => (0, 0),
        }
    }
}

pub const NUM_ACTIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub goal: usize,
    pub unknowable: BTreeSet<usize>,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub max_steps: usize,
    /// Log-preference (nats) of the goal observation.
    pub c_goal: f64,
}

impl GridSpec {
    /// Defaults: goal in the bottom-right corner, no unknowable cells,
    /// -1 per step, +10 at the goal, 4N² step budget, 2 nats goal preference.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            goal: (n * n).saturating_sub(1),
            unknowable: BTreeSet::new(),
            step_reward: -1.0,
            goal_reward: 10.0,
            max_steps: 4 * n * n,
            c_goal: 2.0,
        }
    }

    pub fn with_unknowable(mut self, cells: impl IntoIterator<Item = usize>) -> Self {
        self.unknowable = cells.into_iter().collect();
        self
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid side must be >= 2, got {}",
                self.n
            )));
        }
        let cells = self.num_cells();
        if self.goal >= cells {
            return Err(Error::InvalidSpec(format!(
                "goal {} outside a {cells}-cell grid",
                self.goal
            )));
        }
        if let Some(&bad) = self.unknowable.iter().find(|&&c| c >= cells) {
            return Err(Error::InvalidSpec(format!(
                "unknowable cell {bad} outside a {cells}-cell grid"
            )));
        }
        if self.unknowable.contains(&self.goal) {
            return Err(Error::InvalidSpec("the goal cell cannot be unknowable".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidSpec("max_steps must be >= 1".into()));
        }
        if ![self.step_reward, self.goal_reward, self.c_goal]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidSpec(
                "rewards and goal preference must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Deterministic successor of `cell` under `action`.
    pub fn move_cell(&self, cell: usize, action: Action) -> usize {
        let (r, c) = ((cell / self.n) as isize, (cell % self.n) as isize);
        let (dr, dc) = action.delta();
        let (nr, nc) = (r + dr, c + dc);
        let n = self.n as isize;
        if (0..n).contains(&nr) && (0..n).contains(&nc) {
            (nr * n + nc) as usize
        } else {
            cell
        }
    }

    pub fn manhattan_to_goal(&self, cell: usize) -> usize {
        let (r, c) = (cell / self.n, cell % self.n);
        let (gr, gc) = (self.goal / self.n, self.goal % self.n);
        r.abs_diff(gr) + c.abs_diff(gc)
    }
}

/// Builds the agent's generative model for a grid: S = O = N², five actions,
/// identity likelihood except row-uniform columns at unknowable cells, and a
/// preference of `c_goal` nats on the goal observation.
pub fn build_model(spec: &GridSpec) -> Result<GenerativeModel> {
    spec.validate()?;
    let cells = spec.num_cells();
    let mut a = Array2::<f64>::eye(cells);
    for &cell in &spec.unknowable {
        let row = cell / spec.n;
        let mut col = a.column_mut(cell);
        col.fill(0.0);
        for o in row * spec.n..(row + 1) * spec.n {
            col[o] = 1.0 / spec.n as f64;
        }
    }
    let mut b = Array3::<f64>::zeros((cells, cells, NUM_ACTIONS));
    for action in Action::ALL {
        for s in 0..cells {
            b[[spec.move_cell(s, action), s, action.index()]] = 1.0;
        }
    }
    let mut c = Array1::<f64>::zeros(cells);
    c[spec.goal] = spec.c_goal;
    GenerativeModel::new(a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOutcome {
    pub next_state: usize,
    pub observation: usize,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrajectoryStep {
    /// State reached by the move.
    pub state: usize,
    pub action: usize,
    pub observation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub start: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub reached_goal: bool,
    pub trajectory: Vec<TrajectoryStep>,
    pub wall_time_ms: f64,
    pub warnings: Vec<Warning>,
}

/// A grid specification together with its generative model.
#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: GridSpec,
    model: GenerativeModel,
}

impl GridWorld {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let model = build_model(&spec)?;
        Ok(Self { spec, model })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn model(&self) -> &GenerativeModel {
        &self.model
    }

    /// Uniform start over every cell except the goal.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let draw = rng.random_range(0..self.spec.num_cells() - 1);
        if draw >= self.spec.goal {
            draw + 1
        } else {
            draw
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> Result<StepOutcome> {
        let cells = self.spec.num_cells();
        if state >= cells {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: state,
                len: cells,
            });
        }
        let act = Action::from_index(action).ok_or(Error::IndexOutOfRange {
            what: "action",
            index: action,
            len: NUM_ACTIONS,
        })?;
        let next_state = self.spec.move_cell(state, act);
        let column = self.model.likelihood().column(next_state).to_vec();
        let observation = sample_categorical(&column, rng);
        let done = next_state == self.spec.goal;
        let reward = if done {
            self.spec.goal_reward
        } else {
            self.spec.step_reward
        };
        Ok(StepOutcome {
            next_state,
            observation,
            reward,
            done,
        })
    }

    /// Prior the agent starts from: uniform over the non-goal cells.
    pub fn initial_belief(&self) -> Belief {
        let cells = self.spec.num_cells();
        let mut p = Array1::from_elem(cells, 1.0 / (cells - 1) as f64);
        p[self.spec.goal] = 0.0;
        Belief::new(p).expect("uniform over non-goal cells is normalized")
    }

    /// Runs one episode from a random start.
    pub fn run_episode(
        &self,
        controller: &mut dyn Controller,
        rng: &mut dyn RngCore,
    ) -> Result<EpisodeResult> {
        let start = self.reset(rng);
        self.run_episode_from(controller, start, rng)
    }

    /// Runs one episode from `start`: observe, update the belief, act, step,
    /// until the goal is reached or the step budget runs out. The wall time
    /// covers the whole loop including controller work.
    pub fn run_episode_from(
        &self,
        controller: &mut dyn Controller,
        start: usize,
        rng: &mut dyn RngCore,
    ) -> Result<EpisodeResult> {
        let timer = Instant::now();
        let mut warnings = Vec::new();
        let mut state = start;
        let first_obs = sample_categorical(&self.model.likelihood().column(start).to_vec(), rng);
        let (mut belief, w) = update_belief(&self.model, &self.initial_belief(), first_obs)?;
        warnings.extend(w);

        let mut trajectory = Vec::new();
        let mut total_reward = 0.0;
        let mut reached_goal = false;
        while trajectory.len() < self.spec.max_steps {
            let action = controller.act(&belief, rng)?;
            let out = self.step(state, action, rng)?;
            trajectory.push(TrajectoryStep {
                state: out.next_state,
                action,
                observation: out.observation,
            });
            total_reward += out.reward;
            state = out.next_state;
            if out.done {
                reached_goal = true;
                break;
            }
            let (next_belief, w) = infer_state(&self.model, &belief, action, out.observation)?;
            warnings.extend(w);
            belief = next_belief;
        }
        Ok(EpisodeResult {
            start,
            steps: trajectory.len(),
            total_reward,
            reached_goal,
            trajectory,
            wall_time_ms: timer.elapsed().as_secs_f64() * 1e3,
            warnings,
        })
    }
}
