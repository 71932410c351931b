//! Active inference with analytic successor representations.
//!
//! A discrete generative model (`A`, `B(u)`, `C`) fixes everything an agent
//! needs to value states. Averaging `B` under a default policy and solving
//! `(I - γB̃ᵀ)M = I` once yields the successor matrix `M`; any per-state
//! Expected Free Energy gain `g` is then turned into a value function by a
//! single product `V = M g`, and re-weighting utility against information
//! gain never touches `M`.
//!
//! ```
//! use sr_aif::{efe::EfeWeights, gridworld::{GridSpec, GridWorld}};
//! use sr_aif::model::ActionPrecision;
//! use sr_aif::successor::{DefaultPolicy, SrAgent};
//! use rand::SeedableRng;
//!
//! let world = GridWorld::new(GridSpec::new(4)).unwrap();
//! let mut agent = SrAgent::new(
//!     world.model().clone(),
//!     &DefaultPolicy::uniform(5),
//!     0.99,
//!     EfeWeights::default(),
//!     ActionPrecision::Greedy,
//! )
//! .unwrap();
//! let mut rng = rand::rngs::StdRng::seed_from_u64(7);
//! let episode = world.run_episode_from(&mut agent, 0, &mut rng).unwrap();
//! assert!(episode.reached_goal);
//! assert_eq!(episode.steps, 6);
//! ```
//!
//! Modules:
//!
//! * [`model`]: generative model, beliefs, exact state inference, softmax.
//! * [`efe`]: utility and epistemic gain vectors.
//! * [`successor`]: default transition, successor matrix, SR agent.
//! * [`planner`]: exhaustive-policy baseline agent.
//! * [`duality`]: desirability/filtering recursions and bound checks.
//! * [`gridworld`]: gridworld POMDPs and the episode loop.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duality;
pub mod efe;
pub mod error;
pub mod gridworld;
pub mod linalg;
pub mod model;
pub mod planner;
pub mod successor;

pub use error::{Error, Result, Warning};
