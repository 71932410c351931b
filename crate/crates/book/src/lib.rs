//! The guide under `book/` cannot pull in workspace crates when mdbook tests
//! it, so each chapter is included here and its listings run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/generative-model.md")]
pub mod generative_model {}
#[doc = include_str!("../../../book/src/expected-free-energy.md")]
pub mod expected_free_energy {}
#[doc = include_str!("../../../book/src/successor.md")]
pub mod successor {}
#[doc = include_str!("../../../book/src/planner.md")]
pub mod planner {}
#[doc = include_str!("../../../book/src/gridworld.md")]
pub mod gridworld {}
#[doc = include_str!("../../../book/src/duality.md")]
pub mod duality {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
