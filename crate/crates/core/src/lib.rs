//! Bandit learning dynamics for monotone games.
//!
//! Players observe only the scalar cost of the action they played. The crate
//! provides the games, geometry and estimators behind barrier-regularized
//! mirror descent and entropy dynamics on the simplex, equilibrium oracles,
//! metrics, and a seeded experiment harness.

// negated comparisons double as NaN guards; index loops mirror the math
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algorithms;
pub mod error;
pub mod estimators;
pub mod game;
pub mod games;
pub mod harness;
pub mod geometry;
pub mod metrics;
pub mod prox;
pub mod rng;
