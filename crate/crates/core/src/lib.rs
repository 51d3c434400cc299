//! Randomized feasibility methods for strongly monotone variational
//! inequalities.
//!
//! The constraint set of each agent is `Y_j ∩ X_j`, where `Y_j` is a simple
//! set with an exact Euclidean projection and `X_j` is the intersection of
//! many (possibly infinitely many) convex level sets `{g_a ≤ 0}`. The outer
//! methods (projection, Korpelevich, Popov) handle the mapping `F` and the
//! simple sets; the functional constraints are handled by sequential random
//! Polyak steps on sampled constraints.
//!
//! Module map:
//!
//! * [`model`]: block vectors, mappings, simple sets, constraint families.
//! * [`feasibility`]: the Polyak step, the random feasibility loop, `q`.
//! * [`methods`]: step and batch schedules, the three outer methods, [`methods::run`].
//! * [`problems`]: the matrix-game and imitation-game generators.
//! * [`audit`]: distance oracles, inequality audits and rate fits.
//! * [`harness`]: experiment configs, presets, CSV output.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod linalg;
pub mod methods;
pub mod model;
pub mod problems;

pub use error::{Error, Result};
pub use feasibility::{FeasibilityConfig, QConstant};
pub use methods::{BatchSchedule, Method, RunTrace, StepSchedule};
pub use model::{
    BlockLayout, ConstraintFamily, ConstraintHandle, GameMapping, JointDecision, SimpleSet,
};
pub use problems::ProblemInstance;
