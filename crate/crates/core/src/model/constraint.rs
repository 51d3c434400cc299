use std::fmt;

use rand::{Rng, RngCore};

use super::positive_part;

/// Opaque sample produced by [`ConstraintFamily::sample`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintHandle {
    /// Index into a finite, pre-generated list of constraints.
    Index(usize),
    /// Realization of a continuous constraint parameter.
    Level(f64),
}

/// Per-agent family of convex constraints `g_a(x_j) ≤ 0` with a sampler.
///
/// Every method receives the agent's own block `x` and the latest joint
/// point `joint`. Families whose constraints are coupled to other agents
/// read the other blocks from `joint`; uncoupled families ignore it.
///
/// Implementations must be pure: the same inputs give the same outputs.
pub trait ConstraintFamily: fmt::Debug + Send + Sync {
    /// Block index of the agent this family constrains.
    fn agent(&self) -> usize;

    fn dim(&self) -> usize;

    fn sample(&self, rng: &mut dyn RngCore) -> ConstraintHandle;

    /// `g_a(x)`.
    fn value(&self, handle: &ConstraintHandle, x: &[f64], joint: &[f64]) -> f64;

    /// A subgradient of `g_a` at `x`. Only called where `g_a(x) > 0`.
    fn gradient(&self, handle: &ConstraintHandle, x: &[f64], joint: &[f64]) -> Vec<f64>;

    /// `M_g`: bound on subgradient norms over the agent's simple set.
    fn mg_bound(&self) -> f64;

    /// The regularity constant `c` with `dist²(x, S) ≤ c·E[(g⁺)²]`.
    fn regularity_c(&self) -> f64;

    /// `(g⁺(x), d)` where `d` is a subgradient of `g⁺` at `x`, or the first
    /// standard basis vector when `g⁺(x) = 0`.
    fn violation_and_subgradient(
        &self,
        handle: &ConstraintHandle,
        x: &[f64],
        joint: &[f64],
    ) -> (f64, Vec<f64>) {
        let violation = positive_part(self.value(handle, x, joint));
        if violation > 0.0 {
            (violation, self.gradient(handle, x, joint))
        } else {
            (0.0, unit_fallback(self.dim()))
        }
    }

    fn subgradient(&self, handle: &ConstraintHandle, x: &[f64], joint: &[f64]) -> Vec<f64> {
        self.violation_and_subgradient(handle, x, joint).1
    }

    /// Exact `dist(x, S_j)` when analytically available.
    fn exact_set_distance(&self, _x: &[f64], _joint: &[f64]) -> Option<f64> {
        None
    }

    /// An upper bound on `dist(x, S_j)`; defaults to the exact distance.
    fn set_distance_upper_bound(&self, x: &[f64], joint: &[f64]) -> Option<f64> {
        self.exact_set_distance(x, joint)
    }

    /// `E[(g⁺(x))²]` under the sampling distribution. The default is a
    /// Monte Carlo estimate from `n_samples` draws.
    fn expected_sq_violation(
        &self,
        x: &[f64],
        joint: &[f64],
        rng: &mut dyn RngCore,
        n_samples: usize,
    ) -> f64 {
        let n = n_samples.max(1);
        let mut acc = 0.0;
        for _ in 0..n {
            let h = self.sample(rng);
            let v = positive_part(self.value(&h, x, joint));
            acc += v * v;
        }
        acc / n as f64
    }

    /// A point of `S_j` (given the other agents' blocks in `joint`), used as
    /// the witness in feasibility audits.
    fn feasible_witness(&self, _joint: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `max_a g_a⁺(x)` over a finite index set.
    fn max_violation(&self, _x: &[f64], _joint: &[f64]) -> Option<f64> {
        None
    }
}

pub(crate) fn unit_fallback(dim: usize) -> Vec<f64> {
    let mut d = vec![0.0; dim];
    if let Some(first) = d.first_mut() {
        *first = 1.0;
    }
    d
}

/// Uniform index in `0..n` drawn from a type-erased generator.
pub(crate) fn uniform_index(rng: &mut dyn RngCore, n: usize) -> usize {
    rng.random_range(0..n)
}
