//! The modified Projection, Korpelevich and Popov methods.
//!
//! Each outer iteration takes a forward step on `F` followed by a projection
//! onto the simple sets `Y_j`, then hands every agent with functional
//! constraints to the random feasibility loop. Agents are processed in
//! order and see the latest blocks of the agents before them.

mod schedule;

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use schedule::{popov_nu, popov_tau, BatchSchedule, Method, StepSchedule};

use crate::audit::{self, IterationRecord};
use crate::error::{Error, Result};
use crate::feasibility::{feasibility_residual_check, random_feasibility_steps, FeasibilityConfig};
use crate::model::{BlockLayout, JointDecision};
use crate::problems::ProblemInstance;

/// RNG stream for the starting point; feasibility sampling uses its own.
pub const INITIAL_POINT_STREAM: u64 = 0;
pub const SAMPLING_STREAM: u64 = 1;

#[derive(Clone, Debug)]
pub struct MethodState {
    pub k: usize,
    /// Post-feasibility iterate `x_k`.
    pub x: JointDecision,
    /// Auxiliary point `u_k` (Korpelevich, Popov).
    pub u: Option<JointDecision>,
    /// Pre-feasibility iterate `v_k`.
    pub v: JointDecision,
    /// `F(u_k)` cached for Popov.
    f_u: Option<Vec<f64>>,
    pub f_evals: u64,
}

impl MethodState {
    pub fn new(x0: JointDecision) -> Self {
        Self {
            k: 0,
            v: x0.clone(),
            u: None,
            x: x0,
            f_u: None,
            f_evals: 0,
        }
    }
}

/// What one iteration did, beyond the state update.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationInfo {
    pub alpha: f64,
    /// `N_{k,j}`; zero for agents without functional constraints.
    pub n_batch: Vec<usize>,
    /// Minimum feasibility residual over agents with a feasible witness.
    pub feas_residual: Option<f64>,
}

fn forward_project(
    problem: &ProblemInstance,
    base: &[f64],
    alpha: f64,
    direction: &[f64],
) -> JointDecision {
    let mut out: Vec<f64> = base
        .iter()
        .zip(direction)
        .map(|(b, d)| b - alpha * d)
        .collect();
    let layout = &problem.layout;
    for (j, set) in problem.sets.iter().enumerate() {
        set.project_in_place(&mut out[layout.range(j)]);
    }
    JointDecision::new(layout.clone(), out).expect("layout matches")
}

fn eval(problem: &ProblemInstance, x: &[f64], counter: &mut u64) -> Vec<f64> {
    *counter += 1;
    problem.mapping.eval(x)
}

/// Runs the feasibility loop for every constrained agent, starting from
/// `state.v`, and stores the result in `state.x`.
fn feasibility_phase(
    state: &mut MethodState,
    problem: &ProblemInstance,
    batch: &BatchSchedule,
    beta: f64,
    rng: &mut dyn RngCore,
) -> Result<(Vec<usize>, Option<f64>)> {
    let layout = problem.layout.clone();
    let mut joint = state.v.values().to_vec();
    let mut n_batch = Vec::with_capacity(layout.num_blocks());
    let mut residual: Option<f64> = None;
    for j in 0..layout.num_blocks() {
        let Some(family) = problem.family(j) else {
            n_batch.push(0);
            continue;
        };
        let n = batch.size(state.k);
        let cfg = FeasibilityConfig::new(beta, n)?;
        let range = layout.range(j);
        let vj = joint[range.clone()].to_vec();
        let out = random_feasibility_steps(&vj, family, &problem.sets[j], &cfg, &joint, rng)?;
        if let Some(witness) = family.feasible_witness(&joint) {
            let r = feasibility_residual_check(&vj, &out.x, &witness, &out.audit, beta, family.mg_bound());
            residual = Some(residual.map_or(r, |m| m.min(r)));
        }
        joint[range].copy_from_slice(&out.x);
        n_batch.push(n);
    }
    state.x = JointDecision::new(layout, joint)?;
    Ok((n_batch, residual))
}

fn check_state(state: &MethodState, problem: &ProblemInstance) -> Result<()> {
    if state.x.layout().as_ref() != problem.layout.as_ref() {
        return Err(Error::DimensionMismatch {
            what: "method state layout",
            expected: problem.layout.total(),
            got: state.x.values().len(),
        });
    }
    Ok(())
}

fn check_method(step: &StepSchedule, expected: Method) -> Result<()> {
    if step.method() != expected {
        return Err(Error::invalid(
            "step",
            format!("{} schedule passed to the {expected} method", step.method()),
        ));
    }
    Ok(())
}

/// `v_k = Π_Y[x_{k−1} − α_{k−1} F(x_{k−1})]`, then feasibility steps.
pub fn projection_iteration(
    state: &mut MethodState,
    problem: &ProblemInstance,
    step: &StepSchedule,
    batch: &BatchSchedule,
    beta: f64,
    rng: &mut dyn RngCore,
) -> Result<IterationInfo> {
    check_method(step, Method::Projection)?;
    check_state(state, problem)?;
    let alpha = step.alpha(state.k);
    let fx = eval(problem, state.x.values(), &mut state.f_evals);
    state.v = forward_project(problem, state.x.values(), alpha, &fx);
    state.k += 1;
    let (n_batch, feas_residual) = feasibility_phase(state, problem, batch, beta, rng)?;
    Ok(IterationInfo {
        alpha,
        n_batch,
        feas_residual,
    })
}

/// `u_k = Π_Y[x_{k−1} − α F(x_{k−1})]`, `v_k = Π_Y[x_{k−1} − α F(u_k)]`,
/// then feasibility steps.
pub fn korpelevich_iteration(
    state: &mut MethodState,
    problem: &ProblemInstance,
    step: &StepSchedule,
    batch: &BatchSchedule,
    beta: f64,
    rng: &mut dyn RngCore,
) -> Result<IterationInfo> {
    check_method(step, Method::Korpelevich)?;
    check_state(state, problem)?;
    let alpha = step.alpha(state.k);
    let fx = eval(problem, state.x.values(), &mut state.f_evals);
    let u = forward_project(problem, state.x.values(), alpha, &fx);
    let fu = eval(problem, u.values(), &mut state.f_evals);
    state.v = forward_project(problem, state.x.values(), alpha, &fu);
    state.u = Some(u);
    state.k += 1;
    let (n_batch, feas_residual) = feasibility_phase(state, problem, batch, beta, rng)?;
    Ok(IterationInfo {
        alpha,
        n_batch,
        feas_residual,
    })
}

/// `u_k = Π_Y[x_{k−1} − α F(u_{k−1})]`, `v_k = Π_Y[x_{k−1} − α F(u_k)]`,
/// then feasibility steps. `u_0 = x_0`.
pub fn popov_iteration(
    state: &mut MethodState,
    problem: &ProblemInstance,
    step: &StepSchedule,
    batch: &BatchSchedule,
    beta: f64,
    rng: &mut dyn RngCore,
) -> Result<IterationInfo> {
    check_method(step, Method::Popov)?;
    check_state(state, problem)?;
    let alpha = step.alpha(state.k);
    let f_prev = match state.f_u.take() {
        Some(f) => f,
        None => {
            let u0 = state.u.get_or_insert_with(|| state.x.clone());
            let u0 = u0.values().to_vec();
            eval(problem, &u0, &mut state.f_evals)
        }
    };
    let u = forward_project(problem, state.x.values(), alpha, &f_prev);
    let fu = eval(problem, u.values(), &mut state.f_evals);
    state.v = forward_project(problem, state.x.values(), alpha, &fu);
    state.u = Some(u);
    state.f_u = Some(fu);
    state.k += 1;
    let (n_batch, feas_residual) = feasibility_phase(state, problem, batch, beta, rng)?;
    Ok(IterationInfo {
        alpha,
        n_batch,
        feas_residual,
    })
}

pub fn iterate(
    state: &mut MethodState,
    problem: &ProblemInstance,
    step: &StepSchedule,
    batch: &BatchSchedule,
    beta: f64,
    rng: &mut dyn RngCore,
) -> Result<IterationInfo> {
    match step.method() {
        Method::Projection => projection_iteration(state, problem, step, batch, beta, rng),
        Method::Korpelevich => korpelevich_iteration(state, problem, step, batch, beta, rng),
        Method::Popov => popov_iteration(state, problem, step, batch, beta, rng),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Record every `record_every`-th iteration; `k = 0` and `k = T` are
    /// always recorded.
    pub record_every: usize,
    /// Start here instead of drawing `x₀` from the problem's distribution.
    pub initial: Option<Vec<f64>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            initial: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub method: Method,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub final_x: JointDecision,
    /// Minimum feasibility residual over every iteration, recorded or not.
    pub min_feas_residual: Option<f64>,
    /// Whether every step size respected its rate theorem's rule.
    pub steps_within_theorem: bool,
    pub f_evals: u64,
    pub iterations: usize,
}

impl RunTrace {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace has the initial record")
    }
}

fn record(
    problem: &ProblemInstance,
    state: &MethodState,
    info: Option<&IterationInfo>,
) -> Result<IterationRecord> {
    let solution = problem.solution.as_ref();
    let sq_dist_solution = solution
        .map(|s| audit::sq_dist_to_solution(&state.x, s))
        .transpose()?;
    let agent_sq_dist_set = audit::agent_sq_dist_to_set(&state.x, problem);
    let dist_set = audit::dist_from_agent_sq(&agent_sq_dist_set);
    let max_violation = if dist_set.is_none() {
        audit::max_violation(&state.x, problem)
    } else {
        None
    };
    let layout: &Arc<BlockLayout> = &problem.layout;
    let agent_v_sq_dist_solution = (0..layout.num_blocks())
        .map(|j| {
            solution.map(|s| crate::linalg::dist_sq(state.v.block(j), s.block(j)))
        })
        .collect();
    Ok(IterationRecord {
        k: state.k,
        alpha: info.map(|i| i.alpha),
        n_batch: info.map_or_else(|| vec![0; layout.num_blocks()], |i| i.n_batch.clone()),
        sq_dist_solution,
        dist_set,
        max_violation,
        feas_residual: info.and_then(|i| i.feas_residual),
        f_evals: state.f_evals,
        agent_v_sq_dist_solution,
        agent_sq_dist_set,
    })
}

/// Seeds the two RNG streams of a trial.
pub fn trial_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    init.set_stream(INITIAL_POINT_STREAM);
    let mut sampling = ChaCha8Rng::seed_from_u64(seed);
    sampling.set_stream(SAMPLING_STREAM);
    (init, sampling)
}

/// Runs `iterations` outer iterations of `step.method()` from a seeded
/// starting point and records the metrics.
pub fn run(
    problem: &ProblemInstance,
    step: &StepSchedule,
    batch: &BatchSchedule,
    beta: f64,
    iterations: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<RunTrace> {
    FeasibilityConfig::new(beta, 1)?;
    if options.record_every == 0 {
        return Err(Error::invalid("record_every", "must be at least 1"));
    }
    let (mut init_rng, mut rng) = trial_rngs(seed);
    let x0 = match &options.initial {
        Some(v) => JointDecision::new(problem.layout.clone(), v.clone())?,
        None => problem.initial_point(&mut init_rng)?,
    };
    let mut state = MethodState::new(x0);
    let mut records = vec![record(problem, &state, None)?];
    let mut min_feas_residual: Option<f64> = None;
    let mut steps_within_theorem = true;
    for _ in 0..iterations {
        let k_prev = state.k;
        let info = iterate(&mut state, problem, step, batch, beta, &mut rng)?;
        steps_within_theorem &= step.within_theorem(k_prev, info.alpha);
        if let Some(r) = info.feas_residual {
            min_feas_residual = Some(min_feas_residual.map_or(r, |m| m.min(r)));
        }
        if state.k.is_multiple_of(options.record_every) || state.k == iterations {
            records.push(record(problem, &state, Some(&info))?);
        }
    }
    Ok(RunTrace {
        method: step.method(),
        seed,
        records,
        final_x: state.x,
        min_feas_residual,
        steps_within_theorem,
        f_evals: state.f_evals,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GameMapping, SimpleSet};
    use crate::problems::InitialDistribution;
    use nalgebra::DMatrix;

    /// `Y = [0, ∞)`, `F(x) = x − 1`.
    fn one_dim() -> ProblemInstance {
        let mapping =
            GameMapping::affine(DMatrix::from_element(1, 1, 1.0), vec![-1.0], 1.0, 1.0).unwrap();
        let set = SimpleSet::boxed(vec![0.0], vec![f64::INFINITY]).unwrap();
        ProblemInstance::new(
            "one-dim",
            Arc::new(BlockLayout::new(vec![1]).unwrap()),
            mapping,
            vec![set],
            vec![None],
            Some(vec![1.0]),
            InitialDistribution::Uniform { lo: 0.0, hi: 1.0 },
        )
        .unwrap()
    }

    fn one_step(step: StepSchedule) -> MethodState {
        let p = one_dim();
        let mut s = MethodState::new(JointDecision::new(p.layout.clone(), vec![0.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        iterate(&mut s, &p, &step, &BatchSchedule::Constant(1), 1.0, &mut rng).unwrap();
        s
    }

    #[test]
    fn one_dimensional_hand_values() {
        let sched = |m| StepSchedule::new(m, 1.0, 1.0).unwrap();
        let s = one_step(sched(Method::Projection));
        assert_eq!(s.v.values(), &[0.5]);
        assert_eq!(s.x.values(), &[0.5]);

        // With α₀ = 0.5: u₁ = 0.5, v₁ = 0 − 0.5·(0.5 − 1) = 0.25.
        let s = one_step(sched(Method::Korpelevich).with_cap_override(0.5).unwrap());
        assert_eq!(s.u.as_ref().unwrap().values(), &[0.5]);
        assert_eq!(s.v.values(), &[0.25]);
        // The rule's own α₀ = 1/8: u₁ = 1/8, v₁ = (1/8)(7/8).
        let s = one_step(sched(Method::Korpelevich));
        assert_eq!(s.u.as_ref().unwrap().values(), &[0.125]);
        assert_eq!(s.v.values(), &[0.125 * 0.875]);

        let a0 = sched(Method::Popov).alpha(0);
        let s = one_step(sched(Method::Popov));
        assert_eq!(s.u.as_ref().unwrap().values(), &[a0]);
        assert_eq!(s.v.values(), &[(0.0 - a0 * (a0 - 1.0)).max(0.0)]);
    }

    #[test]
    fn affine_error_halves() {
        let mapping =
            GameMapping::affine(DMatrix::identity(2, 2), vec![-1.0, 2.0], 1.0, 1.0).unwrap();
        let p = ProblemInstance::new(
            "identity",
            Arc::new(BlockLayout::new(vec![2]).unwrap()),
            mapping,
            vec![SimpleSet::full_space(2)],
            vec![None],
            Some(vec![1.0, -2.0]),
            InitialDistribution::StandardNormal,
        )
        .unwrap();
        let step = StepSchedule::new(Method::Projection, 1.0, 1.0).unwrap();
        let mut s = MethodState::new(JointDecision::new(p.layout.clone(), vec![5.0, 0.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        iterate(&mut s, &p, &step, &BatchSchedule::Constant(1), 1.0, &mut rng).unwrap();
        assert_eq!(s.x.values(), &[3.0, -1.0]);
    }

    #[test]
    fn evaluation_counts() {
        let p = one_dim();
        for (method, per_iter, extra) in [
            (Method::Projection, 1, 0),
            (Method::Korpelevich, 2, 0),
            (Method::Popov, 1, 1),
        ] {
            let step = StepSchedule::new(method, 1.0, 1.0).unwrap();
            let t = run(&p, &step, &BatchSchedule::Constant(1), 1.0, 50, 3, &RunOptions::default())
                .unwrap();
            assert_eq!(t.f_evals, 50 * per_iter + extra, "{method}");
            let t0 = run(&p, &step, &BatchSchedule::Constant(1), 1.0, 0, 3, &RunOptions::default())
                .unwrap();
            assert_eq!(t0.records.len(), 1);
            assert_eq!(t0.f_evals, 0);
        }
    }

    #[test]
    fn schedule_method_mismatch_rejected() {
        let p = one_dim();
        let step = StepSchedule::new(Method::Popov, 1.0, 1.0).unwrap();
        let mut s = MethodState::new(JointDecision::new(p.layout.clone(), vec![0.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = BatchSchedule::Constant(1);
        assert!(projection_iteration(&mut s, &p, &step, &b, 1.0, &mut rng).is_err());
    }

    #[test]
    fn record_stride_keeps_endpoints() {
        let p = one_dim();
        let step = StepSchedule::new(Method::Projection, 1.0, 1.0).unwrap();
        let opts = RunOptions {
            record_every: 10,
            initial: None,
        };
        let t = run(&p, &step, &BatchSchedule::Constant(1), 1.0, 25, 0, &opts).unwrap();
        let ks: Vec<usize> = t.records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 10, 20, 25]);
    }
}
