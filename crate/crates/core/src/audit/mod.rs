//! Distance oracles, per-trajectory and Monte Carlo inequality audits, and
//! rate fits. Everything here reads traces and never mutates them.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{block_project, GameMapping, JointDecision, SimpleSet};
use crate::problems::ProblemInstance;

/// Tolerance for the per-trajectory feasibility inequality.
pub const FEAS_RESIDUAL_TOL: f64 = 1e-9;

/// One recorded iteration of a run. `k = 0` is the starting point.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Step size used to reach this iterate (`α_{k−1}`); absent at `k = 0`.
    pub alpha: Option<f64>,
    /// `N_{k,j}` per agent; zero for agents projected directly.
    pub n_batch: Vec<usize>,
    /// `‖x_k − x*‖²`, when the solution is known.
    pub sq_dist_solution: Option<f64>,
    /// `dist(x_k, S)`, when every constrained agent has an exact oracle.
    pub dist_set: Option<f64>,
    /// `max_i g_i⁺(x_k)` over all constraints; an infeasibility proxy, not a
    /// distance. Filled only when `dist_set` is absent.
    pub max_violation: Option<f64>,
    /// Minimum over agents of the feasibility residual at this iteration.
    pub feas_residual: Option<f64>,
    /// Cumulative mapping evaluations.
    pub f_evals: u64,
    /// `‖v_{k,j} − x*_j‖²` per agent.
    pub agent_v_sq_dist_solution: Vec<Option<f64>>,
    /// `dist²(x_{k,j}, S_j)` per agent.
    pub agent_sq_dist_set: Vec<Option<f64>>,
}

impl IterationRecord {
    /// The value written to the `dist_set_or_violation` CSV column.
    pub fn dist_set_or_violation(&self) -> Option<f64> {
        self.dist_set.or(self.max_violation)
    }
}

pub fn sq_dist_to_solution(x: &JointDecision, xstar: &JointDecision) -> Result<f64> {
    if !x.same_layout(xstar) {
        return Err(Error::DimensionMismatch {
            what: "solution layout",
            expected: x.values().len(),
            got: xstar.values().len(),
        });
    }
    Ok(linalg::dist_sq(x.values(), xstar.values()))
}

/// `dist²(x_j, S_j)` per agent. Agents without functional constraints have
/// `S_j = Y_j` and contribute zero; others need an exact oracle.
pub fn agent_sq_dist_to_set(x: &JointDecision, problem: &ProblemInstance) -> Vec<Option<f64>> {
    (0..problem.num_agents())
        .map(|j| match problem.family(j) {
            None => Some(0.0),
            Some(f) => f.exact_set_distance(x.block(j), x.values()).map(|d| d * d),
        })
        .collect()
}

pub(crate) fn dist_from_agent_sq(agent_sq: &[Option<f64>]) -> Option<f64> {
    agent_sq
        .iter()
        .try_fold(0.0, |acc, d| d.map(|d| acc + d))
        .map(f64::sqrt)
}

/// `dist(x, S)` from the per-agent oracles; absent when any constrained
/// agent lacks one.
pub fn dist_to_set(x: &JointDecision, problem: &ProblemInstance) -> Option<f64> {
    dist_from_agent_sq(&agent_sq_dist_to_set(x, problem))
}

/// `max_j max_i g_{i}⁺(x_j)`; absent when a family cannot enumerate its
/// constraints.
pub fn max_violation(x: &JointDecision, problem: &ProblemInstance) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..problem.num_agents() {
        if let Some(f) = problem.family(j) {
            worst = worst.max(f.max_violation(x.block(j), x.values())?);
        }
    }
    Some(worst)
}

/// Minimum of the feasibility residuals of a set of runs; `None` when no
/// residual was ever computed.
pub fn min_residual(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    values.into_iter().flatten().reduce(f64::min)
}

pub fn residual_passes(min_residual: Option<f64>) -> bool {
    min_residual.is_none_or(|r| r >= -FEAS_RESIDUAL_TOL)
}

/// Sample mean and its standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Trials below this count make the 3-sigma band unreliable.
pub const GEOMETRIC_MIN_TRIALS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricCheck {
    pub k: usize,
    pub trials: usize,
    /// Mean of `Σ_j dist²(x_{k,j}, S_j)` over trials.
    pub mean_sq_dist: f64,
    /// Mean of `Σ_j (1−q_j)^{N_{k,j}} ‖v_{k,j} − x*_j‖²`.
    pub mean_bound: f64,
    /// Standard error of the paired difference.
    pub stderr: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricReport {
    pub checks: Vec<GeometricCheck>,
    pub too_few_trials: bool,
}

impl GeometricReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &GeometricCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks `E[dist²(x_k, S)] ≤ Σ_j (1−q_j)^{N_{k,j}} ‖v_{k,j} − x*_j‖²` with
/// a 3-sigma band on one iteration's records across independent trials.
///
/// `q[j]` is `None` for agents without functional constraints; they are left
/// out of both sides.
pub fn geometric_decay_check(records: &[&IterationRecord], q: &[Option<f64>]) -> Result<GeometricCheck> {
    let Some(first) = records.first() else {
        return Err(Error::invalid("records", "no trials to audit"));
    };
    let mut diffs = Vec::with_capacity(records.len());
    let mut lhs = Vec::with_capacity(records.len());
    let mut rhs = Vec::with_capacity(records.len());
    for r in records {
        if r.k != first.k {
            return Err(Error::invalid("records", "trials are not aligned on k"));
        }
        let (mut l, mut b) = (0.0, 0.0);
        for (j, qj) in q.iter().enumerate() {
            let Some(qj) = qj else { continue };
            let d = r.agent_sq_dist_set.get(j).copied().flatten();
            let v = r.agent_v_sq_dist_solution.get(j).copied().flatten();
            let (Some(d), Some(v)) = (d, v) else {
                return Err(Error::invalid(
                    "records",
                    "geometric audit needs set distances and the solution",
                ));
            };
            l += d;
            b += (1.0 - qj).powi(r.n_batch[j] as i32) * v;
        }
        lhs.push(l);
        rhs.push(b);
        diffs.push(l - b);
    }
    let (mean_sq_dist, _) = mean_stderr(&lhs);
    let (mean_bound, _) = mean_stderr(&rhs);
    let (_, stderr) = mean_stderr(&diffs);
    Ok(GeometricCheck {
        k: first.k,
        trials: records.len(),
        mean_sq_dist,
        mean_bound,
        stderr,
        passed: mean_sq_dist <= mean_bound + 3.0 * stderr,
    })
}

/// Runs [`geometric_decay_check`] on every recorded iteration `k ≥ 1`
/// shared by all traces. `traces[t]` are the records of trial `t`.
pub fn geometric_decay_audit(traces: &[&[IterationRecord]], q: &[Option<f64>]) -> Result<GeometricReport> {
    let Some(first) = traces.first() else {
        return Err(Error::invalid("traces", "no trials to audit"));
    };
    let mut checks = Vec::new();
    for (i, rec) in first.iter().enumerate() {
        if rec.k == 0 {
            continue;
        }
        let at_k: Vec<&IterationRecord> = traces.iter().filter_map(|t| t.get(i)).collect();
        if at_k.len() != traces.len() {
            return Err(Error::invalid("traces", "trials have different lengths"));
        }
        checks.push(geometric_decay_check(&at_k, q)?);
    }
    Ok(GeometricReport {
        checks,
        too_few_trials: traces.len() < GEOMETRIC_MIN_TRIALS,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// `C` in `err ≈ C·T^{−p}`.
    pub constant: f64,
    /// `p`.
    pub exponent: f64,
    pub points: usize,
}

pub const RATE_FIT_MIN_POINTS: usize = 10;

/// Least-squares fit of `log err = log C − p·log T`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < RATE_FIT_MIN_POINTS {
        return Err(Error::invalid(
            "points",
            format!("{} points, need at least {RATE_FIT_MIN_POINTS}", points.len()),
        ));
    }
    if let Some((t, e)) = points.iter().find(|(t, e)| !(*t > 0.0 && *e > 0.0)) {
        return Err(Error::invalid(
            "points",
            format!("non-positive entry (T = {t}, err = {e})"),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "all T values coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        constant: (my - slope * mx).exp(),
        exponent: -slope,
        points: points.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappingAudit {
    /// Smallest observed strong-monotonicity ratio (or eigenvalue).
    pub observed_mu: f64,
    /// Largest observed Lipschitz ratio (or singular value).
    pub observed_lipschitz: f64,
    pub mu_ok: bool,
    pub lipschitz_ok: bool,
}

impl MappingAudit {
    pub fn passed(&self) -> bool {
        self.mu_ok && self.lipschitz_ok
    }
}

/// Spectral check of an affine mapping: `λ_min((A+Aᵀ)/2) ≥ μ − 1e−8` and
/// `σ_max(A) ≤ L + 1e−8`.
pub fn affine_mapping_audit(mapping: &GameMapping) -> Option<MappingAudit> {
    let (a, _) = mapping.affine_parts()?;
    let (lo, _) = linalg::sym_part_eig_range(a);
    let sigma = linalg::spectral_norm(a);
    Some(MappingAudit {
        observed_mu: lo,
        observed_lipschitz: sigma,
        mu_ok: lo >= mapping.mu() - 1e-8,
        lipschitz_ok: sigma <= mapping.lipschitz() + 1e-8,
    })
}

/// Strong monotonicity and Lipschitz ratios on `pairs` random pairs of `Y`.
/// Points are standard normal draws scaled by `scale`, projected onto `Y`.
pub fn sampled_mapping_audit<R: Rng + ?Sized>(
    mapping: &GameMapping,
    problem: &ProblemInstance,
    pairs: usize,
    scale: f64,
    rel_tol: f64,
    rng: &mut R,
) -> Result<MappingAudit> {
    let n = problem.layout.total();
    let draw = |rng: &mut R| -> Result<JointDecision> {
        let v: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        block_project(&problem.sets, &JointDecision::new(problem.layout.clone(), v)?)
    };
    let mut observed_mu = f64::INFINITY;
    let mut observed_lipschitz: f64 = 0.0;
    for _ in 0..pairs {
        let x = draw(rng)?;
        let y = draw(rng)?;
        let d2 = linalg::dist_sq(x.values(), y.values());
        if d2 == 0.0 {
            continue;
        }
        let fx = mapping.eval(x.values());
        let fy = mapping.eval(y.values());
        let df: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.values().iter().zip(y.values()).map(|(a, b)| a - b).collect();
        observed_mu = observed_mu.min(linalg::dot(&df, &dx) / d2);
        observed_lipschitz = observed_lipschitz.max((linalg::norm_sq(&df) / d2).sqrt());
    }
    Ok(MappingAudit {
        observed_mu,
        observed_lipschitz,
        mu_ok: observed_mu >= mapping.mu() * (1.0 - rel_tol),
        lipschitz_ok: observed_lipschitz <= mapping.lipschitz() * (1.0 + rel_tol),
    })
}

/// `x ∈ Y` blockwise, exactly.
pub fn in_simple_sets(x: &JointDecision, sets: &[SimpleSet]) -> bool {
    sets.iter()
        .enumerate()
        .all(|(j, s)| s.contains(x.block(j), 0.0))
}
