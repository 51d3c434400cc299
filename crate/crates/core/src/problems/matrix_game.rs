use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::calibrate::calibrate_c;
use super::families::{QuadraticConstraint, QuadraticFamily};
use super::spd::sample_with_spectrum;
use super::{InitialDistribution, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BlockLayout, ConstraintFamily, GameMapping, SimpleSet};

/// Parameters of the two-player quadratic game with quadratic constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameParams {
    pub n_per_agent: usize,
    pub mu_target: f64,
    pub l_target: f64,
    pub n_constraints: usize,
    pub box_half_width: f64,
    pub delta_range: (f64, f64),
    pub chi_range: (f64, f64),
    pub q_eig_range: (f64, f64),
    /// Points sampled when estimating the regularity constant.
    pub calibration_points: usize,
    /// Half-width of the box around `x*` used for that estimate.
    pub calibration_radius: f64,
    pub seed: u64,
}

impl MatrixGameParams {
    /// 100 variables per agent and 10⁴ constraints each.
    pub fn full_scale(mu: f64, lipschitz: f64, seed: u64) -> Self {
        Self {
            n_per_agent: 100,
            mu_target: mu,
            l_target: lipschitz,
            n_constraints: 10_000,
            box_half_width: 10_000.0,
            delta_range: (1.0, 2.0),
            chi_range: (1.0, 2.0),
            q_eig_range: (0.0, 2.0),
            calibration_points: 16,
            calibration_radius: 3.0,
            seed,
        }
    }

    /// 20 variables per agent and 10³ constraints each.
    pub fn desk_scale(mu: f64, lipschitz: f64, seed: u64) -> Self {
        Self {
            n_per_agent: 20,
            n_constraints: 1_000,
            calibration_points: 32,
            ..Self::full_scale(mu, lipschitz, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_agent == 0 {
            return Err(Error::invalid("n_per_agent", "must be positive"));
        }
        if self.n_constraints == 0 {
            return Err(Error::invalid("n_constraints", "must be positive"));
        }
        if !(self.mu_target > 0.0 && self.mu_target <= self.l_target) {
            return Err(Error::invalid(
                "mu_target",
                format!("need 0 < mu ≤ L, got mu={} L={}", self.mu_target, self.l_target),
            ));
        }
        if !(self.box_half_width > 0.0) {
            return Err(Error::invalid("box_half_width", "must be positive"));
        }
        for (name, (lo, hi)) in [
            ("delta_range", self.delta_range),
            ("chi_range", self.chi_range),
        ] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::invalid(name, format!("[{lo}, {hi}] is not a positive interval")));
            }
        }
        let (lo, hi) = self.q_eig_range;
        if !(lo >= 0.0 && lo <= hi) {
            return Err(Error::invalid("q_eig_range", format!("[{lo}, {hi}] is not a PSD range")));
        }
        if !(self.calibration_radius > 0.0) {
            return Err(Error::invalid("calibration_radius", "must be positive"));
        }
        Ok(())
    }
}

/// The quadratic constraints of one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGameAgent {
    pub constraints: Vec<QuadraticConstraint>,
    /// `δ_i` (agent 1) or `χ_i` (agent 2): `g_i(x*) = −slack_i`.
    pub slack: Vec<f64>,
    /// Largest sampled eigenvalue of each `Q_i`.
    pub curvature: Vec<f64>,
    pub mg: f64,
    pub regularity_c: f64,
}

impl MatrixGameAgent {
    /// `sup ‖2Q_i x + b_i‖` over a set with `sup ‖x‖ = radius`.
    pub fn mg_for_radius(&self, radius: f64) -> f64 {
        self.constraints
            .iter()
            .zip(&self.curvature)
            .map(|(c, lam)| 2.0 * lam * radius + linalg::norm(&c.b))
            .fold(0.0, f64::max)
    }
}

/// A generated matrix game with its certified constants.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGame {
    pub params: MatrixGameParams,
    /// `∇F`, symmetric with spectrum in `[mu, lipschitz]`.
    pub jacobian: DMatrix<f64>,
    /// `[p; s]`.
    pub offset: Vec<f64>,
    pub solution: Vec<f64>,
    /// Realized extreme eigenvalues of `∇F`.
    pub mu: f64,
    pub lipschitz: f64,
    pub agents: Vec<MatrixGameAgent>,
}

/// Outcome of [`MatrixGame::certify`].
#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub eigen_range: (f64, f64),
    pub eigen_range_ok: bool,
    /// `‖F(x*)‖ / ‖[p; s]‖`.
    pub solution_residual: f64,
    pub solution_ok: bool,
    /// `max_i g_i(x*)` over both agents.
    pub max_constraint_at_solution: f64,
    pub interior_ok: bool,
    pub min_constraint_eigenvalue: f64,
    pub psd_ok: bool,
    pub solution_in_box: bool,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.eigen_range_ok && self.solution_ok && self.interior_ok && self.psd_ok && self.solution_in_box
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn uniform_in(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Generates the game. All randomness comes from `params.seed`.
pub fn build_matrix_game(params: &MatrixGameParams) -> Result<MatrixGame> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let d = params.n_per_agent;
    let n = 2 * d;

    let jac = sample_with_spectrum(n, params.mu_target, params.l_target, &mut rng)?.matrix;
    let eig = nalgebra::SymmetricEigen::new(jac.clone()).eigenvalues;
    let mu = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let lipschitz = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(mu > 0.0) {
        return Err(Error::Numerical(format!("generated Jacobian is singular (λ_min = {mu:e})")));
    }

    let ps = standard_normal_vec(&mut rng, n);
    let chol = jac
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Jacobian is not positive definite".into()))?;
    let solution: Vec<f64> = chol
        .solve(&nalgebra::DVector::from_vec(ps))
        .iter()
        .map(|v| -v)
        .collect();
    // Recompute the offset through the same product the mapping uses, so
    // F(x*) = ∇F·x* + [p; s] is exactly zero in floating point.
    let offset: Vec<f64> = linalg::mat_vec(&jac, &solution).iter().map(|v| -v).collect();

    if solution.iter().any(|v| v.abs() > params.box_half_width) {
        return Err(Error::Numerical(
            "solution lies outside the box; increase box_half_width".into(),
        ));
    }

    let box_radius = SimpleSet::uniform_box(d, -params.box_half_width, params.box_half_width)?.max_norm();
    let mut agents = Vec::with_capacity(2);
    for (a, slack_range) in [params.delta_range, params.chi_range].into_iter().enumerate() {
        let xa = &solution[a * d..(a + 1) * d];
        let mut constraints = Vec::with_capacity(params.n_constraints);
        let mut slack = Vec::with_capacity(params.n_constraints);
        let mut curvature = Vec::with_capacity(params.n_constraints);
        for _ in 0..params.n_constraints {
            let sample = sample_with_spectrum(d, params.q_eig_range.0, params.q_eig_range.1, &mut rng)?;
            let b = standard_normal_vec(&mut rng, d);
            let delta = uniform_in(&mut rng, slack_range);
            let qx = linalg::mat_vec(&sample.matrix, xa);
            let c = linalg::dot(xa, &qx) + linalg::dot(&b, xa) + delta;
            curvature.push(sample.eigenvalues.iter().cloned().fold(0.0, f64::max));
            constraints.push(QuadraticConstraint::new(sample.matrix, b, c));
            slack.push(delta);
        }
        let mut agent = MatrixGameAgent {
            constraints,
            slack,
            curvature,
            mg: 0.0,
            regularity_c: 1.0,
        };
        agent.mg = agent.mg_for_radius(box_radius);
        agents.push(agent);
    }

    let mut game = MatrixGame {
        params: params.clone(),
        jacobian: jac,
        offset,
        solution,
        mu,
        lipschitz,
        agents,
    };
    for a in 0..2 {
        let region = game.calibration_region(a)?;
        let family = game.family(a)?;
        let cal = calibrate_c(&family, &region, &game.solution, params.calibration_points, &mut rng)?;
        game.agents[a].regularity_c = cal.c;
    }
    Ok(game)
}

impl MatrixGame {
    pub fn dim_per_agent(&self) -> usize {
        self.params.n_per_agent
    }

    pub fn agent_solution(&self, a: usize) -> &[f64] {
        let d = self.dim_per_agent();
        &self.solution[a * d..(a + 1) * d]
    }

    pub fn simple_set(&self) -> Result<SimpleSet> {
        SimpleSet::uniform_box(
            self.dim_per_agent(),
            -self.params.box_half_width,
            self.params.box_half_width,
        )
    }

    /// `Y_j ∩ [x*_j ± calibration_radius]`.
    fn calibration_region(&self, a: usize) -> Result<SimpleSet> {
        let w = self.params.box_half_width;
        let r = self.params.calibration_radius;
        let xa = self.agent_solution(a);
        SimpleSet::boxed(
            xa.iter().map(|v| (v - r).max(-w)).collect(),
            xa.iter().map(|v| (v + r).min(w)).collect(),
        )
    }

    pub fn family(&self, a: usize) -> Result<QuadraticFamily> {
        let agent = &self.agents[a];
        QuadraticFamily::new(a, agent.constraints.clone(), agent.mg, agent.regularity_c)?
            .with_interior_point(self.agent_solution(a).to_vec())
    }

    pub fn mapping(&self) -> Result<GameMapping> {
        GameMapping::affine(self.jacobian.clone(), self.offset.clone(), self.mu, self.lipschitz)
    }

    /// `M_g` over the box spanned by the given iterates: a tighter,
    /// trajectory-dependent bound reported next to the certified one.
    pub fn trajectory_mg(&self, a: usize, points: &[&[f64]]) -> f64 {
        let radius = points.iter().map(|p| linalg::norm(p)).fold(0.0, f64::max);
        self.agents[a].mg_for_radius(radius)
    }

    pub fn instance(&self) -> Result<ProblemInstance> {
        let d = self.dim_per_agent();
        let layout = Arc::new(BlockLayout::new(vec![d, d])?);
        let set = self.simple_set()?;
        let families: Vec<Option<Arc<dyn ConstraintFamily>>> = vec![
            Some(Arc::new(self.family(0)?)),
            Some(Arc::new(self.family(1)?)),
        ];
        ProblemInstance::new(
            format!("matrix-game(mu={}, L={}, seed={})", self.params.mu_target, self.params.l_target, self.params.seed),
            layout,
            self.mapping()?,
            vec![set.clone(), set],
            families,
            Some(self.solution.clone()),
            InitialDistribution::StandardNormal,
        )
    }

    pub fn certify(&self) -> Certification {
        const EIG_TOL: f64 = 1e-8;
        let eig = nalgebra::SymmetricEigen::new(self.jacobian.clone()).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let eigen_range_ok = lo >= self.params.mu_target - EIG_TOL
            && hi <= self.params.l_target + EIG_TOL
            && (lo - self.mu).abs() <= EIG_TOL
            && (hi - self.lipschitz).abs() <= EIG_TOL;

        let fx = {
            let mut out = linalg::mat_vec(&self.jacobian, &self.solution);
            for (o, r) in out.iter_mut().zip(&self.offset) {
                *o += r;
            }
            out
        };
        let solution_residual = linalg::norm(&fx) / linalg::norm(&self.offset).max(f64::MIN_POSITIVE);

        let mut max_g = f64::NEG_INFINITY;
        let mut min_eig = f64::INFINITY;
        for (a, agent) in self.agents.iter().enumerate() {
            let xa = self.agent_solution(a);
            for con in &agent.constraints {
                max_g = max_g.max(con.value(xa));
                let e = nalgebra::SymmetricEigen::new(con.q.clone()).eigenvalues;
                min_eig = min_eig.min(e.iter().cloned().fold(f64::INFINITY, f64::min));
            }
        }
        Certification {
            eigen_range: (lo, hi),
            eigen_range_ok,
            solution_residual,
            solution_ok: solution_residual <= 1e-9,
            max_constraint_at_solution: max_g,
            interior_ok: max_g <= -self.params.delta_range.0.min(self.params.chi_range.0) + 1e-9,
            min_constraint_eigenvalue: min_eig,
            psd_ok: min_eig >= -1e-8,
            solution_in_box: self
                .solution
                .iter()
                .all(|v| v.abs() < self.params.box_half_width),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> MatrixGameParams {
        MatrixGameParams {
            n_per_agent: 4,
            n_constraints: 30,
            calibration_points: 8,
            ..MatrixGameParams::desk_scale(1.0, 3.0, seed)
        }
    }

    #[test]
    fn generated_game_certifies() {
        let game = build_matrix_game(&tiny(1)).unwrap();
        let cert = game.certify();
        assert!(cert.passed(), "{cert:?}");
        assert!(game.mu >= 1.0 - 1e-8 && game.lipschitz <= 3.0 + 1e-8);
    }

    #[test]
    fn solution_is_exact_zero_of_mapping() {
        let game = build_matrix_game(&tiny(2)).unwrap();
        let f = game.mapping().unwrap().eval(&game.solution);
        assert!(f.iter().all(|v| *v == 0.0), "{f:?}");
    }

    #[test]
    fn constraints_strictly_interior_at_solution() {
        let game = build_matrix_game(&tiny(3)).unwrap();
        for (a, agent) in game.agents.iter().enumerate() {
            for (con, slack) in agent.constraints.iter().zip(&agent.slack) {
                let g = con.value(game.agent_solution(a));
                assert!((g + slack).abs() < 1e-9);
                assert!(g <= -1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn strong_monotonicity_spot_check() {
        let game = build_matrix_game(&tiny(4)).unwrap();
        let m = game.mapping().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..100 {
            let x = standard_normal_vec(&mut rng, 8);
            let y = standard_normal_vec(&mut rng, 8);
            let fx = m.eval(&x);
            let fy = m.eval(&y);
            let df: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lhs = linalg::dot(&df, &dx);
            let rhs = game.mu * linalg::norm_sq(&dx);
            assert!(lhs >= rhs - 1e-8 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn reproducible_from_seed() {
        let a = build_matrix_game(&tiny(5)).unwrap();
        let b = build_matrix_game(&tiny(5)).unwrap();
        assert_eq!(a, b);
        let c = build_matrix_game(&tiny(6)).unwrap();
        assert_ne!(a.jacobian, c.jacobian);
    }

    #[test]
    fn certified_mg_bounds_subgradients_on_box() {
        let game = build_matrix_game(&tiny(7)).unwrap();
        let fam = game.family(0).unwrap();
        let set = game.simple_set().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for _ in 0..200 {
            let x = set.sample_uniform(&mut rng).unwrap();
            let h = fam.sample(&mut rng);
            let g = fam.gradient(&h, &x, &[]);
            assert!(linalg::norm(&g) <= fam.mg_bound());
        }
        let traj = game.trajectory_mg(0, &[game.agent_solution(0)]);
        assert!(traj < fam.mg_bound());
    }

    #[test]
    fn rejects_invalid_params() {
        let mut s = tiny(1);
        s.mu_target = 5.0;
        assert!(build_matrix_game(&s).is_err());
        let mut s = tiny(1);
        s.n_constraints = 0;
        assert!(build_matrix_game(&s).is_err());
    }
}
