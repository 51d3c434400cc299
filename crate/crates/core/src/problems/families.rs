//! Concrete constraint families.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::constraint::{uniform_index, unit_fallback};
use crate::model::{positive_part, ConstraintFamily, ConstraintHandle};

/// One quadratic constraint `⟨x, Qx⟩ + ⟨b, x⟩ ≤ c` with symmetric `Q ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticConstraint {
    pub q: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl QuadraticConstraint {
    /// `Q` is replaced by its symmetric part, which leaves the quadratic form
    /// unchanged.
    pub fn new(q: DMatrix<f64>, b: Vec<f64>, c: f64) -> Self {
        let q = if q == q.transpose() {
            q
        } else {
            (&q + q.transpose()) * 0.5
        };
        Self { q, b, c }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Returns `(g(x), Qx)`.
    fn value_with_qx(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let qx = linalg::mat_vec(&self.q, x);
        (linalg::dot(x, &qx) + linalg::dot(&self.b, x) - self.c, qx)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        linalg::quad_form(&self.q, x) + linalg::dot(&self.b, x) - self.c
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let qx = linalg::mat_vec(&self.q, x);
        qx.iter().zip(&self.b).map(|(a, b)| 2.0 * a + b).collect()
    }
}

/// Uniformly sampled finite family of quadratic constraints.
#[derive(Clone, Debug)]
pub struct QuadraticFamily {
    agent: usize,
    dim: usize,
    constraints: Vec<QuadraticConstraint>,
    mg: f64,
    regularity_c: f64,
    interior_point: Option<Vec<f64>>,
}

impl QuadraticFamily {
    pub fn new(
        agent: usize,
        constraints: Vec<QuadraticConstraint>,
        mg: f64,
        regularity_c: f64,
    ) -> Result<Self> {
        let dim = constraints
            .first()
            .map(QuadraticConstraint::dim)
            .ok_or_else(|| Error::invalid("constraints", "family is empty"))?;
        for c in &constraints {
            if c.dim() != dim || c.q.nrows() != dim || c.q.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what: "quadratic constraint",
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        if !(mg > 0.0) || !(regularity_c > 0.0) {
            return Err(Error::invalid("mg", "M_g and c must be positive"));
        }
        Ok(Self {
            agent,
            dim,
            constraints,
            mg,
            regularity_c,
            interior_point: None,
        })
    }

    /// One-constraint family, handy for fixtures.
    pub fn single(agent: usize, q: DMatrix<f64>, b: Vec<f64>, c: f64, mg: f64) -> Self {
        Self::new(agent, vec![QuadraticConstraint::new(q, b, c)], mg, 1.0)
            .expect("valid single quadratic constraint")
    }

    /// Registers a point with `g_i < 0` for all `i`. It serves as the audit
    /// witness and anchors the set-distance upper bound.
    pub fn with_interior_point(mut self, point: Vec<f64>) -> Result<Self> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "interior point",
                expected: self.dim,
                got: point.len(),
            });
        }
        if let Some((i, g)) = self
            .constraints
            .iter()
            .map(|c| c.value(&point))
            .enumerate()
            .find(|(_, g)| !(*g < 0.0))
        {
            return Err(Error::invalid(
                "interior_point",
                format!("constraint {i} has value {g} ≥ 0"),
            ));
        }
        self.interior_point = Some(point);
        Ok(self)
    }

    pub fn with_regularity_c(mut self, c: f64) -> Self {
        self.regularity_c = c;
        self
    }

    pub fn constraints(&self) -> &[QuadraticConstraint] {
        &self.constraints
    }

    fn constraint(&self, handle: &ConstraintHandle) -> &QuadraticConstraint {
        match handle {
            ConstraintHandle::Index(i) => &self.constraints[*i],
            ConstraintHandle::Level(_) => panic!("quadratic family expects index handles"),
        }
    }

    /// Largest `s ∈ [0, 1]` such that `x̂ + s(x − x̂)` satisfies every
    /// constraint, for the registered interior point `x̂`.
    fn feasible_ray_fraction(&self, x: &[f64], interior: &[f64]) -> f64 {
        let e: Vec<f64> = x.iter().zip(interior).map(|(a, b)| a - b).collect();
        let mut s_max: f64 = 1.0;
        for con in &self.constraints {
            let qe = linalg::mat_vec(&con.q, &e);
            let a = linalg::dot(&e, &qe);
            let b = 2.0 * linalg::dot(interior, &qe) + linalg::dot(&con.b, &e);
            let c0 = con.value(interior);
            // g(s) = a s² + b s + c0 with c0 < 0, a ≥ 0: one positive root.
            let root = if a > 0.0 {
                let disc = (b * b - 4.0 * a * c0).max(0.0).sqrt();
                // Stable form of (−b + √disc)/(2a).
                if b >= 0.0 {
                    -2.0 * c0 / (b + disc)
                } else {
                    (-b + disc) / (2.0 * a)
                }
            } else if b > 0.0 {
                -c0 / b
            } else {
                f64::INFINITY
            };
            s_max = s_max.min(root);
        }
        s_max.clamp(0.0, 1.0)
    }
}

impl ConstraintFamily for QuadraticFamily {
    fn agent(&self) -> usize {
        self.agent
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ConstraintHandle {
        ConstraintHandle::Index(uniform_index(rng, self.constraints.len()))
    }

    fn value(&self, handle: &ConstraintHandle, x: &[f64], _joint: &[f64]) -> f64 {
        self.constraint(handle).value(x)
    }

    fn gradient(&self, handle: &ConstraintHandle, x: &[f64], _joint: &[f64]) -> Vec<f64> {
        self.constraint(handle).gradient(x)
    }

    fn violation_and_subgradient(
        &self,
        handle: &ConstraintHandle,
        x: &[f64],
        _joint: &[f64],
    ) -> (f64, Vec<f64>) {
        let con = self.constraint(handle);
        let (g, qx) = con.value_with_qx(x);
        let violation = positive_part(g);
        if violation > 0.0 {
            let d = qx.iter().zip(&con.b).map(|(a, b)| 2.0 * a + b).collect();
            (violation, d)
        } else {
            (0.0, unit_fallback(self.dim))
        }
    }

    fn mg_bound(&self) -> f64 {
        self.mg
    }

    fn regularity_c(&self) -> f64 {
        self.regularity_c
    }

    fn set_distance_upper_bound(&self, x: &[f64], _joint: &[f64]) -> Option<f64> {
        let interior = self.interior_point.as_ref()?;
        let s = self.feasible_ray_fraction(x, interior);
        Some((1.0 - s) * linalg::dist_sq(x, interior).sqrt())
    }

    /// Exact average over the finite index set.
    fn expected_sq_violation(
        &self,
        x: &[f64],
        _joint: &[f64],
        _rng: &mut dyn RngCore,
        _n_samples: usize,
    ) -> f64 {
        let total: f64 = self
            .constraints
            .iter()
            .map(|c| {
                let v = positive_part(c.value(x));
                v * v
            })
            .sum();
        total / self.constraints.len() as f64
    }

    fn feasible_witness(&self, _joint: &[f64]) -> Option<Vec<f64>> {
        self.interior_point.clone()
    }

    fn max_violation(&self, x: &[f64], _joint: &[f64]) -> Option<f64> {
        Some(
            self.constraints
                .iter()
                .map(|c| positive_part(c.value(x)))
                .fold(0.0, f64::max),
        )
    }
}

/// How the level `ξ` of a proximity constraint is drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProximityLevel {
    /// `ξ ~ U[0, max]`.
    Uniform { max: f64 },
    /// `ξ` fixed, for deterministic fixtures.
    Fixed(f64),
}

/// `‖x_j − x_anchor‖² ≤ ξ`: agent `j` must stay close to the anchor agent's
/// latest block, which starts at `anchor_offset` in the joint vector.
#[derive(Clone, Debug)]
pub struct ProximityFamily {
    agent: usize,
    anchor_offset: usize,
    dim: usize,
    level: ProximityLevel,
    mg: f64,
    regularity_c: f64,
}

impl ProximityFamily {
    pub fn uniform(agent: usize, anchor_offset: usize, dim: usize, xi_max: f64, mg: f64) -> Result<Self> {
        if !(xi_max > 0.0) || !xi_max.is_finite() {
            return Err(Error::invalid("xi_max", format!("{xi_max} is not positive")));
        }
        Ok(Self {
            agent,
            anchor_offset,
            dim,
            level: ProximityLevel::Uniform { max: xi_max },
            mg,
            regularity_c: 1.0,
        })
    }

    /// Two-dimensional family with a fixed level.
    pub fn fixed_level(agent: usize, anchor_offset: usize, xi: f64, mg: f64) -> Self {
        Self {
            agent,
            anchor_offset,
            dim: 2,
            level: ProximityLevel::Fixed(xi),
            mg,
            regularity_c: 1.0,
        }
    }

    pub fn with_regularity_c(mut self, c: f64) -> Self {
        self.regularity_c = c;
        self
    }

    pub fn level(&self) -> ProximityLevel {
        self.level
    }

    fn anchor_block<'a>(&self, joint: &'a [f64]) -> &'a [f64] {
        &joint[self.anchor_offset..self.anchor_offset + self.dim]
    }

    fn xi(handle: &ConstraintHandle) -> f64 {
        match handle {
            ConstraintHandle::Level(xi) => *xi,
            ConstraintHandle::Index(_) => panic!("proximity family expects level handles"),
        }
    }
}

impl ConstraintFamily for ProximityFamily {
    fn agent(&self) -> usize {
        self.agent
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ConstraintHandle {
        match self.level {
            ProximityLevel::Uniform { max } => ConstraintHandle::Level(rng.random_range(0.0..max)),
            ProximityLevel::Fixed(xi) => ConstraintHandle::Level(xi),
        }
    }

    fn value(&self, handle: &ConstraintHandle, x: &[f64], joint: &[f64]) -> f64 {
        linalg::dist_sq(x, self.anchor_block(joint)) - Self::xi(handle)
    }

    fn gradient(&self, _handle: &ConstraintHandle, x: &[f64], joint: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.anchor_block(joint))
            .map(|(a, b)| 2.0 * (a - b))
            .collect()
    }

    fn mg_bound(&self) -> f64 {
        self.mg
    }

    fn regularity_c(&self) -> f64 {
        self.regularity_c
    }

    /// The intersection over all levels is the anchor point itself (or the
    /// ball of radius `√ξ` for a fixed level).
    fn exact_set_distance(&self, x: &[f64], joint: &[f64]) -> Option<f64> {
        let r = linalg::dist_sq(x, self.anchor_block(joint)).sqrt();
        Some(match self.level {
            ProximityLevel::Uniform { .. } => r,
            ProximityLevel::Fixed(xi) => (r - xi.max(0.0).sqrt()).max(0.0),
        })
    }

    /// Closed form of `E[(r² − ξ)⁺²]`.
    fn expected_sq_violation(
        &self,
        x: &[f64],
        joint: &[f64],
        _rng: &mut dyn RngCore,
        _n_samples: usize,
    ) -> f64 {
        let r2 = linalg::dist_sq(x, self.anchor_block(joint));
        match self.level {
            ProximityLevel::Uniform { max } => {
                let m = max.min(r2);
                (r2.powi(3) - (r2 - m).powi(3)) / (3.0 * max)
            }
            ProximityLevel::Fixed(xi) => positive_part(r2 - xi).powi(2),
        }
    }

    fn feasible_witness(&self, joint: &[f64]) -> Option<Vec<f64>> {
        Some(self.anchor_block(joint).to_vec())
    }
}

/// Uniformly sampled finite family of halfspaces `⟨a, x⟩ ≤ b`.
#[derive(Clone, Debug)]
pub struct HalfspaceFamily {
    agent: usize,
    dim: usize,
    halfspaces: Vec<(Vec<f64>, f64)>,
    mg: f64,
    regularity_c: f64,
}

impl HalfspaceFamily {
    pub fn new(
        agent: usize,
        halfspaces: Vec<(Vec<f64>, f64)>,
        mg: f64,
        regularity_c: f64,
    ) -> Result<Self> {
        let dim = halfspaces
            .first()
            .map(|(a, _)| a.len())
            .ok_or_else(|| Error::invalid("halfspaces", "family is empty"))?;
        if let Some((a, _)) = halfspaces.iter().find(|(a, _)| a.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "halfspace normal",
                expected: dim,
                got: a.len(),
            });
        }
        Ok(Self {
            agent,
            dim,
            halfspaces,
            mg,
            regularity_c,
        })
    }

    fn halfspace(&self, handle: &ConstraintHandle) -> &(Vec<f64>, f64) {
        match handle {
            ConstraintHandle::Index(i) => &self.halfspaces[*i],
            ConstraintHandle::Level(_) => panic!("halfspace family expects index handles"),
        }
    }
}

impl ConstraintFamily for HalfspaceFamily {
    fn agent(&self) -> usize {
        self.agent
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ConstraintHandle {
        ConstraintHandle::Index(uniform_index(rng, self.halfspaces.len()))
    }

    fn value(&self, handle: &ConstraintHandle, x: &[f64], _joint: &[f64]) -> f64 {
        let (a, b) = self.halfspace(handle);
        linalg::dot(a, x) - b
    }

    fn gradient(&self, handle: &ConstraintHandle, _x: &[f64], _joint: &[f64]) -> Vec<f64> {
        self.halfspace(handle).0.clone()
    }

    fn mg_bound(&self) -> f64 {
        self.mg
    }

    fn regularity_c(&self) -> f64 {
        self.regularity_c
    }

    /// Exact only for a single halfspace.
    fn exact_set_distance(&self, x: &[f64], _joint: &[f64]) -> Option<f64> {
        match self.halfspaces.as_slice() {
            [(a, b)] => Some(positive_part(linalg::dot(a, x) - b) / linalg::norm(a)),
            _ => None,
        }
    }

    fn expected_sq_violation(
        &self,
        x: &[f64],
        _joint: &[f64],
        _rng: &mut dyn RngCore,
        _n_samples: usize,
    ) -> f64 {
        let total: f64 = self
            .halfspaces
            .iter()
            .map(|(a, b)| positive_part(linalg::dot(a, x) - b).powi(2))
            .sum();
        total / self.halfspaces.len() as f64
    }

    fn max_violation(&self, x: &[f64], _joint: &[f64]) -> Option<f64> {
        Some(
            self.halfspaces
                .iter()
                .map(|(a, b)| positive_part(linalg::dot(a, x) - b))
                .fold(0.0, f64::max),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SimpleSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_family(rng: &mut ChaCha8Rng, n: usize) -> QuadraticFamily {
        let mut cons = Vec::new();
        for _ in 0..n {
            let q = crate::problems::generate_spd_with_spectrum(3, 0.0, 2.0, rng).unwrap();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            cons.push(QuadraticConstraint::new(q, b, rng.random_range(1.0..2.0)));
        }
        QuadraticFamily::new(0, cons, 100.0, 1.0)
            .unwrap()
            .with_interior_point(vec![0.0; 3])
            .unwrap()
    }

    #[test]
    fn quadratic_convexity_and_subgradient_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fam = random_family(&mut rng, 20);
        let set = SimpleSet::uniform_box(3, -4.0, 4.0).unwrap();
        for _ in 0..500 {
            let h = fam.sample(&mut rng);
            let x = set.sample_uniform(&mut rng).unwrap();
            let y = set.sample_uniform(&mut rng).unwrap();
            let t: f64 = rng.random();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let gx = fam.value(&h, &x, &[]);
            let gy = fam.value(&h, &y, &[]);
            assert!(fam.value(&h, &mid, &[]) <= t * gx + (1.0 - t) * gy + 1e-9);
            if gx > 0.0 {
                let d = fam.subgradient(&h, &x, &[]);
                let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                assert!(gy >= gx + linalg::dot(&d, &diff) - 1e-9);
            }
        }
    }

    #[test]
    fn fallback_direction_when_satisfied() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fam = random_family(&mut rng, 3);
        let (v, d) = fam.violation_and_subgradient(&ConstraintHandle::Index(0), &[0.0; 3], &[]);
        assert_eq!(v, 0.0);
        assert_eq!(d, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn ray_bound_dominates_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fam = random_family(&mut rng, 10);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let bound = fam.set_distance_upper_bound(&x, &[]).unwrap();
            let feasible = fam.max_violation(&x, &[]).unwrap() == 0.0;
            if feasible {
                assert_eq!(bound, 0.0);
            } else {
                assert!(bound > 0.0);
                // The boundary point on the ray is feasible up to rounding.
                let interior = [0.0; 3];
                let s = fam.feasible_ray_fraction(&x, &interior);
                let y: Vec<f64> = x.iter().map(|v| s * v).collect();
                assert!(fam.max_violation(&y, &[]).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn interior_point_is_validated() {
        let fam = QuadraticFamily::single(0, DMatrix::identity(2, 2), vec![0.0; 2], 1.0, 4.0);
        assert!(fam.clone().with_interior_point(vec![2.0, 0.0]).is_err());
        assert!(fam.with_interior_point(vec![0.1, 0.0]).is_ok());
    }

    #[test]
    fn proximity_gradient_norm_is_twice_distance() {
        let fam = ProximityFamily::uniform(1, 0, 2, 0.1, 10.0).unwrap();
        let joint = [0.2, 0.2, 0.5, 0.6];
        let d = fam.subgradient(&ConstraintHandle::Level(0.01), &joint[2..], &joint);
        assert!((linalg::norm(&d) - 2.0 * 0.5).abs() < 1e-15);
        assert!((fam.exact_set_distance(&joint[2..], &joint).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(fam.feasible_witness(&joint), Some(vec![0.2, 0.2]));
    }

    #[test]
    fn proximity_expectation_matches_quadrature() {
        let fam = ProximityFamily::uniform(1, 0, 2, 0.1, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for r in [0.05, 0.2, 0.3, 1.0] {
            let joint = [0.0, 0.0, r, 0.0];
            let closed = fam.expected_sq_violation(&joint[2..], &joint, &mut rng, 0);
            // Midpoint rule on ξ ∈ [0, 0.1]; the kink at ξ = r² limits accuracy.
            let n = 200_000;
            let h = 0.1 / n as f64;
            let quad: f64 = (0..n)
                .map(|i| positive_part(r * r - (i as f64 + 0.5) * h).powi(2))
                .sum::<f64>()
                * h
                / 0.1;
            assert!((closed - quad).abs() <= 1e-7 * quad, "r={r}: {closed} vs {quad}");
        }
    }

    #[test]
    fn single_halfspace_distance() {
        let fam = HalfspaceFamily::new(0, vec![(vec![0.6, 0.8], 1.0)], 1.0, 1.0).unwrap();
        let d = fam.exact_set_distance(&[3.0, 4.0], &[]).unwrap();
        assert!((d - 4.0).abs() < 1e-15);
        let two = HalfspaceFamily::new(0, vec![(vec![1.0, 0.0], 1.0), (vec![0.0, 1.0], 1.0)], 1.0, 1.0)
            .unwrap();
        assert!(two.exact_set_distance(&[3.0, 4.0], &[]).is_none());
        assert_eq!(two.max_violation(&[3.0, 4.0], &[]), Some(3.0));
    }
}
