//! Random Polyak feasibility updates.
//!
//! One step moves `z` along a subgradient of a sampled violated constraint,
//!
//! ```text
//! ẑ = Π_Y[z − β·g⁺(z)/‖d‖²·d],     0 < β < 2,
//! ```
//!
//! and satisfies, for every `z̄ ∈ Y` with `g⁺(z̄) = 0`,
//! `‖ẑ − z̄‖² ≤ ‖z − z̄‖² − β(2−β)·g⁺(z)²/‖d‖²`. A batch chains `N` such
//! steps with independently sampled constraints.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ConstraintFamily, ConstraintHandle, SimpleSet};

/// Subgradients with squared norm below this are treated as zero.
pub const MIN_SUBGRADIENT_NORM_SQ: f64 = 1e-24;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid("beta", format!("{beta} is outside (0, 2)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityConfig {
    beta: f64,
    batch: usize,
}

impl FeasibilityConfig {
    pub fn new(beta: f64, batch: usize) -> Result<Self> {
        check_beta(beta)?;
        if batch == 0 {
            return Err(Error::invalid("batch", "batch size must be at least 1"));
        }
        Ok(Self { beta, batch })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn with_batch(self, batch: usize) -> Result<Self> {
        Self::new(self.beta, batch)
    }
}

/// Result of one Polyak step.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyakStep {
    pub point: Vec<f64>,
    /// `g⁺(z)` before the step.
    pub violation: f64,
    /// `‖d‖²` of the subgradient used.
    pub subgradient_norm_sq: f64,
}

pub fn polyak_step(
    z: &[f64],
    handle: &ConstraintHandle,
    family: &dyn ConstraintFamily,
    set: &SimpleSet,
    beta: f64,
    joint: &[f64],
) -> Result<PolyakStep> {
    check_beta(beta)?;
    if z.len() != family.dim() || z.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            what: "polyak step point",
            expected: family.dim(),
            got: z.len(),
        });
    }
    let (violation, d) = family.violation_and_subgradient(handle, z, joint);
    let dn2 = linalg::norm_sq(&d);
    if violation == 0.0 {
        return Ok(PolyakStep {
            point: z.to_vec(),
            violation,
            subgradient_norm_sq: dn2,
        });
    }
    if !(dn2 >= MIN_SUBGRADIENT_NORM_SQ) {
        return Err(Error::ZeroSubgradient { violation });
    }
    let t = beta * violation / dn2;
    let mut point: Vec<f64> = z.iter().zip(&d).map(|(zi, di)| zi - t * di).collect();
    set.project_in_place(&mut point);
    Ok(PolyakStep {
        point,
        violation,
        subgradient_norm_sq: dn2,
    })
}

/// Per-step record of a feasibility batch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityAudit {
    pub violations: Vec<f64>,
    pub subgradient_norms: Vec<f64>,
}

impl FeasibilityAudit {
    /// `Σᵢ (g⁺(zⁱ⁻¹))²`.
    pub fn sum_sq_violation(&self) -> f64 {
        self.violations.iter().map(|v| v * v).sum()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityOutcome {
    pub x: Vec<f64>,
    pub audit: FeasibilityAudit,
}

/// Runs `cfg.batch()` sequential Polyak steps from `v`, each on a freshly
/// sampled constraint.
pub fn random_feasibility_steps(
    v: &[f64],
    family: &dyn ConstraintFamily,
    set: &SimpleSet,
    cfg: &FeasibilityConfig,
    joint: &[f64],
    rng: &mut dyn RngCore,
) -> Result<FeasibilityOutcome> {
    let mut z = v.to_vec();
    let mut audit = FeasibilityAudit {
        violations: Vec::with_capacity(cfg.batch),
        subgradient_norms: Vec::with_capacity(cfg.batch),
    };
    for _ in 0..cfg.batch {
        let handle = family.sample(rng);
        let step = polyak_step(&z, &handle, family, set, cfg.beta, joint)?;
        audit.violations.push(step.violation);
        audit.subgradient_norms.push(step.subgradient_norm_sq.sqrt());
        z = step.point;
    }
    Ok(FeasibilityOutcome { x: z, audit })
}

/// `q = β(2−β)/(c·M_g²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QConstant {
    pub q: f64,
    pub beta: f64,
    pub c: f64,
    pub mg: f64,
    /// Set when `q ≥ 1` was clamped below one on request.
    pub clamped: bool,
}

impl QConstant {
    /// `(1 − q)^n`.
    pub fn decay(&self, n: usize) -> f64 {
        (1.0 - self.q).powi(n as i32)
    }
}

/// Largest double below one, used when clamping `q`.
pub const Q_CLAMP: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn compute_q(beta: f64, c: f64, mg: f64, clamp: bool) -> Result<QConstant> {
    check_beta(beta)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid("c", format!("{c} is not positive")));
    }
    if !(mg > 0.0) || !mg.is_finite() {
        return Err(Error::invalid("mg", format!("{mg} is not positive")));
    }
    let q = beta * (2.0 - beta) / (c * mg * mg);
    if q >= 1.0 {
        if clamp {
            return Ok(QConstant {
                q: Q_CLAMP,
                beta,
                c,
                mg,
                clamped: true,
            });
        }
        return Err(Error::QNotBelowOne { q, beta, c, mg });
    }
    Ok(QConstant {
        q,
        beta,
        c,
        mg,
        clamped: false,
    })
}

/// `‖v − x̄‖² − ‖x − x̄‖² − β(2−β)/M_g²·Σᵢ (g⁺ᵢ)²` for a feasible witness `x̄`.
///
/// Nonnegative on every trajectory when `x̄ ∈ S_j`.
pub fn feasibility_residual_check(
    v: &[f64],
    x: &[f64],
    feasible_point: &[f64],
    audit: &FeasibilityAudit,
    beta: f64,
    mg: f64,
) -> f64 {
    let before = linalg::dist_sq(v, feasible_point);
    let after = linalg::dist_sq(x, feasible_point);
    let decrease = if audit.is_empty() {
        0.0
    } else {
        beta * (2.0 - beta) / (mg * mg) * audit.sum_sq_violation()
    };
    before - after - decrease
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::families::{HalfspaceFamily, ProximityFamily, QuadraticFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn halfspace_x1_le_1() -> HalfspaceFamily {
        HalfspaceFamily::new(0, vec![(vec![1.0, 0.0], 1.0)], 10.0, 1.0).unwrap()
    }

    #[test]
    fn halfspace_step_is_exact_projection() {
        let f = halfspace_x1_le_1();
        let set = SimpleSet::full_space(2);
        let s = polyak_step(&[3.0, 0.0], &ConstraintHandle::Index(0), &f, &set, 1.0, &[]).unwrap();
        assert_eq!(s.point, vec![1.0, 0.0]);
        assert_eq!(s.violation, 2.0);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let f = halfspace_x1_le_1();
        let set = SimpleSet::full_space(2);
        let s = polyak_step(&[0.5, 0.0], &ConstraintHandle::Index(0), &f, &set, 1.0, &[]).unwrap();
        assert_eq!(s.point, vec![0.5, 0.0]);
        assert_eq!(s.violation, 0.0);
    }

    #[test]
    fn unit_ball_constraint_step() {
        // g(z) = ‖z‖² − 1 at z = (2, 0): g⁺ = 3, d = (4, 0), ẑ = (1.25, 0).
        let f = QuadraticFamily::single(
            0,
            nalgebra::DMatrix::identity(2, 2),
            vec![0.0, 0.0],
            1.0,
            10.0,
        );
        let set = SimpleSet::full_space(2);
        let s = polyak_step(&[2.0, 0.0], &ConstraintHandle::Index(0), &f, &set, 1.0, &[]).unwrap();
        assert_eq!(s.violation, 3.0);
        assert_eq!(s.subgradient_norm_sq, 16.0);
        assert_eq!(s.point, vec![1.25, 0.0]);
        // The step moves strictly closer to the feasible boundary point (1, 0).
        let witness = [1.0, 0.0];
        assert!(linalg::dist_sq(&s.point, &witness) < linalg::dist_sq(&[2.0, 0.0], &witness));
        let lemma = linalg::dist_sq(&[2.0, 0.0], &witness) - 9.0 / 16.0;
        assert!(linalg::dist_sq(&s.point, &witness) <= lemma);
    }

    #[test]
    fn step_rejects_bad_beta_and_zero_gradient() {
        let f = halfspace_x1_le_1();
        let set = SimpleSet::full_space(2);
        let h = ConstraintHandle::Index(0);
        assert!(polyak_step(&[3.0, 0.0], &h, &f, &set, 0.0, &[]).is_err());
        assert!(polyak_step(&[3.0, 0.0], &h, &f, &set, 2.0, &[]).is_err());

        // a = 0 with b < 0: every point violates and the gradient vanishes.
        let bad = HalfspaceFamily::new(0, vec![(vec![0.0, 0.0], -1.0)], 1.0, 1.0).unwrap();
        assert!(matches!(
            polyak_step(&[0.0, 0.0], &h, &bad, &set, 1.0, &[]),
            Err(Error::ZeroSubgradient { .. })
        ));
    }

    #[test]
    fn batch_of_one_is_one_step() {
        let f = halfspace_x1_le_1();
        let set = SimpleSet::full_space(2);
        let cfg = FeasibilityConfig::new(1.5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = random_feasibility_steps(&[3.0, 1.0], &f, &set, &cfg, &[], &mut rng).unwrap();
        let step = polyak_step(&[3.0, 1.0], &ConstraintHandle::Index(0), &f, &set, 1.5, &[]).unwrap();
        assert_eq!(out.x, step.point);
        assert_eq!(out.audit.violations, vec![2.0]);
    }

    #[test]
    fn all_satisfied_batch_is_identity() {
        let f = halfspace_x1_le_1();
        let set = SimpleSet::full_space(2);
        let cfg = FeasibilityConfig::new(1.0, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = [-2.0, 4.0];
        let out = random_feasibility_steps(&v, &f, &set, &cfg, &[], &mut rng).unwrap();
        assert_eq!(out.x, v.to_vec());
        assert_eq!(feasibility_residual_check(&v, &out.x, &[0.0, 0.0], &out.audit, 1.0, 3.0), 0.0);
    }

    #[test]
    fn proximity_batch_matches_scalar_recursion() {
        // ‖x₂ − x₁‖² ≤ ξ with ξ fixed to 0.1: each step is r ← r − (r² − 0.1)/(2r).
        let f = ProximityFamily::fixed_level(1, 0, 0.1, 10.0);
        let set = SimpleSet::full_space(2);
        let cfg = FeasibilityConfig::new(1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x1 = [0.3, -0.2];
        let joint = [x1[0], x1[1], 0.0, 0.0];
        let v = [x1[0] + 0.6, x1[1] + 0.8];
        let out = random_feasibility_steps(&v, &f, &set, &cfg, &joint, &mut rng).unwrap();

        let mut r: f64 = 1.0;
        let mut oracle = Vec::new();
        for _ in 0..3 {
            r -= (r * r - 0.1) / (2.0 * r);
            oracle.push(r);
        }
        assert!((oracle[0] - 0.55).abs() < 1e-15);
        assert!((oracle[1] - 0.365_909_090_909_091).abs() < 1e-12);
        assert!((oracle[2] - 0.319_600_508_187_464_7).abs() < 1e-12);
        let dist = linalg::dist_sq(&out.x, &x1).sqrt();
        assert!((dist - oracle[2]).abs() < 1e-12, "{dist} vs {}", oracle[2]);
    }

    #[test]
    fn q_examples() {
        assert_eq!(compute_q(1.0, 1.0, 2.0, false).unwrap().q, 0.25);
        assert_eq!(compute_q(0.5, 2.0, 1.0, false).unwrap().q, 0.375);
        assert!(matches!(
            compute_q(1.0, 4.0, 0.5, false),
            Err(Error::QNotBelowOne { .. })
        ));
        let clamped = compute_q(1.0, 4.0, 0.5, true).unwrap();
        assert!(clamped.clamped && clamped.q < 1.0);
        assert!(compute_q(1.0, 0.0, 1.0, false).is_err());
        assert!(compute_q(1.0, 1.0, -1.0, false).is_err());
        assert!(compute_q(2.5, 1.0, 1.0, false).is_err());
    }

    #[test]
    fn halfspace_residual_equality_case() {
        // Witness on the boundary hyperplane: the step is an exact projection
        // and Pythagoras makes the residual vanish when ‖d‖ = M_g.
        let f = halfspace_x1_le_1();
        let set = SimpleSet::full_space(2);
        let cfg = FeasibilityConfig::new(1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = [3.0, 2.0];
        let out = random_feasibility_steps(&v, &f, &set, &cfg, &[], &mut rng).unwrap();
        let r = feasibility_residual_check(&v, &out.x, &[1.0, -4.0], &out.audit, 1.0, 1.0);
        assert!(r.abs() < 1e-12, "{r}");
        let r_interior = feasibility_residual_check(&v, &out.x, &[0.0, 0.0], &out.audit, 1.0, 1.0);
        assert!(r_interior > 0.0);
    }

    #[test]
    fn violation_does_not_increase_on_own_constraint() {
        let f = QuadraticFamily::single(
            0,
            nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            vec![0.3, -0.1],
            1.0,
            100.0,
        );
        let set = SimpleSet::uniform_box(2, -3.0, 3.0).unwrap();
        let h = ConstraintHandle::Index(0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let z = set.sample_uniform(&mut rng).unwrap();
            for beta in [0.3, 1.0, 1.7] {
                let s = polyak_step(&z, &h, &f, &set, beta, &[]).unwrap();
                let after = crate::model::positive_part(f.value(&h, &s.point, &[]));
                assert!(after <= s.violation + 1e-12);
            }
        }
    }
}
