use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{ConstraintFamily, SimpleSet};

/// Multiplier applied to the largest observed ratio.
pub const CALIBRATION_SAFETY: f64 = 2.0;

/// Returned when every sampled point is feasible.
pub const DEFAULT_C: f64 = 1.0;

/// Monte Carlo draws used when a family has no closed-form expectation.
const EXPECTATION_SAMPLES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub c: f64,
    pub max_ratio: f64,
    pub points: usize,
    pub infeasible_points: usize,
    pub used_default: bool,
}

/// `dist²(x, S) / E[(g⁺(x))²]`, using the family's set-distance upper bound.
/// `None` at feasible points or when the family has no distance oracle.
pub fn regularity_ratio(
    family: &dyn ConstraintFamily,
    x: &[f64],
    joint: &[f64],
    rng: &mut dyn RngCore,
) -> Option<f64> {
    let dist = family.set_distance_upper_bound(x, joint)?;
    let expected = family.expected_sq_violation(x, joint, rng, EXPECTATION_SAMPLES);
    if dist == 0.0 || expected <= 0.0 {
        return None;
    }
    Some(dist * dist / expected)
}

/// Estimates the regularity constant `c` as the safety factor times the
/// largest ratio over `n_points` uniform samples of `region`.
///
/// Diagnostic only: the methods accept any batch size and never read `c`.
pub fn calibrate_c(
    family: &dyn ConstraintFamily,
    region: &SimpleSet,
    joint: &[f64],
    n_points: usize,
    rng: &mut dyn RngCore,
) -> Result<Calibration> {
    if !region.is_bounded() {
        return Err(Error::invalid("region", "calibration region must be bounded"));
    }
    if region.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            what: "calibration region",
            expected: family.dim(),
            got: region.dim(),
        });
    }
    let mut max_ratio: f64 = 0.0;
    let mut infeasible = 0;
    for _ in 0..n_points {
        let x = region
            .sample_uniform(&mut *rng)
            .expect("bounded region can be sampled");
        if family.set_distance_upper_bound(&x, joint).is_none() {
            return Err(Error::invalid(
                "family",
                "calibration needs a set-distance oracle",
            ));
        }
        if let Some(r) = regularity_ratio(family, &x, joint, rng) {
            infeasible += 1;
            max_ratio = max_ratio.max(r);
        }
    }
    if infeasible == 0 {
        return Ok(Calibration {
            c: DEFAULT_C,
            max_ratio: 0.0,
            points: n_points,
            infeasible_points: 0,
            used_default: true,
        });
    }
    Ok(Calibration {
        c: CALIBRATION_SAFETY * max_ratio,
        max_ratio,
        points: n_points,
        infeasible_points: infeasible,
        used_default: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::families::{HalfspaceFamily, ProximityFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn imitation_ratio_at_unit_distance() {
        // dist² = 1 and E[(1 − ξ)²] = (1 − 0.9³)/0.3 for ξ ~ U[0, 0.1].
        let fam = ProximityFamily::uniform(1, 0, 2, 0.1, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let joint = [0.1, 0.1, 0.7, 0.9];
        let ratio = regularity_ratio(&fam, &joint[2..], &joint, &mut rng).unwrap();
        let expected_sq = (1.0 - 0.9f64.powi(3)) / 0.3;
        assert!((expected_sq - 0.903_333_333_333_333).abs() < 1e-12);
        assert!((ratio - 1.0 / expected_sq).abs() < 1e-12, "{ratio}");
        assert!((ratio - 1.107).abs() < 1e-3);
    }

    #[test]
    fn unit_halfspace_ratio_is_one() {
        let fam = HalfspaceFamily::new(0, vec![(vec![0.6, 0.8], 0.5)], 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for x in [[3.0, 1.0], [1.0, 1.0], [-2.0, 9.0]] {
            let r = regularity_ratio(&fam, &x, &[], &mut rng).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }
        let region = SimpleSet::uniform_box(2, 0.0, 10.0).unwrap();
        let cal = calibrate_c(&fam, &region, &[], 100, &mut rng).unwrap();
        assert!((cal.max_ratio - 1.0).abs() < 1e-12);
        assert_eq!(cal.c, 2.0 * cal.max_ratio);
    }

    #[test]
    fn all_feasible_uses_default() {
        let fam = HalfspaceFamily::new(0, vec![(vec![1.0, 0.0], 100.0)], 1.0, 1.0).unwrap();
        let region = SimpleSet::uniform_box(2, -1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cal = calibrate_c(&fam, &region, &[], 50, &mut rng).unwrap();
        assert!(cal.used_default);
        assert_eq!(cal.c, DEFAULT_C);
    }

    #[test]
    fn unbounded_region_rejected() {
        let fam = HalfspaceFamily::new(0, vec![(vec![1.0, 0.0], 0.0)], 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(calibrate_c(&fam, &SimpleSet::full_space(2), &[], 10, &mut rng).is_err());
    }
}
