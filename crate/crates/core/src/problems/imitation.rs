use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::calibrate::calibrate_c;
use super::families::ProximityFamily;
use super::{InitialDistribution, ProblemInstance};
use crate::error::{Error, Result};
use crate::model::{BlockLayout, ConstraintFamily, GameMapping, SimpleSet};

/// Two agents in R²: agent 1 lives in a box, agent 2 must imitate agent 1
/// up to a random exploration radius, `‖x₂ − x₁‖² ≤ ξ` with `ξ ~ U[0, xi_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImitationGameParams {
    pub xi_max: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    /// Starting points are drawn from `U[init_lo, init_hi]⁴`.
    pub init_lo: f64,
    pub init_hi: f64,
    pub calibration_points: usize,
    pub seed: u64,
}

impl Default for ImitationGameParams {
    fn default() -> Self {
        Self {
            xi_max: 0.1,
            box_lo: 0.1,
            box_hi: 10.0,
            init_lo: 0.0,
            init_hi: 1.0,
            calibration_points: 256,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImitationGame {
    pub params: ImitationGameParams,
    pub mg: f64,
    pub regularity_c: f64,
}

pub const IMITATION_MU: f64 = 1.0;
pub const IMITATION_L: f64 = 3.0;

/// `F(x) = [[2I, I], [I, 2I]] x`.
pub fn imitation_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            2.0, 0.0, 1.0, 0.0, //
            0.0, 2.0, 0.0, 1.0, //
            1.0, 0.0, 2.0, 0.0, //
            0.0, 1.0, 0.0, 2.0,
        ],
    )
}

impl ImitationGameParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi_max > 0.0) {
            return Err(Error::invalid("xi_max", "must be positive"));
        }
        if !(self.box_lo <= self.box_hi) {
            return Err(Error::invalid("box_lo", "box bounds are reversed"));
        }
        if !(self.init_lo < self.init_hi) {
            return Err(Error::invalid("init_lo", "initial interval is empty"));
        }
        if self.calibration_points == 0 {
            return Err(Error::invalid("calibration_points", "must be positive"));
        }
        Ok(())
    }
}

pub fn build_imitation_game(params: &ImitationGameParams) -> Result<ImitationGame> {
    params.validate()?;
    let box_set = SimpleSet::uniform_box(2, params.box_lo, params.box_hi)?;
    let init_offset = SimpleSet::uniform_box(2, params.init_lo, params.init_hi)?.diameter();
    // ‖2(x₂ − x₁)‖ over the reachable region: the initial offset plus the
    // diameter of agent 1's box.
    let mg = 2.0 * (init_offset + box_set.diameter());

    let mut game = ImitationGame {
        params: params.clone(),
        mg,
        regularity_c: 1.0,
    };
    let x1 = vec![params.box_lo; 2];
    let region = SimpleSet::ball(x1.clone(), init_offset)?;
    let joint = [x1[0], x1[1], x1[0], x1[1]];
    let family = game.family()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    game.regularity_c = calibrate_c(&family, &region, &joint, params.calibration_points, &mut rng)?.c;
    Ok(game)
}

impl ImitationGame {
    pub fn family(&self) -> Result<ProximityFamily> {
        Ok(ProximityFamily::uniform(1, 0, 2, self.params.xi_max, self.mg)?
            .with_regularity_c(self.regularity_c))
    }

    /// `x* = (box_lo, box_lo, box_lo, box_lo)`.
    pub fn solution(&self) -> Vec<f64> {
        vec![self.params.box_lo; 4]
    }

    pub fn instance(&self) -> Result<ProblemInstance> {
        let layout = Arc::new(BlockLayout::new(vec![2, 2])?);
        let mapping = GameMapping::affine(imitation_matrix(), vec![0.0; 4], IMITATION_MU, IMITATION_L)?;
        let families: Vec<Option<Arc<dyn ConstraintFamily>>> =
            vec![None, Some(Arc::new(self.family()?))];
        ProblemInstance::new(
            "imitation",
            layout,
            mapping,
            vec![
                SimpleSet::uniform_box(2, self.params.box_lo, self.params.box_hi)?,
                SimpleSet::full_space(2),
            ],
            families,
            Some(self.solution()),
            InitialDistribution::Uniform {
                lo: self.params.init_lo,
                hi: self.params.init_hi,
            },
        )
    }
}
