//! Problem generators: the two-player matrix game with quadratic
//! constraints, the imitation game with random exploration, and fixtures.

mod calibrate;
pub mod families;
mod imitation;
pub mod instance_io;
mod matrix_game;
mod spd;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

pub use calibrate::{
    calibrate_c, regularity_ratio, Calibration, CALIBRATION_SAFETY, DEFAULT_C,
};
pub use imitation::{build_imitation_game, ImitationGame, ImitationGameParams};
pub use matrix_game::{
    build_matrix_game, Certification, MatrixGame, MatrixGameAgent, MatrixGameParams,
};
pub use spd::{generate_spd_with_spectrum, sample_with_spectrum, SpectrumSample};

use crate::error::Result;
use crate::model::{
    block_project, check_sets, BlockLayout, ConstraintFamily, GameMapping, JointDecision,
    SimpleSet,
};

/// Distribution of the starting point `x₀` before projection onto `Y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialDistribution {
    StandardNormal,
    Uniform { lo: f64, hi: f64 },
    /// Start exactly at the known solution.
    Solution,
}

/// Everything a method run needs: mapping, simple sets, constraint families
/// and, when known, the solution.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub name: String,
    pub layout: Arc<BlockLayout>,
    pub mapping: GameMapping,
    pub sets: Vec<SimpleSet>,
    /// One entry per agent; `None` means the agent is projected directly.
    pub families: Vec<Option<Arc<dyn ConstraintFamily>>>,
    pub solution: Option<JointDecision>,
    pub initial: InitialDistribution,
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        layout: Arc<BlockLayout>,
        mapping: GameMapping,
        sets: Vec<SimpleSet>,
        families: Vec<Option<Arc<dyn ConstraintFamily>>>,
        solution: Option<Vec<f64>>,
        initial: InitialDistribution,
    ) -> Result<Self> {
        check_sets(&layout, &sets)?;
        if mapping.dim() != layout.total() {
            return Err(crate::Error::DimensionMismatch {
                what: "mapping dimension",
                expected: layout.total(),
                got: mapping.dim(),
            });
        }
        if families.len() != layout.num_blocks() {
            return Err(crate::Error::DimensionMismatch {
                what: "number of constraint family slots",
                expected: layout.num_blocks(),
                got: families.len(),
            });
        }
        for (j, fam) in families.iter().enumerate() {
            if let Some(f) = fam {
                if f.dim() != layout.block_size(j) || f.agent() != j {
                    return Err(crate::Error::DimensionMismatch {
                        what: "constraint family block",
                        expected: layout.block_size(j),
                        got: f.dim(),
                    });
                }
            }
        }
        let solution = solution
            .map(|s| JointDecision::new(layout.clone(), s))
            .transpose()?;
        Ok(Self {
            name: name.into(),
            layout,
            mapping,
            sets,
            families,
            solution,
            initial,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.layout.num_blocks()
    }

    pub fn family(&self, j: usize) -> Option<&dyn ConstraintFamily> {
        self.families[j].as_deref()
    }

    /// Draws `x₀` and projects it onto `Y`.
    pub fn initial_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<JointDecision> {
        let n = self.layout.total();
        let values: Vec<f64> = match self.initial {
            InitialDistribution::StandardNormal => {
                (0..n).map(|_| rng.sample(StandardNormal)).collect()
            }
            InitialDistribution::Uniform { lo, hi } => {
                (0..n).map(|_| rng.random_range(lo..hi)).collect()
            }
            InitialDistribution::Solution => match &self.solution {
                Some(s) => s.values().to_vec(),
                None => {
                    return Err(crate::Error::invalid(
                        "initial",
                        "starting at the solution requires a known solution",
                    ))
                }
            },
        };
        let x = JointDecision::new(self.layout.clone(), values)?;
        block_project(&self.sets, &x)
    }

    pub fn with_initial(mut self, initial: InitialDistribution) -> Self {
        self.initial = initial;
        self
    }
}

/// Serializable problem data; [`ProblemData::instance`] builds the runtime
/// view.
#[derive(Clone, Debug)]
pub enum ProblemData {
    MatrixGame(MatrixGame),
    Imitation(ImitationGame),
}

impl ProblemData {
    pub fn instance(&self) -> Result<ProblemInstance> {
        match self {
            ProblemData::MatrixGame(g) => g.instance(),
            ProblemData::Imitation(g) => g.instance(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProblemData::MatrixGame(_) => "matrix_game",
            ProblemData::Imitation(_) => "imitation",
        }
    }
}
