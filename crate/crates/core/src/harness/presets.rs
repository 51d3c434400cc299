//! Named scenarios: four matrix games and the imitation game.
//!
//! Matrix-game presets run at desk scale (20 variables and 10³ constraints
//! per agent); appending `-full` selects 100 variables and 10⁴ constraints.

use std::path::PathBuf;

use super::config::{ExperimentConfig, ProblemConfig};
use crate::error::{Error, Result};
use crate::methods::{BatchSchedule, Method};
use crate::problems::{ImitationGameParams, MatrixGameParams};

pub const PRESET_NAMES: [&str; 5] = ["mg-k3", "mg-k20", "mg-k1000", "mg-k1000-bigstep", "imitation"];

/// `(μ, L, cap_override)` of a matrix-game preset.
fn matrix_constants(base: &str) -> Option<(f64, f64, bool)> {
    match base {
        "mg-k3" => Some((1.0, 3.0, false)),
        "mg-k20" => Some((0.05, 1.0, false)),
        "mg-k1000" => Some((0.01, 10.0, false)),
        "mg-k1000-bigstep" => Some((0.01, 10.0, true)),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (base, full) = match name.strip_suffix("-full") {
        Some(b) => (b, true),
        None => (name, false),
    };
    if let Some((mu, l, cap_override)) = matrix_constants(base) {
        let params = if full {
            MatrixGameParams::full_scale(mu, l, 0)
        } else {
            MatrixGameParams::desk_scale(mu, l, 0)
        };
        return Ok(ExperimentConfig {
            problem: ProblemConfig::MatrixGame(params),
            methods: Method::ALL.to_vec(),
            batches: vec![BatchSchedule::Constant(1)],
            beta: 1.0,
            trials: 5,
            iterations: if full { 10_000 } else { 2_000 },
            base_seed: 0,
            output_dir: PathBuf::from("results").join(name),
            cap_override,
            record_every: 1,
            write_trials: true,
            workers: 0,
            save_instance: false,
        });
    }
    if base == "imitation" && !full {
        return Ok(ExperimentConfig {
            problem: ProblemConfig::Imitation(ImitationGameParams::default()),
            methods: Method::ALL.to_vec(),
            batches: vec![BatchSchedule::Constant(1), BatchSchedule::LogTen],
            beta: 1.0,
            trials: 1000,
            iterations: 10_000,
            base_seed: 0,
            output_dir: PathBuf::from("results").join(name),
            cap_override: false,
            record_every: 100,
            write_trials: true,
            workers: 0,
            save_instance: false,
        });
    }
    Err(Error::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mg(name: &str) -> MatrixGameParams {
        match preset(name).unwrap().problem {
            ProblemConfig::MatrixGame(s) => s,
            _ => panic!("not a matrix game"),
        }
    }

    #[test]
    fn scenario_constants() {
        let s = mg("mg-k3");
        assert_eq!((s.mu_target, s.l_target, s.n_per_agent), (1.0, 3.0, 20));
        let s = mg("mg-k20");
        assert_eq!((s.mu_target, s.l_target), (0.05, 1.0));
        let s = mg("mg-k1000");
        assert_eq!((s.mu_target, s.l_target), (0.01, 10.0));
        assert!(preset("mg-k1000-bigstep").unwrap().cap_override);
        assert!(!preset("mg-k1000").unwrap().cap_override);
        let s = mg("mg-k20-full");
        assert_eq!((s.n_per_agent, s.n_constraints, s.box_half_width), (100, 10_000, 1e4));
    }

    #[test]
    fn imitation_preset() {
        let cfg = preset("imitation").unwrap();
        let ProblemConfig::Imitation(params) = &cfg.problem else { panic!() };
        assert_eq!(params.xi_max, 0.1);
        assert_eq!(cfg.trials, 1000);
        assert_eq!(cfg.batches, vec![BatchSchedule::Constant(1), BatchSchedule::LogTen]);
    }

    #[test]
    fn all_presets_validate_and_unknown_rejected() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(matches!(preset("mg-k7"), Err(Error::UnknownPreset(_))));
        assert!(preset("imitation-full").is_err());
    }
}
