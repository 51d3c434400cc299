//! Experiment configuration files.
//!
//! A config is a TOML file with an `[experiment]` table and exactly one
//! problem table, `[matrix_game]` or `[imitation]`:
//!
//! ```toml
//! [experiment]
//! methods = ["projection", "korpelevich", "popov"]
//! batches = ["1", "log10"]
//! beta = 1.0
//! trials = 5
//! iterations = 2000
//! base_seed = 0
//! output_dir = "results/mg-k3"
//! cap_override = false
//! record_every = 1
//!
//! [matrix_game]
//! scale = "desk"
//! mu = 1.0
//! lipschitz = 3.0
//! seed = 0
//! ```

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::methods::{BatchSchedule, Method};
use crate::problems::{
    build_imitation_game, build_matrix_game, instance_io, ImitationGameParams, MatrixGameParams,
    ProblemData,
};

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemConfig {
    MatrixGame(MatrixGameParams),
    Imitation(ImitationGameParams),
    /// A previously saved instance file.
    File(PathBuf),
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemData> {
        match self {
            ProblemConfig::MatrixGame(params) => Ok(ProblemData::MatrixGame(build_matrix_game(params)?)),
            ProblemConfig::Imitation(params) => Ok(ProblemData::Imitation(build_imitation_game(params)?)),
            ProblemConfig::File(path) => instance_io::load_problem(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub methods: Vec<Method>,
    pub batches: Vec<BatchSchedule>,
    pub beta: f64,
    pub trials: usize,
    pub iterations: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Use `1/(4(L+μ))` as the constant step cap for Projection and Popov.
    pub cap_override: bool,
    pub record_every: usize,
    /// Write one CSV per trial in addition to the aggregates.
    pub write_trials: bool,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Also write the generated instance to `output_dir/instance.rfvi`.
    pub save_instance: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::invalid("beta", format!("{} is outside (0, 2)", self.beta)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "at least one method is required"));
        }
        if self.batches.is_empty() {
            return Err(Error::invalid("batches", "at least one batch schedule is required"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Parses `text`; `path` is only used in error messages.
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let err = |span: Option<Range<usize>>, message: String| Error::Config {
            path: path.to_path_buf(),
            line: span.map_or(1, |s| line_of(text, s.start)),
            message,
        };
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| err(e.span(), e.message().trim().to_string()))?;
        let exp = raw.experiment;

        let methods = exp
            .methods
            .get_ref()
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| err(Some(exp.methods.span()), e.to_string()))?;
        let batches = exp
            .batches
            .get_ref()
            .iter()
            .map(|b| b.parse::<BatchSchedule>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| err(Some(exp.batches.span()), e.to_string()))?;

        let problem = match (raw.matrix_game, raw.imitation, exp.instance_file) {
            (Some(mg), None, None) => {
                let span = mg.span();
                let params = mg.into_inner().into_params().map_err(|m| err(Some(span.clone()), m))?;
                params.validate().map_err(|e| err(Some(span), e.to_string()))?;
                ProblemConfig::MatrixGame(params)
            }
            (None, Some(im), None) => {
                let span = im.span();
                let params = im.into_inner().into_params();
                params.validate().map_err(|e| err(Some(span), e.to_string()))?;
                ProblemConfig::Imitation(params)
            }
            (None, None, Some(file)) => ProblemConfig::File(PathBuf::from(file.into_inner())),
            _ => {
                return Err(err(
                    None,
                    "exactly one of [matrix_game], [imitation] or experiment.instance_file is required"
                        .into(),
                ))
            }
        };

        let cfg = ExperimentConfig {
            problem,
            methods,
            batches,
            beta: *exp.beta.get_ref(),
            trials: *exp.trials.get_ref(),
            iterations: *exp.iterations.get_ref(),
            base_seed: exp.base_seed.unwrap_or(0),
            output_dir: PathBuf::from(exp.output_dir.unwrap_or_else(|| "results".into())),
            cap_override: exp.cap_override.unwrap_or(false),
            record_every: exp.record_every.as_ref().map_or(1, |r| *r.get_ref()),
            write_trials: exp.write_trials.unwrap_or(true),
            workers: exp.workers.unwrap_or(0),
            save_instance: exp.save_instance.unwrap_or(false),
        };
        // Point semantic errors at the offending key.
        let span_of = |name: &str| -> Option<Range<usize>> {
            match name {
                "beta" => Some(exp.beta.span()),
                "trials" => Some(exp.trials.span()),
                "iterations" => Some(exp.iterations.span()),
                "methods" => Some(exp.methods.span()),
                "batches" => Some(exp.batches.span()),
                "record_every" => exp.record_every.as_ref().map(|r| r.span()),
                _ => None,
            }
        };
        cfg.validate().map_err(|e| match &e {
            Error::InvalidParameter { name, .. } => err(span_of(name), e.to_string()),
            _ => err(None, e.to_string()),
        })?;
        Ok(cfg)
    }

    /// Serializes back to the config format.
    pub fn to_toml(&self) -> String {
        let mut out = String::from("[experiment]\n");
        let list = |items: Vec<String>| {
            format!(
                "[{}]",
                items.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ")
            )
        };
        out += &format!(
            "methods = {}\n",
            list(self.methods.iter().map(|m| m.name().to_string()).collect())
        );
        out += &format!(
            "batches = {}\n",
            list(
                self.batches
                    .iter()
                    .map(|b| match b {
                        BatchSchedule::Constant(n) => n.to_string(),
                        BatchSchedule::LogTen => "log10".into(),
                    })
                    .collect()
            )
        );
        out += &format!("beta = {:?}\n", self.beta);
        out += &format!("trials = {}\n", self.trials);
        out += &format!("iterations = {}\n", self.iterations);
        out += &format!("base_seed = {}\n", self.base_seed);
        out += &format!("output_dir = {:?}\n", self.output_dir.display().to_string());
        out += &format!("cap_override = {}\n", self.cap_override);
        out += &format!("record_every = {}\n", self.record_every);
        out += &format!("write_trials = {}\n", self.write_trials);
        out += &format!("workers = {}\n", self.workers);
        out += &format!("save_instance = {}\n", self.save_instance);
        match &self.problem {
            ProblemConfig::File(p) => {
                out += &format!("instance_file = {:?}\n", p.display().to_string());
            }
            ProblemConfig::MatrixGame(s) => {
                out += "\n[matrix_game]\n";
                out += &format!("mu = {:?}\nlipschitz = {:?}\nseed = {}\n", s.mu_target, s.l_target, s.seed);
                out += &format!("n_per_agent = {}\nn_constraints = {}\n", s.n_per_agent, s.n_constraints);
                out += &format!("box_half_width = {:?}\n", s.box_half_width);
                out += &format!("delta_range = [{:?}, {:?}]\n", s.delta_range.0, s.delta_range.1);
                out += &format!("chi_range = [{:?}, {:?}]\n", s.chi_range.0, s.chi_range.1);
                out += &format!("q_eig_range = [{:?}, {:?}]\n", s.q_eig_range.0, s.q_eig_range.1);
                out += &format!("calibration_points = {}\n", s.calibration_points);
                out += &format!("calibration_radius = {:?}\n", s.calibration_radius);
            }
            ProblemConfig::Imitation(s) => {
                out += "\n[imitation]\n";
                out += &format!("xi_max = {:?}\nbox_lo = {:?}\nbox_hi = {:?}\n", s.xi_max, s.box_lo, s.box_hi);
                out += &format!("init_lo = {:?}\ninit_hi = {:?}\n", s.init_lo, s.init_hi);
                out += &format!("calibration_points = {}\nseed = {}\n", s.calibration_points, s.seed);
            }
        }
        out
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    1 + text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    matrix_game: Option<Spanned<RawMatrixGame>>,
    imitation: Option<Spanned<RawImitation>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    methods: Spanned<Vec<String>>,
    batches: Spanned<Vec<String>>,
    beta: Spanned<f64>,
    trials: Spanned<usize>,
    iterations: Spanned<usize>,
    base_seed: Option<u64>,
    output_dir: Option<String>,
    cap_override: Option<bool>,
    record_every: Option<Spanned<usize>>,
    write_trials: Option<bool>,
    workers: Option<usize>,
    save_instance: Option<bool>,
    instance_file: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrixGame {
    scale: Option<String>,
    mu: f64,
    lipschitz: f64,
    seed: Option<u64>,
    n_per_agent: Option<usize>,
    n_constraints: Option<usize>,
    box_half_width: Option<f64>,
    delta_range: Option<(f64, f64)>,
    chi_range: Option<(f64, f64)>,
    q_eig_range: Option<(f64, f64)>,
    calibration_points: Option<usize>,
    calibration_radius: Option<f64>,
}

impl RawMatrixGame {
    fn into_params(self) -> std::result::Result<MatrixGameParams, String> {
        let seed = self.seed.unwrap_or(0);
        let base = match self.scale.as_deref().unwrap_or("desk") {
            "desk" => MatrixGameParams::desk_scale(self.mu, self.lipschitz, seed),
            "full" => MatrixGameParams::full_scale(self.mu, self.lipschitz, seed),
            other => return Err(format!("unknown scale `{other}` (expected desk or full)")),
        };
        Ok(MatrixGameParams {
            n_per_agent: self.n_per_agent.unwrap_or(base.n_per_agent),
            n_constraints: self.n_constraints.unwrap_or(base.n_constraints),
            box_half_width: self.box_half_width.unwrap_or(base.box_half_width),
            delta_range: self.delta_range.unwrap_or(base.delta_range),
            chi_range: self.chi_range.unwrap_or(base.chi_range),
            q_eig_range: self.q_eig_range.unwrap_or(base.q_eig_range),
            calibration_points: self.calibration_points.unwrap_or(base.calibration_points),
            calibration_radius: self.calibration_radius.unwrap_or(base.calibration_radius),
            ..base
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImitation {
    xi_max: Option<f64>,
    box_lo: Option<f64>,
    box_hi: Option<f64>,
    init_lo: Option<f64>,
    init_hi: Option<f64>,
    calibration_points: Option<usize>,
    seed: Option<u64>,
}

impl RawImitation {
    fn into_params(self) -> ImitationGameParams {
        let d = ImitationGameParams::default();
        ImitationGameParams {
            xi_max: self.xi_max.unwrap_or(d.xi_max),
            box_lo: self.box_lo.unwrap_or(d.box_lo),
            box_hi: self.box_hi.unwrap_or(d.box_hi),
            init_lo: self.init_lo.unwrap_or(d.init_lo),
            init_hi: self.init_hi.unwrap_or(d.init_hi),
            calibration_points: self.calibration_points.unwrap_or(d.calibration_points),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[experiment]
methods = ["projection", "popov"]
batches = ["1", "log10"]
beta = 1.0
trials = 3
iterations = 50
output_dir = "out"

[imitation]
xi_max = 0.1
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(text, Path::new("exp.toml"))
    }

    fn line(e: Error) -> usize {
        match e {
            Error::Config { line, .. } => line,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parses_and_roundtrips() {
        let cfg = parse(GOOD).unwrap();
        assert_eq!(cfg.methods, vec![Method::Projection, Method::Popov]);
        assert_eq!(cfg.batches, vec![BatchSchedule::Constant(1), BatchSchedule::LogTen]);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.record_every, 1);
        assert!(matches!(cfg.problem, ProblemConfig::Imitation(_)));
        assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn matrix_game_section_roundtrips() {
        let text = r#"
[experiment]
methods = ["korpelevich"]
batches = ["2"]
beta = 0.5
trials = 1
iterations = 10

[matrix_game]
mu = 0.05
lipschitz = 1.0
n_per_agent = 4
"#;
        let cfg = parse(text).unwrap();
        let ProblemConfig::MatrixGame(params) = &cfg.problem else { panic!() };
        assert_eq!((params.mu_target, params.l_target, params.n_per_agent), (0.05, 1.0, 4));
        assert_eq!(params.n_constraints, 1000);
        assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_beta = GOOD.replace("beta = 1.0", "beta = 2.5");
        assert_eq!(line(parse(&bad_beta).unwrap_err()), 5);
        let bad_method = GOOD.replace("\"popov\"", "\"newton\"");
        assert_eq!(line(parse(&bad_method).unwrap_err()), 3);
        let unknown_key = GOOD.replace("trials = 3", "trails = 3");
        assert_eq!(line(parse(&unknown_key).unwrap_err()), 6);
        let zero_iters = GOOD.replace("iterations = 50", "iterations = 0");
        assert_eq!(line(parse(&zero_iters).unwrap_err()), 7);
        let bad_xi = GOOD.replace("xi_max = 0.1", "xi_max = -1.0");
        assert_eq!(line(parse(&bad_xi).unwrap_err()), 10);
        let msg = parse(&bad_beta).unwrap_err().to_string();
        assert!(msg.starts_with("exp.toml:5:"), "{msg}");
    }

    #[test]
    fn exactly_one_problem_required() {
        let none = GOOD.replace("[imitation]\nxi_max = 0.1\n", "");
        assert!(parse(&none).is_err());
        let both = format!("{GOOD}\n[matrix_game]\nmu = 1.0\nlipschitz = 3.0\n");
        assert!(parse(&both).is_err());
    }
}
