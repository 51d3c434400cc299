use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rfvi::harness::{self, ExperimentConfig, PRESET_NAMES};
use rfvi::problems::instance_io;

/// Randomized feasibility methods for strongly monotone variational inequalities.
///
/// Exit status: 0 when every audit passes, 1 when an audit fails, 2 on
/// invalid input or I/O errors.
#[derive(Parser)]
#[command(name = "rfvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a named preset.
    Run(RunArgs),
    /// Re-audit the per-trial CSV files in a results directory.
    Audit {
        #[arg(long)]
        trace_dir: PathBuf,
    },
    /// Print μ, L and per-agent M_g, c and q of a problem.
    Calibrate(CalibrateArgs),
    /// List the preset names.
    Presets,
}

#[derive(Args)]
struct Source {
    /// Experiment config file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Named preset (see `rfvi presets`).
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> rfvi::Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_file(path),
            (None, Some(name)) => harness::preset(name),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Also write the problem instance to `instance.rfvi`.
    #[arg(long)]
    save_instance: bool,
    /// Skip the per-trial CSV files.
    #[arg(long)]
    no_trial_files: bool,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CalibrateArgs {
    /// Experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset.
    #[arg(long)]
    preset: Option<String>,
    /// Problem instance file written by `run --save-instance`.
    #[arg(long)]
    instance: Option<PathBuf>,
}

fn run(args: RunArgs) -> rfvi::Result<bool> {
    let mut cfg = args.source.load()?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(t) = args.iters {
        cfg.iterations = t;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.save_instance |= args.save_instance;
    cfg.write_trials &= !args.no_trial_files;
    let summary = harness::run_experiment(&cfg)?;
    for g in &summary.groups {
        let row = g.final_row();
        let err = row.sq_dist_solution.map_or(f64::NAN, |(m, _)| m);
        let set = row.dist_set_or_violation.map_or(f64::NAN, |(m, _)| m);
        let status = if g.audits_passed() { "pass" } else { "FAIL" };
        println!(
            "{:<22} k={:<7} mean|x-x*|^2={err:.3e} mean_dist={set:.3e} min_feas_residual={} audit={status}",
            g.label,
            row.k,
            g.min_feas_residual.map_or("-".to_string(), |r| format!("{r:.3e}")),
        );
    }
    for (k, v) in &summary.annotations {
        println!("{k}={v}");
    }
    println!("results in {}", summary.output_dir.display());
    Ok(summary.audits_passed())
}

fn audit(dir: PathBuf) -> rfvi::Result<bool> {
    let r = harness::audit_trace_dir(&dir)?;
    println!("files={} rows={}", r.files, r.rows);
    println!(
        "min_feas_residual={}",
        r.min_feas_residual.map_or(String::new(), harness::fmt_num)
    );
    println!("nonfinite_values={}", r.nonfinite_values);
    for (group, fit) in &r.rate_fits {
        match fit {
            Some(f) => println!("{group}.rate_exponent={}", harness::fmt_num(f.exponent)),
            None => println!("{group}.rate_exponent="),
        }
    }
    println!("audit={}", if r.passed() { "pass" } else { "fail" });
    Ok(r.passed())
}

fn calibrate(args: CalibrateArgs) -> rfvi::Result<bool> {
    let (data, beta) = match (args.instance, args.config, args.preset) {
        (Some(path), _, _) => (instance_io::load_problem(&path)?, 1.0),
        (None, config, preset) => {
            let cfg = Source { config, preset }.load()?;
            (cfg.problem.build()?, cfg.beta)
        }
    };
    print!("{}", harness::calibration_report(&data, beta)?);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Audit { trace_dir } => audit(trace_dir),
        Command::Calibrate(a) => calibrate(a),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
