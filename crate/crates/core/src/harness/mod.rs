//! Experiment orchestration: build a problem, run trials of every
//! method × batch schedule in parallel, write CSV traces and a summary.
//!
//! Output layout inside `output_dir`:
//!
//! * `{method}_{batch}_trial{i:04}.csv`: one per trial, schema [`TRACE_HEADER`].
//! * `{method}_{batch}_aggregate.csv`: mean and standard error across trials.
//! * `summary.txt`: `key=value` lines with final errors, rate fits and audit
//!   verdicts.
//! * `config.toml`: the effective configuration.
//! * `instance.rfvi`: the problem instance, when requested.

pub mod config;
pub mod presets;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ExperimentConfig, ProblemConfig};
pub use presets::{preset, PRESET_NAMES};

use crate::audit::{self, GeometricReport, IterationRecord, RateFit};
use crate::error::{Error, Result};
use crate::feasibility::compute_q;
use crate::methods::{run, BatchSchedule, Method, RunOptions, RunTrace, StepSchedule};
use crate::problems::{instance_io, ProblemData, ProblemInstance};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Header of per-trial CSV files for two agents.
pub const TRACE_HEADER: &str =
    "k,alpha,N_agent1,N_agent2,sq_dist_solution,dist_set_or_violation,feas_residual,f_evals";

pub const AGGREGATE_HEADER: &str = "k,alpha,trials,mean_sq_dist_solution,stderr_sq_dist_solution,\
mean_dist_solution,stderr_dist_solution,mean_dist_set_or_violation,stderr_dist_set_or_violation,\
mean_sq_dist_set,stderr_sq_dist_set,min_feas_residual,f_evals";

fn trace_header(agents: usize) -> String {
    let n: Vec<String> = (1..=agents).map(|j| format!("N_agent{j}")).collect();
    format!(
        "k,alpha,{},sq_dist_solution,dist_set_or_violation,feas_residual,f_evals",
        n.join(",")
    )
}

/// 17 significant digits; round-trips every `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn trace_csv(records: &[IterationRecord]) -> String {
    let agents = records.first().map_or(2, |r| r.n_batch.len());
    let mut out = trace_header(agents);
    out.push('\n');
    for r in records {
        let n: Vec<String> = r.n_batch.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt_opt(r.alpha),
            n.join(","),
            fmt_opt(r.sq_dist_solution),
            fmt_opt(r.dist_set_or_violation()),
            fmt_opt(r.feas_residual),
            r.f_evals
        );
    }
    out
}

/// Cross-trial statistics at one recorded iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub alpha: Option<f64>,
    pub trials: usize,
    pub sq_dist_solution: Option<(f64, f64)>,
    pub dist_solution: Option<(f64, f64)>,
    pub dist_set_or_violation: Option<(f64, f64)>,
    pub sq_dist_set: Option<(f64, f64)>,
    pub min_feas_residual: Option<f64>,
    pub f_evals: u64,
}

fn stats_of(values: impl Iterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| audit::mean_stderr(&v))
}

pub fn aggregate(traces: &[RunTrace]) -> Result<Vec<AggregateRow>> {
    let Some(first) = traces.first() else {
        return Ok(Vec::new());
    };
    if traces.iter().any(|t| t.records.len() != first.records.len()) {
        return Err(Error::invalid("traces", "trials recorded different iterations"));
    }
    Ok((0..first.records.len())
        .map(|i| {
            let at = || traces.iter().map(move |t| &t.records[i]);
            AggregateRow {
                k: first.records[i].k,
                alpha: first.records[i].alpha,
                trials: traces.len(),
                sq_dist_solution: stats_of(at().map(|r| r.sq_dist_solution)),
                dist_solution: stats_of(at().map(|r| r.sq_dist_solution.map(f64::sqrt))),
                dist_set_or_violation: stats_of(at().map(|r| r.dist_set_or_violation())),
                sq_dist_set: stats_of(at().map(|r| r.dist_set.map(|d| d * d))),
                min_feas_residual: audit::min_residual(at().map(|r| r.feas_residual)),
                f_evals: first.records[i].f_evals,
            }
        })
        .collect())
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let pair = |p: Option<(f64, f64)>| match p {
        Some((m, s)) => format!("{},{}", fmt_num(m), fmt_num(s)),
        None => ",".to_string(),
    };
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_opt(r.alpha),
            r.trials,
            pair(r.sq_dist_solution),
            pair(r.dist_solution),
            pair(r.dist_set_or_violation),
            pair(r.sq_dist_set),
            fmt_opt(r.min_feas_residual),
            r.f_evals
        );
    }
    out
}

/// Least-squares rate fit of the mean squared solution error over the tail
/// `k ∈ [T/2, T]`.
pub fn tail_rate_fit(rows: &[AggregateRow], iterations: usize) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.k >= 1 && 2 * r.k >= iterations)
        .filter_map(|r| r.sq_dist_solution.map(|(m, _)| (r.k as f64, m)))
        .collect();
    audit::rate_fit(&pts)
}

#[derive(Clone, Debug)]
pub struct GroupSummary {
    pub method: Method,
    pub batch: BatchSchedule,
    pub label: String,
    pub step: StepSchedule,
    pub trials: Vec<RunTrace>,
    pub aggregate: Vec<AggregateRow>,
    pub min_feas_residual: Option<f64>,
    pub feas_audit_passed: bool,
    pub all_finite: bool,
    pub rate_fit: Option<RateFit>,
    pub geometric: Option<GeometricReport>,
}

impl GroupSummary {
    pub fn final_row(&self) -> &AggregateRow {
        self.aggregate.last().expect("aggregate has the initial row")
    }

    /// Gating verdict: the per-trajectory residual audit, finiteness, and
    /// the geometric audit when enough trials were run.
    pub fn audits_passed(&self) -> bool {
        let geometric_ok = self
            .geometric
            .as_ref()
            .is_none_or(|g| g.too_few_trials || g.passed());
        self.feas_audit_passed && self.all_finite && geometric_ok
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub problem_kind: &'static str,
    pub groups: Vec<GroupSummary>,
    /// Figure-ordering observations; informational only.
    pub annotations: Vec<(String, String)>,
    pub output_dir: PathBuf,
}

impl ExperimentSummary {
    pub fn audits_passed(&self) -> bool {
        self.groups.iter().all(|g| g.audits_passed())
    }

    pub fn group(&self, method: Method, batch: BatchSchedule) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.method == method && g.batch == batch)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn step_schedule(method: Method, problem: &ProblemInstance, cap_override: bool) -> Result<StepSchedule> {
    let (mu, l) = (problem.mapping.mu(), problem.mapping.lipschitz());
    let step = StepSchedule::new(method, mu, l)?;
    if cap_override && matches!(method, Method::Projection | Method::Popov) {
        step.with_cap_override(StepSchedule::bigstep_cap(mu, l))
    } else {
        Ok(step)
    }
}

fn all_finite(trace: &RunTrace) -> bool {
    let ok = |v: Option<f64>| v.is_none_or(f64::is_finite);
    trace.final_x.values().iter().all(|v| v.is_finite())
        && trace.records.iter().all(|r| {
            ok(r.alpha)
                && ok(r.sq_dist_solution)
                && ok(r.dist_set)
                && ok(r.max_violation)
                && ok(r.feas_residual)
        })
}

/// `q_j` per agent, clamped below one, for the geometric audit.
fn agent_q(problem: &ProblemInstance, beta: f64) -> Result<Vec<Option<f64>>> {
    (0..problem.num_agents())
        .map(|j| {
            problem
                .family(j)
                .map(|f| compute_q(beta, f.regularity_c(), f.mg_bound(), true).map(|q| q.q))
                .transpose()
        })
        .collect()
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))
}

/// Runs every method × batch group and returns the traces and audits
/// without touching the file system.
pub fn run_groups(cfg: &ExperimentConfig, problem: &ProblemInstance) -> Result<Vec<GroupSummary>> {
    cfg.validate()?;
    let pool = thread_pool(cfg.workers)?;
    let options = RunOptions {
        record_every: cfg.record_every,
        initial: None,
    };
    let q = agent_q(problem, cfg.beta)?;
    let geometric_possible = problem.solution.is_some()
        && (0..problem.num_agents())
            .all(|j| problem.family(j).is_none_or(|f| f.exact_set_distance(&vec![0.0; f.dim()], &vec![0.0; problem.layout.total()]).is_some()))
        && q.iter().any(Option::is_some);

    let mut groups = Vec::new();
    for &batch in &cfg.batches {
        for &method in &cfg.methods {
            let step = step_schedule(method, problem, cfg.cap_override)?;
            let trials: Vec<RunTrace> = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|i| {
                        run(
                            problem,
                            &step,
                            &batch,
                            cfg.beta,
                            cfg.iterations,
                            cfg.base_seed.wrapping_add(i as u64),
                            &options,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let aggregate = aggregate(&trials)?;
            let min_feas_residual = audit::min_residual(trials.iter().map(|t| t.min_feas_residual));
            let geometric = if geometric_possible {
                let refs: Vec<&[IterationRecord]> = trials.iter().map(|t| t.records.as_slice()).collect();
                Some(audit::geometric_decay_audit(&refs, &q)?)
            } else {
                None
            };
            groups.push(GroupSummary {
                method,
                batch,
                label: format!("{}_{}", method.name(), batch.label()),
                step,
                feas_audit_passed: audit::residual_passes(min_feas_residual),
                all_finite: trials.iter().all(all_finite),
                rate_fit: tail_rate_fit(&aggregate, cfg.iterations).ok(),
                min_feas_residual,
                aggregate,
                geometric,
                trials,
            });
        }
    }
    Ok(groups)
}

fn final_mean(g: &GroupSummary) -> Option<f64> {
    g.final_row().sq_dist_solution.map(|(m, _)| m)
}

fn annotations(data: &ProblemData, groups: &[GroupSummary], cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let mut out = Vec::new();
    match data {
        ProblemData::MatrixGame(g) => {
            let kappa = g.lipschitz / g.mu;
            for &batch in &cfg.batches {
                let mut ranked: Vec<(f64, Method)> = groups
                    .iter()
                    .filter(|g| g.batch == batch)
                    .filter_map(|g| final_mean(g).map(|m| (m, g.method)))
                    .collect();
                ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
                if ranked.len() < 2 {
                    continue;
                }
                let order: Vec<&str> = ranked.iter().map(|(_, m)| m.name()).collect();
                let expected = if cfg.cap_override {
                    None
                } else if kappa < 10.0 {
                    Some(Method::Popov)
                } else {
                    Some(Method::Korpelevich)
                };
                let prefix = format!("annotation.{}", batch.label());
                out.push((format!("{prefix}.final_error_order"), order.join("<")));
                if let Some(e) = expected {
                    if ranked.iter().any(|(_, m)| *m == e) {
                        out.push((format!("{prefix}.expected_best"), e.name().to_string()));
                        out.push((format!("{prefix}.matches_expected"), (ranked[0].1 == e).to_string()));
                    }
                }
            }
        }
        ProblemData::Imitation(_) => {
            for &method in &cfg.methods {
                let final_sq_set = |b: BatchSchedule| {
                    groups
                        .iter()
                        .find(|g| g.method == method && g.batch == b)
                        .and_then(|g| g.final_row().sq_dist_set.map(|(m, _)| m))
                };
                if let (Some(log), Some(one)) = (
                    final_sq_set(BatchSchedule::LogTen),
                    final_sq_set(BatchSchedule::Constant(1)),
                ) {
                    out.push((
                        format!("annotation.{}.log10_le_const1", method.name()),
                        (log <= one).to_string(),
                    ));
                }
            }
        }
    }
    out
}

fn summary_text(cfg: &ExperimentConfig, data: &ProblemData, problem: &ProblemInstance, summary: &ExperimentSummary) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("csv_schema", CSV_SCHEMA_VERSION.to_string());
    kv("problem", data.kind().to_string());
    kv("mu", fmt_num(problem.mapping.mu()));
    kv("lipschitz", fmt_num(problem.mapping.lipschitz()));
    for j in 0..problem.num_agents() {
        if let Some(f) = problem.family(j) {
            kv(&format!("agent{}.mg", j + 1), fmt_num(f.mg_bound()));
            kv(&format!("agent{}.c", j + 1), fmt_num(f.regularity_c()));
            if let Ok(q) = compute_q(cfg.beta, f.regularity_c(), f.mg_bound(), true) {
                kv(&format!("agent{}.q", j + 1), fmt_num(q.q));
            }
        }
    }
    kv("beta", fmt_num(cfg.beta));
    kv("trials", cfg.trials.to_string());
    kv("iterations", cfg.iterations.to_string());
    kv("base_seed", cfg.base_seed.to_string());
    kv("cap_override", cfg.cap_override.to_string());
    for g in &summary.groups {
        let p = &g.label;
        let row = g.final_row();
        if let Some((m, se)) = row.sq_dist_solution {
            kv(&format!("{p}.final_mean_sq_dist_solution"), fmt_num(m));
            kv(&format!("{p}.final_stderr_sq_dist_solution"), fmt_num(se));
        }
        if let Some((m, se)) = row.dist_set_or_violation {
            let name = if row.sq_dist_set.is_some() { "dist_set" } else { "max_violation" };
            kv(&format!("{p}.final_mean_{name}"), fmt_num(m));
            kv(&format!("{p}.final_stderr_{name}"), fmt_num(se));
        }
        if let Some((m, _)) = row.sq_dist_set {
            kv(&format!("{p}.final_mean_sq_dist_set"), fmt_num(m));
        }
        kv(&format!("{p}.alpha0"), fmt_num(g.step.alpha(0)));
        kv(&format!("{p}.alpha1"), fmt_num(g.step.alpha(1)));
        kv(&format!("{p}.steps_within_theorem"), g.trials.iter().all(|t| t.steps_within_theorem).to_string());
        kv(&format!("{p}.f_evals"), g.final_row().f_evals.to_string());
        kv(&format!("{p}.min_feas_residual"), fmt_opt(g.min_feas_residual));
        kv(&format!("{p}.feas_audit"), verdict(g.feas_audit_passed));
        kv(&format!("{p}.finite"), g.all_finite.to_string());
        match &g.rate_fit {
            Some(f) => {
                kv(&format!("{p}.rate_exponent"), fmt_num(f.exponent));
                kv(&format!("{p}.rate_constant"), fmt_num(f.constant));
            }
            None => kv(&format!("{p}.rate_exponent"), String::new()),
        }
        if let Some(geo) = &g.geometric {
            kv(&format!("{p}.geometric_audit"), verdict(geo.passed()));
            kv(&format!("{p}.geometric_checks"), geo.checks.len().to_string());
            kv(&format!("{p}.geometric_violations"), geo.violations().count().to_string());
            kv(&format!("{p}.geometric_too_few_trials"), geo.too_few_trials.to_string());
        }
    }
    for (k, v) in &summary.annotations {
        kv(k, v.clone());
    }
    kv("audits", verdict(summary.audits_passed()));
    s
}

fn verdict(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

/// Builds the problem, runs every group, writes all outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let data = cfg.problem.build()?;
    run_experiment_on(cfg, &data)
}

pub fn run_experiment_on(cfg: &ExperimentConfig, data: &ProblemData) -> Result<ExperimentSummary> {
    let problem = data.instance()?;
    let groups = run_groups(cfg, &problem)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("config.toml"), &cfg.to_toml())?;
    if cfg.save_instance {
        instance_io::save_problem(data, &dir.join("instance.rfvi"))?;
    }
    for g in &groups {
        if cfg.write_trials {
            g.trials
                .par_iter()
                .enumerate()
                .try_for_each(|(i, t)| {
                    write_file(&dir.join(format!("{}_trial{i:04}.csv", g.label)), &trace_csv(&t.records))
                })?;
        }
        write_file(
            &dir.join(format!("{}_aggregate.csv", g.label)),
            &aggregate_csv(&g.aggregate),
        )?;
    }
    let annotations = annotations(data, &groups, cfg);
    let summary = ExperimentSummary {
        problem_kind: data.kind(),
        groups,
        annotations,
        output_dir: dir.clone(),
    };
    write_file(&dir.join("summary.txt"), &summary_text(cfg, data, &problem, &summary))?;
    Ok(summary)
}

/// Result of re-auditing a directory of per-trial CSV files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceDirReport {
    pub files: usize,
    pub rows: usize,
    pub min_feas_residual: Option<f64>,
    pub nonfinite_values: usize,
    /// Tail rate fit per `{method}_{batch}` group, when computable.
    pub rate_fits: BTreeMap<String, Option<RateFit>>,
}

impl TraceDirReport {
    pub fn passed(&self) -> bool {
        self.files > 0 && self.nonfinite_values == 0 && audit::residual_passes(self.min_feas_residual)
    }
}

fn parse_trace(path: &Path, text: &str) -> Result<Vec<Vec<Option<f64>>>> {
    let fmt = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fmt("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 7 || cols[0] != "k" || cols[cols.len() - 1] != "f_evals" {
        return Err(fmt(format!("unexpected header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(fmt(format!("line {}: expected {} fields", i + 2, cols.len())));
            }
            fields
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|_| fmt(format!("line {}: bad number `{f}`", i + 2)))
                    }
                })
                .collect()
        })
        .collect()
}

/// Re-audits every `*_trial*.csv` file in `dir`.
pub fn audit_trace_dir(dir: &Path) -> Result<TraceDirReport> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.contains("_trial") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    let mut report = TraceDirReport::default();
    // group -> k -> (sum, count) of sq_dist_solution
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    let mut iterations: BTreeMap<String, u64> = BTreeMap::new();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows = parse_trace(path, &text)?;
        let ncols = rows.first().map_or(0, Vec::len);
        let group = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.split("_trial").next())
            .unwrap_or_default()
            .to_string();
        report.files += 1;
        report.rows += rows.len();
        for row in &rows {
            report.nonfinite_values += row.iter().flatten().filter(|v| !v.is_finite()).count();
            let resid = row[ncols - 2];
            report.min_feas_residual = audit::min_residual([report.min_feas_residual, resid]);
            if let (Some(k), Some(e)) = (row[0], row[ncols - 4]) {
                let slot = groups.entry(group.clone()).or_default().entry(k as u64).or_insert((0.0, 0));
                slot.0 += e;
                slot.1 += 1;
                let it = iterations.entry(group.clone()).or_insert(0);
                *it = (*it).max(k as u64);
            }
        }
    }
    for (group, by_k) in groups {
        let t = iterations[&group];
        let pts: Vec<(f64, f64)> = by_k
            .iter()
            .filter(|(k, _)| **k >= 1 && 2 * **k >= t)
            .map(|(k, (s, n))| (*k as f64, s / *n as f64))
            .collect();
        report.rate_fits.insert(group, audit::rate_fit(&pts).ok());
    }
    Ok(report)
}

/// Human-readable constants of a problem: μ, L and per-agent `M_g`, `c`, `q`.
pub fn calibration_report(data: &ProblemData, beta: f64) -> Result<String> {
    let problem = data.instance()?;
    let mut s = String::new();
    let _ = writeln!(s, "problem={}", data.kind());
    let _ = writeln!(s, "mu={}", fmt_num(problem.mapping.mu()));
    let _ = writeln!(s, "lipschitz={}", fmt_num(problem.mapping.lipschitz()));
    let _ = writeln!(s, "kappa={}", fmt_num(problem.mapping.condition_number()));
    for j in 0..problem.num_agents() {
        match problem.family(j) {
            None => {
                let _ = writeln!(s, "agent{}=direct projection", j + 1);
            }
            Some(f) => {
                let q = compute_q(beta, f.regularity_c(), f.mg_bound(), true)?;
                let _ = writeln!(s, "agent{}.mg={}", j + 1, fmt_num(f.mg_bound()));
                let _ = writeln!(s, "agent{}.c={}", j + 1, fmt_num(f.regularity_c()));
                let _ = writeln!(s, "agent{}.q={}", j + 1, fmt_num(q.q));
                let _ = writeln!(s, "agent{}.q_clamped={}", j + 1, q.clamped);
            }
        }
    }
    if let ProblemData::MatrixGame(g) = data {
        let cert = g.certify();
        let _ = writeln!(s, "certified={}", cert.passed());
        for (a, agent) in g.agents.iter().enumerate() {
            let sol = g.agent_solution(a);
            let tight = g.trajectory_mg(a, &[sol]);
            let _ = writeln!(s, "agent{}.mg_at_solution={}", a + 1, fmt_num(tight));
            let _ = writeln!(s, "agent{}.constraints={}", a + 1, agent.constraints.len());
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ImitationGameParams;

    fn small_imitation(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemConfig::Imitation(ImitationGameParams::default()),
            methods: Method::ALL.to_vec(),
            batches: vec![BatchSchedule::Constant(1), BatchSchedule::LogTen],
            beta: 1.0,
            trials: 4,
            iterations: 30,
            base_seed: 7,
            output_dir: dir.to_path_buf(),
            cap_override: false,
            record_every: 1,
            write_trials: true,
            workers: 2,
            save_instance: true,
        }
    }

    #[test]
    fn number_format_roundtrips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e10] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn single_iteration_has_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_imitation(dir.path());
        cfg.trials = 1;
        cfg.iterations = 1;
        cfg.methods = vec![Method::Popov];
        cfg.batches = vec![BatchSchedule::Constant(1)];
        run_experiment(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("popov_const1_trial0000.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,,0,0,"));
        assert!(lines[2].starts_with("1,"));
    }

    #[test]
    fn outputs_audits_and_parallel_determinism() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg_a = small_imitation(a.path());
        let mut cfg_b = small_imitation(b.path());
        cfg_b.workers = 1;
        let s = run_experiment(&cfg_a).unwrap();
        run_experiment(&cfg_b).unwrap();
        assert_eq!(s.groups.len(), 6);
        assert!(s.audits_passed());
        let mut names: Vec<String> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names.iter().filter(|n| n.contains("_trial")).count(), 24);
        assert_eq!(names.iter().filter(|n| n.ends_with("_aggregate.csv")).count(), 6);
        for n in &names {
            if n == "config.toml" {
                continue;
            }
            let x = std::fs::read(a.path().join(n)).unwrap();
            let y = std::fs::read(b.path().join(n)).unwrap();
            assert!(x == y, "{n} differs between worker counts");
        }
        let summary = std::fs::read_to_string(a.path().join("summary.txt")).unwrap();
        assert!(summary.contains("audits=pass"));
        assert!(summary.contains("annotation.popov.log10_le_const1="));

        let report = audit_trace_dir(a.path()).unwrap();
        assert!(report.passed());
        assert_eq!(report.files, 24);
        assert_eq!(report.rows, 24 * 31);

        let loaded = instance_io::load_problem(&a.path().join("instance.rfvi")).unwrap();
        assert_eq!(loaded.kind(), "imitation");
    }

    #[test]
    fn trace_dir_audit_flags_negative_residual() {
        let dir = tempfile::tempdir().unwrap();
        let good = format!("{TRACE_HEADER}\n0,,0,0,1.0,0.5,,0\n1,0.1,0,1,0.5,0.2,0.0,1\n");
        std::fs::write(dir.path().join("projection_const1_trial0000.csv"), &good).unwrap();
        assert!(audit_trace_dir(dir.path()).unwrap().passed());
        let bad = good.replace(",0.0,1\n", ",-1e-6,1\n");
        std::fs::write(dir.path().join("projection_const1_trial0001.csv"), bad).unwrap();
        let r = audit_trace_dir(dir.path()).unwrap();
        assert!(!r.passed());
        assert_eq!(r.min_feas_residual, Some(-1e-6));
        std::fs::write(dir.path().join("x_trial0002.csv"), "nonsense\n").unwrap();
        assert!(audit_trace_dir(dir.path()).is_err());
    }

    #[test]
    fn calibration_report_lists_constants() {
        let data = ProblemConfig::Imitation(ImitationGameParams::default()).build().unwrap();
        let r = calibration_report(&data, 1.0).unwrap();
        assert!(r.contains("agent1=direct projection"));
        assert!(r.contains("agent2.q="));
    }
}
