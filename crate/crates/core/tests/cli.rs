use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rfvi");

fn rfvi(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CONFIG: &str = r#"
[experiment]
methods = ["projection", "korpelevich", "popov"]
batches = ["1", "log10"]
beta = 1.0
trials = 2
iterations = 25
base_seed = 4

[imitation]
xi_max = 0.1
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn count(dir: &Path, pred: impl Fn(&str) -> bool) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| pred(&e.as_ref().unwrap().file_name().to_string_lossy()))
        .count()
}

#[test]
fn run_then_audit_then_calibrate_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("results");
    let out_s = out.to_str().unwrap();
    let o = rfvi(&["run", "--config", &cfg, "--out", out_s, "--save-instance", "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("popov_log10"));
    assert_eq!(count(&out, |n| n.contains("_trial")), 3 * 2 * 2);
    assert_eq!(count(&out, |n| n.ends_with("_aggregate.csv")), 6);
    for f in ["summary.txt", "config.toml", "instance.rfvi"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.starts_with("csv_schema=1\n"));
    assert!(summary.contains("audits=pass"));
    let trial = std::fs::read_to_string(out.join("projection_const1_trial0001.csv")).unwrap();
    assert_eq!(
        trial.lines().next().unwrap(),
        "k,alpha,N_agent1,N_agent2,sq_dist_solution,dist_set_or_violation,feas_residual,f_evals"
    );
    assert_eq!(trial.lines().count(), 27);

    // The written config reproduces the run.
    let again = dir.path().join("again");
    let o = rfvi(&["run", "--config", out.join("config.toml").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = std::fs::read(out.join("korpelevich_log10_trial0000.csv")).unwrap();
    let b = std::fs::read(again.join("korpelevich_log10_trial0000.csv")).unwrap();
    assert_eq!(a, b);

    let o = rfvi(&["audit", "--trace-dir", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("files=12 rows=312"));
    assert!(stdout(&o).contains("audit=pass"));

    let o = rfvi(&["calibrate", "--instance", out.join("instance.rfvi").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("problem=imitation"));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("r");
    let o = rfvi(&[
        "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--trials", "1", "--iters", "1", "--seed", "9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(count(&out, |n| n.contains("_trial")), 6);
    let t = std::fs::read_to_string(out.join("popov_const1_trial0000.csv")).unwrap();
    assert_eq!(t.lines().count(), 3);
    let written = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("base_seed = 9"));
}

#[test]
fn audit_fails_on_negative_residual() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("popov_const1_trial0000.csv"),
        "k,alpha,N_agent1,N_agent2,sq_dist_solution,dist_set_or_violation,feas_residual,f_evals\n\
         0,,0,0,1.0,0.1,,1\n1,0.5,0,1,0.5,0.1,-1.0e-3,2\n",
    )
    .unwrap();
    let o = rfvi(&["audit", "--trace-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("audit=fail"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("beta = 1.0", "beta = 3.0"));
    let o = rfvi(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exp.toml:5:"), "{}", stderr(&o));
}

#[test]
fn usage_errors_and_presets() {
    assert_eq!(rfvi(&["run"]).status.code(), Some(2));
    assert_eq!(rfvi(&["run", "--preset", "mg-k3", "--config", "x.toml"]).status.code(), Some(2));
    let o = rfvi(&["run", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"));
    let o = rfvi(&["presets"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 5);
    let o = rfvi(&["calibrate", "--preset", "imitation"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("agent2.q="));
    let o = rfvi(&["audit", "--trace-dir", "/nonexistent/dir"]);
    assert_eq!(o.status.code(), Some(2));
}
