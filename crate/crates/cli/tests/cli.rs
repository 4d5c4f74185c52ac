use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn riskbounds(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskbounds"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|it| {
            it.map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

#[test]
fn interval_audit_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = riskbounds(
        tmp.path(),
        &["audit", "--scheme", "intervals", "--out-dir", "a"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/audit.json")).unwrap())
            .unwrap();
    assert_eq!(report["stable"], true);
    assert_eq!(report["homogeneous"], true);
    assert_eq!(
        listing(&tmp.path().join("a")),
        ["audit.json", "config.toml"]
    );
}

#[test]
fn experiment_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "experiment",
        "--bound",
        "k_over_n_plus_1",
        "--scheme",
        "svm",
        "--n",
        "99",
        "--trials",
        "300",
        "--out-dir",
        "run",
    ];
    let first = riskbounds(tmp.path(), &args);
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    let table = fs::read(tmp.path().join("run/risk_table.csv")).unwrap();
    let report = fs::read(tmp.path().join("run/bound_report.json")).unwrap();
    let second = riskbounds(tmp.path(), &args);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(
        fs::read(tmp.path().join("run/risk_table.csv")).unwrap(),
        table
    );
    assert_eq!(
        fs::read(tmp.path().join("run/bound_report.json")).unwrap(),
        report
    );
    assert!(String::from_utf8(table)
        .unwrap()
        .starts_with("learner_id,n,trial,seed,risk,excess,aux,status\n"));
    assert!(stdout(&first).contains("PASS bound k_over_n_plus_1"));
}

#[test]
fn saved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = riskbounds(
        tmp.path(),
        &[
            "compress",
            "--scheme",
            "rectangles",
            "--n",
            "20,40",
            "--trials",
            "50",
            "--seed",
            "4",
            "--out-dir",
            "a",
        ],
    );
    // at 50 trials the rectangle bound may or may not clear its 3 SE margin;
    // only reproduction matters here
    let again = riskbounds(
        tmp.path(),
        &["compress", "--config", "a/config.toml", "--out-dir", "b"],
    );
    assert_eq!(again.status.code(), out.status.code(), "{}", stdout(&again));
    assert_eq!(
        fs::read(tmp.path().join("a/risk_table.csv")).unwrap(),
        fs::read(tmp.path().join("b/risk_table.csv")).unwrap()
    );
}

#[test]
fn json_format_writes_a_json_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = riskbounds(
        tmp.path(),
        &[
            "svm",
            "--n",
            "30",
            "--trials",
            "20",
            "--format",
            "json",
            "--out-dir",
            "j",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let table: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("j/risk_table.json")).unwrap())
            .unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 20);
}

#[test]
fn bad_config_exits_2_and_names_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("bad.toml"),
        "subcommand = \"entropy\"\nn_grid = [400, 200]\n[entropy]\nepsilonn = [0.1]\n",
    )
    .unwrap();
    let out = riskbounds(
        tmp.path(),
        &["entropy", "--config", "bad.toml", "--out-dir", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("did you mean `epsilon`"), "{err}");
    assert!(err.contains("n_grid not increasing"), "{err}");
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn failed_check_exits_1() {
    // the prefix scheme keeps the first k points in draw order, so the
    // audit finds it order dependent
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("prefix.toml"),
        r#"
subcommand = "audit"
[learner]
scheme = "prefix"
k = 3
[distribution]
marginal = { kind = "uniform-ball", dim = 1 }
noise = { kind = "realizable", target = { kind = "interval", lo = -0.3, hi = 0.4 } }
[audit]
samples = 20
"#,
    )
    .unwrap();
    let out = riskbounds(
        tmp.path(),
        &["audit", "--config", "prefix.toml", "--out-dir", "p"],
    );
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL permutation invariant"));
    assert!(tmp.path().join("p/audit.json").exists());
}

#[test]
fn run_error_exits_3_without_partial_files() {
    // 100 trials at delta = 0.05 cannot resolve a 95% quantile bound
    let tmp = tempfile::tempdir().unwrap();
    let out = riskbounds(
        tmp.path(),
        &[
            "experiment",
            "--scheme",
            "intervals",
            "--bound",
            "deviation_k_log",
            "--n",
            "50",
            "--trials",
            "100",
            "--out-dir",
            "r",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("precision"));
    assert!(listing(&tmp.path().join("r")).is_empty());
}
