//! Command-line surface: exit codes, CSV schema, config-file precedence,
//! and report reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tidlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmpfile(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("tidlab_cli_{name}_{}", std::process::id()))
}

#[test]
fn classify_exit_codes() {
    // recurrent attractive critical triple
    let out = run(&["classify", "--rho", "-1", "--alpha", "1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("recurrence: recurrent"));
    assert!(text.contains("normalization: sqrt(t)"));
    assert!(text.contains("N(0,0.3333333333333333)"));
    assert!(text.contains("rule: critical-attractive"));

    // outside the validity region -> exit 2
    let out = run(&["classify", "--rho", "-1", "--alpha", "-2", "--beta", "0"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("validity"), "{err}");

    // driftless
    let out = run(&["classify", "--rho", "0", "--alpha", "7", "--beta", "-2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("rule: driftless"));

    // parse error -> exit 1
    let out = run(&["classify", "--rho", "not-a-number"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let out = run(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn classify_json_regime() {
    let out = run(&[
        "classify", "--rho", "1", "--alpha", "-1", "--beta", "0", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["regime"]["rule"], "bessel");
    assert_eq!(v["regime"]["recurrence"], "Transient");
    assert_eq!(v["regime"]["law"]["SqrtGamma"]["shape"], 1.5);
}

#[test]
fn sweep_schema_and_error_cells() {
    let out = run(&[
        "sweep",
        "--rho-list",
        "-1,0,1",
        "--alpha-list",
        "-2,0,3",
        "--beta-list",
        "0,1,3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "rho,alpha,beta,validity,recurrence,normalization,law,envelope,check_stat,check_pass,error"
    );
    assert_eq!(lines.len(), 1 + 27, "3x3x3 grid completes with 27 rows");
    assert!(lines.iter().any(|l| l.contains("outside-validity-region")));
    // repulsive alpha > 1 at 2 beta <= alpha + 1 explodes almost surely
    let explosive: Vec<&&str> = lines
        .iter()
        .filter(|l| l.starts_with("1.0") && l.contains(",3.0") && l.contains(",explodes,"))
        .collect();
    assert!(!explosive.is_empty());
}

#[test]
fn sweep_attractive_slice_recurrent() {
    let out = run(&[
        "sweep",
        "--rho-list",
        "-1",
        "--alpha-list",
        "-0.5,0,0.5,1,2,4",
        "--beta-list",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        assert!(
            line.contains(",recurrent,"),
            "attractive beta=0 row not recurrent: {line}"
        );
    }
}

#[test]
fn config_file_with_cli_override() {
    let cfg_path = tmpfile("config.txt");
    std::fs::write(
        &cfg_path,
        "# flat config\nrho = -1\nalpha = 1\nbeta = 1\nn = 64\nhorizon = 5\ndt = 0.01\nseed = 11\n",
    )
    .unwrap();
    // CLI --rho overrides the file's rho; the rest comes from the file.
    let out = run(&[
        "classify",
        "--config",
        cfg_path.to_str().unwrap(),
        "--rho",
        "0.25",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["params"]["rho"], 0.25);
    assert_eq!(v["params"]["alpha"], 1.0);
    assert_eq!(v["regime"]["rule"], "linear-critical-subdiffusive");
    let _ = std::fs::remove_file(cfg_path);
}

#[test]
fn missing_config_file_is_io_error() {
    let out = run(&[
        "classify",
        "--config",
        "/nonexistent/path/cfg.txt",
        "--rho",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
}

#[test]
fn simulate_csv_and_unwritable_output() {
    let out_path = tmpfile("path.csv");
    let out = run(&[
        "simulate",
        "--rho",
        "0",
        "--alpha",
        "0",
        "--beta",
        "0",
        "--x0",
        "0",
        "--horizon",
        "2",
        "--dt",
        "0.01",
        "--seed",
        "3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("1.0000000000000000e0,"));
    assert_eq!(
        text.lines().count(),
        1 + 101,
        "initial point plus 100 steps"
    );
    let _ = std::fs::remove_file(&out_path);

    let out = run(&[
        "simulate",
        "--rho",
        "0",
        "--alpha",
        "0",
        "--beta",
        "0",
        "--horizon",
        "2",
        "--out",
        "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_reports_checks_and_exit_code() {
    let report_path = tmpfile("verify.json");
    // quick verify on the stationary attractive case at small n
    let out = run(&[
        "verify",
        "--rho",
        "-1",
        "--alpha",
        "1",
        "--beta",
        "0",
        "--x0",
        "1",
        "--n",
        "400",
        "--horizon",
        "30",
        "--dt",
        "0.005",
        "--seed",
        "21",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["seed"], 21);
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"].as_str().unwrap().starts_with("limit-law-ks")));
    let _ = std::fs::remove_file(&report_path);

    // a deliberately undersized horizon fails the KS check -> exit 3
    let out = run(&[
        "verify",
        "--rho",
        "-1",
        "--alpha",
        "1",
        "--beta",
        "0",
        "--x0",
        "5",
        "--n",
        "400",
        "--horizon",
        "1.05",
        "--dt",
        "0.005",
        "--seed",
        "21",
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn verify_bessel_law() {
    // the radial case: the limit-law check runs against the sqrt-Gamma law
    let out = run(&[
        "verify",
        "--rho",
        "1",
        "--alpha",
        "-1",
        "--beta",
        "0",
        "--x0",
        "0",
        "--n",
        "400",
        "--horizon",
        "100",
        "--dt",
        "0.005",
        "--seed",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["regime"]["rule"], "bessel");
    let law_check = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str().unwrap().starts_with("limit-law-ks"))
        .expect("law check present");
    assert!(law_check["name"]
        .as_str()
        .unwrap()
        .contains("sqrt-gamma(1.5,2)"));
    assert_eq!(law_check["pass"], true);
}

#[test]
fn verify_partial_explosion_band() {
    // dual estimators agree and the survivors' law check is n-aware
    let out = run(&[
        "verify",
        "--rho",
        "1",
        "--alpha",
        "3",
        "--beta",
        "3",
        "--x0",
        "1",
        "--n",
        "400",
        "--horizon",
        "500",
        "--dt",
        "0.005",
        "--seed",
        "31",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["regime"]["recurrence"], "ExplodesWithPartialProbability");
    let names: Vec<String> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert!(
        names.iter().any(|n| n.starts_with("limit-law-ks")),
        "{names:?}"
    );
    assert!(
        names
            .iter()
            .any(|n| n == "partial-explosion-dual-estimators"),
        "{names:?}"
    );
}

#[test]
fn explosion_subcommand_dual_estimators() {
    let out = run(&[
        "explosion",
        "--rho",
        "1",
        "--alpha",
        "3",
        "--beta",
        "3",
        "--x0",
        "1",
        "--n",
        "200",
        "--horizon",
        "200",
        "--dt",
        "0.005",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let direct = v["direct"]["estimate"]["value"].as_f64().unwrap();
    let girsanov = v["girsanov"]["estimate"]["value"].as_f64().unwrap();
    assert!(direct > 0.0 && direct < 1.0);
    assert!(girsanov > 0.0 && girsanov < 1.0);
    // below the partial-explosion band there is no bridge representation
    let out = run(&[
        "explosion",
        "--rho",
        "1",
        "--alpha",
        "3",
        "--beta",
        "0",
        "--n",
        "50",
        "--horizon",
        "50",
        "--dt",
        "0.002",
        "--seed",
        "5",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["girsanov"].is_null());
    assert!(v["direct"]["estimate"]["value"].as_f64().unwrap() >= 0.99);
}

#[test]
fn ensemble_csv_deterministic_for_fixed_seed() {
    let args = [
        "ensemble",
        "--rho",
        "0.5",
        "--alpha",
        "0",
        "--beta",
        "1",
        "--x0",
        "1",
        "--n",
        "50",
        "--horizon",
        "3",
        "--dt",
        "0.01",
        "--seed",
        "77",
        "--functional",
        "terminal-raw",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("index,value"));
    assert_eq!(text.lines().count(), 51);
}
