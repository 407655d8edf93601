//! End-to-end checks of the binary: flags, exit codes, file outputs, and
//! the JSON report schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spillover_iv::fixtures;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_spillover-iv")
}

fn write_config(dir: &Path, name: &str, spec: &spillover_iv::PopulationSpec) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, spec.to_json().unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn simulate_writes_expected_rows_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "p1.json", &fixtures::p1());
    let out = dir.path().join("data.csv");
    let output = Command::new(bin())
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--n-groups", "1000", "--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("spec digest:"), "{stdout}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "group_id,unit_id,z,d,y");
    assert_eq!(lines.len(), 1 + 2_000); // pairs: two rows per group
}

#[test]
fn simulate_rejects_bad_config_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = fixtures::p1();
    spec.profiles[0].prob = 0.28; // sums to 0.98
    let config = write_config(dir.path(), "bad.json", &spec);
    let out = dir.path().join("data.csv");
    let output = Command::new(bin())
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--n-groups", "10", "--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(err["error"].as_str().unwrap().contains("0.98"), "{err}");
}

#[test]
fn simulate_rejects_irrelevance_violating_profile() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = fixtures::p0();
    spec.profiles[0].types = spillover_iv::GroupProfile::from_letters("AS").unwrap();
    spec.mu.table.insert(
        spillover_iv::ComplianceType::SocialComplier,
        spillover_iv::model::MuRow { d0: vec![0.7, 0.7], d1: vec![1.7, 1.7] },
    );
    let config = write_config(dir.path(), "as.json", &spec);
    let out = dir.path().join("data.csv");
    let output = Command::new(bin())
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--n-groups", "10", "--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("irrelevance"));
}

#[test]
fn oracle_passes_on_fixtures_and_reports_identities() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [fixtures::p0(), fixtures::p1(), fixtures::p2()] {
        let config = write_config(dir.path(), "spec.json", &spec);
        let out = dir.path().join("oracle.json");
        let output = Command::new(bin())
            .args(["oracle", "--config"])
            .arg(&config)
            .args(["--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "{output:?}");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(report["identities"]["pass"].as_bool().unwrap());
        assert!(report["bound_validity"]["pass"].as_bool().unwrap());
        assert!(report["truths"]["tauD0"]["value"].is_number());
    }
}

#[test]
fn oracle_refuses_inadmissible_spec_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = fixtures::p0();
    spec.profiles[0].types = spillover_iv::GroupProfile::from_letters("AS").unwrap();
    spec.mu.table.insert(
        spillover_iv::ComplianceType::SocialComplier,
        spillover_iv::model::MuRow { d0: vec![0.7, 0.7], d1: vec![1.7, 1.7] },
    );
    let config = write_config(dir.path(), "as.json", &spec);
    let out = dir.path().join("oracle.json");
    let output = Command::new(bin())
        .args(["oracle", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

fn simulate_to(dir: &Path, spec: &spillover_iv::PopulationSpec, n: &str, seed: &str) -> PathBuf {
    let config = write_config(dir, "sim_spec.json", spec);
    let out = dir.join("data.csv");
    let output = Command::new(bin())
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--n-groups", n, "--seed", seed, "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    out
}

#[test]
fn bounds_reports_four_intervals_on_pairs_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_to(dir.path(), &fixtures::p1(), "20000", "7");
    let out = dir.path().join("bounds.json");
    let output = Command::new(bin())
        .args(["bounds", "--data"])
        .arg(&data)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let intervals = report["intervals"].as_array().unwrap();
    assert_eq!(intervals.len(), 4);
    let ids: Vec<&str> =
        intervals.iter().map(|iv| iv["estimand"].as_str().unwrap()).collect();
    assert_eq!(ids, ["tauD0", "tauD1", "tauS0", "tauS1"]);
    for iv in intervals {
        assert!(iv["exists"].as_bool().unwrap());
        assert!(iv["denominators"].is_object());
        assert!(iv["fallbacks_used"].is_array());
    }
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("tauD1"), "{stdout}");
}

#[test]
fn bounds_refuses_multi_spillovers_without_osnc_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_to(dir.path(), &fixtures::p2(), "5000", "3");
    let out = dir.path().join("bounds.json");
    let output = Command::new(bin())
        .args(["bounds", "--data"])
        .arg(&data)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["intervals"].as_array().unwrap().len(), 2);
    let skipped = report["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 2);
    assert!(skipped[0]["reason"]
        .as_str()
        .unwrap()
        .contains("one-sided-noncompliance flag"));

    // with the flag, the screen passes on this population and the
    // spillovers come back, tauS0 as a point
    let output = Command::new(bin())
        .args(["bounds", "--data"])
        .arg(&data)
        .args(["--osnc", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["intervals"].as_array().unwrap().len(), 4);
    assert!(report["osnc_screen"]["pass"].as_bool().unwrap());
    let s0 = &report["intervals"].as_array().unwrap()[2];
    assert_eq!(s0["estimand"], "tauS0");
    assert!(s0["point_identified"].as_bool().unwrap());
}

#[test]
fn bounds_rejects_malformed_csv_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "group_id,unit_id,z,d,y\n0,0,2,1,1.0\n0,1,0,0,0.5\n").unwrap();
    let out = dir.path().join("bounds.json");
    let output = Command::new(bin())
        .args(["bounds", "--data"])
        .arg(&data)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("z must be 0 or 1"));
}

#[test]
fn bounds_fallback_flag_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    // a population without all-never-taker pairs: the lower anchor of the
    // untreated-peers direct bound needs a fallback once social
    // compliers keep it from point identification
    let mut spec = fixtures::p1();
    spec.profiles[2].prob = 0.0; // (N,N)
    spec.profiles[0].prob += 0.15;
    spec.profiles[7] = spillover_iv::model::WeightedProfile {
        types: spillover_iv::GroupProfile::from_letters("SC").unwrap(),
        prob: 0.1,
    };
    spec.mu.table.insert(
        spillover_iv::ComplianceType::SocialComplier,
        spillover_iv::model::MuRow { d0: vec![0.7, 1.0], d1: vec![1.7, 2.0] },
    );
    let data = simulate_to(dir.path(), &spec.validated().unwrap(), "30000", "5");
    let out = dir.path().join("bounds.json");
    let output = Command::new(bin())
        .args(["bounds", "--data"])
        .arg(&data)
        .args(["--fallback", "support-bounds", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let d0 = &report["intervals"][0];
    assert_eq!(d0["fallbacks_used"][0], "ymin", "{d0}");

    let output = Command::new(bin())
        .args(["bounds", "--data"])
        .arg(&data)
        .args(["--fallback", "refuse", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["intervals"][0]["lower"].is_null(), "{}", report["intervals"][0]);
}

#[test]
fn diagnose_flags_interference_and_errors_on_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_to(dir.path(), &fixtures::p1(), "200000", "9");
    let out = dir.path().join("diag.json");
    let output = Command::new(bin())
        .args(["diagnose", "--data"])
        .arg(&data)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!report["sutva"]["pass"].as_bool().unwrap());
    assert!(report["irrelevance"]["pass"].as_bool().unwrap());
    let shares = report["type_shares"].as_array().unwrap();
    let nn = shares.iter().find(|s| s["name"] == "p_nn").unwrap();
    assert!((nn["value"].as_f64().unwrap() - 0.2).abs() < 0.02);

    // all-assigned data: three cells empty
    let csv = "group_id,unit_id,z,d,y\n0,0,1,1,1.0\n0,1,1,1,1.0\n1,0,1,1,1.0\n1,1,1,1,1.0\n";
    let bad = dir.path().join("allz.csv");
    std::fs::write(&bad, csv).unwrap();
    let output = Command::new(bin())
        .args(["diagnose", "--data"])
        .arg(&bad)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("empty moment cell"));
}

#[test]
fn search_exits_zero_on_both_families_and_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("search.json");
    for m in ["1", "2"] {
        let output = Command::new(bin())
            .args(["search", "--trials", "50", "--seed", "1", "--m", m, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "{output:?}");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report["counterexamples"].as_array().unwrap().len(), 0);
    }
    let output = Command::new(bin())
        .args(["search", "--trials", "0", "--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn montecarlo_single_rep_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "p1.json", &fixtures::p1());
    let out1 = dir.path().join("mc1.json");
    let out2 = dir.path().join("mc2.json");
    for out in [&out1, &out2] {
        let output = Command::new(bin())
            .args(["montecarlo", "--config"])
            .arg(&config)
            .args(["--n-groups", "1000", "--reps", "3", "--seed", "7", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "{output:?}");
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out1).unwrap()).unwrap();
    assert!(report["estimands"]["tauD0"]["n_complete"].is_number());
}

#[test]
fn checked_in_fixture_configs_match_the_library() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for (name, spec) in [
        ("p0.json", fixtures::p0()),
        ("p1.json", fixtures::p1()),
        ("p2.json", fixtures::p2()),
    ] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let parsed = spillover_iv::PopulationSpec::from_json(&text).unwrap();
        assert_eq!(parsed, spec, "{name} drifted from the library fixture");
    }
}
