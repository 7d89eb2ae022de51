use std::path::PathBuf;
use std::process::Command;

use pspin_complexity::cli;

fn potential(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("potentials").join(name).display().to_string()
}

fn pspin(args: &[&str], seed: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pspin")).args(args).env("PSPIN_SEED", seed).env("PSPIN_THREADS", "1").output().unwrap()
}

fn summary(out: &std::process::Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(cli::run(["pspin", "--help"]), cli::EXIT_OK);
    assert_eq!(cli::run(["pspin", "freeconv", "--atoms", "0:1", "--unknown"]), cli::EXIT_USAGE);
    assert_eq!(cli::run(["pspin", "validate-potential", "--potential", &potential("fails_growth.json")]), cli::EXIT_INVALID);
    assert_eq!(cli::run(["pspin", "validate-potential", "--potential", &potential("sextic_mixed.json")]), cli::EXIT_OK);
    assert_eq!(cli::run(["pspin", "freeconv", "--atoms", "1:-1"]), cli::EXIT_INVALID);
}

#[test]
fn unknown_flag_prints_usage() {
    let out = pspin(&["sigma", "--frobnicate"], "1");
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn outputs_are_reproducible_and_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let out_dir = dir.path().join(sub);
        let out = pspin(&["rmt-logdet", "--n", "60", "--samples", "8", "--out", out_dir.to_str().unwrap()], seed);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(out_dir.join("rmt-logdet.csv")).unwrap(), summary(&out))
    };
    let (a, sa) = run("a", "7");
    let (b, _) = run("b", "7");
    let (c, sc) = run("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    let hash = sa["config_hash"].as_str().unwrap();
    assert!(text.contains(hash) && text.contains(cli::VERSION));
    assert_ne!(hash, sc["config_hash"].as_str().unwrap());
    assert_eq!(sa["seed"], 7);
}

#[test]
fn json_output_embeds_hash_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = pspin(&["freeconv", "--atoms=-2:1,2:1", "--format", "json", "--out", dir.path().to_str().unwrap()], "3");
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("freeconv.json")).unwrap()).unwrap();
    assert_eq!(doc["version"], cli::VERSION);
    assert_eq!(doc["config_hash"], summary(&out)["config_hash"]);
    assert!((doc["result"]["mass"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn sigma_csv_has_nonincreasing_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = pspin(&["sigma", "--potential", &potential("sextic_mixed.json"), "--u", "0,1,2", "--out", dir.path().to_str().unwrap()], "0");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sigma.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
}

#[test]
fn selftest_passes() {
    let out = pspin(&["selftest"], "0");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(summary(&out)["status"], "ok");
}

#[test]
fn covariance_command_reports_conditional_determinism() {
    let out = pspin(&["cov-test", "--potential", &potential("quartic_sextic_p3.json"), "--sigma=0.4,-0.8,1.1", "--samples", "20000"], "2");
    assert_eq!(out.status.code(), Some(0));
    assert!(summary(&out)["result"]["residual_ratio"].as_f64().unwrap() < 1e-2);
}

#[test]
fn bad_seed_is_rejected() {
    let out = pspin(&["selftest"], "not-a-number");
    assert_eq!(out.status.code(), Some(2));
}
