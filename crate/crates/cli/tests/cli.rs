use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_speedlimit");
const SCENARIOS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn validate_reports_family() {
    let (code, stdout, _) = run(&["validate", "--config", &format!("{SCENARIOS}/ou.toml")]);
    assert_eq!(code, 0);
    assert!(stdout.contains("ou: valid fokker_planck scenario"), "{stdout}");
}

#[test]
fn validate_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "family = \"master\"\nbogus = 1\n[time]\nstart = 1.0\nstop = 0.5\nsamples = 1\nstep = 2\n").unwrap();
    let (code, _, stderr) = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("time.samples"), "{stderr}");
    assert!(stderr.contains("time.stop"), "{stderr}");
    assert!(stderr.contains("bogus: unknown key"), "{stderr}");
    assert!(stderr.contains("time.step: unknown key"), "{stderr}");
}

#[test]
fn missing_config_is_a_configuration_error() {
    let (code, _, stderr) = run(&["run", "--config", "/nonexistent.toml"]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn sweep_writes_one_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::copy(format!("{SCENARIOS}/alpha_sweep.toml"), &cfg).unwrap();
    let out = dir.path().join("out");
    let (code, stdout, stderr) = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("sweep-alpha=0.5"), "{stdout}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.sweep.json")).unwrap()).unwrap();
    assert_eq!(doc["runs"].as_array().unwrap().len(), 3);
    assert_eq!(doc["parameter"], "alpha");
}

#[test]
fn sweep_without_section_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(&["sweep", "--config", &format!("{SCENARIOS}/two_state.toml"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn random_chain_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("chain.toml");
    let (code, _, stderr) = run(&["random-chain", "--seed", "11", "--states", "5", "--out", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let first = std::fs::read_to_string(&cfg).unwrap();
    run(&["random-chain", "--seed", "11", "--states", "5", "--out", cfg.to_str().unwrap()]);
    assert_eq!(first, std::fs::read_to_string(&cfg).unwrap());

    let (code, stdout, stderr) = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("0 validity violations"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("chain-11.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 64 * 3);
}
