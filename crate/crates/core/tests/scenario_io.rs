use std::collections::BTreeSet;
use std::path::Path;

use speedlimit::scenario::{
    emit, parse_scenario, parse_scenario_str, run_scenario, to_csv, to_json, OutputFormat, RunRecord, CSV_HEADER,
};
use speedlimit::Error;

const TWO_STATE: &str = r#"
family = "master"
[time]
start = 0.0
stop = 2.0
samples = 2
"#;

const QUBIT: &str = r#"
family = "quantum"
[time]
start = 0.0
stop = 6.0
samples = 50
[quantum]
hamiltonian = [[0.0, 0.0], [0.0, 1.0]]
state = [1.0, 1.0]
"#;

const SMALL_HARMONIC: &str = r#"
family = "liouville"
[time]
start = 0.0
stop = 2.0
samples = 8
[gaussian]
a = 2.0
b = 1.0
e = 0.3
[hamiltonian]
c = 1.0
d = 1.0
[liouville]
points = 24
alpha = [1.0, 2.0]
"#;

fn scenarios_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios"))
}

#[test]
fn shipped_scenarios_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(cfg.id, path.file_stem().unwrap().to_str().unwrap());
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn all_violations_reported_with_field_paths() {
    let text = r#"
family = "liouville"
[time]
start = -1.0
stop = 1.0
samples = 1
[gaussian]
a = -1.0
b = 1.0
[hamiltonian]
c = 1.0
"#;
    let err = parse_scenario_str(text, "bad").unwrap_err();
    let msg = err.to_string();
    for needle in ["gaussian.a must be > 0", "time.samples must be >= 2", "time.start", "hamiltonian.d is required"] {
        assert!(msg.contains(needle), "missing {needle:?} in {msg}");
    }
    assert!(err.is_input_error());
    let err = parse_scenario_str("family = \"hydrodynamic\"\n[time]\nstart=0.0\nstop=1.0\nsamples=2\n", "x").unwrap_err();
    assert!(err.to_string().contains("family"), "{err}");
}

#[test]
fn missing_file_is_input_error() {
    let err = parse_scenario(Path::new("/nonexistent/scenario.toml")).unwrap_err();
    assert!(err.is_input_error());
}

#[test]
fn csv_has_two_rows_per_bound_on_a_two_point_grid() {
    let rec = run_scenario(&parse_scenario_str(TWO_STATE, "two").unwrap()).unwrap();
    let csv = to_csv(&rec);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    let names: BTreeSet<&str> = rows.iter().map(|r| r.split(',').nth(3).unwrap()).collect();
    assert_eq!(names.len(), 3);
    assert_eq!(rows.len(), 2 * names.len());
    assert!(rows.iter().all(|r| r.split(',').count() == 7));
}

#[test]
fn json_round_trip_is_bit_exact() {
    for (text, id) in [(TWO_STATE, "two"), (QUBIT, "qubit"), (SMALL_HARMONIC, "small")] {
        let rec = run_scenario(&parse_scenario_str(text, id).unwrap()).unwrap();
        let json = to_json(&rec).unwrap();
        let back: RunRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        for (a, b) in back.report.entries.iter().zip(&rec.report.entries) {
            assert_eq!(a.tau.map(f64::to_bits), b.tau.map(f64::to_bits));
            assert_eq!(a.overlap.to_bits(), b.overlap.to_bits());
        }
        assert_eq!(to_json(&back).unwrap(), json);
    }
}

#[test]
fn repeated_runs_are_identical_apart_from_wall_clock() {
    for (text, id) in [(TWO_STATE, "two"), (QUBIT, "qubit"), (SMALL_HARMONIC, "small")] {
        let cfg = parse_scenario_str(text, id).unwrap();
        let mut a = run_scenario(&cfg).unwrap();
        let mut b = run_scenario(&cfg).unwrap();
        a.wall_clock_seconds = 0.0;
        b.wall_clock_seconds = 0.0;
        assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());
    }
}

#[test]
fn quantum_entries_start_at_orthogonalization() {
    let rec = run_scenario(&parse_scenario_str(QUBIT, "qubit").unwrap()).unwrap();
    assert!(rec.all_valid());
    let first = rec.report.entries.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
    assert!((first - std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn emit_writes_atomically_and_rejects_bad_dirs() {
    let rec = run_scenario(&parse_scenario_str(TWO_STATE, "two").unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = emit(&rec, dir.path(), OutputFormat::Json).unwrap();
    assert_eq!(path.file_name().unwrap(), "two.json");
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1);
    let csv = emit(&rec, dir.path(), OutputFormat::Csv).unwrap();
    assert!(std::fs::read_to_string(csv).unwrap().starts_with(CSV_HEADER));

    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    let err = emit(&rec, &file, OutputFormat::Json).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}

#[test]
fn biased_ring_parses_but_fails_to_run() {
    let cfg = parse_scenario(&scenarios_dir().join("biased_ring.toml")).unwrap();
    let err = run_scenario(&cfg).unwrap_err();
    assert!(matches!(err.root(), Error::DetailedBalance { .. }), "{err}");
    assert!(err.to_string().contains("biased_ring"));
}

#[test]
fn stationary_gaussian_is_flagged() {
    let text = r#"
family = "liouville"
[time]
start = 0.0
stop = 1.0
samples = 4
[gaussian]
a = 1.0
b = 1.0
[hamiltonian]
c = 1.0
d = 1.0
"#;
    let rec = run_scenario(&parse_scenario_str(text, "still").unwrap()).unwrap();
    assert!(!rec.report.entries.is_empty());
    for e in &rec.report.entries {
        assert_eq!(e.tau, Some(0.0));
        assert!(e.valid);
    }
}
