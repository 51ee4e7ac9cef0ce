use std::fs;
use std::process::Command;

use fuelgame_cli::parse_config;
use fuelgame_core::Variant;

const POOLING_N2: &str = "\
[game]
variant = pooling
players = 2
alpha = 1.0

[numerics]
dt = 2e-3
horizon = 4.0
seed = 42
paths = 40
y_max = 3.0

[run]
player = 0
grid_points = 9
start_positions = 0.2 -0.2
start_resources = 0.8
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fuelgame"))
}

fn write_config(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn parses_minimal_pooling_config() {
    let cfg = parse_config(POOLING_N2).unwrap();
    assert_eq!(cfg.spec.variant(), Variant::Pooling);
    assert_eq!(cfg.spec.n_players(), 2);
    assert_eq!(cfg.params.seed, 42);
    assert_eq!(cfg.n_paths, 40);
    assert_eq!(cfg.start.resources, vec![0.8]);
}

#[test]
fn defaults_follow_discount() {
    let text = "[game]\nvariant = pooling\nplayers = 2\nalpha = 2.0\n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.params.dt, 1e-3);
    assert!((cfg.params.horizon - (1e4f64).ln() / 2.0).abs() < 1e-12);
    assert_eq!(cfg.params.delta, cfg.params.dt.sqrt());
}

#[test]
fn rejects_zero_adjacency_row_with_line_number() {
    let text = "\
[game]
variant = sharing
players = 2
alpha = 1.0
adjacency = 1 1; 0 0
";
    let err = parse_config(text).unwrap_err();
    assert_eq!(err.line, Some(5));
    assert!(err.message.contains("access to at least one resource"), "{err}");
}

#[test]
fn rejects_negative_alpha() {
    let text = "[game]\nvariant = pooling\nplayers = 2\nalpha = -1\n";
    let err = parse_config(text).unwrap_err();
    assert_eq!(err.line, Some(4));
    assert!(err.message.contains("alpha must be positive"), "{err}");
}

#[test]
fn rejects_unknown_key_with_line_number() {
    let text = "[game]\nvariant = pooling\nplayers = 2\nalpha = 1\nwibble = 3\n";
    let err = parse_config(text).unwrap_err();
    assert_eq!(err.line, Some(5));
    assert!(err.message.contains("unknown key `wibble`"), "{err}");
}

#[test]
fn rejects_adjacency_shape_mismatch() {
    let text = "\
[game]
variant = sharing
players = 3
alpha = 1.0
adjacency = 1 0; 0 1
";
    let err = parse_config(text).unwrap_err();
    assert!(err.message.contains("2 rows but players = 3"), "{err}");
}

#[test]
fn boundary_subcommand_emits_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), POOLING_N2);
    let out = dir.path().join("out");
    let status = bin()
        .args(["boundary", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("boundary.csv")).unwrap();
    assert!(csv.starts_with("x,f,f_prime,a\n"));
    assert!(!csv.contains('\r'), "CSV must use UNIX newlines");
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(manifest.contains("boundary.csv,boundary,42"));
    assert!(manifest.contains("manifest.csv,boundary,42"));
    // Full-precision round trip: the first data row's x must parse back to
    // a float that formats identically.
    let row = csv.lines().nth(1).unwrap();
    let x: f64 = row.split(',').next().unwrap().parse().unwrap();
    assert_eq!(format!("{x}"), row.split(',').next().unwrap());
}

#[test]
fn identical_config_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), POOLING_N2);
    let mut bodies = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--output-dir")
            .arg(&out)
            .args(["--paths", "5", "--horizon", "1.0"])
            .env("FUELGAME_THREADS", "1")
            .status()
            .unwrap();
        assert!(status.success());
        bodies.push((
            fs::read(out.join("trajectory.csv")).unwrap(),
            fs::read(out.join("endpoints.csv")).unwrap(),
        ));
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn value_subcommand_reports_regions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), POOLING_N2);
    let out = dir.path().join("out");
    let status = bin()
        .args(["value", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("value.csv")).unwrap();
    // The grid spans past the boundary, so both regions appear.
    assert!(csv.contains("waiting"));
    assert!(csv.contains("action_p"));
}

#[test]
fn compare_subcommand_orders_variants() {
    let text = "\
[game]
variant = sharing
players = 3
alpha = 1.0
adjacency = 1 1 0; 0 1 1; 1 0 1

[numerics]
y_max = 4.0

[run]
grid_points = 7
start_resources = 0.3 0.5 0.4
";
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let status = bin()
        .args(["compare", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.lines().count() > 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with("true")));
}

#[test]
fn verify_subcommand_passes_for_two_player_pooling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), POOLING_N2);
    let out = dir.path().join("out");
    let output = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out)
        .args(["--paths", "300"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "verify failed: {}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(csv.starts_with("check,player,detail,observed,reference,stat,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with("true")));
}

#[test]
fn unknown_subcommand_exits_one() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_one() {
    let out = bin()
        .args(["boundary", "--config", "/nonexistent/run.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_reports_line_number_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[game]\nvariant = pooling\nplayers = 2\nalpha = nope\n");
    let out = bin().args(["boundary", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 4"), "stderr: {stderr}");
}
