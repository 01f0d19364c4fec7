use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn sensaudit(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensaudit"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("SENSAUDIT_SEED")
        .output()
        .expect("spawn sensaudit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ua_reports_mean_of_additive_model() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sensaudit(
        tmp.path(),
        &[
            "--format",
            "json",
            "ua",
            "-c",
            path_str(&fixture("linear.toml")),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mean = v["mean"].as_f64().unwrap();
    assert!((mean - 1.5).abs() < 0.01, "{mean}");
    for f in ["ua.json", "ua.csv", "ua_runs.csv", "config.toml"] {
        assert!(tmp.path().join("linear").join(f).exists(), "{f}");
    }
}

#[test]
fn invalid_sample_size_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("linear.toml"))
        .unwrap()
        .replace("N = 128", "N = 0");
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = sensaudit(tmp.path(), &["ua", "-c", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("design.N"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("linear.toml"))
        .unwrap()
        .replace("seed = 7", "seed = 7\nsamples = 3");
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = sensaudit(tmp.path(), &["sa", "-c", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("samples"), "{}", stderr(&o));
}

#[test]
fn failing_external_model_exits_3_with_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sensaudit(
        tmp.path(),
        &["ua", "-c", path_str(&fixture("failing.toml"))],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("row 0"), "{}", stderr(&o));
}

#[test]
fn constant_model_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sensaudit(
        tmp.path(),
        &["sa", "-c", path_str(&fixture("constant.toml"))],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("constant output"));
}

#[test]
fn ishigami_sa_notes_interaction_only_factor() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sensaudit(
        tmp.path(),
        &["sa", "-c", path_str(&fixture("ishigami.toml"))],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("note: x3:"), "{out}");
    assert!(out.contains("interactions-only"), "{out}");
    let sa: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("ishigami/sa.json")).unwrap())
            .unwrap();
    let t3 = sa["factors"][2]["T_i"].as_f64().unwrap();
    assert!((t3 - 0.2437).abs() < 0.02, "{t3}");
}

#[test]
fn sa_json_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = sensaudit(
            dir.path(),
            &["--jobs", "3", "sa", "-c", path_str(&fixture("linear.toml"))],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read =
        |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join("linear").join(f)).unwrap();
    assert_eq!(read(&a, "sa.json"), read(&b, "sa.json"));
    assert_eq!(read(&a, "sa.csv"), read(&b, "sa.csv"));
}

#[test]
fn seed_flag_changes_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = fixture("linear.toml");
    assert!(sensaudit(a.path(), &["sa", "-c", path_str(&cfg)])
        .status
        .success());
    assert!(
        sensaudit(b.path(), &["--seed", "8", "sa", "-c", path_str(&cfg)])
            .status
            .success()
    );
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("linear/sa.json")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn demo_oat_prints_volume_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sensaudit(
        tmp.path(),
        &[
            "demo",
            "oat",
            "--k",
            "10",
            "--n",
            "256",
            "--mc-points",
            "10000",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0.00249"), "{}", stdout(&o));
}

#[test]
fn demo_oneill_finds_interior_minimum() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sensaudit(tmp.path(), &["demo", "oneill", "--replications", "100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(interior minimum)"), "{}", stdout(&o));
}

#[test]
fn audit_init_renders_seven_unaddressed_rules() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(sensaudit(tmp.path(), &["audit", "init", "s1"])
        .status
        .success());
    let o = sensaudit(tmp.path(), &["audit", "render", "s1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = stdout(&o);
    let rows = md
        .lines()
        .filter(|l| l.starts_with("| ") && l.contains("| unaddressed |"))
        .count();
    assert_eq!(rows, 7, "{md}");
    // A second init without --force refuses to overwrite.
    assert_eq!(
        sensaudit(tmp.path(), &["audit", "init", "s1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn audit_set_records_status() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(sensaudit(tmp.path(), &["audit", "init", "s2"])
        .status
        .success());
    let o = sensaudit(
        tmp.path(),
        &[
            "audit",
            "set",
            "s2",
            "6",
            "not-applicable",
            "--narrative",
            "internal tool",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let json = std::fs::read_to_string(tmp.path().join("s2/audit.json")).unwrap();
    assert!(json.contains("not-applicable") && json.contains("internal tool"));
    assert!(
        !sensaudit(tmp.path(), &["audit", "set", "s2", "9", "attested"])
            .status
            .success()
    );
}

#[test]
fn select_recovers_planted_regressors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut csv = String::from("x1,x2,x3,x4,x5,y\n");
    for _ in 0..200 {
        let x: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
        let y = 2.0 * x[0] - 1.5 * x[2] + 0.5 * rng.sample::<f64, _>(StandardNormal);
        let cells: Vec<String> = x.iter().chain([&y]).map(|v| v.to_string()).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let data = tmp.path().join("data.csv");
    std::fs::write(&data, csv).unwrap();
    let o = sensaudit(
        tmp.path(),
        &["--format", "json", "select", "--data", path_str(&data)],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let selected: Vec<&str> = v["selected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap())
        .collect();
    assert_eq!(selected, ["x1", "x3"]);
    assert!(tmp.path().join("selection/selection.csv").exists());
}

#[test]
fn every_subcommand_has_help() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["--help"],
        vec!["ua", "--help"],
        vec!["sa", "--help"],
        vec!["select", "--help"],
        vec!["demo", "oat", "--help"],
        vec!["demo", "oneill", "--help"],
        vec!["audit", "init", "--help"],
        vec!["audit", "attach", "--help"],
        vec!["audit", "set", "--help"],
        vec!["audit", "render", "--help"],
    ] {
        let o = sensaudit(tmp.path(), &args);
        assert!(o.status.success(), "{args:?}");
        assert!(stdout(&o).contains("Usage"), "{args:?}");
    }
}
