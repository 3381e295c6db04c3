use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
epochs = 3
replicas = 2
seed = 11

[initial]
kind = "left_bounded"
law = { type = "geometric", q = 0.4 }

[schedule]
preset = "east"

[window]
intervals = 400
buffer_factor = 1.0
"#;

fn hcp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hcp")).args(args).output().expect("binary runs")
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .filter(|(n, _)| n != "manifest.json")
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_rerun_and_manifest_replay_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for dir in [&a, &b] {
        let out = hcp(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let manifest = a.join("manifest.json");
    let out = hcp(&["simulate", "--config", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ra = read_all(&a);
    assert!(ra.iter().any(|(n, _)| n == "epoch_03_z.csv"));
    assert_eq!(ra, read_all(&b));
    assert_eq!(ra, read_all(&c));
}

#[test]
fn analytic_rerun_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = hcp(&["analytic", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read_all(&a), read_all(&b));
    let c0 = fs::read_to_string(a.join("c0.csv")).unwrap();
    assert!(c0.lines().last().unwrap().contains(",true,"));
}

#[test]
fn refuses_non_empty_output_without_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    fs::create_dir(&dir).unwrap();
    fs::write(dir.join("keep.txt"), "x").unwrap();
    let out = hcp(&["limits", "--out", dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(fs::read_to_string(dir.join("keep.txt")).unwrap(), "x");
    let out = hcp(&["limits", "--out", dir.to_str().unwrap(), "--overwrite"]);
    assert!(out.status.success());
    assert!(dir.join("limit_density.csv").exists());
}

#[test]
fn wide_schedule_is_rejected_naming_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = CONFIG.replace(
        "preset = \"east\"",
        "thresholds = { preset = \"explicit\", values = [1.0, 2.0, 5.0, 6.0] }\nrates = { preset = \"constant\", left = 0.0, right = 1.0 }",
    );
    fs::write(&cfg, text).unwrap();
    let out = hcp(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(A2)") && err.contains("epoch 2"), "{err}");
}

#[test]
fn figb_csv_has_three_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("f.toml");
    fs::write(&cfg, format!("{CONFIG}\n[figb]\nhorizon = 12\n")).unwrap();
    let dir = tmp.path().join("o");
    let out = hcp(&["reproduce-figb", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("figb.csv")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 3 * 12);
}

#[test]
fn validate_reports_corrupted_rate_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = CONFIG.replace(
        "preset = \"east\"",
        "preset = \"east\"\nrates = { preset = \"table\", rows = [[1.0, 0.0, 1.0], [1.4, 0.0, 1.0], [1.5, 0.0, 0.0], [1.6, 0.0, 1.0], [2.0, 0.0, 1.0]] }",
    );
    fs::write(&cfg, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hcp"))
        .args(["validate", "--quick", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("config") && stdout.contains("FAIL") && stdout.contains("(A1)"), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 10, "{stdout}");
}
