use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glsphere_cli::snapshot;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glsphere"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("glsphere-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn malformed_config_exits_with_usage_code() {
    for (name, text) in [
        ("missing-version.toml", "band_limit = 8\n"),
        ("future-version.toml", "schema_version = 7\n"),
        ("unknown-key.toml", "schema_version = 1\nwibble = true\n"),
        ("syntax.toml", "schema_version = = 1\n"),
    ] {
        let path = scratch(name);
        std::fs::write(&path, text).unwrap();
        let out = run(&["spectrum", "--config", path_str(&path)]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run(&["spectrum", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["spectrum", "--band-limit", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn snapshot_round_trip_and_version_check() {
    let path = scratch("dilation.gls");
    let out = run(&[
        "snapshot",
        "--family",
        "dilation",
        "--dilation-lambda",
        "2",
        "--band-limit",
        "12",
        "--out",
        path_str(&path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"GLS2");
    let snap = snapshot::decode(&bytes).unwrap();
    assert_eq!(snap.field.grid().band_limit(), 12);
    assert_eq!(snapshot::encode(&snap), bytes);
    for (v, x) in snap.field.values().iter().zip(snap.field.grid().points()) {
        let exact = glsphere::analytic::dilation_point(2.0, x);
        for k in 0..3 {
            assert!((v[k] - exact[k]).abs() < 1e-15);
        }
    }

    let mut bumped = bytes.clone();
    bumped[4..8].copy_from_slice(&2u32.to_le_bytes());
    let err = snapshot::decode(&bumped).unwrap_err();
    assert!(err.to_string().contains("version"), "{err}");
}

#[test]
fn sweep_csv_is_deterministic_apart_from_timestamps() {
    let args = |out: &Path| {
        vec![
            "rigidity-sweep".to_string(),
            "--band-limit".into(),
            "12".into(),
            "--epsilon".into(),
            "0.2".into(),
            "--seeds".into(),
            "2".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let strip = |p: &Path| -> Vec<String> {
        let text = std::fs::read_to_string(p).unwrap();
        text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
    };
    let (a, b) = (scratch("sweep-a.csv"), scratch("sweep-b.csv"));
    for p in [&a, &b] {
        let out = bin().args(args(p)).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (la, lb) = (strip(&a), strip(&b));
    assert_eq!(la.len(), 3);
    assert!(la[0].starts_with("version,epsilon,seed,converged"));
    assert_eq!(la, lb);
}

#[test]
fn spectrum_reports_kernel_and_phi_entries() {
    let out = run(&["spectrum", "--band-limit", "8", "--epsilon", "0.1", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("kernel_dimension=6"), "{stderr}");
    assert!(stderr.contains("morse_index=3"), "{stderr}");
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    let l2 = rows.iter().find(|r| r["l"] == 2).expect("row for l = 2");
    assert!((l2["phi_entry"].as_f64().unwrap() - 4.0).abs() < 1e-14, "{l2}");
}

#[test]
fn verify_identities_passes_at_small_band() {
    let out = run(&["verify-identities", "--band-limit", "24", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rows.iter().all(|r| r["passed"] == true));
}
