use std::path::Path;
use std::process::{Command, Output};

fn cfproc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfproc"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"
[paths]
log = "log.csv"
work_dir = "work"

[preprocess]
quantile = 1.0

[vae]
epochs = 2
hidden = 4
latent = 2

[classifier]
epochs = 2
hidden = 4

[cf]
max_iter = 3
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), TINY).unwrap();
    let o = cfproc(dir.path(), &["synth", "--cases", "60", "--out", "log.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

#[test]
fn full_run_then_cached_rerun() {
    let dir = setup();
    let o = cfproc(dir.path(), &["--config", "run.toml", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("REVISED+") && report.contains("REVISE+"), "{report}");
    for f in ["manifest.json", "report.csv", "report.txt", "metrics.json", "results.revised_plus.jsonl"] {
        assert!(dir.path().join("work").join(f).exists(), "{f}");
    }

    let model = std::fs::read(dir.path().join("work/vae.model")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cfproc"))
        .current_dir(dir.path())
        .env("RUST_LOG", "info")
        .args(["--config", "run.toml", "run"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let log = stderr(&o);
    assert_eq!(log.matches("outputs cached").count(), 8, "{log}");
    assert_eq!(std::fs::read(dir.path().join("work/vae.model")).unwrap(), model);

    let csv = cfproc(dir.path(), &["--config", "run.toml", "report", "--format", "csv"]);
    assert!(csv.status.success());
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("Algorithm,Log,Success Rate"));
}

#[test]
fn changed_settings_invalidate_downstream_stages() {
    let dir = setup();
    assert!(cfproc(dir.path(), &["--config", "run.toml", "run"]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_cfproc"))
        .current_dir(dir.path())
        .env("RUST_LOG", "info")
        .args(["--config", "run.toml", "--seed", "5", "run"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let log = stderr(&o);
    // ingest and mining do not depend on the seed
    assert_eq!(log.matches("outputs cached").count(), 2, "{log}");
}

#[test]
fn tampered_artifact_is_a_mismatch() {
    let dir = setup();
    assert!(cfproc(dir.path(), &["--config", "run.toml", "ingest"]).status.success());
    let train = dir.path().join("work/train.log.json");
    let mut bytes = std::fs::read(&train).unwrap();
    bytes.push(b'\n');
    std::fs::write(&train, bytes).unwrap();
    let o = cfproc(dir.path(), &["--config", "run.toml", "mine"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("ingest"));
}

#[test]
fn exit_codes_by_error_kind() {
    let dir = setup();
    let missing = cfproc(dir.path(), &["--config", "run.toml", "--seed", "1", "train-clf"]);
    assert_eq!(missing.status.code(), Some(2), "{}", stderr(&missing));

    std::fs::write(dir.path().join("nolog.toml"), "[paths]\nlog = \"absent.csv\"\n").unwrap();
    let o = cfproc(dir.path(), &["--config", "nolog.toml", "ingest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.csv"));

    std::fs::write(dir.path().join("bad.toml"), "[cf]\np = 1.5\n").unwrap();
    assert_eq!(cfproc(dir.path(), &["--config", "bad.toml", "ingest"]).status.code(), Some(3));
    std::fs::write(dir.path().join("typo.toml"), "[cf]\nalpah = 0.1\n").unwrap();
    assert_eq!(cfproc(dir.path(), &["--config", "typo.toml", "ingest"]).status.code(), Some(3));

    std::fs::write(dir.path().join("broken.csv"), "case_id,activity,timestamp,label\nc1,A,not-a-time,0\n").unwrap();
    std::fs::write(dir.path().join("broken.toml"), "[paths]\nlog = \"broken.csv\"\n").unwrap();
    assert_eq!(cfproc(dir.path(), &["--config", "broken.toml", "ingest"]).status.code(), Some(3));

    assert!(cfproc(dir.path(), &["--config", "run.toml", "run"]).status.success());
    let o = cfproc(dir.path(), &["--config", "run.toml", "generate", "--algorithm", "revise+", "--lambda-dlc", "1"]);
    assert_eq!(o.status.code(), Some(3));
}
