use std::path::Path;
use std::process::{Command, Output};

fn zeroscope(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeroscope"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

#[test]
fn counts_for_the_three_by_three_cylinder() {
    let dir = tempfile::tempdir().unwrap();
    let run = zeroscope(&["--model", "cylinder:3x3,k=0.3", "--task", "counts"], dir.path());
    assert!(run.status.success());
    let csv = std::fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(
        rows.iter().any(|r| r.starts_with("general") && r.contains(",24,45")),
        "{csv}"
    );
    assert!(
        rows.iter().any(|r| r.starts_with("kicked") && r.contains(",18,45")),
        "{csv}"
    );
}

#[test]
fn bad_configuration_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let run = zeroscope(&["--model", "cylinder:3", "--task", "scan"], dir.path());
    assert_eq!(run.status.code(), Some(2));
    let run = zeroscope(
        &["--model", "cylinder:3x2", "--task", "scan", "--window=1,0,0,1"],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn verify_passes_and_a_forced_mismatch_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let ok = zeroscope(
        &["--model", "cylinder:3x2", "--task", "verify", "--samples", "4"],
        dir.path(),
    );
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = zeroscope(
        &[
            "--model",
            "cylinder:3x2",
            "--task",
            "verify",
            "--samples",
            "4",
            "--force-mismatch",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn zeros_output_embeds_a_replayable_config() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--model",
        "chain:1,h=0",
        "--task",
        "zeros",
        "--plane",
        "h",
        "--window=-0.5,0.5,-2,2",
        "--res",
        "21x41",
    ];
    assert!(zeroscope(&args, &dir.path().join("a")).status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/zeros.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["task"], "zeros");
    assert_eq!(json["matches"].as_array().map(Vec::len), Some(2));

    let config = dir.path().join("a/zeros.csv");
    assert!(
        zeroscope(&["--config", config.to_str().unwrap()], &dir.path().join("b"))
            .status
            .success()
    );
    for name in ["zeros.csv", "zeros.json"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}
