use std::path::Path;
use std::process::{Command, Output};

fn pulseprop(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulseprop"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn synth_then_run_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = pulseprop(&["synth", "--out", "s", "--beats", "300", "--seed", "2"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("300 beats"));

    let out = pulseprop(
        &["run", "--out", "w", "--waveform", "s/waveform.csv", "--beat-truth", "s/beats.csv", "--seed", "2"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for m in ["lp", "knn", "gaussian_nb", "logistic"] {
        assert!(stdout.contains(m), "{stdout}");
        assert!(d.join(format!("w/reports/{m}.json")).exists());
    }

    let out = pulseprop(
        &["evaluate", "--predictions", "w/predictions/lp.csv", "--truth", "w/truth.csv", "--method", "lp", "--report", "r.json"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["method"], "lp");
}

#[test]
fn stage_commands_share_a_workspace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for stage in ["preprocess", "label", "propagate", "classify", "evaluate"] {
        let mut args = vec![stage, "--out", "w"];
        if stage == "preprocess" {
            args.extend(["--beats", "300"]);
        }
        let out = pulseprop(&args, d);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(d.join("w/manifest.json").exists());
}

#[test]
fn failures_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = pulseprop(&["label", "--out", "empty"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("pulses_raw.csv"), "{err}");

    let out = pulseprop(&["run", "--out", "w", "--seed-label-fraction", "1.5"], dir.path());
    assert!(!out.status.success());

    let out = pulseprop(&["run", "--out", "w", "--waveform", "missing.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}
