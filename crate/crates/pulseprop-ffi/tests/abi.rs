use std::ffi::{CStr, CString};
use std::ptr;

use pulseprop_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pp_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn header_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pulseprop.h")).unwrap();
    for sym in ["pp_graph_build", "pp_bandpass_new", "pp_pipeline_run", "PULSEPROP_H"] {
        assert!(h.contains(sym), "{sym}");
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(pp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_rejected() {
    let mut s = PpPulseStats { skewness: 0.0, kurtosis: 0.0, std: 0.0 };
    assert_eq!(unsafe { pp_pulse_stats(ptr::null(), 4, &mut s) }, PpStatus::NullPointer);
    assert!(last_error().contains('x'));
    assert_eq!(unsafe { pp_graph_propagate(ptr::null(), ptr::null_mut(), ptr::null_mut()) }, PpStatus::NullPointer);
    assert_eq!(unsafe { pp_graph_len(ptr::null()) }, 0);
    unsafe {
        pp_graph_free(ptr::null_mut());
        pp_bandpass_free(ptr::null_mut());
        pp_string_free(ptr::null_mut());
    }
}

#[test]
fn pulse_stats_and_errors() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let mut s = PpPulseStats { skewness: 9.0, kurtosis: 9.0, std: 9.0 };
    assert_eq!(unsafe { pp_pulse_stats(x.as_ptr(), 4, &mut s) }, PpStatus::Ok);
    assert!(s.skewness.abs() < 1e-12);
    // Population moments: m2 = 1.25, m4 = 2.5625, kurtosis = m4 / m2².
    assert!((s.kurtosis - 2.5625 / 1.5625).abs() < 1e-12);
    assert!((s.std - 1.25f64.sqrt()).abs() < 1e-12);
    let flat = [2.0; 5];
    assert_eq!(unsafe { pp_pulse_stats(flat.as_ptr(), 5, &mut s) }, PpStatus::Degenerate);
    assert!(!last_error().is_empty());
}

#[test]
fn bandpass_lifecycle() {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { pp_bandpass_new(0.5, 8.0, 4, 128.0, &mut f) }, PpStatus::Ok);
    assert!(!f.is_null());
    let mid = unsafe { pp_bandpass_magnitude(f, 2.0) };
    assert!((mid - 1.0).abs() < 0.05, "{mid}");
    let n = 4096;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 30.0 * i as f64 / 128.0).sin()).collect();
    let mut y = vec![0.0; n];
    assert_eq!(unsafe { pp_bandpass_filtfilt(f, x.as_ptr(), n, y.as_mut_ptr()) }, PpStatus::Ok);
    // Edge transients of the 0.5 Hz section last a few hundred samples; judge the central half.
    let peak = y[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak < 0.01, "{peak}");
    unsafe { pp_bandpass_free(f) };

    let mut g = ptr::null_mut();
    assert_eq!(unsafe { pp_bandpass_new(8.0, 0.5, 4, 128.0, &mut g) }, PpStatus::InvalidArgument);
    assert!(g.is_null());
}

#[test]
fn graph_on_a_path() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let labels = [0i8, -1, -1, 1];
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { pp_graph_build(x.as_ptr(), 4, 1, labels.as_ptr(), 1, &mut g) }, PpStatus::Ok);
    assert_eq!(unsafe { pp_graph_len(g) }, 4);
    let mut p = [f64::NAN; 4];
    let mut stranded = 99;
    assert_eq!(unsafe { pp_graph_propagate(g, p.as_mut_ptr(), &mut stranded) }, PpStatus::Ok);
    for (got, want) in p.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
        assert!((got - want).abs() < 1e-12, "{p:?}");
    }
    assert_eq!(stranded, 0);
    unsafe { pp_graph_free(g) };

    let bad = [0i8, -2, -1, 1];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pp_graph_build(x.as_ptr(), 4, 1, bad.as_ptr(), 1, &mut h) }, PpStatus::InvalidLabel);
}

#[test]
fn metrics_through_abi() {
    let mut m = PpMetrics { precision: 0.0, recall: 0.0, f1: 0.0, mcc: 0.0, kappa: 0.0, csi: 0.0 };
    assert_eq!(unsafe { pp_metrics_from_confusion(9, 1, 89, 1, &mut m) }, PpStatus::Ok);
    assert!((m.f1 - 0.9).abs() < 1e-12);
    assert!((m.mcc - 8.0 / 9.0).abs() < 1e-12);
    assert!((m.kappa - 8.0 / 9.0).abs() < 1e-12);
    let scores = [0.1, 0.4, 0.35, 0.8];
    let truth = [0i8, 0, 1, 1];
    let mut auc = 0.0;
    assert_eq!(unsafe { pp_roc_auc(scores.as_ptr(), truth.as_ptr(), 4, &mut auc) }, PpStatus::Ok);
    assert!((auc - 0.75).abs() < 1e-12);
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "input": {"kind": "synth", "n_beats": 300, "seed": 1},
        "seed": 1,
        "output_dir": dir.path(),
    });
    let c = CString::new(cfg.to_string()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pp_pipeline_run(c.as_ptr(), &mut out) }, PpStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { pp_string_free(out) };
    let reports: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 4);
    assert!(dir.path().join("manifest.json").exists());

    let bad = CString::new(r#"{"no_such_key": 1}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pp_pipeline_run(bad.as_ptr(), &mut out) }, PpStatus::Json);
    assert!(out.is_null());
    assert!(last_error().contains("no_such_key"));
}
