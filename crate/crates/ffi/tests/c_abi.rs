use std::ffi::{CStr, CString};
use std::ptr;

use ioncav_ffi::*;

fn last_error() -> String {
    let p = ioncav_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn budget_functions() {
    let two_pi_mhz = |f: f64| std::f64::consts::TAU * f * 1e6;
    let mut c = 0.0;
    let s = unsafe { ioncav_cooperativity(two_pi_mhz(1.8), two_pi_mhz(25.0), two_pi_mhz(2.11), &mut c) };
    assert_eq!(s, IoncavStatus::Ok);
    assert!((c - 0.0307).abs() < 5e-4);
    assert!((ioncav_emission_probability(0.032) - 0.0602).abs() < 1e-4);
    assert!((ioncav_mirror_outcoupling(100.0, 10.0, 200.0) - 0.3226).abs() < 1e-4);
    assert!((ioncav_absorption_chain(0.032, 0.91, 0.75, 0.9, 0.8, 1.0) - 0.0314).abs() < 1e-3);
}

#[test]
fn bad_rates_set_error() {
    let mut c = 0.0;
    let s = unsafe { ioncav_cooperativity(1.0, 0.0, 1.0, &mut c) };
    assert_ne!(s, IoncavStatus::Ok);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { ioncav_cooperativity(1.0, 1.0, 1.0, ptr::null_mut()) }, IoncavStatus::NullPointer);
}

#[test]
fn config_lifecycle_and_run() {
    let json = CString::new(r#"{"schema_version": 1, "experiment": "budget_report", "base_seed": 3}"#).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(ioncav_config_from_json(json.as_ptr(), &mut cfg), IoncavStatus::Ok);
        assert_eq!(ioncav_config_validate(cfg), IoncavStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let out = CString::new(dir.path().to_str().unwrap()).unwrap();
        let mut summary = ptr::null_mut();
        assert_eq!(ioncav_run(cfg, out.as_ptr(), &mut summary), IoncavStatus::Ok);
        let text = CStr::from_ptr(summary).to_str().unwrap().to_owned();
        ioncav_string_free(summary);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["quantities"]["p_emit"].as_f64().unwrap() - 0.0602).abs() < 1e-4);
        assert!(dir.path().join("manifest.json").exists());
        ioncav_config_free(cfg);
    }
}

#[test]
fn validation_failure_is_reported() {
    let name = CString::new("emit_histogram").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(ioncav_config_default(name.as_ptr(), 1, &mut cfg), IoncavStatus::Ok);
        assert_eq!(ioncav_config_set_trajectories(cfg, 0), IoncavStatus::Ok);
        assert_eq!(ioncav_config_validate(cfg), IoncavStatus::Validation);
        assert!(last_error().contains("n_trajectories"));
        ioncav_config_free(cfg);
    }
}

#[test]
fn malformed_input() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("{not json").unwrap();
    let unknown = CString::new("warp_drive").unwrap();
    unsafe {
        assert_eq!(ioncav_config_from_json(bad.as_ptr(), &mut cfg), IoncavStatus::Config);
        assert_eq!(ioncav_config_from_json(ptr::null(), &mut cfg), IoncavStatus::NullPointer);
        assert_eq!(ioncav_config_default(unknown.as_ptr(), 0, &mut cfg), IoncavStatus::Config);
        assert!(cfg.is_null());
        assert_eq!(ioncav_config_set_seed(ptr::null_mut(), 1), IoncavStatus::NullPointer);
    }
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ioncav.h")).unwrap();
    for sym in ["ioncav_run", "ioncav_config_from_json", "ioncav_last_error", "IONCAV_STATUS_OK", "IoncavConfig"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ioncav_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
