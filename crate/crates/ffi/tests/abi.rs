use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use stostab_ffi::*;

fn last_error() -> String {
    let p = stostab_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn reference() -> *mut StostabClosedLoop {
    let mut cl = ptr::null_mut();
    let s = unsafe { stostab_closed_loop_new(1.0, 1.0, 4.0, 4.0, 1e-4, 1e-4, &mut cl) };
    assert_eq!(s, StostabStatus::Ok);
    assert!(!cl.is_null());
    cl
}

#[test]
fn closed_loop_round_trip() {
    let cl = reference();
    let x = [0.3, -0.2, 0.7];
    let (mut f, mut s, mut u, mut lv) = ([0.0; 3], [0.0; 3], [0.0; 2], 0.0);
    unsafe {
        assert_eq!(stostab_closed_loop_drift(cl, x.as_ptr(), f.as_mut_ptr()), StostabStatus::Ok);
        assert_eq!(stostab_closed_loop_diffusion(cl, x.as_ptr(), s.as_mut_ptr()), StostabStatus::Ok);
        assert_eq!(stostab_closed_loop_control(cl, x.as_ptr(), u.as_mut_ptr()), StostabStatus::Ok);
        assert_eq!(stostab_closed_loop_generator(cl, x.as_ptr(), &mut lv), StostabStatus::Ok);
        stostab_closed_loop_free(cl);
        stostab_closed_loop_free(ptr::null_mut());
    }
    assert!(lv < 0.0, "{lv}");
    assert!(f.iter().chain(&s).chain(&u).all(|v| v.is_finite()));
    assert!(stostab_last_error_message().is_null());
}

#[test]
fn v2_functions() {
    let (mut v, mut g, mut h) = (0.0, [0.0; 3], [0.0; 9]);
    let axis = [0.0, 0.0, 1.0];
    unsafe {
        assert_eq!(stostab_v2_value(axis.as_ptr(), &mut v), StostabStatus::Ok);
        assert_eq!(stostab_v2_gradient(axis.as_ptr(), g.as_mut_ptr()), StostabStatus::Ok);
        assert_eq!(stostab_v2_hessian(axis.as_ptr(), h.as_mut_ptr()), StostabStatus::Ok);
    }
    assert_eq!(v, 2.0);
    assert_eq!(g, [0.0, 0.0, 4.0]);
    assert_eq!(h, [-2.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 4.0]);

    let x = [0.4, -1.1, 0.9];
    unsafe { stostab_v2_hessian(x.as_ptr(), h.as_mut_ptr()) };
    let want = stostab::lyapunov::v2_hessian(&nalgebra::Vector3::from(x));
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(h[3 * i + j], want[(i, j)]);
        }
    }
}

#[test]
fn error_codes_and_messages() {
    let mut cl = ptr::null_mut();
    unsafe {
        let s = stostab_closed_loop_new_constant(1.0, 1.0, 4.0, 4.0, 1.0, 0.0, &mut cl);
        assert_eq!(s, StostabStatus::InvalidDesign);
        assert!(cl.is_null());
        assert!(last_error().contains("brockett6"));

        let s = stostab_closed_loop_new(1.0, 1.0, 1.0, -1.0, 1e-4, 1e-4, &mut cl);
        assert_eq!(s, StostabStatus::InvalidArgument);

        let s = stostab_closed_loop_new(1.0, 1.0, 4.0, 4.0, 1e-4, 1e-4, ptr::null_mut());
        assert_eq!(s, StostabStatus::NullPointer);

        let mut out = 0.0;
        assert_eq!(stostab_v2_value(ptr::null(), &mut out), StostabStatus::NullPointer);
        assert_eq!(stostab_closed_loop_generator(ptr::null(), [0.0; 3].as_ptr(), &mut out), StostabStatus::NullPointer);
        assert!(last_error().contains("null"));
    }
    let v = unsafe { CStr::from_ptr(stostab_version()) };
    assert_eq!(v.to_str().unwrap(), stostab::VERSION);
}

#[test]
fn scan_and_monte_carlo() {
    let cl = reference();
    let mut scan = StostabScanSummary::default();
    let mut cfg = unsafe { std::mem::zeroed::<StostabMcConfig>() };
    let mut mc = StostabMcSummary::default();
    unsafe {
        assert_eq!(stostab_scan_generator(cl, -2.0, 2.0, 11, 1e-3, &mut scan), StostabStatus::Ok);
        assert_eq!(stostab_scan_generator(cl, 2.0, -2.0, 11, 1e-3, &mut scan), StostabStatus::InvalidArgument);
        assert_eq!(stostab_mc_config_default(&mut cfg), StostabStatus::Ok);
        assert_eq!(cfg.x0, [0.0, 0.0, 1.0]);
        cfg.horizon = 1.0;
        cfg.n_paths = 100;
        assert_eq!(stostab_mc_stability(cl, &cfg, &mut mc), StostabStatus::Ok);
        cfg.n_paths = 10;
        assert_eq!(stostab_mc_stability(cl, &cfg, &mut StostabMcSummary::default()), StostabStatus::InvalidArgument);
        stostab_closed_loop_free(cl);
    }
    check_scan(&scan);
    assert_eq!(mc.n_paths, 100);
    assert_eq!(mc.n_diverged, 0);
    assert_eq!(mc.v2_initial, 2.0);
    assert_eq!(mc.m_level, 20.0);
    assert!(mc.v2_terminal_q05 <= mc.v2_terminal_q50 && mc.v2_terminal_q50 <= mc.v2_terminal_q95);
    assert!(mc.kushner_ok);
}

fn check_scan(s: &StostabScanSummary) {
    assert_eq!(s.n_points, 11 * 11 * 11 - 1);
    assert_eq!(s.n_violations, 0);
    assert!(s.max_lv < 0.0 && s.min_lv <= s.max_lv);
    assert_eq!(s.m_count, 10);
}

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/stostab.h")).unwrap()
}

#[test]
fn header_declares_the_api() {
    let h = header();
    let src = include_str!("../src/lib.rs");
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 14, "{exported:?}");
    for name in exported {
        assert!(h.contains(&format!("{name}(")), "header lacks {name}");
    }
    for ty in ["typedef struct StostabClosedLoop StostabClosedLoop;", "STOSTAB_STATUS_INVALID_DESIGN = 3", "StostabMcSummary"] {
        assert!(h.contains(ty), "header lacks {ty}");
    }
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/abi-xxxx
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let lib = target_dir().join("libstostab_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let here = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg(here.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(here.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
