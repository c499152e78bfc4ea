use std::ffi::{CStr, CString};
use std::ptr;

use fdedim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fdedim_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn lambert_w0_of_e_is_one() {
    let mut w = 0.0;
    assert_eq!(fdedim_lambert_w0(std::f64::consts::E, &mut w), FdedimStatus::Ok);
    assert!((w - 1.0).abs() < 1e-14);
    assert_eq!(fdedim_lambert_w0(-1.0, &mut w), FdedimStatus::Usage);
    assert!(last_error().contains("undefined"));
}

#[test]
fn real_root_and_missing_root() {
    let mut x = 0.0;
    assert_eq!(fdedim_real_rightmost_root(1.0, -0.5, 1.0, &mut x), FdedimStatus::Ok);
    assert!((x + 1.0 - 0.5 * (-x).exp()).abs() < 1e-12);
    assert_eq!(fdedim_real_rightmost_root(1.0, 0.5, 1.0, &mut x), FdedimStatus::NotFound);
}

#[test]
fn spectrum_handle_round_trip() {
    let mut h = ptr::null_mut();
    assert_eq!(fdedim_spectrum_new(1.0, 0.0, 1.0, 3, f64::NAN, &mut h), FdedimStatus::Ok);
    let mut n = 0;
    assert_eq!(fdedim_spectrum_len(h, &mut n), FdedimStatus::Ok);
    assert_eq!(n, 3);
    let (mut rho, mut mult, mut k) = (0.0, 0, 0);
    assert_eq!(fdedim_spectrum_level(h, 2, &mut rho, &mut mult, &mut k), FdedimStatus::Ok);
    assert_eq!((rho, mult, k), (-5.0, 1, 2));
    assert_eq!(fdedim_spectrum_level(h, 4, &mut rho, &mut mult, &mut k), FdedimStatus::Usage);
    fdedim_spectrum_free(h);
    fdedim_spectrum_free(ptr::null_mut());
    assert_eq!(fdedim_spectrum_len(ptr::null(), &mut n), FdedimStatus::NullPointer);
}

#[test]
fn bounds_and_infeasibility() {
    let c = FdedimConstants { m1: 0.05, m2: 0.05, m3: 0.025, lambda0: 0.0, lambda1: 0.0, rank: 1, t0: 1.0 };
    let mut d = 0.0;
    assert_eq!(fdedim_hausdorff_bound(&c, 2.0, &mut d), FdedimStatus::Ok);
    assert!((d - 1.0).abs() < 1e-12);
    let loose = FdedimConstants { m1: 1.5, ..c };
    assert_eq!(fdedim_fractal_bound(&loose, 1.0, &mut d), FdedimStatus::Infeasible);
    assert_eq!(fdedim_hausdorff_bound(&c, 3.0, &mut d), FdedimStatus::Usage);
    assert_eq!(fdedim_hausdorff_bound(ptr::null(), 1.0, &mut d), FdedimStatus::NullPointer);
    assert_eq!(fdedim_hausdorff_bound(&c, 2.0, ptr::null_mut()), FdedimStatus::NullPointer);
}

#[test]
fn covering_and_absorbing_values() {
    let mut n = 0.0;
    assert_eq!(fdedim_covering_bound(2, 2.0, 1.0, &mut n), FdedimStatus::Ok);
    assert_eq!(n, 72.0);
    let mut r = 0.0;
    assert_eq!(fdedim_absorbing_radius(0.9, 1.5, 0.1, 0.3, &mut r), FdedimStatus::Ok);
    assert!(r > 0.0);
    assert_eq!(fdedim_absorbing_radius(1.5, 1.5, 0.1, 0.3, &mut r), FdedimStatus::Usage);
}

#[test]
fn run_bounds_and_pipeline_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = c_config(&format!(
        r#"{{"output_dir": {:?}, "constants": {{"m1": 0.05, "m2": 0.05, "m3": 0.025, "lambda0": 0.0, "lambda1": 0.0, "rank": 1, "t0": 1.0}}, "bounds": {{"alpha": 2.0}}}}"#,
        dir.path()
    ));
    let verb = CString::new("bounds").unwrap();
    let mut summary = ptr::null_mut();
    assert_eq!(fdedim_run(verb.as_ptr(), cfg.as_ptr(), &mut summary), FdedimStatus::Ok);
    let line = unsafe { CStr::from_ptr(summary) }.to_string_lossy().into_owned();
    fdedim_string_free(summary);
    assert!(line.contains("hausdorff"), "{line}");
    assert!(dir.path().join("bounds.json").exists());

    let bad = CString::new("{ \"seed\": ").unwrap();
    assert_eq!(fdedim_run(verb.as_ptr(), bad.as_ptr(), &mut summary), FdedimStatus::Usage);
    assert!(last_error().contains("line 1"), "{}", last_error());
    let nope = CString::new("fly").unwrap();
    assert_eq!(fdedim_run(nope.as_ptr(), cfg.as_ptr(), &mut summary), FdedimStatus::Usage);
    assert_eq!(fdedim_run(ptr::null(), cfg.as_ptr(), &mut summary), FdedimStatus::NullPointer);
}

fn c_config(text: &str) -> CString {
    CString::new(text).unwrap()
}

#[test]
fn header_declares_every_export() {
    let src = include_str!("../src/lib.rs");
    let header = include_str!("../include/fdedim.h");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.strip_prefix("pub extern \"C\" fn "))
        .map(|l| l.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from the header");
    }
}
