use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use bergman_lab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bl_last_error_message()) }.to_string_lossy().into_owned()
}

fn disk() -> *mut BlDomain {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { bl_domain_new(0, 1, &mut d) }, BlStatus::Ok);
    d
}

fn measure(json: &str) -> *mut BlMeasure {
    let s = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bl_measure_from_json(s.as_ptr(), &mut m) }, BlStatus::Ok, "{}", last_error());
    m
}

#[test]
fn kernel_on_the_diagonal_of_the_disk() {
    let d = disk();
    assert_eq!(unsafe { bl_domain_dim(d) }, 1);
    let z = [0.5, 0.0];
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { bl_kernel(d, z.as_ptr(), z.as_ptr(), &mut re, &mut im) }, BlStatus::Ok);
    // 1 / (pi (1 - |z|^2)^2)
    let want = 1.0 / (std::f64::consts::PI * 0.75f64.powi(2));
    assert!((re - want).abs() <= 1e-12 * want && im.abs() <= 1e-15);
    assert_eq!(last_error(), "");
    unsafe { bl_domain_free(d) };
}

#[test]
fn berezin_and_carleson_ratio_of_volume_measure() {
    let d = disk();
    let m = measure(r#"{"variant":"density","eta":0}"#);
    let z = [0.3, -0.2];
    let mut b = 0.0;
    assert_eq!(unsafe { bl_berezin(m, d, z.as_ptr(), &mut b) }, BlStatus::Ok);
    assert!((b - 1.0).abs() <= 1e-6, "{b}");
    let mut ratio = 0.0;
    assert_eq!(unsafe { bl_carleson_ratio(m, d, z.as_ptr(), 0.5, 1.0, &mut ratio) }, BlStatus::Ok);
    assert!((ratio - 1.0).abs() <= 1e-6, "{ratio}");
    let mut mass = 0.0;
    assert_eq!(unsafe { bl_ball_mass(m, d, z.as_ptr(), 0.5, &mut mass) }, BlStatus::Ok);
    assert!(mass > 0.0);
    unsafe {
        bl_measure_free(m);
        bl_domain_free(d);
    }
}

#[test]
fn atomic_measure_mass() {
    let d = disk();
    let m = measure(r#"{"variant":"atomic","atoms":[[0.5,0.0,2.0],[0.0,0.9,1.0]]}"#);
    let z = [0.5, 0.0];
    let mut mass = 0.0;
    assert_eq!(unsafe { bl_ball_mass(m, d, z.as_ptr(), 0.3, &mut mass) }, BlStatus::Ok);
    assert_eq!(mass, 2.0);
    unsafe {
        bl_measure_free(m);
        bl_domain_free(d);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { bl_domain_new(7, 1, &mut d) }, BlStatus::InvalidArgument);
    assert!(last_error().contains("unknown domain kind"));
    assert_eq!(unsafe { bl_domain_new(0, 1, ptr::null_mut()) }, BlStatus::NullPointer);

    let d = disk();
    let outside = [1.5, 0.0];
    let (mut re, mut im) = (0.0, 0.0);
    let st = unsafe { bl_kernel(d, outside.as_ptr(), outside.as_ptr(), &mut re, &mut im) };
    assert_eq!(st, BlStatus::InadmissiblePoint, "{}", last_error());
    assert!(!last_error().is_empty());
    let st = unsafe { bl_kernel(ptr::null(), outside.as_ptr(), outside.as_ptr(), &mut re, &mut im) };
    assert_eq!(st, BlStatus::NullPointer);
    assert_eq!(last_error(), "domain is null");

    let bad = CString::new(r#"{"variant":"density","eta":-3}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bl_measure_from_json(bad.as_ptr(), &mut m) }, BlStatus::InvalidMeasure);
    assert!(m.is_null());
    let junk = CString::new("not json").unwrap();
    assert_eq!(unsafe { bl_measure_from_json(junk.as_ptr(), &mut m) }, BlStatus::InvalidMeasure);

    let m0 = measure(r#"{"variant":"density","eta":0}"#);
    let mut r = 0.0;
    let z = [0.0, 0.0];
    assert_eq!(unsafe { bl_carleson_ratio(m0, d, z.as_ptr(), 0.5, -1.0, &mut r) }, BlStatus::InvalidArgument);
    unsafe {
        bl_measure_free(m0);
        bl_domain_free(d);
        bl_domain_free(ptr::null_mut());
        bl_measure_free(ptr::null_mut());
    }
}

#[test]
fn gain_exponent_cases() {
    let mut g = 0.0;
    // n = 1, eta = 0.5, p = 2: G = 4 / (4 - 2) = 2
    assert_eq!(bl_gain_exponent(1, 0.5, 2.0, &mut g), BlStatus::Ok);
    assert!((g - 2.0).abs() <= 1e-12, "{g}");
    assert_eq!(bl_gain_exponent(1, 1.0, 2.0, &mut g), BlStatus::InvalidArgument);
    assert_eq!(bl_gain_exponent(0, 0.5, 2.0, &mut g), BlStatus::InvalidArgument);
    assert_eq!(bl_gain_exponent(1, 0.5, 2.0, ptr::null_mut()), BlStatus::NullPointer);
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(bl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn c_program_links_against_the_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/bergman_lab.h");
    assert!(header.exists(), "header missing");
    let target = root.join("../../target/debug");
    let lib = target.join("libbergman_lab_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "bergman_lab.h"
int main(void) {
    BlDomain *d = NULL;
    if (bl_domain_new(1, 2, &d) != BL_STATUS_OK) return 1;
    double z[4] = {0.1, 0.0, 0.0, 0.2};
    double re, im;
    if (bl_kernel(d, z, z, &re, &im) != BL_STATUS_OK) return 2;
    double far[4] = {1.0, 0.0, 1.0, 0.0};
    if (bl_kernel(d, far, far, &re, &im) != BL_STATUS_INADMISSIBLE_POINT) return 3;
    printf("%s\n", bl_last_error_message());
    bl_domain_free(d);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let st = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(!out.stdout.is_empty());
}
