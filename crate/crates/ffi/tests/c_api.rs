use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use apsumma::strong_means::strong_mean;
use apsumma::summability::{generate_row, RowFamily};
use apsumma::ApFunction;
use apsumma_ffi::*;

const COSINE: &str = r#"{"alpha": 1, "terms": [{"lambda": 1, "a_plus": [0.5, 0], "a_minus": [0.5, 0]}]}"#;

fn function(json: &str) -> *mut ApsFunction {
    let text = CString::new(json).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { aps_function_from_json(text.as_ptr(), &mut f) }, ApsStatus::Ok);
    f
}

#[test]
fn handles_round_trip() {
    let f = function(COSINE);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { aps_function_eval(f, 0.3, &mut re, &mut im) }, ApsStatus::Ok);
    assert!((re - 0.3f64.cos()).abs() < 1e-15 && im.abs() < 1e-15);

    let (mut alpha, mut top) = (0.0, 0.0);
    assert_eq!(unsafe { aps_function_info(f, &mut alpha, &mut top) }, ApsStatus::Ok);
    assert_eq!((alpha, top), (1.0, 1.0));

    let mut tail = 0.0;
    assert_eq!(unsafe { aps_kernel_partial_sum(f, 0.3, 2, 1e-8, &mut re, &mut im, &mut tail) }, ApsStatus::Ok);
    assert!((re - 0.3f64.cos()).abs() <= 1e-8 + tail);

    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(unsafe { aps_best_approx_bracket(f, 0.5, &mut lo, &mut hi) }, ApsStatus::Ok);
    assert_eq!((lo, hi), (0.5, 1.0));

    let fam = CString::new("cesaro").unwrap();
    let mut row = ptr::null_mut();
    assert_eq!(unsafe { aps_row_generate(fam.as_ptr(), 4, f64::NAN, &mut row) }, ApsStatus::Ok);
    let mut h = 0.0;
    assert_eq!(unsafe { aps_strong_mean(f, 0.3, row, 2.0, &mut h) }, ApsStatus::Ok);
    let core = ApFunction::from_json(COSINE).unwrap();
    let want = strong_mean(&core, 0.3, &generate_row(&RowFamily::Cesaro, 4).unwrap(), 2.0, 1.0).unwrap();
    assert_eq!(h, want);

    let (mut member, mut k) = (false, 0.0);
    assert_eq!(unsafe { aps_row_class(row, ApsClass::Rbvs, 2.0, &mut member, &mut k) }, ApsStatus::Ok);
    assert!(member && k == 1.0);

    unsafe {
        aps_row_free(row);
        aps_function_free(f);
        aps_function_free(ptr::null_mut());
    }
}

#[test]
fn explicit_rows_and_errors() {
    let entries = [0.5, 0.0, 0.5];
    let mut row = ptr::null_mut();
    assert_eq!(unsafe { aps_row_explicit(2, entries.as_ptr(), 3, &mut row) }, ApsStatus::Ok);
    let (mut member, mut k) = (true, 0.0);
    assert_eq!(unsafe { aps_row_class(row, ApsClass::Rbvs, 2.0, &mut member, &mut k) }, ApsStatus::Ok);
    assert!(!member && k.is_infinite());
    unsafe { aps_row_free(row) };

    let neg = [1.5, -0.5];
    assert_eq!(unsafe { aps_row_explicit(1, neg.as_ptr(), 2, &mut row) }, ApsStatus::InvalidArgument);

    let half = [0.25, 0.25];
    assert_eq!(unsafe { aps_row_explicit(1, half.as_ptr(), 2, &mut row) }, ApsStatus::Ok);
    let f = function(COSINE);
    let mut h = 0.0;
    assert_eq!(unsafe { aps_strong_mean(f, 0.0, row, 1.0, &mut h) }, ApsStatus::NotStochastic);
    let mut buf = [0 as c_char; 8];
    let full = unsafe { aps_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 7);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes().len(), 7);
    unsafe {
        aps_row_free(row);
        aps_function_free(f);
    }
}

#[test]
fn function_from_arrays() {
    let l = [0.0, 1.0, 2.5];
    let pr = [1.0, 0.5, 0.0];
    let pi = [0.0, 0.0, 0.0];
    let mr = [0.0, 0.5, 0.25];
    let mi = [0.0, 0.0, 0.0];
    let mut f = ptr::null_mut();
    let s = unsafe { aps_function_new(1.0, l.as_ptr(), pr.as_ptr(), pi.as_ptr(), mr.as_ptr(), mi.as_ptr(), 3, &mut f) };
    assert_eq!(s, ApsStatus::Ok);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { aps_threshold_partial_sum(f, 0.0, 1.0, &mut re, &mut im) }, ApsStatus::Ok);
    assert_eq!((re, im), (2.0, 0.0));
    unsafe { aps_function_free(f) };
    let s = unsafe { aps_function_new(2.0, l.as_ptr(), pr.as_ptr(), pi.as_ptr(), mr.as_ptr(), mi.as_ptr(), 3, &mut f) };
    assert_eq!(s, ApsStatus::InvalidFunction);
}

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().map(|_| cc)
}

#[test]
fn header_is_valid_c() {
    let Some(cc) = compiler() else {
        eprintln!("skipping: no C compiler");
        return;
    };
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/apsumma.h");
    for std in ["-std=c99", "-std=c11"] {
        let out = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", std, "-x", "c"])
            .arg(&header)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

/// `cargo test` does not refresh the static archive, so linking only runs
/// when it is newer than the sources (after `cargo build`).
fn fresh_static_lib() -> Option<PathBuf> {
    let lib = target_dir().join("libapsumma_ffi.a");
    let built = std::fs::metadata(&lib).and_then(|m| m.modified()).ok()?;
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs");
    let edited = std::fs::metadata(src).and_then(|m| m.modified()).ok()?;
    (built >= edited).then_some(lib)
}

#[test]
fn header_links_from_c() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let (Some(cc), Some(lib)) = (compiler(), fresh_static_lib()) else {
        eprintln!("skipping: no C compiler or no up-to-date static library (run cargo build first)");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "apsumma.h"

int main(void) {
    ApsFunction *f = NULL;
    const char *json = "{\"alpha\": 1, \"terms\": [{\"lambda\": 1, \"a_plus\": [0.5, 0], \"a_minus\": [0.5, 0]}]}";
    if (aps_function_from_json(json, &f) != APS_STATUS_OK) return 1;
    double re = 0, im = 0;
    if (aps_function_eval(f, 0.0, &re, &im) != APS_STATUS_OK || fabs(re - 1.0) > 1e-15) return 2;
    double v = 0;
    if (aps_geometric_sine_sum(0.5, 1.5707963267948966, 1.5707963267948966, &v) != APS_STATUS_OK) return 3;
    if (aps_geometric_sine_sum(1.5, 1.0, 1.0, &v) != APS_STATUS_INVALID_ARGUMENT) return 4;
    char msg[128];
    aps_last_error_message(msg, sizeof msg);
    aps_function_free(f);
    printf("%.12f %s\n", v, msg);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let out = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with("1.000000000000 "), "{text}");
    assert!(text.contains("r"));
}
