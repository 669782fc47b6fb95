use std::ffi::{CStr, CString};
use std::ptr;

use kernelreg_ffi::*;

fn last_error() -> String {
    let p = kr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn kernel_round_trip() {
    let json = CString::new(r#"{"family":"tc","params":{"c":2.0,"lambda":0.5}}"#).unwrap();
    let mut k = ptr::null_mut();
    unsafe {
        assert_eq!(kr_kernel_from_json(json.as_ptr(), &mut k), KrStatus::Ok);
        let mut v = 0.0;
        assert_eq!(kr_kernel_eval(k, 3, 1, &mut v), KrStatus::Ok);
        assert_eq!(v, 2.0 * 0.125);

        let grid = [1usize, 2, 3];
        let mut m = [0.0; 9];
        assert_eq!(kr_kernel_gram(k, grid.as_ptr(), 3, m.as_mut_ptr()), KrStatus::Ok);
        assert_eq!(m[2], v);
        assert_eq!(m[6], v);
        kr_kernel_free(k);
    }
}

#[test]
fn bad_inputs_report_codes() {
    let json = CString::new(r#"{"family":"tc","params":{"c":-1.0,"lambda":0.5}}"#).unwrap();
    let mut k = ptr::null_mut();
    unsafe {
        assert_eq!(kr_kernel_from_json(json.as_ptr(), &mut k), KrStatus::Domain);
        assert!(k.is_null());
        assert!(last_error().contains("c"));

        let json = CString::new(r#"{"family":"nope"}"#).unwrap();
        assert_eq!(kr_kernel_from_json(json.as_ptr(), &mut k), KrStatus::Unsupported);
        assert_eq!(kr_kernel_from_json(ptr::null(), &mut k), KrStatus::NullPointer);

        let mut v = 0.0;
        assert_eq!(kr_kernel_eval(ptr::null(), 1, 1, &mut v), KrStatus::NullPointer);
        kr_kernel_free(ptr::null_mut());
    }
}

#[test]
fn estimate_through_handles() {
    // y = u convolved with 0.8^k, no noise
    let n = 150;
    let u: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
    let g0: Vec<f64> = (1..=100).map(|k| 0.8f64.powi(k - 1)).collect();
    let y: Vec<f64> = (0..n)
        .map(|t| (1..=t.min(100)).map(|k| g0[k - 1] * u[t - k]).sum::<f64>() + 1e-3 * ((t % 3) as f64 - 1.0))
        .collect();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(kr_dataset_new(u.as_ptr(), y.as_ptr(), n, &mut ds), KrStatus::Ok);
        assert_eq!(kr_dataset_set_g0(ds, g0.as_ptr(), g0.len()), KrStatus::Ok);

        let fam = CString::new("tc").unwrap();
        let mut est = ptr::null_mut();
        assert_eq!(kr_estimate(fam.as_ptr(), ds, 100, 7, &mut est), KrStatus::Ok);
        assert_eq!(kr_estimate_len(est), 100);
        let mut taps = vec![0.0; 100];
        assert_eq!(kr_estimate_taps(est, taps.as_mut_ptr(), 100), KrStatus::Ok);
        let mut fit = 0.0;
        assert_eq!(kr_estimate_fit(est, &mut fit), KrStatus::Ok);
        assert!(fit > 90.0, "fit {fit}");
        let (mut s2, mut nll) = (0.0, 0.0);
        assert_eq!(kr_estimate_summary(est, &mut s2, &mut nll), KrStatus::Ok);
        assert!(s2 > 0.0 && nll.is_finite());

        let mut s = ptr::null_mut();
        assert_eq!(kr_estimate_to_json(est, &mut s), KrStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        kr_string_free(s);
        assert!(text.contains("\"seed\":7"));

        kr_estimate_free(est);
        kr_dataset_free(ds);
    }
}

#[test]
fn fit_missing_without_truth() {
    let u = [1.0, 0.0, -1.0, 2.0, 0.5, -0.3];
    let y = [0.0, 1.0, 0.5, -0.9, 2.1, 0.8];
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(kr_dataset_new(u.as_ptr(), y.as_ptr(), 6, &mut ds), KrStatus::Ok);
        let fam = CString::new("tc").unwrap();
        let mut est = ptr::null_mut();
        assert_eq!(kr_estimate(fam.as_ptr(), ds, 4, 1, &mut est), KrStatus::Ok);
        let mut fit = 0.0;
        assert_eq!(kr_estimate_fit(est, &mut fit), KrStatus::UndefinedFit);

        let oracle = CString::new("oracle").unwrap();
        let mut est2 = ptr::null_mut();
        assert_ne!(kr_estimate(oracle.as_ptr(), ds, 4, 1, &mut est2), KrStatus::Ok);
        assert!(est2.is_null());
        kr_estimate_free(est);
        kr_dataset_free(ds);
    }
}

#[test]
fn verify_detects_fault() {
    let mut ok = -1;
    unsafe {
        assert_eq!(kr_verify(3, false, &mut ok), KrStatus::Ok);
        assert_eq!(ok, 1);
        assert_eq!(kr_verify(3, true, &mut ok), KrStatus::Ok);
        assert_eq!(ok, 0);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/kernelreg.h");
    let src = include_str!("../src/lib.rs");
    for line in src.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else { continue };
        let name = rest.split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}
