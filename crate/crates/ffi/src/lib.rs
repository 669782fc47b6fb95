//! C ABI for `kernelreg`.
//!
//! Objects cross the boundary as opaque handles created by `kr_*_new` /
//! `kr_*_from_json` and released by the matching `kr_*_free`. Every fallible
//! call returns a [`KrStatus`]; on failure the message is available from
//! [`kr_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kernelreg::analysis::{run_verification, VerifyOptions};
use kernelreg::estimator::{estimate, DataSet, EstimationResult, Family, TuneConfig};
use kernelreg::{Error, KernelSpec};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Unsupported = 4,
    Numerical = 5,
    UndefinedFit = 6,
    Io = 7,
    Panic = 8,
}

/// A validated kernel specification.
pub struct KrKernel(KernelSpec);

/// Input/output data, optionally with the true impulse response.
pub struct KrDataset(DataSet);

/// Result of tuning a family on a data set.
pub struct KrEstimate(EstimationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> KrStatus {
    match e {
        Error::Domain { .. } => KrStatus::Domain,
        Error::Unsupported(_) => KrStatus::Unsupported,
        Error::UndefinedFit => KrStatus::UndefinedFit,
        Error::Io(_) | Error::Csv(_) => KrStatus::Io,
        e if e.is_numerical() => KrStatus::Numerical,
        _ => KrStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (KrStatus, String)>) -> KrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            KrStatus::Panic
        }
    }
}

fn lib<T>(r: kernelreg::Result<T>) -> Result<T, (KrStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (KrStatus, String) {
    (KrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (KrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (KrStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (KrStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a kernel spec from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kr_kernel_from_json(json: *const c_char, out: *mut *mut KrKernel) -> KrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = lib(KernelSpec::from_json_str(str_arg(json, "json")?))?;
        *out = Box::into_raw(Box::new(KrKernel(spec)));
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from `kr_kernel_from_json` or be null.
#[no_mangle]
pub unsafe extern "C" fn kr_kernel_free(kernel: *mut KrKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Evaluates `k(t, s)`.
///
/// # Safety
/// `kernel` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kr_kernel_eval(kernel: *const KrKernel, t: usize, s: usize, out: *mut f64) -> KrStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(k.0.eval(t, s))?;
        Ok(())
    })
}

/// Fills `out` (row-major, `len * len`) with the kernel matrix on `grid`.
///
/// # Safety
/// `grid` must hold `len` entries and `out` room for `len * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kr_kernel_gram(
    kernel: *const KrKernel,
    grid: *const usize,
    len: usize,
    out: *mut f64,
) -> KrStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let grid = slice_arg(grid, len, "grid")?;
        if out.is_null() && len > 0 {
            return Err(null("out"));
        }
        let m = lib(kernelreg::gram(&k.0, grid))?;
        for i in 0..len {
            for j in 0..len {
                *out.add(i * len + j) = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Creates a data set from `len` input and output samples.
///
/// # Safety
/// `u` and `y` must each hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_dataset_new(
    u: *const f64,
    y: *const f64,
    len: usize,
    out: *mut *mut KrDataset,
) -> KrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let u = slice_arg(u, len, "u")?.to_vec();
        let y = slice_arg(y, len, "y")?.to_vec();
        let ds = lib(DataSet::new(u, y))?;
        *out = Box::into_raw(Box::new(KrDataset(ds)));
        Ok(())
    })
}

/// Attaches the true impulse response, enabling the fit score.
///
/// # Safety
/// `dataset` must be valid and `g0` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kr_dataset_set_g0(dataset: *mut KrDataset, g0: *const f64, len: usize) -> KrStatus {
    guard(|| {
        let ds = dataset.as_mut().ok_or_else(|| null("dataset"))?;
        ds.0.g0 = Some(slice_arg(g0, len, "g0")?.to_vec());
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from `kr_dataset_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn kr_dataset_free(dataset: *mut KrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Tunes `family` on the data and estimates `taps` impulse-response
/// coefficients. The `oracle` family needs `g0` on the data set.
///
/// # Safety
/// `family` must be NUL-terminated; `dataset` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_estimate(
    family: *const c_char,
    dataset: *const KrDataset,
    taps: usize,
    seed: u64,
    out: *mut *mut KrEstimate,
) -> KrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let fam = lib(Family::from_name(str_arg(family, "family")?, ds.0.g0.as_deref()))?;
        let cfg = TuneConfig {
            seed,
            ..TuneConfig::default()
        };
        let r = lib(estimate(&fam, &ds.0, taps, &cfg))?;
        *out = Box::into_raw(Box::new(KrEstimate(r)));
        Ok(())
    })
}

/// # Safety
/// `est` must come from `kr_estimate` or be null.
#[no_mangle]
pub unsafe extern "C" fn kr_estimate_free(est: *mut KrEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Number of estimated taps.
///
/// # Safety
/// `est` must be valid or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn kr_estimate_len(est: *const KrEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.0.g_hat.len())
}

/// Copies up to `len` estimated taps into `out`.
///
/// # Safety
/// `est` must be valid and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kr_estimate_taps(est: *const KrEstimate, out: *mut f64, len: usize) -> KrStatus {
    guard(|| {
        let e = est.as_ref().ok_or_else(|| null("est"))?;
        if out.is_null() && len > 0 {
            return Err(null("out"));
        }
        for (i, v) in e.0.g_hat.iter().take(len).enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// Tuned noise variance and negative log marginal likelihood.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_estimate_summary(
    est: *const KrEstimate,
    sigma2: *mut f64,
    nll: *mut f64,
) -> KrStatus {
    guard(|| {
        let e = est.as_ref().ok_or_else(|| null("est"))?;
        if sigma2.is_null() || nll.is_null() {
            return Err(null("out"));
        }
        *sigma2 = e.0.sigma2;
        *nll = e.0.nll;
        Ok(())
    })
}

/// Fit score against the true response; `UndefinedFit` when the data set
/// carried none.
///
/// # Safety
/// `est` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_estimate_fit(est: *const KrEstimate, out: *mut f64) -> KrStatus {
    guard(|| {
        let e = est.as_ref().ok_or_else(|| null("est"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        match e.0.fit {
            Some(f) => {
                *out = f;
                Ok(())
            }
            None => Err((KrStatus::UndefinedFit, "no true impulse response was supplied".into())),
        }
    })
}

/// The whole result as JSON; release with `kr_string_free`.
///
/// # Safety
/// `est` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_estimate_to_json(est: *const KrEstimate, out: *mut *mut c_char) -> KrStatus {
    guard(|| {
        let e = est.as_ref().ok_or_else(|| null("est"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string(&e.0).map_err(|e| (KrStatus::InvalidArgument, e.to_string()))?;
        *out = CString::new(s).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn kr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the verification suite with default tolerances. `all_pass` receives
/// 1 when every check passed and 0 otherwise.
///
/// # Safety
/// `all_pass` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_verify(seed: u64, inject_fault: bool, all_pass: *mut i32) -> KrStatus {
    guard(|| {
        if all_pass.is_null() {
            return Err(null("all_pass"));
        }
        let opts = VerifyOptions {
            seed,
            inject_fault,
            ..VerifyOptions::default()
        };
        let report = lib(run_verification(&opts))?;
        *all_pass = i32::from(report.all_pass());
        Ok(())
    })
}
