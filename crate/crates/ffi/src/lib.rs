//! C ABI over `galois_sat`.
//!
//! Every fallible function returns a [`GsatStatus`]; on failure the message is
//! available from [`gsat_last_error_message`] on the same thread. Problems are
//! opaque handles created by [`gsat_problem_new`] and released with
//! [`gsat_problem_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use galois_sat::elliptic::{complete_k, jacobi_real, EllipticModulus};
use galois_sat::kovacic::{self, Classification};
use galois_sat::monodromy::{local_monodromy_infinity, MatrixClass};
use galois_sat::nve::{frobenius_infinity, FuchsianProblem};
use galois_sat::report::report_string;
use galois_sat::{Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsatStatus {
    Ok = 0,
    NullPointer = 1,
    /// The inputs were rejected before any computation.
    InvalidInput = 2,
    /// A computation failed numerically.
    Numerical = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsatClassification {
    Reducible = 0,
    Case2Solvable = 1,
    Sl2 = 2,
    Inconclusive = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsatMatrixClass {
    Identity = 0,
    UnipotentNontrivial = 1,
    UnipotentAmbiguous = 2,
    Other = 3,
}

/// Series data at infinity. Coefficients are complex, split into real and imaginary parts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GsatFrobenius {
    pub exponent_low: f64,
    pub exponent_high: f64,
    pub gap: u32,
    pub f_re: [f64; 3],
    pub f_im: [f64; 3],
    pub g_re: f64,
    pub g_im: f64,
    pub log_present: bool,
    pub near_threshold: bool,
}

/// Row-major 2×2 complex matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GsatMatrix2 {
    pub re: [f64; 4],
    pub im: [f64; 4],
}

/// Opaque handle to the rationalized variational equation of one family member.
pub struct GsatProblem {
    inner: FuchsianProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GsatStatus {
    if e.is_validation() { GsatStatus::InvalidInput } else { GsatStatus::Numerical }
}

fn guard<F: FnOnce() -> Result<(), Error>>(f: F) -> GsatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GsatStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            GsatStatus::Panic
        }
    }
}

fn null_error(what: &str) -> GsatStatus {
    set_error(&format!("null pointer passed for `{what}`"));
    GsatStatus::NullPointer
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gsat_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gsat_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Builds the problem for parameters (C, k, ξ). On success `*out` owns a handle.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn gsat_problem_new(c: f64, k: f64, xi: f64, out: *mut *mut GsatProblem) -> GsatStatus {
    if out.is_null() {
        return null_error("out");
    }
    *out = ptr::null_mut();
    guard(|| {
        let inner = FuchsianProblem::family(c, k, xi)?;
        *out = Box::into_raw(Box::new(GsatProblem { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `p` must be null or a handle from [`gsat_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gsat_problem_free(p: *mut GsatProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs Kovacic's algorithm and the logarithm test at infinity.
///
/// # Safety
/// `p` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsat_problem_classify(p: *const GsatProblem, tol: f64, out: *mut GsatClassification) -> GsatStatus {
    let (Some(p), false) = (p.as_ref(), out.is_null()) else {
        return null_error("problem or out");
    };
    guard(|| {
        let report = kovacic::classify(&p.inner, tol)?;
        *out = match report.classification {
            Classification::Reducible => GsatClassification::Reducible,
            Classification::Case2Solvable => GsatClassification::Case2Solvable,
            Classification::SL2 => GsatClassification::Sl2,
            Classification::Inconclusive => GsatClassification::Inconclusive,
        };
        Ok(())
    })
}

/// Full classification report as schema-versioned JSON. Release with [`gsat_string_free`].
///
/// # Safety
/// `p` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsat_problem_classify_json(p: *const GsatProblem, tol: f64, out: *mut *mut c_char) -> GsatStatus {
    let (Some(p), false) = (p.as_ref(), out.is_null()) else {
        return null_error("problem or out");
    };
    *out = ptr::null_mut();
    guard(|| {
        let report = kovacic::classify(&p.inner, tol)?;
        let s = CString::new(report_string("classify", &report)).map_err(|e| Error::Parse(e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gsat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `p` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsat_problem_frobenius(p: *const GsatProblem, out: *mut GsatFrobenius) -> GsatStatus {
    let (Some(p), false) = (p.as_ref(), out.is_null()) else {
        return null_error("problem or out");
    };
    guard(|| {
        let f = frobenius_infinity(&p.inner)?;
        *out = GsatFrobenius {
            exponent_low: f.exponents.0,
            exponent_high: f.exponents.1,
            gap: f.gap as u32,
            f_re: [f.f1.re, f.f2.re, f.f3.re],
            f_im: [f.f1.im, f.f2.im, f.f3.im],
            g_re: f.g.re,
            g_im: f.g.im,
            log_present: f.log_present,
            near_threshold: f.near_threshold,
        };
        Ok(())
    })
}

/// Monodromy around a loop enclosing every finite singularity, based at 0.
///
/// # Safety
/// `p` must be a live handle; `out` and `class_out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsat_problem_monodromy_infinity(
    p: *const GsatProblem,
    tol: f64,
    out: *mut GsatMatrix2,
    class_out: *mut GsatMatrixClass,
) -> GsatStatus {
    let (Some(p), false, false) = (p.as_ref(), out.is_null(), class_out.is_null()) else {
        return null_error("problem, out or class_out");
    };
    guard(|| {
        let lm = local_monodromy_infinity(&p.inner, tol)?;
        let m = lm.matrix.m;
        let entries: [Complex64; 4] = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
        *out = GsatMatrix2 { re: entries.map(|z| z.re), im: entries.map(|z| z.im) };
        *class_out = match lm.classification {
            MatrixClass::Identity => GsatMatrixClass::Identity,
            MatrixClass::UnipotentNontrivial => GsatMatrixClass::UnipotentNontrivial,
            MatrixClass::UnipotentAmbiguous => GsatMatrixClass::UnipotentAmbiguous,
            MatrixClass::Other => GsatMatrixClass::Other,
        };
        Ok(())
    })
}

/// sn, cn, dn at real argument `u` with modulus k in (0, 1).
///
/// # Safety
/// Output pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsat_jacobi(u: f64, k: f64, sn: *mut f64, cn: *mut f64, dn: *mut f64) -> GsatStatus {
    if sn.is_null() || cn.is_null() || dn.is_null() {
        return null_error("sn, cn or dn");
    }
    guard(|| {
        let m = EllipticModulus::new(k)?;
        (*sn, *cn, *dn) = jacobi_real(u, &m);
        Ok(())
    })
}

/// Complete elliptic integral of the first kind K(k).
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsat_complete_k(k: f64, out: *mut f64) -> GsatStatus {
    if out.is_null() {
        return null_error("out");
    }
    guard(|| {
        *out = complete_k(k)?;
        Ok(())
    })
}
