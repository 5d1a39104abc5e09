//! C ABI for loading, checking, flattening and running hierarchies.
//!
//! # Handles
//!
//! [`HrmHandle`] is opaque. Handles come from [`hrm_load`] or
//! [`hrm_flatten`] and are released with [`hrm_free`]. Strings returned
//! through out-parameters are released with [`hrm_string_free`].
//!
//! # Errors
//!
//! Every fallible function returns an [`HrmStatus`]. On failure the message
//! is available from [`hrm_last_error`] on the same thread until the next
//! call. Out-parameters are written only on success. Panics are caught at the
//! boundary and reported as [`HrmStatus::Panic`].
//!
//! # Traces
//!
//! A trace is passed as a JSON array of labels, each label an array of
//! proposition names: `[["iron"], [], ["table"]]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hrm::flattening::{check_equivalence, flatten, TraceSource};
use hrm::machines::{load_hrm, save_hrm, Hrm, Verdict};
use hrm::Error;

/// Opaque hierarchy owned by the library.
pub struct HrmHandle {
    inner: Hrm,
}

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A document could not be parsed or did not match the schema.
    Parse = 3,
    /// The hierarchy is malformed or the operation is undefined for it.
    Invalid = 4,
    /// A trace mentioned an unknown proposition.
    UnknownProposition = 5,
    /// The library panicked.
    Panic = 6,
}

/// Outcome of running a trace through a hierarchy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrmVerdict {
    Accept = 0,
    Reject = 1,
    None = 2,
}

impl From<Verdict> for HrmVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Accept => HrmVerdict::Accept,
            Verdict::Reject => HrmVerdict::Reject,
            Verdict::None => HrmVerdict::None,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> HrmStatus {
    match err {
        Error::Json(_) | Error::Schema { .. } | Error::Io(_) | Error::Csv(_) => HrmStatus::Parse,
        Error::UnknownProposition(_) => HrmStatus::UnknownProposition,
        _ => HrmStatus::Invalid,
    }
}

struct Fail(HrmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HrmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HrmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside hrm");
            HrmStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(HrmStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| Fail(HrmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// # Safety
/// `h` must be null or a live handle.
unsafe fn handle<'a>(h: *const HrmHandle, what: &str) -> Result<&'a Hrm, Fail> {
    non_null(h, what)?;
    Ok(&(*h).inner)
}

fn into_handle(inner: Hrm) -> *mut HrmHandle {
    Box::into_raw(Box::new(HrmHandle { inner }))
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(HrmStatus::Invalid, "output contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or an empty string.
///
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn hrm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hrm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a hierarchy from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hrm_load(json: *const c_char, out: *mut *mut HrmHandle) -> HrmStatus {
    guard(|| {
        non_null(out, "out")?;
        let h = load_hrm(str_arg(json, "json")?)?;
        *out = into_handle(h);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hrm_free(h: *mut HrmHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hrm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Serializes a hierarchy to JSON. Free the result with [`hrm_string_free`].
///
/// # Safety
/// `h` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hrm_to_json(h: *const HrmHandle, out: *mut *mut c_char) -> HrmStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = into_c_string(save_hrm(handle(h, "h")?))?;
        Ok(())
    })
}

/// Writes whether the hierarchy passes every structural check. The
/// violations of an invalid hierarchy are left in [`hrm_last_error`].
///
/// # Safety
/// `h` must be a live handle and `valid` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hrm_validate(h: *const HrmHandle, valid: *mut bool) -> HrmStatus {
    let mut detail = String::new();
    let status = guard(|| {
        non_null(valid, "valid")?;
        let report = handle(h, "h")?.validate();
        detail = report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        *valid = report.is_valid();
        Ok(())
    });
    if status == HrmStatus::Ok && !detail.is_empty() {
        set_error(&detail);
    }
    status
}

/// Writes the height of the hierarchy.
///
/// # Safety
/// `h` must be a live handle and `height` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hrm_height(h: *const HrmHandle, height: *mut usize) -> HrmStatus {
    guard(|| {
        non_null(height, "height")?;
        *height = handle(h, "h")?.height()?;
        Ok(())
    })
}

/// Writes the number of machines, and the total states and edges over them.
///
/// # Safety
/// `h` must be a live handle; each out-pointer must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn hrm_counts(
    h: *const HrmHandle,
    machines: *mut usize,
    states: *mut usize,
    edges: *mut usize,
) -> HrmStatus {
    guard(|| {
        let hrm = handle(h, "h")?;
        if !machines.is_null() {
            *machines = hrm.machines().len();
        }
        if !states.is_null() {
            *states = hrm.num_states();
        }
        if !edges.is_null() {
            *edges = hrm.num_edges();
        }
        Ok(())
    })
}

/// Runs a JSON trace from the initial state and writes the verdict.
///
/// # Safety
/// `h` must be a live handle, `trace_json` a NUL-terminated string and
/// `verdict` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hrm_classify(
    h: *const HrmHandle,
    trace_json: *const c_char,
    verdict: *mut HrmVerdict,
) -> HrmStatus {
    guard(|| {
        non_null(verdict, "verdict")?;
        let hrm = handle(h, "h")?;
        let raw: Vec<Vec<String>> = serde_json::from_str(str_arg(trace_json, "trace_json")?)
            .map_err(|e| Fail(HrmStatus::Parse, format!("trace: {e}")))?;
        let labels = raw.iter().map(|l| hrm.props().label(l)).collect::<hrm::Result<Vec<_>>>()?;
        *verdict = hrm.classify(&labels)?.into();
        Ok(())
    })
}

/// Builds the equivalent flat hierarchy as a new handle.
///
/// # Safety
/// `h` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hrm_flatten(h: *const HrmHandle, out: *mut *mut HrmHandle) -> HrmStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = into_handle(flatten(handle(h, "h")?)?);
        Ok(())
    })
}

/// Compares two hierarchies on every trace up to `max_len` labels and writes
/// whether all verdicts agree. The first mismatch, if any, is left in
/// [`hrm_last_error`] as JSON.
///
/// # Safety
/// `a` and `b` must be live handles and `equivalent` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hrm_equivalent(
    a: *const HrmHandle,
    b: *const HrmHandle,
    max_len: usize,
    equivalent: *mut bool,
) -> HrmStatus {
    let mut witness = None;
    let status = guard(|| {
        non_null(equivalent, "equivalent")?;
        let report = check_equivalence(handle(a, "a")?, handle(b, "b")?, &TraceSource::Exhaustive { max_len })?;
        witness = report.mismatches.first().and_then(|m| serde_json::to_string(m).ok());
        *equivalent = report.is_equivalent();
        Ok(())
    });
    if let Some(w) = witness {
        set_error(&w);
    }
    status
}
