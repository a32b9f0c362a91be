//! C interface over `smms-core`.
//!
//! Manifolds are opaque handles created from TOML text. Reports come back as
//! JSON strings owned by the library; release them with [`smms_string_free`].
//! Every call returns an [`SmmsStatus`]; on failure [`smms_last_error`] holds
//! a message for the calling thread.

use smms_core::cli::{self, CliError, KSource, ManifoldFile, Mode, Report};
use smms_core::obstruction::{obstruction_g_at, Decision};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmmsStatus {
    Ok = 0,
    DecisionNo = 1,
    NotGeneric = 2,
    InputError = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmmsMode {
    Qe = 0,
    Soliton = 1,
    Static = 2,
    Rank = 3,
}

/// Opaque manifold handle.
pub struct SmmsManifold {
    file: ManifoldFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn guard(f: impl FnOnce() -> SmmsStatus) -> SmmsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("internal panic: {}", msg.unwrap_or_default()));
            SmmsStatus::Panic
        }
    }
}

fn input_error(e: CliError) -> SmmsStatus {
    set_error(e.to_string());
    SmmsStatus::InputError
}

fn status_of(code: i32) -> SmmsStatus {
    match code {
        0 => SmmsStatus::Ok,
        1 => SmmsStatus::DecisionNo,
        2 => SmmsStatus::NotGeneric,
        _ => SmmsStatus::InputError,
    }
}

unsafe fn emit(rep: Result<Report, CliError>, out: *mut *mut c_char) -> SmmsStatus {
    match rep {
        Ok(r) => {
            *out = CString::new(r.to_json()).unwrap().into_raw();
            status_of(r.exit_code)
        }
        Err(e) => input_error(e),
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, SmmsStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(SmmsStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        SmmsStatus::InvalidUtf8
    })
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn smms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a manifold file given as TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smms_manifold_parse(toml: *const c_char, out: *mut *mut SmmsManifold) -> SmmsStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SmmsStatus::NullPointer;
        }
        let t = match text(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match cli::parse_manifold(t) {
            Ok(file) => {
                *out = Box::into_raw(Box::new(SmmsManifold { file }));
                SmmsStatus::Ok
            }
            Err(e) => input_error(e),
        }
    })
}

/// # Safety
/// `m` must come from [`smms_manifold_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smms_manifold_free(m: *mut SmmsManifold) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn smms_manifold_dimension(m: *const SmmsManifold) -> usize {
    m.as_ref().map_or(0, |m| m.file.spec.n())
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn smms_manifold_point_count(m: *const SmmsManifold) -> usize {
    m.as_ref().map_or(0, |m| m.file.points.len())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn with_handle(
    m: *const SmmsManifold,
    out: *mut *mut c_char,
    f: impl FnOnce(&ManifoldFile) -> Result<Report, CliError>,
) -> SmmsStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null manifold handle");
            return SmmsStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return SmmsStatus::NullPointer;
        }
        *out = ptr::null_mut();
        emit(f(&h.file), out)
    })
}

/// Runs a pipeline over the file's sample points; the status mirrors the
/// summary decision and `report` receives the JSON report.
///
/// # Safety
/// `m` must be a live handle and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smms_check(m: *const SmmsManifold, mode: SmmsMode, report: *mut *mut c_char) -> SmmsStatus {
    let mode = match mode {
        SmmsMode::Qe => Mode::Qe,
        SmmsMode::Soliton => Mode::Soliton,
        SmmsMode::Static => Mode::Static,
        SmmsMode::Rank => Mode::Rank,
    };
    with_handle(m, report, |f| cli::cmd_check(f, mode))
}

/// # Safety
/// `m` must be a live handle and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smms_verify(m: *const SmmsManifold, report: *mut *mut c_char) -> SmmsStatus {
    with_handle(m, report, cli::cmd_verify)
}

/// Integrates the file's `k` field along `path` (`x0,y0;x1,y1;…`).
///
/// # Safety
/// `m` must be a live handle, `path` a NUL-terminated string and `report` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smms_potential(m: *const SmmsManifold, path: *const c_char, report: *mut *mut c_char) -> SmmsStatus {
    let p = match text(path) {
        Ok(p) => p.to_string(),
        Err(s) => return s,
    };
    with_handle(m, report, |f| {
        let pts = cli::parse_path(&p, f.spec.n())?;
        cli::cmd_potential(f, &pts, KSource::File, 16)
    })
}

/// # Safety
/// `m` must be a live handle, `ms` point to `n_m` doubles and `report` be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smms_harnack(
    m: *const SmmsManifold,
    ms: *const f64,
    n_m: usize,
    trials: usize,
    report: *mut *mut c_char,
) -> SmmsStatus {
    if ms.is_null() && n_m > 0 {
        set_error("null m list");
        return SmmsStatus::NullPointer;
    }
    let list = if n_m == 0 { vec![] } else { std::slice::from_raw_parts(ms, n_m).to_vec() };
    with_handle(m, report, |f| cli::cmd_harnack(f, &list, trials))
}

/// Quasi-Einstein pipeline at one point: writes the candidate `K` (covector,
/// `dimension` entries) and `‖G‖`. Returns the point's decision as a status.
///
/// # Safety
/// `m` must be a live handle, `point` point to `dimension` doubles, `k_out`
/// have room for `dimension` doubles and `g_norm` be valid.
#[no_mangle]
pub unsafe extern "C" fn smms_qe_at(
    m: *const SmmsManifold,
    point: *const f64,
    len: usize,
    k_out: *mut f64,
    g_norm: *mut f64,
) -> SmmsStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null manifold handle");
            return SmmsStatus::NullPointer;
        };
        if point.is_null() || k_out.is_null() || g_norm.is_null() {
            set_error("null pointer argument");
            return SmmsStatus::NullPointer;
        }
        let n = h.file.spec.n();
        if len != n {
            set_error(format!("point has {len} coordinates, the manifold has dimension {n}"));
            return SmmsStatus::InputError;
        }
        let p = std::slice::from_raw_parts(point, len);
        match obstruction_g_at(&h.file.spec, p, &h.file.config) {
            Ok(rec) => {
                let k = rec.k.unwrap_or_else(|| vec![f64::NAN; n]);
                std::slice::from_raw_parts_mut(k_out, n).copy_from_slice(&k);
                *g_norm = rec.g_norm.unwrap_or(f64::NAN);
                match rec.decision {
                    Decision::Yes => SmmsStatus::Ok,
                    Decision::No => SmmsStatus::DecisionNo,
                    Decision::NotGeneric => SmmsStatus::NotGeneric,
                    Decision::VNonpositive => {
                        set_error("density is not positive at the point");
                        SmmsStatus::InputError
                    }
                }
            }
            Err(e) => input_error(e.into()),
        }
    })
}
