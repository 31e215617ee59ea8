//! C ABI over `hypack`.
//!
//! Handles are opaque and owned by the caller once returned; release them with the
//! matching `_free` function. Every fallible call returns a [`HypackStatus`] and stores a
//! message retrievable with [`hypack_last_error`]. Strings returned through out-pointers
//! are NUL-terminated UTF-8 and must be released with [`hypack_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use hypack::assemble::{decompose, parse_targets};
use hypack::oracles::validate_packing;
use hypack::profile::Profile;
use hypack::tight::FactorsDoc;
use hypack::{regularity_report, Error, Hypergraph};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypackStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Param = 4,
    CapExceeded = 5,
    Stage = 6,
    /// The pipeline ran but produced fewer factors than requested.
    Partial = 7,
    /// `hypack_verify` completed and the packing is invalid.
    VerifyFailed = 8,
    Panic = 9,
}

/// A parsed k-uniform hypergraph.
pub struct HypackGraph {
    inner: Hypergraph,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HypackStatus {
    match e {
        Error::Parse { .. } | Error::DuplicateEdge(_) | Error::EmptyEdgeSet => HypackStatus::Parse,
        Error::Param(_) | Error::Domain(_) | Error::Io(_) => HypackStatus::Param,
        Error::CapExceeded(_) => HypackStatus::CapExceeded,
        _ => HypackStatus::Stage,
    }
}

fn fail(status: HypackStatus, msg: &str) -> HypackStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<HypackStatus, (HypackStatus, String)>) -> HypackStatus {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => fail(s, &msg),
        Err(_) => fail(HypackStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> (HypackStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (HypackStatus, String)> {
    if p.is_null() {
        return Err((HypackStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (HypackStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn graph_arg<'a>(g: *const HypackGraph) -> Result<&'a Hypergraph, (HypackStatus, String)> {
    g.as_ref().map(|g| &g.inner).ok_or((HypackStatus::NullPointer, "graph is null".into()))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) {
    if !out.is_null() {
        *out = CString::new(s).expect("JSON has no NULs").into_raw();
    }
}

/// Message of the last failed call on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn hypack_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse the text format (`k n m` header, one edge per line).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hypack_graph_parse(text: *const c_char, out: *mut *mut HypackGraph) -> HypackStatus {
    guard(|| {
        if out.is_null() {
            return Err((HypackStatus::NullPointer, "out is null".into()));
        }
        *out = ptr::null_mut();
        let h = Hypergraph::parse(str_arg(text, "text")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(HypackGraph { inner: h }));
        Ok(HypackStatus::Ok)
    })
}

/// The complete k-graph on `n` vertices, or null when `k < 2` or `k > n`.
#[no_mangle]
pub extern "C" fn hypack_graph_complete(k: usize, n: usize) -> *mut HypackGraph {
    if k < 2 || k > n {
        set_error("need 2 <= k <= n");
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(HypackGraph { inner: Hypergraph::complete(k, n) }))
}

/// # Safety
/// `g` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hypack_graph_free(g: *mut HypackGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn hypack_graph_k(g: *const HypackGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.k())
}

/// # Safety
/// `g` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn hypack_graph_n(g: *const HypackGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.n())
}

/// # Safety
/// `g` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn hypack_graph_m(g: *const HypackGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.m())
}

/// Regularity statistics as JSON.
///
/// # Safety
/// `g` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hypack_analyze(g: *const HypackGraph, out_json: *mut *mut c_char) -> HypackStatus {
    guard(|| {
        let h = graph_arg(g)?;
        if out_json.is_null() {
            return Err((HypackStatus::NullPointer, "out_json is null".into()));
        }
        put_string(out_json, serde_json::to_string(&regularity_report(h)).expect("plain data"));
        Ok(HypackStatus::Ok)
    })
}

/// Run the packing pipeline. `targets` uses `;` between factors and `,` between cycle
/// lengths; `profile` is profile-file text or null for defaults. Both out-pointers may
/// be null. Returns `Partial` when fewer factors than requested were found; outputs are
/// still written.
///
/// # Safety
/// Pointers must be valid or null as documented.
#[no_mangle]
pub unsafe extern "C" fn hypack_decompose(
    g: *const HypackGraph,
    targets: *const c_char,
    profile: *const c_char,
    seed: u64,
    out_manifest: *mut *mut c_char,
    out_factors: *mut *mut c_char,
) -> HypackStatus {
    guard(|| {
        let h = graph_arg(g)?;
        let targets = parse_targets(str_arg(targets, "targets")?).map_err(lib_err)?;
        let p = if profile.is_null() {
            Profile::default()
        } else {
            Profile::parse(str_arg(profile, "profile")?).map_err(lib_err)?
        };
        let d = decompose(h, &targets, &p, seed).map_err(lib_err)?;
        put_string(out_manifest, d.manifest.to_json());
        put_string(out_factors, FactorsDoc::new(&d.factors).to_json());
        if d.complete() {
            Ok(HypackStatus::Ok)
        } else {
            set_error(d.manifest.failure.as_deref().unwrap_or("partial packing"));
            Ok(HypackStatus::Partial)
        }
    })
}

/// Validate a factors document. Returns `Ok` iff the packing passes, `VerifyFailed`
/// when it does not; the report JSON is written to `out_report` when non-null.
///
/// # Safety
/// Pointers must be valid or null as documented.
#[no_mangle]
pub unsafe extern "C" fn hypack_verify(
    g: *const HypackGraph,
    factors_json: *const c_char,
    out_report: *mut *mut c_char,
) -> HypackStatus {
    guard(|| {
        let h = graph_arg(g)?;
        let doc = FactorsDoc::from_json(str_arg(factors_json, "factors_json")?).map_err(lib_err)?;
        let report = validate_packing(h, &doc.factors, None);
        put_string(out_report, serde_json::to_string(&report).expect("plain data"));
        if report.pass() {
            Ok(HypackStatus::Ok)
        } else {
            set_error("packing invalid");
            Ok(HypackStatus::VerifyFailed)
        }
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hypack_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
