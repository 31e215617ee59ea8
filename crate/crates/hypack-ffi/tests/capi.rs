use std::ffi::{CStr, CString};
use std::ptr;

use hypack_ffi::*;

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { hypack_string_free(s) };
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(hypack_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn test_parse_and_analyze() {
    let text = CString::new("3 4 4\n0 1 2\n0 1 3\n0 2 3\n1 2 3\n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { hypack_graph_parse(text.as_ptr(), &mut g) }, HypackStatus::Ok);
    assert_eq!(unsafe { (hypack_graph_k(g), hypack_graph_n(g), hypack_graph_m(g)) }, (3, 4, 4));
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { hypack_analyze(g, &mut json) }, HypackStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
    assert_eq!(v["delta_codegree"], 2);
    unsafe { hypack_graph_free(g) };
}

#[test]
fn test_error_codes() {
    let bad = CString::new("3 4 1\n0 1\n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { hypack_graph_parse(bad.as_ptr(), &mut g) }, HypackStatus::Parse);
    assert!(g.is_null());
    assert!(last_error().contains("line 2"));
    assert_eq!(unsafe { hypack_graph_parse(ptr::null(), &mut g) }, HypackStatus::NullPointer);
    assert_eq!(unsafe { hypack_analyze(ptr::null(), ptr::null_mut()) }, HypackStatus::NullPointer);
    assert!(hypack_graph_complete(4, 3).is_null());

    let h = hypack_graph_complete(3, 12);
    let targets = CString::new("5,7").unwrap();
    let st = unsafe { hypack_decompose(h, targets.as_ptr(), ptr::null(), 0, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, HypackStatus::Param);
    assert!(last_error().contains("girth"));
    unsafe { hypack_graph_free(h) };
    unsafe { hypack_graph_free(ptr::null_mut()) };
}

#[test]
fn test_decompose_then_verify() {
    let h = hypack_graph_complete(3, 12);
    let profile = CString::new(include_str!("../../../profiles/k12.profile")).unwrap();
    let targets = CString::new("12;12").unwrap();
    let (mut manifest, mut factors) = (ptr::null_mut(), ptr::null_mut());
    let st = unsafe { hypack_decompose(h, targets.as_ptr(), profile.as_ptr(), 1, &mut manifest, &mut factors) };
    assert!(matches!(st, HypackStatus::Ok | HypackStatus::Partial));
    let m: serde_json::Value = serde_json::from_str(&take(manifest)).unwrap();
    assert_eq!(m["requested"], 2);
    let factors = take(factors);

    let doc = CString::new(factors.clone()).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { hypack_verify(h, doc.as_ptr(), &mut report) }, HypackStatus::Ok);
    let r: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
    assert_eq!(r["factors"], m["achieved"]);

    let mut tampered: serde_json::Value = serde_json::from_str(&factors).unwrap();
    let list = tampered["factors"].as_array_mut().unwrap();
    if let Some(first) = list.first().cloned() {
        list.push(first);
        let doc = CString::new(tampered.to_string()).unwrap();
        assert_eq!(unsafe { hypack_verify(h, doc.as_ptr(), ptr::null_mut()) }, HypackStatus::VerifyFailed);
    }
    unsafe { hypack_graph_free(h) };
}

#[test]
fn test_header_declares_exports() {
    let header = include_str!("../include/hypack.h");
    for name in [
        "hypack_last_error",
        "hypack_graph_parse",
        "hypack_graph_complete",
        "hypack_graph_free",
        "hypack_analyze",
        "hypack_decompose",
        "hypack_verify",
        "hypack_string_free",
        "HYPACK_STATUS_PARTIAL",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
