//! The C ABI driven from Rust: handle lifetimes, status codes and the
//! thread-local error message.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use oneway_ffi::*;

fn last_error() -> String {
    let p = oneway_last_error();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn take_string(s: *mut c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { oneway_string_free(s) };
    out
}

fn parse_pattern(text: &str) -> (OnewayStatus, *mut OnewayPattern) {
    let text = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    let status = unsafe { oneway_pattern_parse(text.as_ptr(), &mut p) };
    (status, p)
}

fn parse_circuit(text: &str) -> *mut OnewayCircuit {
    let text = CString::new(text).unwrap();
    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { oneway_circuit_parse(text.as_ptr(), &mut c) },
        OnewayStatus::Ok
    );
    c
}

#[test]
fn pattern_text_round_trips_through_a_handle() {
    let text = "input v\nN w\nE v w\nM v XY -1\nX w v\n";
    let (status, p) = parse_pattern(text);
    assert_eq!(status, OnewayStatus::Ok);
    assert!(oneway_last_error().is_null());
    assert_eq!(unsafe { oneway_pattern_qubit_count(p) }, 2);
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { oneway_pattern_to_text(p, &mut s) },
        OnewayStatus::Ok
    );
    assert_eq!(take_string(s), text);
    unsafe { oneway_pattern_free(p) };
}

#[test]
fn compile_then_extract() {
    let c = parse_circuit("in a b\nH a\nCZ a b\nT b\n");
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { oneway_compile(c, ONEWAY_MODE_DKP, true, &mut p) },
        OnewayStatus::Ok
    );
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { oneway_semantic(p, &mut back) }, OnewayStatus::Ok);
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { oneway_circuit_to_text(back, &mut s) },
        OnewayStatus::Ok
    );
    assert!(take_string(s).starts_with("in a.0 b.0\n"));
    unsafe {
        oneway_circuit_free(back);
        oneway_pattern_free(p);
        oneway_circuit_free(c);
    }
}

#[test]
fn unnormalized_patterns_normalize() {
    let (_, p) =
        parse_pattern("input v\nN w\nE v w\nM v XY 1\nX w v\nN x\nE w x\nM w XY 1\nX x w\n");
    let mut q = ptr::null_mut();
    assert_eq!(
        unsafe { oneway_pattern_normalize(p, &mut q) },
        OnewayStatus::Ok
    );
    let mut s = ptr::null_mut();
    unsafe { oneway_pattern_to_text(q, &mut s) };
    assert!(take_string(s).contains("M w XY 1 s: v"));
    unsafe {
        oneway_pattern_free(q);
        oneway_pattern_free(p);
    }
}

#[test]
fn rejection_reports_the_reason() {
    let (_, p) = parse_pattern("input\nN a\nN b\nE a b\nM a XY 0\nM b XY 0\n");
    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { oneway_semantic(p, &mut c) },
        OnewayStatus::Rejected
    );
    assert!(c.is_null());
    assert!(last_error().starts_with("no-flow"), "{}", last_error());
    unsafe { oneway_pattern_free(p) };
}

#[test]
fn parse_errors_carry_a_position() {
    let (status, p) = parse_pattern("input v\nE v v\n");
    assert_eq!(status, OnewayStatus::Parse);
    assert!(p.is_null());
    assert!(last_error().starts_with("2:"), "{}", last_error());
}

#[test]
fn bad_arguments_are_reported() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { oneway_pattern_parse(ptr::null(), &mut p) },
        OnewayStatus::NullPointer
    );
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { oneway_pattern_parse(bad.as_ptr().cast(), &mut p) },
        OnewayStatus::InvalidUtf8
    );
    let c = parse_circuit("in a\nH a\n");
    assert_eq!(
        unsafe { oneway_compile(c, 7, true, &mut p) },
        OnewayStatus::Invalid
    );
    assert!(last_error().contains('7'));
    assert_eq!(
        unsafe { oneway_compile(c, ONEWAY_MODE_DKP, true, ptr::null_mut()) },
        OnewayStatus::NullPointer
    );
    assert_eq!(unsafe { oneway_pattern_qubit_count(ptr::null()) }, 0);
    unsafe {
        oneway_circuit_free(c);
        oneway_pattern_free(ptr::null_mut());
        oneway_string_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    let (status, _) = parse_pattern("bogus\n");
    assert_eq!(status, OnewayStatus::Parse);
    std::thread::spawn(|| assert!(oneway_last_error().is_null()))
        .join()
        .unwrap();
    assert!(!oneway_last_error().is_null());
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(oneway_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
