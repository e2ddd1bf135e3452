//! C ABI over the `oneway` library.
//!
//! Patterns and circuits cross the boundary as opaque handles created from
//! their text formats. Every fallible call returns an [`OnewayStatus`];
//! on failure a description is available from [`oneway_last_error`] on the
//! same thread until the next call. Strings returned to the caller are
//! released with [`oneway_string_free`], handles with their `_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use oneway::circuit::Circuit;
use oneway::construct::{construct, ConstructionMode, Variant};
use oneway::extract::semantic_report;
use oneway::pattern::Pattern;
use oneway::rewrite::normalize;
use oneway::stable_index::to_circuit;
use oneway::text::{parse_circuit, parse_pattern, print_circuit, print_pattern};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OnewayStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Text did not parse; the message carries `line:col`.
    Parse = 3,
    /// The input was well typed but not acceptable (bad mode, ill-formed
    /// pattern, unsupported gate).
    Invalid = 4,
    /// The pattern has no certified circuit; the message gives the reason.
    Rejected = 5,
    /// An internal error was caught at the boundary.
    Panic = 6,
}

/// Construction variant accepted by [`oneway_compile`].
pub const ONEWAY_MODE_DKP: u32 = 0;
/// Construction variant accepted by [`oneway_compile`].
pub const ONEWAY_MODE_RBB: u32 = 1;

/// Opaque measurement pattern.
pub struct OnewayPattern(Pattern);

/// Opaque quantum circuit.
pub struct OnewayCircuit(Circuit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Failure = (OnewayStatus, String);

/// Runs `body` with the error slot cleared, recording any failure and
/// converting panics into [`OnewayStatus::Panic`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OnewayStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OnewayStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            OnewayStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (OnewayStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `s` must be null or point to a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (OnewayStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// # Safety
/// `out` must be null or valid for a pointer write.
unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (OnewayStatus::Invalid, "text contains a NUL byte".into()))
}

/// The message describing the last failure on this thread, or null. The
/// string is owned by the library and valid until the next call.
#[no_mangle]
pub extern "C" fn oneway_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oneway_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a pattern from its text format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oneway_pattern_parse(
    text: *const c_char,
    out: *mut *mut OnewayPattern,
) -> OnewayStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let p = parse_pattern(text).map_err(|e| (OnewayStatus::Parse, e.to_string()))?;
        write_out(out, OnewayPattern(p));
        Ok(())
    })
}

/// Releases a pattern. Null is ignored.
///
/// # Safety
/// `p` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oneway_pattern_free(p: *mut OnewayPattern) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Prints a pattern in its text format; free the result with
/// [`oneway_string_free`].
///
/// # Safety
/// `p` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oneway_pattern_to_text(
    p: *const OnewayPattern,
    out: *mut *mut c_char,
) -> OnewayStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pattern"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(print_pattern(&p.0))?;
        Ok(())
    })
}

/// Number of qubits a pattern touches, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn oneway_pattern_qubit_count(p: *const OnewayPattern) -> usize {
    p.as_ref().map_or(0, |p| p.0.qubits().len())
}

/// Brings a pattern into normal form.
///
/// # Safety
/// `p` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oneway_pattern_normalize(
    p: *const OnewayPattern,
    out: *mut *mut OnewayPattern,
) -> OnewayStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pattern"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let q = normalize(&p.0).map_err(|e| (OnewayStatus::Invalid, e.to_string()))?;
        write_out(out, OnewayPattern(q));
        Ok(())
    })
}

/// Parses a circuit from its text format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oneway_circuit_parse(
    text: *const c_char,
    out: *mut *mut OnewayCircuit,
) -> OnewayStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let c = parse_circuit(text).map_err(|e| (OnewayStatus::Parse, e.to_string()))?;
        write_out(out, OnewayCircuit(c));
        Ok(())
    })
}

/// Releases a circuit. Null is ignored.
///
/// # Safety
/// `c` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oneway_circuit_free(c: *mut OnewayCircuit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Prints a circuit in its text format; free the result with
/// [`oneway_string_free`].
///
/// # Safety
/// `c` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oneway_circuit_to_text(
    c: *const OnewayCircuit,
    out: *mut *mut c_char,
) -> OnewayStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("circuit"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(print_circuit(&c.0))?;
        Ok(())
    })
}

/// Translates a circuit into a pattern with the given construction
/// (`ONEWAY_MODE_DKP` or `ONEWAY_MODE_RBB`), normalized unless `normalize`
/// is false.
///
/// # Safety
/// `c` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oneway_compile(
    c: *const OnewayCircuit,
    mode: u32,
    normalize: bool,
    out: *mut *mut OnewayPattern,
) -> OnewayStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("circuit"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let variant = match mode {
            ONEWAY_MODE_DKP => Variant::Dkp,
            ONEWAY_MODE_RBB => Variant::Rbb,
            other => {
                return Err((
                    OnewayStatus::Invalid,
                    format!("unknown construction mode {other}"),
                ))
            }
        };
        let p = construct(&c.0, ConstructionMode { variant, normalize })
            .map_err(|e| (OnewayStatus::Invalid, e.to_string()))?;
        write_out(out, OnewayPattern(p));
        Ok(())
    })
}

/// Extracts the circuit a pattern implements. Returns
/// [`OnewayStatus::Rejected`] with the reason in [`oneway_last_error`]
/// when the pattern is not certified.
///
/// # Safety
/// `p` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oneway_semantic(
    p: *const OnewayPattern,
    out: *mut *mut OnewayCircuit,
) -> OnewayStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pattern"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x = semantic_report(&p.0).map_err(|r| (OnewayStatus::Rejected, r.to_string()))?;
        let c = to_circuit(&x.expr).map_err(|e| (OnewayStatus::Invalid, e.to_string()))?;
        write_out(out, OnewayCircuit(c));
        Ok(())
    })
}

/// The library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oneway_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
