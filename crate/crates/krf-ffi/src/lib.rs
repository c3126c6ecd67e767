//! C ABI over the core library: opaque handles for databases, queries and
//! theories, status codes for every fallible call, and a thread-local
//! message for the last failure. Handles are single-threaded; do not share
//! one across threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use krf_core::bits::Bits;
use krf_core::closure::run_engine;
use krf_core::formalisms::{datalog_qa, DatalogTheory};
use krf_core::kr::{Database, World};
use krf_core::query::{parse_sentence, Query};
use krf_core::theta;

/// Result of any fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum KrfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A text argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input did not parse; see `krf_last_error`.
    ParseError = 3,
    /// The byte string is not a theory of the canonical formalism.
    InvalidTheory = 4,
    /// An internal invariant failed; see `krf_last_error`.
    InternalError = 5,
}

/// Outcome of a query-answering run.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum KrfVerdict {
    /// The query was answered within the fuel budget.
    Accepted = 0,
    /// The budget ran out with no answer; never a definitive no.
    Exhausted = 1,
}

pub struct KrfDatabase {
    db: Database,
}

pub struct KrfQuery {
    q: Query,
}

pub struct KrfTheory {
    bits: Bits,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: KrfStatus, msg: impl std::fmt::Display) -> KrfStatus {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("no interior nul"));
    status
}

unsafe fn text_arg<'a>(p: *const c_char) -> Result<&'a str, KrfStatus> {
    if p.is_null() {
        return Err(fail(KrfStatus::NullArgument, "null text argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(KrfStatus::InvalidUtf8, e))
}

/// Message describing the most recent failure on this thread. Valid until
/// the next failing call; never null.
#[no_mangle]
pub extern "C" fn krf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn krf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a self-describing database text (signature header, one signed fact
/// per line). On success stores a handle in `out`; free with
/// `krf_database_free`.
///
/// # Safety
/// `text` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn krf_database_parse(
    text: *const c_char,
    out: *mut *mut KrfDatabase,
) -> KrfStatus {
    if out.is_null() {
        return fail(KrfStatus::NullArgument, "null out pointer");
    }
    let text = match text_arg(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match Database::parse(text) {
        Ok(db) => {
            *out = Box::into_raw(Box::new(KrfDatabase { db }));
            KrfStatus::Ok
        }
        Err(e) => fail(KrfStatus::ParseError, e),
    }
}

/// # Safety
/// `db` must come from `krf_database_parse` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn krf_database_free(db: *mut KrfDatabase) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Parse a sentence over the database's signature. Free with
/// `krf_query_free`.
///
/// # Safety
/// `text` must be nul-terminated, `db` a live database handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn krf_query_parse(
    text: *const c_char,
    db: *const KrfDatabase,
    out: *mut *mut KrfQuery,
) -> KrfStatus {
    if db.is_null() || out.is_null() {
        return fail(KrfStatus::NullArgument, "null handle argument");
    }
    let text = match text_arg(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match parse_sentence(text.trim(), &(*db).db.sig) {
        Ok(q) => {
            *out = Box::into_raw(Box::new(KrfQuery { q }));
            KrfStatus::Ok
        }
        Err(e) => fail(KrfStatus::ParseError, e),
    }
}

/// # Safety
/// `q` must come from `krf_query_parse` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn krf_query_free(q: *mut KrfQuery) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Wrap raw theory bytes. Rejects byte strings that are not theories of the
/// canonical formalism. Free with `krf_theory_free`.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn krf_theory_from_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut KrfTheory,
) -> KrfStatus {
    if (data.is_null() && len > 0) || out.is_null() {
        return fail(KrfStatus::NullArgument, "null data or out pointer");
    }
    let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
    let bits = Bits::from_bytes(bytes);
    if !theta::is_theory(&bits) {
        return fail(KrfStatus::InvalidTheory, "not a valid theory");
    }
    *out = Box::into_raw(Box::new(KrfTheory { bits }));
    KrfStatus::Ok
}

/// # Safety
/// `t` must come from `krf_theory_from_bytes` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn krf_theory_free(t: *mut KrfTheory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Answer `query` over `db` under the canonical-formalism theory, running
/// the closure engine for at most `fuel` iterations. `steps`, if non-null,
/// receives the iteration count.
///
/// # Safety
/// All handles must be live; `verdict` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn krf_qa(
    theory: *const KrfTheory,
    db: *const KrfDatabase,
    query: *const KrfQuery,
    fuel: u64,
    verdict: *mut KrfVerdict,
    steps: *mut u64,
) -> KrfStatus {
    if theory.is_null() || db.is_null() || query.is_null() || verdict.is_null() {
        return fail(KrfStatus::NullArgument, "null handle argument");
    }
    let d = &(*db).db;
    let world = World::new(d.sig.clone(), d.mode);
    let mut engine = match theta::engine(&(*theory).bits, d, &(*query).q, world) {
        Ok(e) => e,
        Err(e) => return fail(KrfStatus::InvalidTheory, e),
    };
    match run_engine(&mut engine, fuel) {
        Ok(outcome) => {
            *verdict = if outcome.accepted() {
                KrfVerdict::Accepted
            } else {
                KrfVerdict::Exhausted
            };
            if !steps.is_null() {
                *steps = engine.iterations();
            }
            KrfStatus::Ok
        }
        Err(e) => fail(KrfStatus::InternalError, e),
    }
}

/// Decide a Datalog consequence directly: does the rule text, applied to
/// `db`, entail `query`? Writes 1 or 0 to `holds`.
///
/// # Safety
/// `rules` must be nul-terminated; handles live; `holds` valid.
#[no_mangle]
pub unsafe extern "C" fn krf_datalog_qa(
    rules: *const c_char,
    db: *const KrfDatabase,
    query: *const KrfQuery,
    holds: *mut i32,
) -> KrfStatus {
    if db.is_null() || query.is_null() || holds.is_null() {
        return fail(KrfStatus::NullArgument, "null handle argument");
    }
    let text = match text_arg(rules) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let theory = match DatalogTheory::parse(text) {
        Ok(t) => t,
        Err(e) => return fail(KrfStatus::ParseError, e),
    };
    match datalog_qa(&theory, &(*db).db, &(*query).q) {
        Ok(v) => {
            *holds = v as i32;
            KrfStatus::Ok
        }
        Err(e) => fail(KrfStatus::InternalError, e),
    }
}

/// Observationally equal variants of a theory: writes up to `count` handles
/// into `out`, all pairwise distinct from each other and the original.
/// Each must be freed with `krf_theory_free`.
///
/// # Safety
/// `theory` must be live; `out` must have room for `count` pointers.
#[no_mangle]
pub unsafe extern "C" fn krf_theory_padding(
    theory: *const KrfTheory,
    count: usize,
    out: *mut *mut KrfTheory,
) -> KrfStatus {
    if theory.is_null() || (out.is_null() && count > 0) {
        return fail(KrfStatus::NullArgument, "null handle argument");
    }
    match theta::padding_set(&(*theory).bits, count) {
        Ok(set) => {
            for (i, bits) in set.into_iter().enumerate() {
                *out.add(i) = Box::into_raw(Box::new(KrfTheory { bits }));
            }
            KrfStatus::Ok
        }
        Err(e) => fail(KrfStatus::InvalidTheory, e),
    }
}

/// Length in bytes of the theory's bit string rounded up to whole bytes.
///
/// # Safety
/// `t` must be a live theory handle.
#[no_mangle]
pub unsafe extern "C" fn krf_theory_byte_len(t: *const KrfTheory) -> usize {
    if t.is_null() {
        return 0;
    }
    (*t).bits.len().div_ceil(8)
}

/// Copy the theory bytes into `buf`, which must hold at least
/// `krf_theory_byte_len` bytes. Returns the number written.
///
/// # Safety
/// `t` must be live and `buf` must have the stated capacity.
#[no_mangle]
pub unsafe extern "C" fn krf_theory_copy_bytes(t: *const KrfTheory, buf: *mut u8) -> usize {
    if t.is_null() || buf.is_null() {
        return 0;
    }
    match (*t).bits.as_bytes() {
        Some(bytes) => {
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
            bytes.len()
        }
        None => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    const DB: &str = "sig: P/1 owa, E/2 owa; mode: all\n+P(c0)\n+E(c0,c1)\n";

    unsafe fn parse_db(text: &str) -> *mut KrfDatabase {
        let c = CString::new(text).unwrap();
        let mut h = ptr::null_mut();
        assert!(krf_database_parse(c.as_ptr(), &mut h) == KrfStatus::Ok);
        h
    }

    unsafe fn parse_q(text: &str, db: *const KrfDatabase) -> *mut KrfQuery {
        let c = CString::new(text).unwrap();
        let mut h = ptr::null_mut();
        assert!(krf_query_parse(c.as_ptr(), db, &mut h) == KrfStatus::Ok);
        h
    }

    #[test]
    fn lifecycle_and_errors() {
        unsafe {
            let db = parse_db(DB);
            let q = parse_q("P(c0)", db);

            let bad = CString::new("no such syntax").unwrap();
            let mut h = ptr::null_mut();
            assert!(krf_database_parse(bad.as_ptr(), &mut h) == KrfStatus::ParseError);
            let msg = CStr::from_ptr(krf_last_error());
            assert!(!msg.to_bytes().is_empty());

            let mut t = ptr::null_mut();
            assert!(krf_theory_from_bytes(ptr::null(), 0, &mut t) == KrfStatus::InvalidTheory);
            assert!(krf_query_parse(bad.as_ptr(), ptr::null(), &mut h as *mut _ as *mut _)
                == KrfStatus::NullArgument);

            krf_query_free(q);
            krf_database_free(db);
        }
    }

    #[test]
    fn qa_round_trip() {
        unsafe {
            let db = parse_db(DB);
            let q = parse_q("TRUE", db);

            // the empty theory still answers tautologies
            let omega = theta::omega0();
            let bytes = omega.as_bytes().unwrap().to_vec();
            let mut t = ptr::null_mut();
            assert!(krf_theory_from_bytes(bytes.as_ptr(), bytes.len(), &mut t) == KrfStatus::Ok);

            let mut verdict = KrfVerdict::Exhausted;
            let mut steps = 0u64;
            assert!(krf_qa(t, db, q, 500, &mut verdict, &mut steps) == KrfStatus::Ok);
            assert!(verdict == KrfVerdict::Accepted);
            assert!(steps > 0);

            let hard = parse_q("P(c1)", db);
            assert!(krf_qa(t, db, hard, 500, &mut verdict, &mut steps) == KrfStatus::Ok);
            assert!(verdict == KrfVerdict::Exhausted);

            let mut pads = [ptr::null_mut(); 3];
            assert!(krf_theory_padding(t, 3, pads.as_mut_ptr()) == KrfStatus::Ok);
            let n = krf_theory_byte_len(pads[0]);
            assert!(n > bytes.len());
            let mut buf = vec![0u8; n];
            assert_eq!(krf_theory_copy_bytes(pads[0], buf.as_mut_ptr()), n);
            for p in pads {
                krf_theory_free(p);
            }

            krf_query_free(hard);
            krf_query_free(q);
            krf_theory_free(t);
            krf_database_free(db);
        }
    }

    #[test]
    fn datalog_holds() {
        unsafe {
            let db = parse_db(DB);
            let q = parse_q("EX x. P(x) & E(x, x)", db);
            let rules = CString::new("E(x,x) <- P(x).").unwrap();
            let mut holds = -1;
            assert!(krf_datalog_qa(rules.as_ptr(), db, q, &mut holds) == KrfStatus::Ok);
            assert_eq!(holds, 1);
            krf_query_free(q);
            krf_database_free(db);
        }
    }
}
