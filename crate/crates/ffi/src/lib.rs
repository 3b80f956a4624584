//! C ABI over the retrieval, statistics and sampling primitives.
//!
//! Every fallible function returns an [`RcStatus`]. On failure a message is
//! kept per thread and can be read with [`rc_last_error`]. Handles are
//! opaque and must be released with their matching `_free` function.
//! Panics never cross the boundary; they surface as `RC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use reception_core::diagnostics::jensen_shannon;
use reception_core::embed::{hash_embed, read_vectors, VectorSet};
use reception_core::index::{FlatIndex, RankedHit};
use reception_core::sampling::{plan_for, Stage};
use reception_core::stats::spearman_rho;
use reception_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Input data was rejected (bad vector file, dimension mismatch, ...).
    DataError = 3,
    Io = 4,
    /// The result is mathematically undefined for this input.
    Undefined = 5,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Exact inner-product index over unit vectors.
pub struct RcIndex {
    inner: FlatIndex,
}

/// Ranked search results owned by the library.
pub struct RcHits {
    hits: Vec<RankedHit>,
    ids: Vec<CString>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStage {
    Pilot = 0,
    Triage = 1,
    Exhaustive = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: RcStatus, message: impl Into<String>) -> RcStatus {
    set_error(message);
    status
}

fn from_core(e: Error) -> RcStatus {
    let status = match &e {
        Error::Io { .. } => RcStatus::Io,
        Error::InvalidParameter(_) | Error::PoolTooSmall { .. } => RcStatus::InvalidArgument,
        _ => RcStatus::DataError,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> RcStatus) -> RcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(RcStatus::Panic, msg)
        }
    }
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a valid NUL-terminated string.
unsafe fn utf8<'a>(s: *const c_char, what: &str) -> Result<&'a str, RcStatus> {
    if s.is_null() {
        return Err(fail(RcStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(RcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Writes the hash-trigram embedding of `text` into `out[0..dim]`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` must point to `dim`
/// writable floats.
#[no_mangle]
pub unsafe extern "C" fn rc_hash_embed(text: *const c_char, dim: usize, out: *mut f32) -> RcStatus {
    guard(|| {
        let text = match utf8(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(RcStatus::NullPointer, "out is NULL");
        }
        match hash_embed(text, dim) {
            Ok(v) => {
                std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&v.values);
                RcStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Builds an index from `count` vectors of `dim` floats stored row-major
/// in `values`, with ids `ids[0..count]`.
///
/// # Safety
/// `ids` must point to `count` NUL-terminated strings, `values` to
/// `count * dim` floats and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rc_index_new(
    ids: *const *const c_char,
    values: *const f32,
    count: usize,
    dim: usize,
    out: *mut *mut RcIndex,
) -> RcStatus {
    guard(|| {
        if ids.is_null() || values.is_null() || out.is_null() {
            return fail(
                RcStatus::NullPointer,
                "ids, values and out must be non-NULL",
            );
        }
        let Some(total) = count.checked_mul(dim) else {
            return fail(RcStatus::InvalidArgument, "count * dim overflows");
        };
        let ids = std::slice::from_raw_parts(ids, count);
        let values = std::slice::from_raw_parts(values, total);
        let mut set = VectorSet::new(dim);
        for (i, &id) in ids.iter().enumerate() {
            let id = match utf8(id, "id") {
                Ok(s) => s,
                Err(s) => return s,
            };
            if let Err(e) = set.push(id, &values[i * dim..(i + 1) * dim]) {
                return from_core(e);
            }
        }
        match FlatIndex::build(set) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RcIndex { inner }));
                RcStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Loads an index from an RMV1 vector file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_index_load(path: *const c_char, out: *mut *mut RcIndex) -> RcStatus {
    guard(|| {
        let path = match utf8(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(RcStatus::NullPointer, "out is NULL");
        }
        match read_vectors(Path::new(path)).and_then(FlatIndex::build) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RcIndex { inner }));
                RcStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Number of vectors in the index; 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rc_index_len(index: *const RcIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.len())
}

/// Dimension of the index; 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rc_index_dim(index: *const RcIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.dim())
}

/// Top-`k` search. Results are ranked by descending score with ties
/// broken by id.
///
/// # Safety
/// `index` must be a live handle, `query` must point to `dim` floats and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_index_search(
    index: *const RcIndex,
    query: *const f32,
    dim: usize,
    k: usize,
    out: *mut *mut RcHits,
) -> RcStatus {
    guard(|| {
        let Some(index) = index.as_ref() else {
            return fail(RcStatus::NullPointer, "index is NULL");
        };
        if query.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "query and out must be non-NULL");
        }
        let q = std::slice::from_raw_parts(query, dim);
        match index.inner.search("query", q, k) {
            Ok(hits) => {
                let ids = hits
                    .iter()
                    .map(|h| CString::new(h.chunk_id.replace('\0', " ")).expect("NULs removed"))
                    .collect();
                *out = Box::into_raw(Box::new(RcHits { hits, ids }));
                RcStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `index` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_index_free(index: *mut RcIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// # Safety
/// `hits` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_hits_len(hits: *const RcHits) -> usize {
    hits.as_ref().map_or(0, |h| h.hits.len())
}

/// Id of the hit at `i`, or NULL when out of range. Owned by `hits`.
///
/// # Safety
/// `hits` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_hits_id(hits: *const RcHits, i: usize) -> *const c_char {
    hits.as_ref()
        .and_then(|h| h.ids.get(i))
        .map_or(std::ptr::null(), |s| s.as_ptr())
}

/// Score of the hit at `i`, or NaN when out of range.
///
/// # Safety
/// `hits` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_hits_score(hits: *const RcHits, i: usize) -> f32 {
    hits.as_ref()
        .and_then(|h| h.hits.get(i))
        .map_or(f32::NAN, |h| h.score)
}

/// # Safety
/// `hits` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_hits_free(hits: *mut RcHits) {
    if !hits.is_null() {
        drop(Box::from_raw(hits));
    }
}

/// Spearman correlation of a 0/1 indicator with ranks, and its two-sided
/// p-value. `RC_STATUS_UNDEFINED` for n < 3 or a constant input.
///
/// # Safety
/// `indicator` and `ranks` must point to `n` values; outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rc_spearman(
    indicator: *const u8,
    ranks: *const f64,
    n: usize,
    out_rho: *mut f64,
    out_p: *mut f64,
) -> RcStatus {
    guard(|| {
        if indicator.is_null() || ranks.is_null() || out_rho.is_null() || out_p.is_null() {
            return fail(RcStatus::NullPointer, "arguments must be non-NULL");
        }
        let ind: Vec<bool> = std::slice::from_raw_parts(indicator, n)
            .iter()
            .map(|&b| b != 0)
            .collect();
        let ranks = std::slice::from_raw_parts(ranks, n);
        match spearman_rho(&ind, ranks) {
            Some(c) => {
                *out_rho = c.rho;
                *out_p = c.p_value;
                RcStatus::Ok
            }
            None => fail(
                RcStatus::Undefined,
                "correlation undefined: fewer than 3 points or a constant series",
            ),
        }
    })
}

/// Base-2 Jensen-Shannon divergence of two probability vectors.
///
/// # Safety
/// `p` and `q` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_jsd(p: *const f64, q: *const f64, n: usize, out: *mut f64) -> RcStatus {
    guard(|| {
        if p.is_null() || q.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "arguments must be non-NULL");
        }
        let (p, q) = (
            std::slice::from_raw_parts(p, n),
            std::slice::from_raw_parts(q, n),
        );
        for d in [p, q] {
            let sum: f64 = d.iter().sum();
            if d.iter().any(|&x| !x.is_finite() || x < 0.0) || (sum - 1.0).abs() > 1e-6 {
                return fail(
                    RcStatus::InvalidArgument,
                    "inputs must be probability vectors",
                );
            }
        }
        *out = jensen_shannon(p, q);
        RcStatus::Ok
    })
}

/// Ranks to annotate at `stage` for a pool of `pool_size` hits. Writes up
/// to `capacity` ranks into `out` and the full count into `out_len`;
/// returns `RC_STATUS_BUFFER_TOO_SMALL` when `capacity` is short.
///
/// # Safety
/// `out` must point to `capacity` writable values (may be NULL when
/// `capacity` is 0); `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_sampling_plan(
    stage: RcStage,
    pool_size: usize,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> RcStatus {
    guard(|| {
        if out_len.is_null() || (out.is_null() && capacity > 0) {
            return fail(
                RcStatus::NullPointer,
                "out_len (and out when capacity > 0) must be non-NULL",
            );
        }
        let stage = match stage {
            RcStage::Pilot => Stage::Pilot,
            RcStage::Triage => Stage::Triage,
            RcStage::Exhaustive => Stage::Exhaustive,
        };
        let plan = match plan_for(stage, "ffi", pool_size) {
            Ok(p) => p,
            Err(e) => return from_core(e),
        };
        let ranks = plan.ranks();
        *out_len = ranks.len();
        if ranks.len() > capacity {
            return fail(
                RcStatus::BufferTooSmall,
                format!("need {} slots", ranks.len()),
            );
        }
        if !ranks.is_empty() {
            std::slice::from_raw_parts_mut(out, ranks.len()).copy_from_slice(&ranks);
        }
        RcStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_state_is_per_call() {
        let mut out = 0.0;
        let s = unsafe { rc_jsd(std::ptr::null(), std::ptr::null(), 0, &mut out) };
        assert_eq!(s, RcStatus::NullPointer);
        assert!(!rc_last_error().is_null());
        let p = [0.5, 0.5];
        let s = unsafe { rc_jsd(p.as_ptr(), p.as_ptr(), 2, &mut out) };
        assert_eq!(s, RcStatus::Ok);
        assert!(rc_last_error().is_null());
    }

    #[test]
    fn version_is_terminated() {
        let v = unsafe { CStr::from_ptr(rc_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
