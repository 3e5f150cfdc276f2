//! C ABI for loading, building and searching slimdex indexes and scoring
//! articles with a trained filter.
//!
//! Every fallible function returns a [`SlimdexStatus`]; on failure the
//! message is available from [`slimdex_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Nothing here keeps a pointer passed in by the caller.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use slimdex::corpus::EmbeddingMatrix;
use slimdex::error::Error;
use slimdex::filter::{self, Article, FilterModel};
use slimdex::index::{self, IndexArtifact, IndexConfig, IndexLayout, StorageMode};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlimdexStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    InvalidParameter = 5,
    DimensionMismatch = 6,
    UnknownId = 7,
    Checksum = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlimdexMode {
    Flat32 = 0,
    Flat16 = 1,
    Pq = 2,
}

impl From<SlimdexMode> for StorageMode {
    fn from(m: SlimdexMode) -> Self {
        match m {
            SlimdexMode::Flat32 => StorageMode::Flat32,
            SlimdexMode::Flat16 => StorageMode::Flat16,
            SlimdexMode::Pq => StorageMode::Pq,
        }
    }
}

/// Build settings. `d_r = 0` keeps the input dimension without PCA;
/// `n_v`/`n_b` are read only in PQ mode.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlimdexBuildConfig {
    pub mode: SlimdexMode,
    pub d_r: usize,
    pub n_v: usize,
    pub n_b: u8,
    pub normalize: bool,
    pub seed: u64,
}

/// Opaque index handle.
pub struct SlimdexIndex {
    index: IndexArtifact,
    positions: HashMap<String, usize>,
}

/// Opaque filter-model handle.
pub struct SlimdexFilter {
    model: FilterModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SlimdexStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => SlimdexStatus::Io,
            Error::Format { .. } | Error::Line { .. } => SlimdexStatus::Format,
            Error::DimensionMismatch { .. } => SlimdexStatus::DimensionMismatch,
            Error::InvalidParameter(_) => SlimdexStatus::InvalidParameter,
            Error::UnknownId(_) => SlimdexStatus::UnknownId,
            Error::Checksum { .. } => SlimdexStatus::Checksum,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: SlimdexStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SlimdexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlimdexStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            SlimdexStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SlimdexStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SlimdexStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SlimdexStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(SlimdexStatus::NullPointer, format!("{what} is null")))
}

unsafe fn index_ref<'a>(h: *const SlimdexIndex) -> Result<&'a SlimdexIndex, Failure> {
    h.as_ref()
        .ok_or_else(|| fail(SlimdexStatus::NullPointer, "index handle is null"))
}

fn into_handle(index: IndexArtifact) -> *mut SlimdexIndex {
    let positions = index.ids().iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
    Box::into_raw(Box::new(SlimdexIndex { index, positions }))
}

/// Message describing the last failure on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slimdex_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_load(path: *const c_char, out: *mut *mut SlimdexIndex) -> SlimdexStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        *out = into_handle(index::load_index(Path::new(path))?);
        Ok(())
    })
}

/// Builds an index from `n` row-major vectors of dimension `d`.
///
/// # Safety
/// `data` must hold `n * d` floats, `ids` `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_build(
    data: *const f32,
    n: usize,
    d: usize,
    ids: *const *const c_char,
    config: *const SlimdexBuildConfig,
    out: *mut *mut SlimdexIndex,
) -> SlimdexStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = *config
            .as_ref()
            .ok_or_else(|| fail(SlimdexStatus::NullPointer, "config is null"))?;
        let len = n
            .checked_mul(d)
            .ok_or_else(|| fail(SlimdexStatus::InvalidParameter, "n * d overflows"))?;
        let data = slice_arg(data, len, "data")?.to_vec();
        let ids = slice_arg(ids, n, "ids")?
            .iter()
            .map(|&p| str_arg(p, "id").map(str::to_owned))
            .collect::<Result<Vec<_>, _>>()?;
        let x = EmbeddingMatrix::new(d, data, ids)?;
        let mut cfg = match config.mode {
            SlimdexMode::Pq => IndexConfig::pq(config.n_v, config.n_b),
            m => IndexConfig::new(m.into()),
        };
        if config.d_r != 0 {
            cfg = cfg.with_d_r(config.d_r);
        }
        cfg = cfg.with_seed(config.seed).with_normalize(config.normalize);
        *out = into_handle(index::build_index(&x, &cfg)?);
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_save(handle: *const SlimdexIndex, path: *const c_char) -> SlimdexStatus {
    guard(|| {
        let h = index_ref(handle)?;
        index::save_index(&h.index, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_free(handle: *mut SlimdexIndex) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of stored vectors, 0 for a null handle.
///
/// # Safety
/// `handle` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_len(handle: *const SlimdexIndex) -> usize {
    handle.as_ref().map_or(0, |h| h.index.len())
}

/// Dimension queries must have, 0 for a null handle.
///
/// # Safety
/// `handle` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_dim(handle: *const SlimdexIndex) -> usize {
    handle.as_ref().map_or(0, |h| h.index.d_original())
}

/// Serialized size of the index in bytes.
///
/// # Safety
/// `handle` must come from this library; `out_bytes` must be valid.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_size_bytes(handle: *const SlimdexIndex, out_bytes: *mut u64) -> SlimdexStatus {
    guard(|| {
        let h = index_ref(handle)?;
        *out_arg(out_bytes, "out_bytes")? = h.index.size_report().total_bytes;
        Ok(())
    })
}

/// Top-`k` search. Writes up to `k` row positions (use
/// [`slimdex_index_id`] to get their ids) and scores, best first, and the
/// number written to `out_count`.
///
/// # Safety
/// `query` must hold `query_len` floats; `out_positions` and `out_scores`
/// must have room for `k` values.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_search(
    handle: *const SlimdexIndex,
    query: *const f32,
    query_len: usize,
    k: usize,
    out_positions: *mut usize,
    out_scores: *mut f64,
    out_count: *mut usize,
) -> SlimdexStatus {
    guard(|| {
        let h = index_ref(handle)?;
        let q = slice_arg(query, query_len, "query")?;
        let count = out_arg(out_count, "out_count")?;
        let hits = h.index.search(q, k)?;
        if !hits.is_empty() && (out_positions.is_null() || out_scores.is_null()) {
            return Err(fail(SlimdexStatus::NullPointer, "output buffers are null"));
        }
        for (i, hit) in hits.iter().enumerate() {
            *out_positions.add(i) = h.positions[&hit.id];
            *out_scores.add(i) = hit.score;
        }
        *count = hits.len();
        Ok(())
    })
}

/// Copies the id of row `position` into `buf` as a NUL-terminated string.
/// `out_len` receives the id length without the terminator; when `buf_len`
/// is too small nothing is copied and `BufferTooSmall` is returned.
///
/// # Safety
/// `buf` must have room for `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn slimdex_index_id(
    handle: *const SlimdexIndex,
    position: usize,
    buf: *mut c_char,
    buf_len: usize,
    out_len: *mut usize,
) -> SlimdexStatus {
    guard(|| {
        let h = index_ref(handle)?;
        let id = h.index.ids().get(position).ok_or_else(|| {
            fail(
                SlimdexStatus::InvalidParameter,
                format!("position {position} out of range for {} rows", h.index.len()),
            )
        })?;
        *out_arg(out_len, "out_len")? = id.len();
        if buf_len < id.len() + 1 {
            return Err(fail(
                SlimdexStatus::BufferTooSmall,
                format!("id needs {} bytes, buffer has {buf_len}", id.len() + 1),
            ));
        }
        if buf.is_null() {
            return Err(fail(SlimdexStatus::NullPointer, "buf is null"));
        }
        ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), buf, id.len());
        *buf.add(id.len()) = 0;
        Ok(())
    })
}

/// Serialized size of an index of `n` vectors of dimension `d` (no PCA,
/// no normalization, empty ids), without building it.
///
/// # Safety
/// `out_bytes` must be valid.
#[no_mangle]
pub unsafe extern "C" fn slimdex_layout_size_bytes(
    mode: SlimdexMode,
    n: u64,
    d: u64,
    n_v: u64,
    n_b: u8,
    out_bytes: *mut u64,
) -> SlimdexStatus {
    guard(|| {
        let out = out_arg(out_bytes, "out_bytes")?;
        let layout = match mode {
            SlimdexMode::Pq => {
                slimdex::pq::check_params(d as usize, n_v as usize, n_b)?;
                IndexLayout::pq(n, d, n_v, n_b)
            }
            m => IndexLayout::flat(m.into(), n, d),
        };
        *out = layout.report(0).total_bytes;
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn slimdex_filter_load(path: *const c_char, out: *mut *mut SlimdexFilter) -> SlimdexStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = filter::load_filter(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SlimdexFilter { model }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn slimdex_filter_free(handle: *mut SlimdexFilter) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Margin of an article given its title and `n_categories` category strings;
/// higher means more likely to hold answers.
///
/// # Safety
/// All strings must be NUL-terminated; `categories` must hold `n_categories` pointers.
#[no_mangle]
pub unsafe extern "C" fn slimdex_filter_score(
    handle: *const SlimdexFilter,
    title: *const c_char,
    categories: *const *const c_char,
    n_categories: usize,
    out_score: *mut f64,
) -> SlimdexStatus {
    guard(|| {
        let h = handle
            .as_ref()
            .ok_or_else(|| fail(SlimdexStatus::NullPointer, "filter handle is null"))?;
        let out = out_arg(out_score, "out_score")?;
        let categories = slice_arg(categories, n_categories, "categories")?
            .iter()
            .map(|&p| str_arg(p, "category").map(str::to_owned))
            .collect::<Result<Vec<_>, _>>()?;
        let article = Article {
            id: String::new(),
            title: str_arg(title, "title")?.to_owned(),
            categories,
        };
        *out = h.model.score(&article);
        Ok(())
    })
}
