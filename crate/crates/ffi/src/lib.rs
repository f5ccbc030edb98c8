//! C ABI over the chorale engine.
//!
//! Models and scores cross the boundary as opaque handles created by this
//! library and released with their `_free` function. Every fallible call
//! returns a [`ChoraleStatus`]; on anything but `CHORALE_STATUS_OK` the
//! thread's last error message is available from
//! [`chorale_last_error_message`] until the next call on that thread.
//!
//! Byte results are returned in a [`ChoraleBuffer`] owned by the caller and
//! released with [`chorale_buffer_free`]. Output pointers are written only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chorale::app::cli::{reharmonize_musicxml, sample_metadata};
use chorale::app::{admit, AppError, ScoreDocument};
use chorale::ingest::{export_midi, export_musicxml, parse_musicxml};
use chorale::models::ModelSet;
use chorale::sampler::{generate, ConstraintSet, SamplerConfig};
use chorale::score::Chorale;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoraleStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A string argument was not UTF-8.
    InvalidUtf8 = 2,
    Io = 3,
    /// Unreadable or unsupported MusicXML.
    Ingest = 4,
    /// Corrupt model file or a model/score mismatch.
    Model = 5,
    /// Impossible constraints or sampler configuration.
    Sampler = 6,
    /// A score breaking a structural invariant.
    Invalid = 7,
    /// A failure inside the library itself.
    Internal = 8,
}

/// Trained per-voice conditionals.
pub struct ChoraleModel {
    inner: ModelSet,
}

/// A four-voice score with its metadata.
pub struct ChoraleScore {
    inner: Chorale,
}

/// Bytes allocated by this library.
#[repr(C)]
pub struct ChoraleBuffer {
    pub data: *mut u8,
    pub len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ChoraleStatus, String);

impl From<AppError> for Failure {
    fn from(e: AppError) -> Self {
        let status = match &e {
            AppError::Io { .. } => ChoraleStatus::Io,
            AppError::Ingest(_) => ChoraleStatus::Ingest,
            AppError::Model(_) => ChoraleStatus::Model,
            AppError::Sampler(_) => ChoraleStatus::Sampler,
            AppError::Invalid(_) | AppError::Score(_) | AppError::Malformed(_) | AppError::Json(_) => ChoraleStatus::Invalid,
            _ => ChoraleStatus::Internal,
        };
        let mut message = e.to_string();
        if let AppError::Invalid(v) = &e {
            for x in v {
                message.push_str(&format!("; {}: {}", x.field, x.message));
            }
        }
        Failure(status, message)
    }
}

fn fail<E: Into<AppError>>(e: E) -> Failure {
    Failure::from(e.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ChoraleStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ChoraleStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {message}"));
            ChoraleStatus::Internal
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(ChoraleStatus::NullArgument, format!("{name} is null"))
}

unsafe fn bytes<'a>(data: *const u8, len: usize, name: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn string<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(ChoraleStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn put_buffer(out: *mut ChoraleBuffer, bytes: Vec<u8>) {
    let mut boxed = bytes.into_boxed_slice();
    let len = boxed.len();
    let data = boxed.as_mut_ptr();
    std::mem::forget(boxed);
    *out = ChoraleBuffer { data, len };
}

fn config(seed: u64, iterations: usize) -> SamplerConfig {
    SamplerConfig {
        iterations: (iterations > 0).then_some(iterations),
        ..SamplerConfig::with_seed(seed)
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chorale_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer is valid until the next call into this library.
#[no_mangle]
pub extern "C" fn chorale_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model file written by `chorale train`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_model_load(path: *const c_char, out: *mut *mut ChoraleModel) -> ChoraleStatus {
    guard(|| {
        let path = string(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let data = std::fs::read(path).map_err(|e| fail(AppError::Io { path: path.into(), source: e }))?;
        let inner = ModelSet::load(&data).map_err(fail)?;
        put(out, ChoraleModel { inner });
        Ok(())
    })
}

/// Loads a model from the bytes of a model file.
///
/// # Safety
/// `data` points to `len` readable bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_model_load_bytes(data: *const u8, len: usize, out: *mut *mut ChoraleModel) -> ChoraleStatus {
    guard(|| {
        let data = bytes(data, len, "data")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ModelSet::load(data).map_err(fail)?;
        put(out, ChoraleModel { inner });
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chorale_model_free(model: *mut ChoraleModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parses a four-part MusicXML document.
///
/// # Safety
/// `data` points to `len` readable bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_parse_musicxml(data: *const u8, len: usize, out: *mut *mut ChoraleScore) -> ChoraleStatus {
    guard(|| {
        let data = bytes(data, len, "data")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = parse_musicxml(data).map_err(fail)?;
        put(out, ChoraleScore { inner });
        Ok(())
    })
}

/// Reads a score document (the JSON form served over HTTP).
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_from_json(json: *const c_char, out: *mut *mut ChoraleScore) -> ChoraleStatus {
    guard(|| {
        let json = string(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let doc: ScoreDocument = serde_json::from_str(json).map_err(fail)?;
        let inner = doc.to_chorale().map_err(|v| fail(AppError::Invalid(v)))?;
        put(out, ChoraleScore { inner });
        Ok(())
    })
}

/// # Safety
/// `score` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_free(score: *mut ChoraleScore) {
    if !score.is_null() {
        drop(Box::from_raw(score));
    }
}

/// Length in sixteenth-note ticks; 0 for a null handle.
///
/// # Safety
/// `score` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_length(score: *const ChoraleScore) -> usize {
    score.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `score` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_export_musicxml(score: *const ChoraleScore, out: *mut ChoraleBuffer) -> ChoraleStatus {
    guard(|| {
        let score = handle(score, "score")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_buffer(out, export_musicxml(&score.inner));
        Ok(())
    })
}

/// # Safety
/// `score` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_export_midi(score: *const ChoraleScore, out: *mut ChoraleBuffer) -> ChoraleStatus {
    guard(|| {
        let score = handle(score, "score")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_buffer(out, export_midi(&score.inner));
        Ok(())
    })
}

/// The score as a JSON document, UTF-8 without a terminator.
///
/// # Safety
/// `score` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_to_json(score: *const ChoraleScore, out: *mut ChoraleBuffer) -> ChoraleStatus {
    guard(|| {
        let score = handle(score, "score")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_vec(&ScoreDocument::from_chorale(&score.inner)).map_err(fail)?;
        put_buffer(out, json);
        Ok(())
    })
}

/// # Safety
/// `buffer` is null or was filled by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chorale_buffer_free(buffer: *mut ChoraleBuffer) {
    if let Some(b) = buffer.as_mut() {
        if !b.data.is_null() {
            drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)));
        }
        b.data = ptr::null_mut();
        b.len = 0;
    }
}

/// Samples a chorale of `length` ticks from scratch. `iterations = 0` means
/// 100 updates per cell; `fermata_every = 0` means no fermatas, otherwise
/// one closes every n-th bar.
///
/// # Safety
/// `model` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_sample(
    model: *const ChoraleModel,
    length: usize,
    seed: u64,
    iterations: usize,
    fermata_every: usize,
    key_signature: i8,
    out: *mut *mut ChoraleScore,
) -> ChoraleStatus {
    guard(|| {
        let model = handle(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let md = sample_metadata(length, Some(fermata_every), key_signature);
        let (inner, _) = generate(&model.inner, &md, &ConstraintSet::new(), &config(seed, iterations), None).map_err(fail)?;
        put(out, ChoraleScore { inner });
        Ok(())
    })
}

/// Keeps the first part of a MusicXML document as soprano and samples the
/// lower voices.
///
/// # Safety
/// `model` is a live handle; `melody` points to `len` readable bytes; `out`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn chorale_reharmonize(
    model: *const ChoraleModel,
    melody: *const u8,
    len: usize,
    seed: u64,
    iterations: usize,
    out: *mut *mut ChoraleScore,
) -> ChoraleStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let melody = bytes(melody, len, "melody")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (inner, _) = reharmonize_musicxml(&model.inner, melody, &config(seed, iterations)).map_err(fail)?;
        put(out, ChoraleScore { inner });
        Ok(())
    })
}

/// Checks a score against the model's encoding and vocabularies.
///
/// # Safety
/// Both handles are live.
#[no_mangle]
pub unsafe extern "C" fn chorale_score_check(model: *const ChoraleModel, score: *const ChoraleScore) -> ChoraleStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let score = handle(score, "score")?;
        admit(&model.inner, score.inner.clone()).map_err(fail)?;
        Ok(())
    })
}
