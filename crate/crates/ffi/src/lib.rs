//! C ABI over the knowtype classifier library.
//!
//! Every fallible call returns a [`KtStatus`]. On failure a description is
//! available from [`kt_last_error`] on the same thread until the next call.
//! Strings returned as `char *` are owned by the caller and released with
//! [`kt_string_free`]; `const char *` results are static.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use knowtype::corpus::{load_corpus, scumble, CorpusFormat, KnowledgeType, NUM_TYPES};
use knowtype::error::Error;
use knowtype::eval::metrics;
use knowtype::model::Classifier;
use knowtype::persist::load_classifier;

/// Number of knowledge types in every score vector.
pub const KT_NUM_TYPES: usize = 12;

const _: () = assert!(KT_NUM_TYPES == NUM_TYPES);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Data = 5,
    ModelFormat = 6,
    Degenerate = 7,
    NonFinite = 8,
    Config = 9,
    Mismatch = 10,
    /// The metric is undefined for the input, e.g. no positive examples.
    Undefined = 11,
    Panic = 12,
}

/// Opaque handle to a trained classifier.
pub struct KtModel {
    inner: Classifier,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> KtStatus {
    match err {
        Error::Io { .. } => KtStatus::Io,
        Error::Parse { .. } | Error::DuplicateId(_) | Error::UnknownLabel(_) | Error::EmptyText(_) => KtStatus::Data,
        Error::InvalidArgument(_) => KtStatus::InvalidArgument,
        Error::Degenerate(_) => KtStatus::Degenerate,
        Error::NonFinite { .. } => KtStatus::NonFinite,
        Error::Config(_) => KtStatus::Config,
        Error::ModelFormat(_) => KtStatus::ModelFormat,
        Error::Mismatch(_) => KtStatus::Mismatch,
    }
}

fn fail(status: KtStatus, msg: impl Into<String>) -> KtStatus {
    set_error(msg);
    status
}

fn from_error(err: Error) -> KtStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, converting panics into [`KtStatus::Panic`].
fn guard(f: impl FnOnce() -> KtStatus) -> KtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(KtStatus::Panic, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, KtStatus> {
    if p.is_null() {
        return Err(fail(KtStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(KtStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Description of the last failure on this thread, or null. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn kt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static name of the type at `index` (0-based, canonical order), or null
/// when out of range.
#[no_mangle]
pub extern "C" fn kt_type_name(index: usize) -> *const c_char {
    const NAMES: [&str; NUM_TYPES] = [
        "Functionality\0",
        "Concept\0",
        "Directive\0",
        "Purpose\0",
        "Quality\0",
        "Control\0",
        "Structure\0",
        "Pattern\0",
        "Example\0",
        "Environment\0",
        "Reference\0",
        "NonInformation\0",
    ];
    debug_assert!(KnowledgeType::ALL.iter().zip(NAMES).all(|(t, n)| n.trim_end_matches('\0') == t.name()));
    NAMES.get(index).map_or(ptr::null(), |n| n.as_ptr().cast())
}

/// Loads a model file written by the `train` command.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_model_load(path: *const c_char, out: *mut *mut KtModel) -> KtStatus {
    guard(|| {
        if out.is_null() {
            return fail(KtStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_classifier(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(KtModel { inner }));
                KtStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`kt_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kt_model_free(model: *mut KtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Report label of the model (e.g. `SVM`); free with [`kt_string_free`].
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kt_model_label(model: *const KtModel) -> *mut c_char {
    match model.as_ref() {
        Some(m) => CString::new(m.inner.label.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// Scores one document. `probabilities` receives [`KT_NUM_TYPES`] values in
/// canonical type order; `ranking`, when not null, receives the scores used
/// for ranking metrics.
///
/// # Safety
/// `text` must be NUL-terminated; output buffers must hold
/// [`KT_NUM_TYPES`] doubles.
#[no_mangle]
pub unsafe extern "C" fn kt_model_predict(
    model: *const KtModel,
    text: *const c_char,
    probabilities: *mut f64,
    ranking: *mut f64,
) -> KtStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(KtStatus::NullPointer, "model is null");
        };
        if probabilities.is_null() {
            return fail(KtStatus::NullPointer, "probabilities is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match m.inner.predict_texts(&[text]) {
            Ok(p) => {
                ptr::copy_nonoverlapping(p.probability[0].as_ptr(), probabilities, NUM_TYPES);
                if !ranking.is_null() {
                    ptr::copy_nonoverlapping(p.ranking[0].as_ptr(), ranking, NUM_TYPES);
                }
                KtStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

unsafe fn binary_metric(
    scores: *const f64,
    truth: *const u8,
    n: usize,
    out: *mut f64,
    name: &str,
    metric: fn(&[f64], &[bool]) -> Option<f64>,
) -> KtStatus {
    guard(|| {
        if out.is_null() || (n > 0 && (scores.is_null() || truth.is_null())) {
            return fail(KtStatus::NullPointer, "null buffer");
        }
        let (s, t) = if n == 0 {
            (&[][..], Vec::new())
        } else {
            let s = std::slice::from_raw_parts(scores, n);
            let t = std::slice::from_raw_parts(truth, n).iter().map(|&b| b != 0).collect();
            (s, t)
        };
        if s.iter().any(|v| !v.is_finite()) {
            return fail(KtStatus::NonFinite, "scores contain a non-finite value");
        }
        match metric(s, &t) {
            Some(v) => {
                *out = v;
                KtStatus::Ok
            }
            None => fail(KtStatus::Undefined, format!("{name} is undefined for this input")),
        }
    })
}

/// Average precision of `scores` against 0/1 `truth`.
///
/// # Safety
/// `scores` and `truth` must hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kt_auprc(scores: *const f64, truth: *const u8, n: usize, out: *mut f64) -> KtStatus {
    binary_metric(scores, truth, n, out, "AUPRC (no positives)", metrics::auprc)
}

/// Area under the ROC curve of `scores` against 0/1 `truth`.
///
/// # Safety
/// `scores` and `truth` must hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kt_roc_auc(scores: *const f64, truth: *const u8, n: usize, out: *mut f64) -> KtStatus {
    binary_metric(scores, truth, n, out, "ROC AUC (one class only)", metrics::roc_auc)
}

/// Mean SCUMBLE of a labeled corpus file (JSONL or CSV by extension).
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kt_corpus_scumble(path: *const c_char, out: *mut f64) -> KtStatus {
    guard(|| {
        if out.is_null() {
            return fail(KtStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => Path::new(p),
            Err(s) => return s,
        };
        match load_corpus(path, CorpusFormat::from_path(path)).and_then(|c| scumble(&c)) {
            Ok(r) => {
                *out = r.mean;
                KtStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
