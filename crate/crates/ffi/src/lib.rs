//! C ABI for the minperm library.
//!
//! Every function returns an [`MpStatus`]. On failure a message is kept per
//! thread and can be read with [`mp_last_error`]. Strings handed out by the
//! library must be released with [`mp_string_free`], corpora with
//! [`mp_corpus_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use minperm::corpus::{ApiPermissionMap, LoadOptions};
use minperm::pipeline::{self, RunConfig, TrainedTopics};
use minperm::text::Stopwords;
use minperm::{recommender, AppRecord, Corpus, Error, FuncVector, PermissionRegistry};

/// Result codes. Values match the command-line exit codes where they overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MpStatus {
    Ok = 0,
    InvalidArgument = 1,
    DataError = 2,
    NotConverged = 3,
    NoNeighbors = 4,
    Panic = 5,
}

/// Opaque handle to a loaded corpus.
pub struct MpCorpus {
    corpus: Corpus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MpStatus, msg: impl Into<String>) -> MpStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> MpStatus {
    let status = if e.is_usage() {
        MpStatus::InvalidArgument
    } else {
        MpStatus::DataError
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> MpStatus) -> MpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(MpStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, MpStatus> {
    if p.is_null() {
        return Err(fail(MpStatus::InvalidArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MpStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn opt_path(p: *const c_char, name: &str) -> Result<Option<PathBuf>, MpStatus> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(|s| Some(PathBuf::from(s)))
    }
}

fn hand_out(s: String, out: *mut *mut c_char) -> MpStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            MpStatus::Ok
        }
        Err(_) => fail(MpStatus::DataError, "output contains a nul byte"),
    }
}

/// Last error message on this thread, or null. Valid until the next call
/// into the library from the same thread.
#[no_mangle]
pub extern "C" fn mp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSONL corpus. `registry_path` and `api_map_path` may be null; the
/// built-in registry is used when no registry is given.
///
/// # Safety
/// String arguments must be null or valid NUL-terminated strings; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_corpus_load(
    corpus_path: *const c_char,
    registry_path: *const c_char,
    api_map_path: *const c_char,
    out: *mut *mut MpCorpus,
) -> MpStatus {
    guard(|| {
        if out.is_null() {
            return fail(MpStatus::InvalidArgument, "out is null");
        }
        let load = || -> Result<Corpus, MpStatus> {
            let path = str_arg(corpus_path, "corpus_path")?;
            let registry = match opt_path(registry_path, "registry_path")? {
                Some(p) => PermissionRegistry::load(p).map_err(from_error)?,
                None => PermissionRegistry::builtin(),
            };
            let api_map = opt_path(api_map_path, "api_map_path")?
                .map(ApiPermissionMap::load)
                .transpose()
                .map_err(from_error)?;
            Corpus::load(path, registry, api_map.as_ref(), LoadOptions::default()).map_err(from_error)
        };
        match load() {
            Ok(corpus) => {
                *out = Box::into_raw(Box::new(MpCorpus { corpus }));
                MpStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Releases a corpus. Null is ignored.
///
/// # Safety
/// `corpus` must be null or a handle from [`mp_corpus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mp_corpus_free(corpus: *mut MpCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of apps in the corpus.
///
/// # Safety
/// `corpus` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_corpus_len(corpus: *const MpCorpus, out: *mut usize) -> MpStatus {
    guard(|| match (corpus.as_ref(), out.is_null()) {
        (Some(c), false) => {
            *out = c.corpus.len();
            MpStatus::Ok
        }
        _ => fail(MpStatus::InvalidArgument, "null argument"),
    })
}

unsafe fn vectors(x: *const f64, y: *const f64, len: usize) -> Result<(FuncVector, FuncVector), MpStatus> {
    if x.is_null() || y.is_null() {
        return Err(fail(MpStatus::InvalidArgument, "null vector"));
    }
    let a = std::slice::from_raw_parts(x, len).to_vec();
    let b = std::slice::from_raw_parts(y, len).to_vec();
    Ok((FuncVector::new(a), FuncVector::new(b)))
}

/// Euclidean distance between two topic distributions of length `len`.
///
/// # Safety
/// `x` and `y` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mp_distance(x: *const f64, y: *const f64, len: usize, out: *mut f64) -> MpStatus {
    guard(|| {
        if out.is_null() {
            return fail(MpStatus::InvalidArgument, "out is null");
        }
        match vectors(x, y, len).map(|(a, b)| recommender::distance(&a, &b)) {
            Ok(Ok(d)) => {
                *out = d;
                MpStatus::Ok
            }
            Ok(Err(e)) => from_error(e),
            Err(s) => s,
        }
    })
}

/// `1 / (1 + distance)`.
///
/// # Safety
/// Same as [`mp_distance`].
#[no_mangle]
pub unsafe extern "C" fn mp_similarity(x: *const f64, y: *const f64, len: usize, out: *mut f64) -> MpStatus {
    guard(|| {
        if out.is_null() {
            return fail(MpStatus::InvalidArgument, "out is null");
        }
        match vectors(x, y, len).map(|(a, b)| recommender::similarity(&a, &b)) {
            Ok(Ok(s)) => {
                *out = s;
                MpStatus::Ok
            }
            Ok(Err(e)) => from_error(e),
            Err(s) => s,
        }
    })
}

unsafe fn config_arg(config_json: *const c_char) -> Result<RunConfig, MpStatus> {
    let cfg = if config_json.is_null() {
        RunConfig::default()
    } else {
        RunConfig::from_json_str(str_arg(config_json, "config_json")?).map_err(from_error)?
    };
    cfg.validate().map_err(from_error)?;
    Ok(cfg)
}

/// Runs the split/train/assess evaluation and returns the benign-test and
/// malicious-test reports as a JSON array. `config_json` uses the same keys
/// as the command-line config file; `seed` is required.
///
/// # Safety
/// `corpus` must be a live handle, `config_json` null or a valid string and
/// `out_json` a valid pointer. Free the result with [`mp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mp_evaluate(
    corpus: *const MpCorpus,
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> MpStatus {
    guard(|| {
        let Some(c) = corpus.as_ref() else {
            return fail(MpStatus::InvalidArgument, "corpus is null");
        };
        if out_json.is_null() {
            return fail(MpStatus::InvalidArgument, "out_json is null");
        }
        let cfg = match config_arg(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let truth = match cfg.load_truth() {
            Ok(t) => t,
            Err(e) => return from_error(e),
        };
        match pipeline::evaluate(&c.corpus, truth.as_ref(), &cfg) {
            Ok(out) => match serde_json::to_string(&out.reports) {
                Ok(s) => hand_out(s, out_json),
                Err(e) => fail(MpStatus::DataError, e.to_string()),
            },
            Err(e) => from_error(e),
        }
    })
}

/// Trains the topic model, computes minimum permission sets for the benign
/// apps and returns them as JSON Lines (`{app_id, min_perms}`). The output is
/// also produced when the iteration hit its cap, together with
/// `NotConverged`.
///
/// # Safety
/// Same as [`mp_evaluate`].
#[no_mangle]
pub unsafe extern "C" fn mp_minset(
    corpus: *const MpCorpus,
    config_json: *const c_char,
    out_jsonl: *mut *mut c_char,
) -> MpStatus {
    guard(|| {
        let Some(c) = corpus.as_ref() else {
            return fail(MpStatus::InvalidArgument, "corpus is null");
        };
        if out_jsonl.is_null() {
            return fail(MpStatus::InvalidArgument, "out_jsonl is null");
        }
        let cfg = match config_arg(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let run = || -> minperm::Result<(String, bool)> {
            let records: Vec<&AppRecord> = c.corpus.records.iter().collect();
            let topics: TrainedTopics = pipeline::train_topics(&records, &cfg.lda_params()?, &Stopwords::builtin())?;
            let run = pipeline::run_minset(&c.corpus, &topics, &cfg)?;
            let text = pipeline::to_jsonl(&pipeline::min_perm_rows(&run.final_sets))?;
            Ok((text, run.outcome.converged))
        };
        match run() {
            Ok((text, converged)) => {
                let s = hand_out(text, out_jsonl);
                if s == MpStatus::Ok && !converged {
                    fail(MpStatus::NotConverged, "no fixed point within max_iterations")
                } else {
                    s
                }
            }
            Err(e) => from_error(e),
        }
    })
}

/// Similarity-weighted recommendation values from `n` neighbours. `sims`
/// holds each neighbour's similarity and `perms_json` their permission sets
/// as a JSON array of arrays. Writes a JSON object `{perm: rv}`.
///
/// # Safety
/// `sims` must point to `n` doubles, `perms_json` must be a valid string and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_recommend_values(
    sims: *const f64,
    n: usize,
    perms_json: *const c_char,
    out_json: *mut *mut c_char,
) -> MpStatus {
    guard(|| {
        if sims.is_null() || out_json.is_null() {
            return fail(MpStatus::InvalidArgument, "null argument");
        }
        let text = match str_arg(perms_json, "perms_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let names: Vec<Vec<String>> = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return fail(MpStatus::InvalidArgument, format!("perms_json: {e}")),
        };
        if names.len() != n {
            return fail(
                MpStatus::InvalidArgument,
                format!("{n} similarities but {} permission sets", names.len()),
            );
        }
        let sets: Vec<minperm::PermSet> = names
            .iter()
            .map(|v| v.iter().filter_map(|s| minperm::PermissionId::new(s)).collect())
            .collect();
        let sims = std::slice::from_raw_parts(sims, n);
        match recommender::recommend_values(sims.iter().copied().zip(&sets)) {
            Ok(values) => match serde_json::to_string(&values) {
                Ok(s) => hand_out(s, out_json),
                Err(e) => fail(MpStatus::DataError, e.to_string()),
            },
            Err(e) => fail(MpStatus::NoNeighbors, e.to_string()),
        }
    })
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
