//! C ABI for the cross-regulation document classifier.
//!
//! The surface is a single opaque handle wrapping the text pipeline and the
//! streaming cell dynamics: create it with a parameter struct and a seed,
//! point it at a feature-set file (or let it select features from a corpus
//! file), then feed labeled training documents and classify unlabeled ones.
//! All functions return a status code; every pointer argument is checked.
//! Handles are not thread-safe; callers must not share one across threads
//! without external synchronization.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use abcrm::corpus::{Label, StopWordList};
use abcrm::dynamics::{Abcrm, DynamicsConfig, ParameterSet};
use abcrm::features::{select_features, FeatureSet, RankMethod};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcrmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    IoError = 4,
    MissingFeatures = 5,
}

/// The six model parameters, mirrored for C callers.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbcrmParams {
    /// Effector cells seeded for a newly encountered feature.
    pub e0: u32,
    /// Regulator cells seeded on a first encounter in a relevant document.
    pub r0_plus: u32,
    /// Regulator cells seeded on a first encounter elsewhere.
    pub r0_minus: u32,
    /// Death rate of unbound effectors, in [0,1].
    pub d_e: f64,
    /// Death rate of unbound regulators, in [0,1].
    pub d_r: f64,
    /// Slot positions per presented feature; positive and even.
    pub n_a: u32,
}

/// Behavior flags for `abcrm_classifier_new`.
pub const ABCRM_FLAG_CELL_DEATH: u32 = 1;
pub const ABCRM_FLAG_PU_TRAINING: u32 = 2;
pub const ABCRM_FLAG_INCREMENTAL_BIAS: u32 = 4;

/// Document labels accepted by `abcrm_classifier_train`.
pub const ABCRM_LABEL_IRRELEVANT: i32 = 0;
pub const ABCRM_LABEL_RELEVANT: i32 = 1;

/// Opaque classifier handle.
pub struct AbcrmClassifier {
    engine: Abcrm,
    features: Option<FeatureSet>,
    stop: StopWordList,
    doc_counter: u64,
}

fn to_str<'a>(ptr: *const c_char) -> Result<&'a str, AbcrmStatus> {
    if ptr.is_null() {
        return Err(AbcrmStatus::NullPointer);
    }
    // SAFETY: caller guarantees a NUL-terminated string.
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| AbcrmStatus::InvalidUtf8)
}

fn status_of<T>(result: Result<T, AbcrmStatus>) -> AbcrmStatus {
    match result {
        Ok(_) => AbcrmStatus::Ok,
        Err(status) => status,
    }
}

/// Create a classifier. `flags` is a bitwise OR of the `ABCRM_FLAG_*`
/// constants; pass `ABCRM_FLAG_CELL_DEATH` for the canonical configuration.
/// On success `*out` owns the handle, to be released with
/// `abcrm_classifier_free`.
///
/// # Safety
/// `params` and `out` must be valid, properly aligned pointers.
#[no_mangle]
pub unsafe extern "C" fn abcrm_classifier_new(
    params: *const AbcrmParams,
    seed: u64,
    flags: u32,
    out: *mut *mut AbcrmClassifier,
) -> AbcrmStatus {
    if params.is_null() || out.is_null() {
        return AbcrmStatus::NullPointer;
    }
    let p = unsafe { *params };
    let Ok(params) = ParameterSet::new(p.e0, p.r0_plus, p.r0_minus, p.d_e, p.d_r, p.n_a) else {
        return AbcrmStatus::InvalidParameter;
    };
    let config = DynamicsConfig {
        seed,
        cell_death: flags & ABCRM_FLAG_CELL_DEATH != 0,
        pu_training: flags & ABCRM_FLAG_PU_TRAINING != 0,
        incremental_bias: flags & ABCRM_FLAG_INCREMENTAL_BIAS != 0,
    };
    let handle = Box::new(AbcrmClassifier {
        engine: Abcrm::new(params, config),
        features: None,
        stop: StopWordList::default(),
        doc_counter: 0,
    });
    unsafe { *out = Box::into_raw(handle) };
    AbcrmStatus::Ok
}

/// Load a feature-set file (`stem \t tfidf \t separation \t rank_product`).
///
/// # Safety
/// `handle` must come from `abcrm_classifier_new` and `path` must be a
/// valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abcrm_classifier_load_features(
    handle: *mut AbcrmClassifier,
    path: *const c_char,
) -> AbcrmStatus {
    let Some(classifier) = (unsafe { handle.as_mut() }) else {
        return AbcrmStatus::NullPointer;
    };
    status_of(to_str(path).and_then(|path| {
        FeatureSet::load(Path::new(path))
            .map(|fs| classifier.features = Some(fs))
            .map_err(|_| AbcrmStatus::IoError)
    }))
}

/// Select the top-k features from a corpus file's training partition and
/// install them on the handle.
///
/// # Safety
/// `handle` must come from `abcrm_classifier_new` and `corpus_path` must be
/// a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abcrm_classifier_select_features(
    handle: *mut AbcrmClassifier,
    corpus_path: *const c_char,
    k: usize,
) -> AbcrmStatus {
    let Some(classifier) = (unsafe { handle.as_mut() }) else {
        return AbcrmStatus::NullPointer;
    };
    if k == 0 {
        return AbcrmStatus::InvalidParameter;
    }
    status_of(to_str(corpus_path).and_then(|path| {
        let corpus = abcrm::corpus::Corpus::load(Path::new(path)).map_err(|_| AbcrmStatus::IoError)?;
        select_features(&corpus, k, RankMethod::RankProduct, &classifier.stop)
            .map(|fs| classifier.features = Some(fs))
            .map_err(|_| AbcrmStatus::InvalidParameter)
    }))
}

fn feed(
    classifier: &mut AbcrmClassifier,
    text: *const c_char,
    label: Label,
) -> Result<Option<(bool, f64)>, AbcrmStatus> {
    let text = to_str(text)?;
    let features = classifier
        .features
        .as_ref()
        .ok_or(AbcrmStatus::MissingFeatures)?;
    let bag = abcrm::corpus::tokenize(text, &classifier.stop);
    classifier.doc_counter += 1;
    let doc_id = format!("ffi{}", classifier.doc_counter);
    let prediction = classifier
        .engine
        .process_document(&doc_id, &bag, label, features);
    Ok(prediction.map(|p| (p.relevant, p.score)))
}

/// Feed one labeled training document (`ABCRM_LABEL_RELEVANT` or
/// `ABCRM_LABEL_IRRELEVANT`) into the dynamics.
///
/// # Safety
/// `handle` must come from `abcrm_classifier_new` and `text` must be a
/// valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abcrm_classifier_train(
    handle: *mut AbcrmClassifier,
    text: *const c_char,
    label: i32,
) -> AbcrmStatus {
    let Some(classifier) = (unsafe { handle.as_mut() }) else {
        return AbcrmStatus::NullPointer;
    };
    let label = match label {
        ABCRM_LABEL_RELEVANT => Label::Relevant,
        ABCRM_LABEL_IRRELEVANT => Label::Irrelevant,
        _ => return AbcrmStatus::InvalidParameter,
    };
    status_of(feed(classifier, text, label))
}

/// Classify one unlabeled document. The document joins the dynamics
/// exactly like a test-stream document; the verdict is written to
/// `relevant_out` (1 relevant, 0 irrelevant) and the signed margin to
/// `score_out` (either may be NULL).
///
/// # Safety
/// `handle` must come from `abcrm_classifier_new`; `text` must be a valid
/// NUL-terminated string; the out pointers, when non-NULL, must be valid.
#[no_mangle]
pub unsafe extern "C" fn abcrm_classifier_classify(
    handle: *mut AbcrmClassifier,
    text: *const c_char,
    relevant_out: *mut i32,
    score_out: *mut f64,
) -> AbcrmStatus {
    let Some(classifier) = (unsafe { handle.as_mut() }) else {
        return AbcrmStatus::NullPointer;
    };
    match feed(classifier, text, Label::Unlabeled) {
        Ok(Some((relevant, score))) => {
            if !relevant_out.is_null() {
                unsafe { *relevant_out = i32::from(relevant) };
            }
            if !score_out.is_null() {
                unsafe { *score_out = score };
            }
            AbcrmStatus::Ok
        }
        Ok(None) => unreachable!("unlabeled documents always classify"),
        Err(status) => status,
    }
}

/// Write a pool checkpoint for the handle's current state.
///
/// # Safety
/// `handle` must come from `abcrm_classifier_new` and `path` must be a
/// valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abcrm_classifier_save_pool(
    handle: *const AbcrmClassifier,
    path: *const c_char,
) -> AbcrmStatus {
    let Some(classifier) = (unsafe { handle.as_ref() }) else {
        return AbcrmStatus::NullPointer;
    };
    status_of(to_str(path).and_then(|path| {
        classifier
            .engine
            .save_checkpoint(Path::new(path))
            .map_err(|_| AbcrmStatus::IoError)
    }))
}

/// Release a handle. NULL is accepted.
///
/// # Safety
/// `handle` must be NULL or a pointer returned by `abcrm_classifier_new`
/// that has not been freed already.
#[no_mangle]
pub unsafe extern "C" fn abcrm_classifier_free(handle: *mut AbcrmClassifier) {
    if !handle.is_null() {
        // SAFETY: caller guarantees ownership.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Static human-readable description of a status code.
#[no_mangle]
pub extern "C" fn abcrm_status_message(status: AbcrmStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        AbcrmStatus::Ok => b"ok\0",
        AbcrmStatus::NullPointer => b"null pointer argument\0",
        AbcrmStatus::InvalidUtf8 => b"string argument is not valid UTF-8\0",
        AbcrmStatus::InvalidParameter => b"invalid parameter\0",
        AbcrmStatus::IoError => b"file could not be read or written\0",
        AbcrmStatus::MissingFeatures => b"no feature set installed on the handle\0",
    };
    msg.as_ptr().cast()
}

/// Library version as a newly allocated string; free it with
/// `abcrm_string_free`.
#[no_mangle]
pub extern "C" fn abcrm_version() -> *mut c_char {
    CString::new(env!("CARGO_PKG_VERSION"))
        .map_or(ptr::null_mut(), CString::into_raw)
}

/// Free a string allocated by this library.
///
/// # Safety
/// `s` must be NULL or a pointer returned by `abcrm_version`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn abcrm_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: caller guarantees the pointer came from this library.
        drop(unsafe { CString::from_raw(s) });
    }
}
