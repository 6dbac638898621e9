//! C ABI for `ocrbench`.
//!
//! Every fallible function returns an [`OcrbStatus`]; on failure the message
//! is available from [`ocrb_last_error`] on the same thread. Strings passed
//! in must be NUL-terminated UTF-8. Strings returned through out-pointers
//! are owned by the caller and released with [`ocrb_string_free`]. Handles
//! are released with their `*_free` function; passing NULL to any `*_free`
//! is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ocrbench::errormodel::{self, ErrorMiner, ErrorModel, KindSet};
use ocrbench::inject::{self, InjectionConfig};
use ocrbench::report::{self, AccuracyClass};
use ocrbench::textmetrics::{self, NormalizationPolicy, UnicodeForm, UnitKind, Whitespace};
use ocrbench::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcrbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    EmptyReference = 5,
    EmptyModel = 6,
    Unreachable = 7,
    Format = 8,
    Engine = 9,
    Other = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcrbAccuracyClass {
    Good = 0,
    Average = 1,
    Poor = 2,
}

/// Field values: `unicode_form` 0 = NFC, 1 = none; `unit` 0 = code point,
/// 1 = grapheme cluster; `whitespace` 0 = preserve, 1 = collapse runs.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OcrbPolicy {
    pub unicode_form: u32,
    pub unit: u32,
    pub whitespace: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OcrbCerReport {
    pub distance: usize,
    pub ref_len: usize,
    pub hyp_len: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    /// Percent.
    pub cer: f64,
}

/// Opaque error model.
pub struct OcrbErrorModel(ErrorModel);

/// Opaque incremental miner.
pub struct OcrbMiner(ErrorMiner);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(OcrbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::MissingFile(_) | Error::Csv(_) | Error::Image(_) => OcrbStatus::Io,
            Error::EmptyReference { .. } => OcrbStatus::EmptyReference,
            Error::EmptyModel => OcrbStatus::EmptyModel,
            Error::Unreachable { .. } => OcrbStatus::Unreachable,
            Error::InvalidArgument(_) => OcrbStatus::InvalidArgument,
            Error::Format(_) | Error::Json(_) => OcrbStatus::Format,
            Error::Engine(_) => OcrbStatus::Engine,
            _ => OcrbStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OcrbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OcrbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside ocrbench");
            OcrbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(OcrbStatus::NullPointer, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(OcrbStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller guarantees a valid, writable pointer when non-NULL.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(OcrbStatus::NullPointer, format!("`{name}` is NULL")))
}

fn model_arg<'a>(p: *const OcrbErrorModel) -> Result<&'a ErrorModel, Failure> {
    // SAFETY: handle was produced by this library and not yet freed.
    unsafe { p.as_ref() }
        .map(|m| &m.0)
        .ok_or_else(|| Failure(OcrbStatus::NullPointer, "`model` is NULL".into()))
}

unsafe fn policy_arg(p: *const OcrbPolicy) -> Result<NormalizationPolicy, Failure> {
    let Some(p) = p.as_ref() else {
        return Ok(NormalizationPolicy::default());
    };
    let bad = |field: &str, v: u32| Failure(OcrbStatus::InvalidArgument, format!("policy.{field} = {v} is not valid"));
    Ok(NormalizationPolicy {
        unicode_form: match p.unicode_form {
            0 => UnicodeForm::Nfc,
            1 => UnicodeForm::None,
            v => return Err(bad("unicode_form", v)),
        },
        unit: match p.unit {
            0 => UnitKind::CodePoint,
            1 => UnitKind::GraphemeCluster,
            v => return Err(bad("unit", v)),
        },
        whitespace: match p.whitespace {
            0 => Whitespace::Preserve,
            1 => Whitespace::CollapseRuns,
            v => return Err(bad("whitespace", v)),
        },
    })
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(OcrbStatus::Format, "string contains NUL".into()))
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ocrb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ocrb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Levenshtein distance between the normalized unit sequences.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `policy` may be NULL
/// for the default; `out_distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrb_edit_distance(
    reference: *const c_char,
    hypothesis: *const c_char,
    policy: *const OcrbPolicy,
    out_distance: *mut usize,
) -> OcrbStatus {
    guard(|| {
        let policy = policy_arg(policy)?;
        let r = textmetrics::normalize(str_arg(reference, "reference")?, &policy);
        let h = textmetrics::normalize(str_arg(hypothesis, "hypothesis")?, &policy);
        *out_arg(out_distance, "out_distance")? = textmetrics::edit_distance(&r, &h);
        Ok(())
    })
}

/// Character error rate in percent, with operation counts.
///
/// # Safety
/// As for [`ocrb_edit_distance`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocrb_cer(
    reference: *const c_char,
    hypothesis: *const c_char,
    policy: *const OcrbPolicy,
    out: *mut OcrbCerReport,
) -> OcrbStatus {
    guard(|| {
        let policy = policy_arg(policy)?;
        let rep = textmetrics::cer(str_arg(reference, "reference")?, str_arg(hypothesis, "hypothesis")?, &policy)?;
        *out_arg(out, "out")? = OcrbCerReport {
            distance: rep.distance,
            ref_len: rep.ref_len,
            hyp_len: rep.hyp_len,
            substitutions: rep.counts.substitutions,
            insertions: rep.counts.insertions,
            deletions: rep.counts.deletions,
            cer: rep.cer,
        };
        Ok(())
    })
}

/// Accuracy band for a CER in percent: Good <= 2 < Average <= 10 < Poor.
#[no_mangle]
pub extern "C" fn ocrb_classify(cer: f64) -> OcrbAccuracyClass {
    match report::classify(cer) {
        AccuracyClass::Good => OcrbAccuracyClass::Good,
        AccuracyClass::Average => OcrbAccuracyClass::Average,
        AccuracyClass::Poor => OcrbAccuracyClass::Poor,
    }
}

/// # Safety
/// `policy` may be NULL for the default.
#[no_mangle]
pub unsafe extern "C" fn ocrb_miner_new(policy: *const OcrbPolicy, out_miner: *mut *mut OcrbMiner) -> OcrbStatus {
    guard(|| {
        let policy = policy_arg(policy)?;
        *out_arg(out_miner, "out_miner")? = Box::into_raw(Box::new(OcrbMiner(ErrorMiner::new(policy))));
        Ok(())
    })
}

/// Align one pair and add its errors to the miner.
///
/// # Safety
/// `miner` must be a live handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ocrb_miner_add_pair(
    miner: *mut OcrbMiner,
    reference: *const c_char,
    hypothesis: *const c_char,
) -> OcrbStatus {
    guard(|| {
        let m = out_arg(miner, "miner")?;
        m.0.add_pair(str_arg(reference, "reference")?, str_arg(hypothesis, "hypothesis")?)?;
        Ok(())
    })
}

/// Consume the miner and produce a model. The miner handle is invalid
/// afterwards, whatever the status.
///
/// # Safety
/// `miner` must be a live handle; `language` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ocrb_miner_finish(
    miner: *mut OcrbMiner,
    language: *const c_char,
    out_model: *mut *mut OcrbErrorModel,
) -> OcrbStatus {
    guard(|| {
        if miner.is_null() {
            return Err(Failure(OcrbStatus::NullPointer, "`miner` is NULL".into()));
        }
        let m = Box::from_raw(miner);
        let language = str_arg(language, "language")?;
        let out = out_arg(out_model, "out_model")?;
        *out = Box::into_raw(Box::new(OcrbErrorModel(m.0.finish(language))));
        Ok(())
    })
}

/// # Safety
/// `miner` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ocrb_miner_free(miner: *mut OcrbMiner) {
    if !miner.is_null() {
        drop(Box::from_raw(miner));
    }
}

/// # Safety
/// `path` NUL-terminated; `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn ocrb_model_load(path: *const c_char, out_model: *mut *mut OcrbErrorModel) -> OcrbStatus {
    guard(|| {
        let model = ErrorModel::load(Path::new(str_arg(path, "path")?))?;
        *out_arg(out_model, "out_model")? = Box::into_raw(Box::new(OcrbErrorModel(model)));
        Ok(())
    })
}

/// # Safety
/// `json` NUL-terminated; `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn ocrb_model_from_json(json: *const c_char, out_model: *mut *mut OcrbErrorModel) -> OcrbStatus {
    guard(|| {
        let model = ErrorModel::from_json(str_arg(json, "json")?)?;
        *out_arg(out_model, "out_model")? = Box::into_raw(Box::new(OcrbErrorModel(model)));
        Ok(())
    })
}

/// ASCII-only JSON; free with [`ocrb_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ocrb_model_to_json(model: *const OcrbErrorModel, out_json: *mut *mut c_char) -> OcrbStatus {
    guard(|| {
        let json = model_arg(model)?.to_json()?;
        *out_arg(out_json, "out_json")? = to_c_string(json)?;
        Ok(())
    })
}

/// Number of entries; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ocrb_model_len(model: *const OcrbErrorModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.len())
}

/// New model holding the `k` most frequent entries.
///
/// # Safety
/// `model` must be a live handle; `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn ocrb_model_top_k(
    model: *const OcrbErrorModel,
    k: usize,
    out_model: *mut *mut OcrbErrorModel,
) -> OcrbStatus {
    guard(|| {
        let top = errormodel::top_k(model_arg(model)?, k)?;
        *out_arg(out_model, "out_model")? = Box::into_raw(Box::new(OcrbErrorModel(top)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ocrb_model_free(model: *mut OcrbErrorModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Noise `text` to `target_cer` percent. `kinds` is a bit set: 1 insert,
/// 2 delete, 4 substitute. `out_achieved_cer` may be NULL.
///
/// # Safety
/// `text` NUL-terminated; `model` live; `policy` may be NULL; `out_text`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ocrb_inject(
    text: *const c_char,
    model: *const OcrbErrorModel,
    target_cer: f64,
    kinds: u8,
    seed: u64,
    policy: *const OcrbPolicy,
    out_text: *mut *mut c_char,
    out_achieved_cer: *mut f64,
) -> OcrbStatus {
    guard(|| {
        let config = InjectionConfig {
            target_cer,
            kinds: KindSet::from_bits(kinds),
            seed,
            policy: policy_arg(policy)?,
            ..Default::default()
        };
        let result = inject::inject(str_arg(text, "text")?, model_arg(model)?, &config)?;
        let out = out_arg(out_text, "out_text")?;
        if let Some(achieved) = out_achieved_cer.as_mut() {
            *achieved = result.achieved_cer;
        }
        *out = to_c_string(result.noisy_text)?;
        Ok(())
    })
}
