//! C ABI for the `cmqe` toolkit.
//!
//! Every fallible function returns a [`CmqeStatus`]. On failure a message is
//! kept per thread and can be read with [`cmqe_last_error_message`]. Models
//! are exposed as opaque [`CmqeModel`] handles owned by the caller and
//! released with [`cmqe_model_free`]. No function unwinds across the
//! boundary: panics are caught and reported as `CMQE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cmqe::eval::{cohen_kappa, f1_score, round_clip};
use cmqe::metrics::metric_vector;
use cmqe::regressor::{load_model, ModelFileError, RegressorError};
use cmqe::{F1Average, LidLabel, MlpModel, PosLabel, TaggedSentence, Task};

/// Number of POS tags; index order of `symcom_su` arrays.
pub const CMQE_POS_COUNT: usize = 17;
/// POS code meaning "token carries no POS tag".
pub const CMQE_POS_NONE: i32 = -1;

pub const CMQE_LID_L1: u8 = 0;
pub const CMQE_LID_L2: u8 = 1;
pub const CMQE_LID_OTHER: u8 = 2;

pub const CMQE_TASK_QUALITY: u32 = 0;
pub const CMQE_TASK_DISAGREEMENT: u32 = 1;

pub const CMQE_F1_MACRO: u32 = 0;
pub const CMQE_F1_MICRO: u32 = 1;
pub const CMQE_F1_WEIGHTED: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmqeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    ModelFile = 4,
    DimensionMismatch = 5,
    NonFinite = 6,
    Panic = 7,
}

/// Opaque handle to a loaded regression model.
pub struct CmqeModel {
    inner: MlpModel,
}

/// Code-mixing metrics of one sentence. A value whose `*_valid` flag is
/// false is undefined for the sentence and reported as 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmqeMetrics {
    pub cmi: f64,
    pub switch_points: u32,
    pub burstiness: f64,
    pub symcom_sent: f64,
    pub symcom_su: [f64; CMQE_POS_COUNT],
    pub cmi_valid: bool,
    pub burstiness_valid: bool,
    pub symcom_sent_valid: bool,
    pub symcom_su_valid: [bool; CMQE_POS_COUNT],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type FfiResult<T> = Result<T, (CmqeStatus, String)>;

fn fail<T>(status: CmqeStatus, message: impl Into<String>) -> FfiResult<T> {
    Err((status, message.into()))
}

/// Runs `body`, recording any error or panic as the thread's last error.
fn guard(body: impl FnOnce() -> FfiResult<()>) -> CmqeStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CmqeStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            CmqeStatus::Panic
        }
    }
}

fn non_null<T>(ptr: *const T, name: &str) -> FfiResult<*const T> {
    if ptr.is_null() {
        fail(CmqeStatus::NullArgument, format!("`{name}` is null"))
    } else {
        Ok(ptr)
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(ptr, name)?;
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn task_from_code(code: u32) -> FfiResult<Task> {
    match code {
        CMQE_TASK_QUALITY => Ok(Task::Quality),
        CMQE_TASK_DISAGREEMENT => Ok(Task::Disagreement),
        _ => fail(CmqeStatus::InvalidArgument, format!("unknown task code {code}")),
    }
}

fn average_from_code(code: u32) -> FfiResult<F1Average> {
    match code {
        CMQE_F1_MACRO => Ok(F1Average::Macro),
        CMQE_F1_MICRO => Ok(F1Average::Micro),
        CMQE_F1_WEIGHTED => Ok(F1Average::Weighted),
        _ => fail(CmqeStatus::InvalidArgument, format!("unknown F1 averaging code {code}")),
    }
}

/// Message describing the most recent failure on this thread, or null.
/// The pointer stays valid until the next `cmqe_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cmqe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Name of POS code `index` (e.g. "NOUN"), or null when out of range.
/// The string is static.
#[no_mangle]
pub extern "C" fn cmqe_pos_name(index: i32) -> *const c_char {
    const NAMES: [&CStr; CMQE_POS_COUNT] = [
        c"ADJ", c"ADP", c"ADV", c"AUX", c"CCONJ", c"DET", c"INTJ", c"NOUN", c"NUM", c"PART", c"PRON", c"PROPN",
        c"PUNCT", c"SCONJ", c"SYM", c"VERB", c"X",
    ];
    usize::try_from(index)
        .ok()
        .and_then(|i| NAMES.get(i))
        .map_or(std::ptr::null(), |s| s.as_ptr())
}

/// Loads a model file written by `cmqe train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_model_load(path: *const c_char, out_model: *mut *mut CmqeModel) -> CmqeStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out_model, "out_model")?;
        *out_model = std::ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .or_else(|_| fail(CmqeStatus::InvalidArgument, "path is not valid UTF-8"))?;
        let model = load_model(path).map_err(|e| {
            let status = match e {
                ModelFileError::Io { .. } => CmqeStatus::Io,
                _ => CmqeStatus::ModelFile,
            };
            (status, e.to_string())
        })?;
        *out_model = Box::into_raw(Box::new(CmqeModel { inner: model }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from [`cmqe_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmqe_model_free(model: *mut CmqeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Length of the feature vector the model expects.
///
/// # Safety
/// `model` must be a live handle; `out_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_model_input_dim(model: *const CmqeModel, out_dim: *mut usize) -> CmqeStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out_dim, "out_dim")?;
        *out_dim = (*model).inner.config.input_dim;
        Ok(())
    })
}

/// Task the model was trained for (`CMQE_TASK_*`). Fails with
/// `CMQE_STATUS_INVALID_ARGUMENT` when the file records no task.
///
/// # Safety
/// `model` must be a live handle; `out_task` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_model_task(model: *const CmqeModel, out_task: *mut u32) -> CmqeStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out_task, "out_task")?;
        *out_task = match (*model).inner.task {
            Some(Task::Quality) => CMQE_TASK_QUALITY,
            Some(Task::Disagreement) => CMQE_TASK_DISAGREEMENT,
            None => return fail(CmqeStatus::InvalidArgument, "model records no task"),
        };
        Ok(())
    })
}

/// Raw regression output for one assembled, standardised feature vector
/// (the vectors `cmqe train --dump-features` writes).
///
/// # Safety
/// `features` must point to `len` doubles; `out_prediction` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_model_predict(
    model: *const CmqeModel,
    features: *const f64,
    len: usize,
    out_prediction: *mut f64,
) -> CmqeStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out_prediction, "out_prediction")?;
        let x = slice(features, len, "features")?;
        if x.iter().any(|v| !v.is_finite()) {
            return fail(CmqeStatus::NonFinite, "feature vector contains a non-finite value");
        }
        let y = (*model).inner.forward(x).map_err(|e| match e {
            RegressorError::DimensionMismatch { .. } => (CmqeStatus::DimensionMismatch, e.to_string()),
            _ => (CmqeStatus::InvalidArgument, e.to_string()),
        })?;
        if !y.is_finite() {
            return fail(CmqeStatus::NonFinite, format!("prediction is not finite ({y})"));
        }
        *out_prediction = y;
        Ok(())
    })
}

/// Code-mixing metrics of a sentence given per-token language codes
/// (`CMQE_LID_*`) and POS codes (`0..CMQE_POS_COUNT`, or `CMQE_POS_NONE`).
///
/// # Safety
/// `lid` and `pos` must each point to `n_tokens` values; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_metrics(
    lid: *const u8,
    pos: *const i32,
    n_tokens: usize,
    out: *mut CmqeMetrics,
) -> CmqeStatus {
    guard(|| {
        non_null(out, "out")?;
        if n_tokens == 0 {
            return fail(CmqeStatus::InvalidArgument, "sentence has no tokens");
        }
        let lid = slice(lid, n_tokens, "lid")?;
        let pos = slice(pos, n_tokens, "pos")?;
        let mut labels = Vec::with_capacity(n_tokens);
        for (i, (&l, &p)) in lid.iter().zip(pos).enumerate() {
            let l = match l {
                CMQE_LID_L1 => LidLabel::L1,
                CMQE_LID_L2 => LidLabel::L2,
                CMQE_LID_OTHER => LidLabel::Other,
                _ => return fail(CmqeStatus::InvalidArgument, format!("token {i}: unknown language code {l}")),
            };
            let p = match p {
                CMQE_POS_NONE => None,
                _ => match usize::try_from(p).ok().and_then(|k| PosLabel::ALL.get(k)) {
                    Some(&tag) => Some(tag),
                    None => return fail(CmqeStatus::InvalidArgument, format!("token {i}: unknown POS code {p}")),
                },
            };
            labels.push((l, p));
        }
        let m = metric_vector(&TaggedSentence::from_labels("", &labels));
        *out = CmqeMetrics {
            cmi: m.cmi,
            switch_points: m.switch_points,
            burstiness: m.burstiness,
            symcom_sent: m.symcom_sent,
            symcom_su: m.symcom_su,
            cmi_valid: m.valid.cmi,
            burstiness_valid: m.valid.burstiness,
            symcom_sent_valid: m.valid.symcom_sent,
            symcom_su_valid: m.valid.symcom_su,
        };
        Ok(())
    })
}

/// Half-up rounding of a raw prediction, clipped to the task's range.
///
/// # Safety
/// `out_label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_round_clip(prediction: f64, task: u32, out_label: *mut i64) -> CmqeStatus {
    guard(|| {
        non_null(out_label, "out_label")?;
        let task = task_from_code(task)?;
        *out_label = round_clip(prediction, task).map_err(|e| (CmqeStatus::NonFinite, e.to_string()))?;
        Ok(())
    })
}

/// Cohen's kappa of two label lists. `out_valid` is set to false (and
/// `out_kappa` to 0) when kappa is undefined because both lists use one
/// identical class.
///
/// # Safety
/// `gold` and `pred` must each point to `n` values; the outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_cohen_kappa(
    gold: *const i64,
    pred: *const i64,
    n: usize,
    out_kappa: *mut f64,
    out_valid: *mut bool,
) -> CmqeStatus {
    guard(|| {
        non_null(out_kappa, "out_kappa")?;
        non_null(out_valid, "out_valid")?;
        let k = cohen_kappa(slice(gold, n, "gold")?, slice(pred, n, "pred")?)
            .map_err(|e| (CmqeStatus::InvalidArgument, e.to_string()))?;
        *out_kappa = k.value;
        *out_valid = k.valid;
        Ok(())
    })
}

/// Multi-class F1 with the given averaging (`CMQE_F1_*`).
///
/// # Safety
/// `gold` and `pred` must each point to `n` values; `out_f1` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cmqe_f1_score(
    gold: *const i64,
    pred: *const i64,
    n: usize,
    average: u32,
    out_f1: *mut f64,
) -> CmqeStatus {
    guard(|| {
        non_null(out_f1, "out_f1")?;
        let average = average_from_code(average)?;
        *out_f1 = f1_score(slice(gold, n, "gold")?, slice(pred, n, "pred")?, average)
            .map_err(|e| (CmqeStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}
