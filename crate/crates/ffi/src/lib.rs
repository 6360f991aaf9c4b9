//! C ABI for loading a trained separation model, separating mono mixtures,
//! and computing BSS Eval metrics.
//!
//! Every function returns a [`WavesepStatus`]. On failure a description is
//! available from [`wavesep_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use wavesep::eval::{sdr_sir_sar, ReferenceSet};
use wavesep::model::{complete_sources, Model};
use wavesep::train::Checkpoint;
use wavesep::Error;

/// Result codes. Values 2 to 5 match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavesepStatus {
    Ok = 0,
    Internal = 1,
    Config = 2,
    Dataset = 3,
    Diverged = 4,
    Io = 5,
    NullPointer = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque handle to a loaded model.
pub struct WavesepModel {
    model: Model<f32>,
    names: Vec<CString>,
}

/// Signal to distortion, interference and artifact ratios in dB.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WavesepMetrics {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WavesepStatus {
    match e.exit_code() {
        2 => WavesepStatus::Config,
        3 => WavesepStatus::Dataset,
        4 => WavesepStatus::Diverged,
        5 => WavesepStatus::Io,
        _ => WavesepStatus::Internal,
    }
}

struct Failure(WavesepStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(WavesepStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WavesepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WavesepStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside wavesep".into());
            WavesepStatus::Panic
        }
    }
}

/// Message describing the last failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn wavesep_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint file and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wavesep_model_load(path: *const c_char, out: *mut *mut WavesepModel) -> WavesepStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(WavesepStatus::Config, "path is not valid UTF-8".into()))?;
        let model = Checkpoint::load(path)?.model()?;
        let names = model
            .config()
            .all_source_names()
            .into_iter()
            .map(|n| CString::new(n).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(WavesepModel { model, names }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`wavesep_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wavesep_model_free(model: *mut WavesepModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Sources emitted by [`wavesep_separate`], including the residual.
///
/// # Safety
/// `model` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn wavesep_model_num_sources(model: *const WavesepModel) -> usize {
    model.as_ref().map_or(0, |m| m.names.len())
}

/// Name of source `index`, or null when out of range. Owned by the handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn wavesep_model_source_name(model: *const WavesepModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.names.get(index))
        .map_or(ptr::null(), |n| n.as_ptr())
}

/// Receptive field in samples, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn wavesep_model_receptive_field(model: *const WavesepModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config().receptive_field())
}

/// Number of trainable parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn wavesep_model_parameter_count(model: *const WavesepModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.parameter_count())
}

/// Expected input sample rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn wavesep_model_sample_rate(model: *const WavesepModel) -> u32 {
    model.as_ref().map_or(0, |m| m.model.config().sample_rate)
}

/// Separates `len` mono samples at `sample_rate`. Writes source `j` to
/// `out[j * len .. (j + 1) * len]`, so `out_len` must be at least
/// `wavesep_model_num_sources(model) * len`.
///
/// # Safety
/// `mixture` must point to `len` floats and `out` to `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn wavesep_separate(
    model: *const WavesepModel,
    mixture: *const f32,
    len: usize,
    sample_rate: u32,
    out: *mut f32,
    out_len: usize,
) -> WavesepStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if mixture.is_null() {
            return Err(null("mixture"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let needed = m.names.len().checked_mul(len).unwrap_or(usize::MAX);
        if out_len < needed {
            return Err(Failure(
                WavesepStatus::BufferTooSmall,
                format!("output buffer holds {out_len} samples, {needed} needed"),
            ));
        }
        let mixture = slice::from_raw_parts(mixture, len);
        let estimates = m.model.separate_track(mixture, sample_rate)?;
        let all = complete_sources(mixture, &estimates, m.model.config().residual_name())?;
        let out = slice::from_raw_parts_mut(out, needed);
        for (chunk, wave) in out.chunks_exact_mut(len.max(1)).zip(all.waveforms()) {
            chunk.copy_from_slice(wave);
        }
        Ok(())
    })
}

/// BSS Eval of `estimate` against reference `target` out of `num_sources`
/// references stored back to back in `references` (each `len` samples),
/// allowing distortion filters of `filter_length` taps.
///
/// # Safety
/// `references` must point to `num_sources * len` doubles, `estimate` to
/// `len` doubles, and `out` to one [`WavesepMetrics`].
#[no_mangle]
pub unsafe extern "C" fn wavesep_bss_eval(
    references: *const f64,
    num_sources: usize,
    len: usize,
    estimate: *const f64,
    target: usize,
    filter_length: usize,
    out: *mut WavesepMetrics,
) -> WavesepStatus {
    guard(|| {
        if references.is_null() {
            return Err(null("references"));
        }
        if estimate.is_null() {
            return Err(null("estimate"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if num_sources == 0 || len == 0 || target >= num_sources {
            return Err(Failure(
                WavesepStatus::Config,
                format!("invalid sizes: {num_sources} sources of {len} samples, target {target}"),
            ));
        }
        let total = num_sources
            .checked_mul(len)
            .ok_or_else(|| Failure(WavesepStatus::Config, "reference size overflows".into()))?;
        let refs: Vec<Vec<f64>> = slice::from_raw_parts(references, total)
            .chunks_exact(len)
            .map(<[f64]>::to_vec)
            .collect();
        let set = ReferenceSet::new(refs, filter_length)?;
        let d = set.decompose(slice::from_raw_parts(estimate, len), target)?;
        let m = sdr_sir_sar(&d);
        *out = WavesepMetrics {
            sdr: m.sdr,
            sir: m.sir,
            sar: m.sar,
        };
        Ok(())
    })
}
