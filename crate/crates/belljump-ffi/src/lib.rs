//! C interface to the simulation engine.
//!
//! Conventions, uniform across every entry point:
//! - Handles are opaque; a `BjModel` owns the propagated state machinery for
//!   one model and is immutable after creation, so one handle may be shared
//!   across threads.
//! - Fallible calls return a [`BjStatus`] and write results through out
//!   pointers, which are left untouched on failure.
//! - Strings returned through `char **` are NUL-terminated, UTF-8, and owned
//!   by the caller; release them with [`bj_string_free`]. Strings returned as
//!   `const char *` are borrowed and must not be freed.
//! - On failure a message is stored per thread; fetch it with
//!   [`bj_last_error`] before the next call on the same thread.
//! - Panics never unwind across the boundary; they surface as
//!   [`BjStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use belljump::ensemble::{run_ensemble, EnsembleOptions};
use belljump::error::Error;
use belljump::io::parse_model;
use belljump::models::{self, ModelSpec};
use belljump::rates::{distribution, jump_rate, Rate, RateContext};
use belljump::sampler::{simulate_trajectory, SimulationParams};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BjStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A value argument was out of range (bad time window, label index,
    /// threshold, or unknown builtin name).
    InvalidArgument = 3,
    /// Model JSON failed to parse or described inconsistent operators.
    ModelRejected = 4,
    /// The engine failed mid-computation; see `bj_last_error`.
    EngineFailure = 5,
    /// An output buffer is shorter than the label count.
    BufferTooSmall = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

/// Opaque model handle: generator, measurement, initial state, and the node
/// threshold, spectrally decomposed once at creation.
pub struct BjModel {
    ctx: RateContext,
    name: CString,
    labels: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let stored = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained NUL").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_for(error: &Error) -> BjStatus {
    match error {
        Error::InvalidParameter { .. }
        | Error::UnknownLabel { .. }
        | Error::UnknownLabelName { .. }
        | Error::DimensionMismatch { .. }
        | Error::TimeBeforeStart { .. } => BjStatus::InvalidArgument,
        Error::Validation { .. } | Error::NonHermitian { .. } | Error::Json(_) => {
            BjStatus::ModelRejected
        }
        _ => BjStatus::EngineFailure,
    }
}

fn fail(error: Error) -> BjStatus {
    let status = status_for(&error);
    set_last_error(error.to_string());
    status
}

/// Run `f` with panics converted to `BjStatus::Panic`. Every exported
/// function body goes through here; the error slot is reset first so
/// `bj_last_error` always refers to the most recent call.
fn guarded(f: impl FnOnce() -> BjStatus) -> BjStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".to_string());
            set_last_error(format!("panic: {text}"));
            BjStatus::Panic
        }
    }
}

/// Reads a C string argument; `None` means the status has been set.
unsafe fn read_str<'a>(ptr: *const c_char, status: &mut BjStatus) -> Option<&'a str> {
    if ptr.is_null() {
        *status = BjStatus::NullPointer;
        set_last_error("string argument is NULL".to_string());
        return None;
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Some(s),
        Err(_) => {
            *status = BjStatus::InvalidUtf8;
            set_last_error("string argument is not valid UTF-8".to_string());
            None
        }
    }
}

fn install_model(spec: ModelSpec, node_epsilon: f64, out: *mut *mut BjModel) -> BjStatus {
    let ctx = match spec.context(node_epsilon) {
        Ok(ctx) => ctx,
        Err(e) => return fail(e),
    };
    let labels: Vec<CString> = ctx
        .labels()
        .iter()
        .map(|l| CString::new(l.as_str()).expect("labels never contain NUL"))
        .collect();
    let name = CString::new(spec.name.as_str()).expect("model names never contain NUL");
    let model = Box::new(BjModel { ctx, name, labels });
    unsafe { *out = Box::into_raw(model) };
    BjStatus::Ok
}

fn render_json(value: &impl serde::Serialize, out: *mut *mut c_char) -> BjStatus {
    let json = match serde_json::to_string(value) {
        Ok(j) => j,
        Err(e) => return fail(Error::Json(e)),
    };
    let owned = CString::new(json).expect("JSON never contains NUL");
    unsafe { *out = owned.into_raw() };
    BjStatus::Ok
}

/// Version of the library as a static string, `major.minor.patch`.
#[no_mangle]
pub extern "C" fn bj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failing call on this thread, or NULL if the
/// most recent call succeeded. The pointer is invalidated by the next call.
#[no_mangle]
pub extern "C" fn bj_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Create a handle for a bundled model by name. `node_epsilon` is the node
/// threshold relative to the squared norm of the initial state, in (0, 1);
/// 1e-12 is the conventional choice.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bj_model_builtin(
    name: *const c_char,
    node_epsilon: f64,
    out: *mut *mut BjModel,
) -> BjStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out pointer is NULL".to_string());
            return BjStatus::NullPointer;
        }
        let mut status = BjStatus::Ok;
        let Some(name) = read_str(name, &mut status) else {
            return status;
        };
        match models::by_name(name) {
            Ok(spec) => install_model(spec, node_epsilon, out),
            Err(e) => fail(e),
        }
    })
}

/// Create a handle from model JSON (the `model export` format of the CLI).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bj_model_from_json(
    json: *const c_char,
    node_epsilon: f64,
    out: *mut *mut BjModel,
) -> BjStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out pointer is NULL".to_string());
            return BjStatus::NullPointer;
        }
        let mut status = BjStatus::Ok;
        let Some(text) = read_str(json, &mut status) else {
            return status;
        };
        let spec = match parse_model(text).and_then(|raw| ModelSpec::from_raw(&raw)) {
            Ok(spec) => spec,
            Err(e) => return fail(e),
        };
        install_model(spec, node_epsilon, out)
    })
}

/// Release a model handle. NULL is ignored.
///
/// # Safety
/// `model` must have come from a model constructor and not be used afterward.
#[no_mangle]
pub unsafe extern "C" fn bj_model_free(model: *mut BjModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension of the underlying space; 0 for NULL.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bj_model_dim(model: *const BjModel) -> usize {
    model.as_ref().map_or(0, |m| m.ctx.dim())
}

/// Number of configuration labels; 0 for NULL.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bj_model_label_count(model: *const BjModel) -> usize {
    model.as_ref().map_or(0, |m| m.ctx.len())
}

/// Name of the model; borrowed from the handle. NULL for NULL.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bj_model_name(model: *const BjModel) -> *const c_char {
    model.as_ref().map_or(std::ptr::null(), |m| m.name.as_ptr())
}

/// Label text for one configuration index; borrowed from the handle. NULL
/// when the handle is NULL or the index is out of range.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bj_model_label_name(model: *const BjModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.labels.get(index))
        .map_or(std::ptr::null(), |l| l.as_ptr())
}

/// Write the weight of every label at time `t` into `weights`, which must
/// hold at least `bj_model_label_count` entries. The weights are nonnegative
/// and sum to the squared norm of the initial state.
///
/// # Safety
/// `model` must be a live handle; `weights` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bj_distribution(
    model: *const BjModel,
    t: f64,
    weights: *mut f64,
    len: usize,
) -> BjStatus {
    guarded(|| {
        let Some(m) = model.as_ref() else {
            set_last_error("model handle is NULL".to_string());
            return BjStatus::NullPointer;
        };
        if weights.is_null() {
            set_last_error("weights pointer is NULL".to_string());
            return BjStatus::NullPointer;
        }
        if len < m.ctx.len() {
            set_last_error(format!(
                "weights buffer holds {len} entries, need {}",
                m.ctx.len()
            ));
            return BjStatus::BufferTooSmall;
        }
        match distribution(&m.ctx, t) {
            Ok(snapshot) => {
                std::ptr::copy_nonoverlapping(snapshot.weights.as_ptr(), weights, m.ctx.len());
                BjStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Jump rate from label `from` to label `to` at time `t`. When `from` is on
/// the node set at `t` the rate is reported as positive infinity.
///
/// # Safety
/// `model` must be a live handle; `rate` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bj_jump_rate(
    model: *const BjModel,
    t: f64,
    from: usize,
    to: usize,
    rate: *mut f64,
) -> BjStatus {
    guarded(|| {
        let Some(m) = model.as_ref() else {
            set_last_error("model handle is NULL".to_string());
            return BjStatus::NullPointer;
        };
        if rate.is_null() {
            set_last_error("rate pointer is NULL".to_string());
            return BjStatus::NullPointer;
        }
        match jump_rate(&m.ctx, t, from, to) {
            Ok(Rate::Finite(v)) => {
                *rate = v;
                BjStatus::Ok
            }
            Ok(Rate::Infinite) => {
                *rate = f64::INFINITY;
                BjStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Sample one trajectory and return it as a JSON document (index, status,
/// events as `[time, label]` pairs, final time). The same arguments always
/// produce the same bytes.
///
/// # Safety
/// `model` must be a live handle; `json_out` must be a valid pointer. Free
/// the result with `bj_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bj_simulate_trajectory(
    model: *const BjModel,
    t0: f64,
    t_end: f64,
    seed: u64,
    index: u64,
    max_jumps: usize,
    json_out: *mut *mut c_char,
) -> BjStatus {
    guarded(|| {
        let Some(m) = model.as_ref() else {
            set_last_error("model handle is NULL".to_string());
            return BjStatus::NullPointer;
        };
        if json_out.is_null() {
            set_last_error("json_out pointer is NULL".to_string());
            return BjStatus::NullPointer;
        }
        let mut params = SimulationParams::new(t0, t_end, seed);
        params.max_jumps = max_jumps;
        if let Err(e) = params.validate() {
            return fail(e);
        }
        match simulate_trajectory(&m.ctx, &params, index) {
            Ok(trajectory) => render_json(&trajectory.to_record(m.ctx.labels()), json_out),
            Err(e) => fail(e),
        }
    })
}

/// Run an ensemble of `n` trajectories and return the aggregate report as a
/// JSON document: empirical occupancy at each checkpoint against the exact
/// weights, total-variation gaps, jump-count statistics, and explosion and
/// absorption counters. `checkpoints` may be NULL when `n_checkpoints` is 0.
/// The same arguments always produce the same bytes.
///
/// # Safety
/// `model` must be a live handle; `checkpoints` must point to `n_checkpoints`
/// doubles when nonzero; `json_out` must be a valid pointer. Free the result
/// with `bj_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bj_run_ensemble(
    model: *const BjModel,
    t0: f64,
    t_end: f64,
    seed: u64,
    n: u64,
    checkpoints: *const f64,
    n_checkpoints: usize,
    max_jumps: usize,
    json_out: *mut *mut c_char,
) -> BjStatus {
    guarded(|| {
        let Some(m) = model.as_ref() else {
            set_last_error("model handle is NULL".to_string());
            return BjStatus::NullPointer;
        };
        if json_out.is_null() {
            set_last_error("json_out pointer is NULL".to_string());
            return BjStatus::NullPointer;
        }
        if checkpoints.is_null() && n_checkpoints > 0 {
            set_last_error("checkpoints pointer is NULL with nonzero count".to_string());
            return BjStatus::NullPointer;
        }
        let checkpoints = if n_checkpoints == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(checkpoints, n_checkpoints).to_vec()
        };
        let mut params = SimulationParams::new(t0, t_end, seed);
        params.max_jumps = max_jumps;
        let opts = EnsembleOptions {
            n,
            checkpoints,
            keep_trajectories: false,
        };
        match run_ensemble(&m.ctx, &params, &opts) {
            Ok(report) => render_json(&report, json_out),
            Err(e) => fail(e),
        }
    })
}

/// Release a string returned through a `char **` out parameter. NULL is
/// ignored.
///
/// # Safety
/// `s` must have come from this library and not be used afterward.
#[no_mangle]
pub unsafe extern "C" fn bj_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
