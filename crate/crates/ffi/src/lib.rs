//! C ABI over the simulation harness and the gain computation.
//!
//! Objects cross the boundary as opaque heap handles that the caller frees
//! with the matching `*_free` function. Every fallible call returns an
//! [`IclStatus`]; the message of the most recent failure on the calling
//! thread is available from [`icl_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use iclcam::geometry::SymPosDef;
use iclcam::harness::{self, RunLog, ScenarioConfig, SweepResult};
use iclcam::planner::build_gains;
use iclcam::Error;
use nalgebra::{Matrix3, Vector3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IclStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    NotSpd = 5,
    Degenerate = 6,
    SimulationAbort = 7,
    NotExcited = 8,
    Io = 9,
    OutOfRange = 10,
    Panic = 11,
}

/// Opaque scenario configuration.
pub struct IclConfig(ScenarioConfig);

/// Opaque run log.
pub struct IclRunLog(RunLog);

/// Opaque sweep table.
pub struct IclSweep(SweepResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> IclStatus {
    match e {
        Error::Parse { .. } => IclStatus::Parse,
        Error::Validation { .. } => IclStatus::Validation,
        Error::NotSpd(_) => IclStatus::NotSpd,
        Error::DegenerateGeometry(_) => IclStatus::Degenerate,
        Error::DegenerateBearing { .. } | Error::FeatureLost { .. } | Error::InsufficientBuffer { .. } => {
            IclStatus::SimulationAbort
        }
        Error::NotYetExcited => IclStatus::NotExcited,
        Error::Io { .. } => IclStatus::Io,
    }
}

fn fail(e: &Error) -> IclStatus {
    set_error(e.to_string());
    status_of(e)
}

fn null_arg(name: &str) -> IclStatus {
    set_error(format!("`{name}` is null"));
    IclStatus::NullArgument
}

/// Runs `f`, converting a panic into [`IclStatus::Panic`].
fn guard(f: impl FnOnce() -> IclStatus) -> IclStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic");
        IclStatus::Panic
    })
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, IclStatus> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        IclStatus::InvalidUtf8
    })
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn icl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default scenario. Never NULL.
#[no_mangle]
pub extern "C" fn icl_config_default() -> *mut IclConfig {
    Box::into_raw(Box::new(IclConfig(ScenarioConfig::default_scenario())))
}

/// Parses and validates a JSON scenario.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icl_config_from_json(json: *const c_char, out: *mut *mut IclConfig) -> IclStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::from_json_str(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(IclConfig(cfg)));
                IclStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Loads a JSON scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icl_config_load(path: *const c_char, out: *mut *mut IclConfig) -> IclStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match harness::load_config(path) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(IclConfig(cfg)));
                IclStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Serializes the config as JSON. Free the result with [`icl_string_free`].
///
/// # Safety
/// `cfg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_config_to_json(cfg: *const IclConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => CString::new(c.0.to_json_string()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// Sets the orthogonality gain; rejected (config unchanged) if negative.
///
/// # Safety
/// `cfg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_config_set_gamma(cfg: *mut IclConfig, gamma: f64) -> IclStatus {
    let Some(c) = cfg.as_mut() else {
        return null_arg("cfg");
    };
    let mut next = c.0.clone();
    next.planner.gamma_c = gamma;
    match next.validate() {
        Ok(()) => {
            c.0 = next;
            IclStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Sets the noise seed.
///
/// # Safety
/// `cfg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_config_set_seed(cfg: *mut IclConfig, seed: u64) -> IclStatus {
    let Some(c) = cfg.as_mut() else {
        return null_arg("cfg");
    };
    c.0.noise.seed = seed;
    IclStatus::Ok
}

/// Sets the pixel noise standard deviation; rejected if negative.
///
/// # Safety
/// `cfg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_config_set_pixel_sigma(cfg: *mut IclConfig, sigma: f64) -> IclStatus {
    let Some(c) = cfg.as_mut() else {
        return null_arg("cfg");
    };
    let mut next = c.0.clone();
    next.noise.pixel_sigma = sigma;
    match next.validate() {
        Ok(()) => {
            c.0 = next;
            IclStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `cfg` must be a handle from this library, or NULL, and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icl_config_free(cfg: *mut IclConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the closed loop. On [`IclStatus::SimulationAbort`] `*out` still
/// receives the partial log when one exists (otherwise NULL).
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icl_run(cfg: *const IclConfig, out: *mut *mut IclRunLog) -> IclStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let Some(c) = cfg.as_ref() else {
            return null_arg("cfg");
        };
        match harness::run(&c.0) {
            Ok(log) => {
                *out = Box::into_raw(Box::new(IclRunLog(log)));
                IclStatus::Ok
            }
            Err(f) => {
                if let Some(log) = f.partial {
                    *out = Box::into_raw(Box::new(IclRunLog(log)));
                }
                fail(&f.error)
            }
        }
    })
}

/// # Safety
/// `log` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_len(log: *const IclRunLog) -> usize {
    log.as_ref().map_or(0, |l| l.0.rows.len())
}

/// # Safety
/// `log` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_feature_count(log: *const IclRunLog) -> usize {
    log.as_ref().map_or(0, |l| l.0.n_features)
}

/// True if the run stopped before its horizon.
///
/// # Safety
/// `log` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_aborted(log: *const IclRunLog) -> bool {
    log.as_ref().is_some_and(|l| l.0.aborted.is_some())
}

/// Norm of the final goal position; NaN for an empty log or NULL.
///
/// # Safety
/// `log` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_final_position_error(log: *const IclRunLog) -> f64 {
    log.as_ref().map_or(f64::NAN, |l| l.0.final_position_error())
}

/// # Safety
/// `log` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_total_cost(log: *const IclRunLog) -> f64 {
    log.as_ref().map_or(f64::NAN, |l| l.0.total_cost())
}

/// # Safety
/// `log` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_average_condition(log: *const IclRunLog) -> f64 {
    log.as_ref().map_or(f64::NAN, |l| l.0.average_condition())
}

/// Time at which every feature's history stack was excited.
///
/// # Safety
/// `log` must be a live handle and `tau` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_tau(log: *const IclRunLog, tau: *mut f64) -> IclStatus {
    let Some(l) = log.as_ref() else {
        return null_arg("log");
    };
    if tau.is_null() {
        return null_arg("tau");
    }
    match l.0.tau_all() {
        Some(t) => {
            *tau = t;
            IclStatus::Ok
        }
        None => fail(&Error::NotYetExcited),
    }
}

/// Time and true goal position (camera frame) of row `index`.
///
/// # Safety
/// `log` must be a live handle, `t` a valid pointer and `p_c_g` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_row(log: *const IclRunLog, index: usize, t: *mut f64, p_c_g: *mut f64) -> IclStatus {
    let Some(l) = log.as_ref() else {
        return null_arg("log");
    };
    if t.is_null() || p_c_g.is_null() {
        return null_arg("t/p_c_g");
    }
    let Some(r) = l.0.rows.get(index) else {
        set_error(format!("row {index} out of range ({} rows)", l.0.rows.len()));
        return IclStatus::OutOfRange;
    };
    *t = r.t;
    ptr::copy_nonoverlapping(r.p_c_g.as_ptr(), p_c_g, 3);
    IclStatus::Ok
}

/// Batch estimate of the goal-to-feature distance for `feature`.
///
/// # Safety
/// `log` must be a live handle and `d` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_batch_estimate(log: *const IclRunLog, feature: usize, d: *mut f64) -> IclStatus {
    let Some(l) = log.as_ref() else {
        return null_arg("log");
    };
    if d.is_null() {
        return null_arg("d");
    }
    match l.0.batch_d_g_s.get(feature) {
        None => {
            set_error(format!("feature {feature} out of range"));
            IclStatus::OutOfRange
        }
        Some(None) => fail(&Error::NotYetExcited),
        Some(Some(v)) => {
            *d = *v;
            IclStatus::Ok
        }
    }
}

/// Writes the run table, summary and figures into directory `dir`.
///
/// # Safety
/// `log` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_write(log: *const IclRunLog, dir: *const c_char) -> IclStatus {
    guard(|| {
        let Some(l) = log.as_ref() else {
            return null_arg("log");
        };
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match harness::emit_run(&l.0, dir) {
            Ok(_) => IclStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `log` must be a handle from this library, or NULL, and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icl_run_log_free(log: *mut IclRunLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Runs the scenario once per gain in `gammas[0..len]`. Individual run
/// failures are recorded in the table rather than returned.
///
/// # Safety
/// `cfg` must be a live handle, `gammas` point to `len` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn icl_sweep(cfg: *const IclConfig, gammas: *const f64, len: usize, out: *mut *mut IclSweep) -> IclStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let Some(c) = cfg.as_ref() else {
            return null_arg("cfg");
        };
        if gammas.is_null() && len > 0 {
            return null_arg("gammas");
        }
        let gammas = if len == 0 { &[][..] } else { std::slice::from_raw_parts(gammas, len) };
        match harness::sweep_gamma(&c.0, gammas) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(IclSweep(s)));
                IclStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `sweep` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_sweep_len(sweep: *const IclSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.0.rows.len())
}

/// Reads row `index`. Returns [`IclStatus::SimulationAbort`] (with the
/// gamma still written) if that run failed.
///
/// # Safety
/// `sweep` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn icl_sweep_row(
    sweep: *const IclSweep,
    index: usize,
    gamma: *mut f64,
    avg_cond: *mut f64,
    final_pos_err: *mut f64,
    total_cost: *mut f64,
) -> IclStatus {
    let Some(s) = sweep.as_ref() else {
        return null_arg("sweep");
    };
    if gamma.is_null() || avg_cond.is_null() || final_pos_err.is_null() || total_cost.is_null() {
        return null_arg("row outputs");
    }
    let Some(r) = s.0.rows.get(index) else {
        set_error(format!("row {index} out of range ({} rows)", s.0.rows.len()));
        return IclStatus::OutOfRange;
    };
    *gamma = r.gamma;
    match &r.outcome {
        Ok(m) => {
            *avg_cond = m.avg_cond;
            *final_pos_err = m.final_pos_err;
            *total_cost = m.total_cost;
            IclStatus::Ok
        }
        Err(msg) => {
            *avg_cond = f64::NAN;
            *final_pos_err = f64::NAN;
            *total_cost = f64::NAN;
            set_error(msg.clone());
            IclStatus::SimulationAbort
        }
    }
}

/// Writes the sweep table and its figure into directory `dir`.
///
/// # Safety
/// `sweep` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn icl_sweep_write(sweep: *const IclSweep, dir: *const c_char) -> IclStatus {
    guard(|| {
        let Some(s) = sweep.as_ref() else {
            return null_arg("sweep");
        };
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match harness::emit_sweep(&s.0, dir) {
            Ok(_) => IclStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `sweep` must be a handle from this library, or NULL, and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icl_sweep_free(sweep: *mut IclSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

/// Planner gains for weights `q`, `r` (row-major 3×3), gain `gamma` and
/// unit normal `n`. Writes the row-major Riccati solution to `s_out` and
/// the feedback matrix to `k_out`.
///
/// # Safety
/// `q`, `r`, `s_out`, `k_out` must point to 9 doubles and `n` to 3.
#[no_mangle]
pub unsafe extern "C" fn icl_build_gains(
    q: *const f64,
    r: *const f64,
    gamma: f64,
    n: *const f64,
    s_out: *mut f64,
    k_out: *mut f64,
) -> IclStatus {
    guard(|| {
        if q.is_null() || r.is_null() || n.is_null() || s_out.is_null() || k_out.is_null() {
            return null_arg("matrix argument");
        }
        let read = |p: *const f64| Matrix3::from_row_slice(std::slice::from_raw_parts(p, 9));
        let spd = |m| SymPosDef::new(m);
        let result = spd(read(q))
            .and_then(|q| Ok((q, spd(read(r))?)))
            .and_then(|(q, r)| build_gains(q, r, gamma, Vector3::from_row_slice(std::slice::from_raw_parts(n, 3))));
        match result {
            Ok(g) => {
                let s = g.s_c.matrix().transpose();
                let k = g.k_s.transpose();
                ptr::copy_nonoverlapping(s.as_ptr(), s_out, 9);
                ptr::copy_nonoverlapping(k.as_ptr(), k_out, 9);
                IclStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `s` must come from this library (e.g. [`icl_config_to_json`]) or be NULL.
#[no_mangle]
pub unsafe extern "C" fn icl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
