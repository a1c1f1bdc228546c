//! C interface to the seaobs simulator.
//!
//! Scenarios and completed runs are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns a
//! [`SeaobsStatus`]; the message of the last failure on the calling thread is
//! available through [`seaobs_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use seaobs::sim::{run, RunOutput, ScenarioConfig, Seeds};
use seaobs::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeaobsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// A scenario configuration.
pub struct SeaobsScenario {
    config: ScenarioConfig,
}

/// The trace and metrics of a finished run.
pub struct SeaobsRun {
    config: ScenarioConfig,
    output: RunOutput,
}

/// One trace row.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SeaobsRecord {
    pub t: f64,
    pub nu: [f64; 3],
    pub nu_measured: [f64; 3],
    pub nu_filtered: [f64; 3],
    pub eta: [f64; 3],
    pub tau_d: [f64; 3],
    pub tau_hat: [f64; 3],
    pub z: [f64; 3],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SeaobsStatus {
    match e {
        Error::Io(_) => SeaobsStatus::Io,
        e if e.exit_code() == 2 => SeaobsStatus::Numerical,
        _ => SeaobsStatus::Config,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SeaobsStatus, String)>) -> SeaobsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SeaobsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SeaobsStatus::Panic
        }
    }
}

fn lift(e: Error) -> (SeaobsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SeaobsStatus, String) {
    (SeaobsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SeaobsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SeaobsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn boxed<T>(value: T, out: *mut *mut T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Creates a scenario with the reference parameters.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn seaobs_scenario_default(out: *mut *mut SeaobsScenario) -> SeaobsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(
            SeaobsScenario {
                config: ScenarioConfig::default(),
            },
            out,
        );
        Ok(())
    })
}

/// Parses a scenario from a JSON document; missing fields take reference values.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn seaobs_scenario_from_json(
    json: *const c_char,
    out: *mut *mut SeaobsScenario,
) -> SeaobsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let config = ScenarioConfig::from_json(text).map_err(lift)?;
        boxed(SeaobsScenario { config }, out);
        Ok(())
    })
}

/// Applies a `dotted.path=value` override.
///
/// # Safety
/// `scenario` must be a live handle and `spec` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn seaobs_scenario_override(
    scenario: *mut SeaobsScenario,
    spec: *const c_char,
) -> SeaobsStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        let spec = str_arg(spec, "spec")?;
        s.config = s.config.with_override(spec).map_err(lift)?;
        Ok(())
    })
}

/// Derives all random streams from one base seed.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn seaobs_scenario_set_seed(scenario: *mut SeaobsScenario, seed: u64) -> SeaobsStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.config.seeds = Seeds::from_base(seed);
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn seaobs_scenario_free(scenario: *mut SeaobsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates the scenario.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn seaobs_run(
    scenario: *const SeaobsScenario,
    out: *mut *mut SeaobsRun,
) -> SeaobsStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let output = run(&s.config).map_err(lift)?;
        boxed(
            SeaobsRun {
                config: s.config.clone(),
                output,
            },
            out,
        );
        Ok(())
    })
}

/// Number of trace records.
///
/// # Safety
/// `run` must be a live handle and `len` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn seaobs_run_len(run: *const SeaobsRun, len: *mut usize) -> SeaobsStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        *len = r.output.trace.len();
        Ok(())
    })
}

/// Copies record `index` into `record`.
///
/// # Safety
/// `run` must be a live handle and `record` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn seaobs_run_record(
    run: *const SeaobsRun,
    index: usize,
    record: *mut SeaobsRecord,
) -> SeaobsStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let record = record.as_mut().ok_or_else(|| null("record"))?;
        let len = r.output.trace.len();
        let src = r.output.trace.get(index).ok_or_else(|| {
            (
                SeaobsStatus::OutOfRange,
                format!("index {index} beyond {len} records"),
            )
        })?;
        *record = SeaobsRecord {
            t: src.t,
            nu: src.nu.to_array(),
            nu_measured: src.nu_measured.to_array(),
            nu_filtered: src.nu_filtered.to_array(),
            eta: src.eta.to_array(),
            tau_d: src.tau_d.to_array(),
            tau_hat: src.tau_hat.to_array(),
            z: src.z,
        };
        Ok(())
    })
}

/// Post-transient mean absolute relative error per channel. Channels whose
/// disturbance is identically zero are reported as NaN.
///
/// # Safety
/// `run` must be a live handle and `out` must point to three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn seaobs_run_mean_relative_error(
    run: *const SeaobsRun,
    out: *mut f64,
) -> SeaobsStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let values = r
            .output
            .metrics
            .mean_abs_relative_error
            .map(|v| v.unwrap_or(f64::NAN));
        ptr::copy_nonoverlapping(values.as_ptr(), out, 3);
        Ok(())
    })
}

/// Writes `trace.csv`, `metrics.json` and `manifest.json` into `dir`.
///
/// # Safety
/// `run` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn seaobs_run_write(run: *const SeaobsRun, dir: *const c_char) -> SeaobsStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let dir = str_arg(dir, "dir")?;
        seaobs::io::emit(Path::new(dir), &r.config, &r.output, 0.0).map_err(lift)?;
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn seaobs_run_free(run: *mut SeaobsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn seaobs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn seaobs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
