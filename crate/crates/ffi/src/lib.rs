//! C ABI over `ioncav`.
//!
//! Every fallible function returns an [`IoncavStatus`]; on failure the
//! message is available from [`ioncav_last_error`] on the same thread.
//! Strings handed out by the library are freed with [`ioncav_string_free`],
//! configs with [`ioncav_config_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ioncav::budget;
use ioncav::experiments::{self, ExperimentConfig, ExperimentKind};
use ioncav::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoncavStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Validation = 4,
    Numerical = 5,
    Comparison = 6,
    Io = 7,
    Panic = 8,
}

impl From<&Error> for IoncavStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) | Error::Inconsistent(_) => IoncavStatus::Validation,
            Error::Integration { .. } | Error::NoConvergence(_) | Error::Fit(_) | Error::InsufficientData(_) => {
                IoncavStatus::Numerical
            }
            Error::Comparison(_) => IoncavStatus::Comparison,
            Error::Io(_) => IoncavStatus::Io,
            _ => IoncavStatus::Config,
        }
    }
}

/// Opaque experiment configuration.
pub struct IoncavConfig {
    inner: ExperimentConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: IoncavStatus, msg: &str) -> IoncavStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), (IoncavStatus, String)>) -> IoncavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IoncavStatus::Ok,
        Ok(Err((s, msg))) => fail(s, &msg),
        Err(_) => fail(IoncavStatus::Panic, "internal panic"),
    }
}

fn core_err(e: Error) -> (IoncavStatus, String) {
    ((&e).into(), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (IoncavStatus, String)> {
    if p.is_null() {
        return Err((IoncavStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IoncavStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ioncav_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ioncav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ioncav_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cooperativity `g0² / (2 κ γ)`; rates in rad/s.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn ioncav_cooperativity(g0: f64, kappa: f64, gamma: f64, out: *mut f64) -> IoncavStatus {
    guard(|| {
        if out.is_null() {
            return Err((IoncavStatus::NullPointer, "out is null".into()));
        }
        *out = budget::cooperativity(g0, kappa, gamma).map_err(core_err)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn ioncav_emission_probability(c0: f64) -> f64 {
    budget::emission_probability(c0)
}

/// Fraction of cavity decay leaving through the high-transmission mirror;
/// inputs in ppm.
#[no_mangle]
pub extern "C" fn ioncav_mirror_outcoupling(t_ht: f64, t_lt: f64, loss: f64) -> f64 {
    budget::mirror_outcoupling(&budget::MirrorBudget {
        t_ht,
        t_lt,
        loss,
        ..Default::default()
    })
}

#[no_mangle]
pub extern "C" fn ioncav_g_bar_from_observed(g_obs: f64) -> f64 {
    budget::g_bar_from_observed(g_obs)
}

/// Cavity field decay rate (rad/s) from finesse and length (m).
#[no_mangle]
pub extern "C" fn ioncav_kappa_from_geometry(finesse: f64, length: f64) -> f64 {
    budget::kappa_from_geometry(finesse, length)
}

#[no_mangle]
pub extern "C" fn ioncav_absorption_chain(
    c0: f64,
    branching: f64,
    clebsch: f64,
    prep: f64,
    incoupling: f64,
    micromotion_reduction: f64,
) -> f64 {
    let f = budget::AbsorptionFactors {
        branching,
        clebsch,
        prep,
        incoupling,
    };
    budget::absorption_chain(c0, &f, micromotion_reduction)
}

/// Parse a JSON config document.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ioncav_config_from_json(json: *const c_char, out: *mut *mut IoncavConfig) -> IoncavStatus {
    guard(|| {
        if out.is_null() {
            return Err((IoncavStatus::NullPointer, "out is null".into()));
        }
        let text = str_arg(json, "json")?;
        let inner = ExperimentConfig::from_json(text).map_err(core_err)?;
        *out = Box::into_raw(Box::new(IoncavConfig { inner }));
        Ok(())
    })
}

/// Config with every block at its default for the named experiment
/// (`"emit_histogram"`, `"g2"`, ...).
///
/// # Safety
/// `experiment` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ioncav_config_default(
    experiment: *const c_char,
    seed: u64,
    out: *mut *mut IoncavConfig,
) -> IoncavStatus {
    guard(|| {
        if out.is_null() {
            return Err((IoncavStatus::NullPointer, "out is null".into()));
        }
        let kind: ExperimentKind = str_arg(experiment, "experiment")?.parse().map_err(core_err)?;
        *out = Box::into_raw(Box::new(IoncavConfig {
            inner: ExperimentConfig::new(kind, seed),
        }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library that was not freed.
#[no_mangle]
pub unsafe extern "C" fn ioncav_config_free(cfg: *mut IoncavConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ioncav_config_set_seed(cfg: *mut IoncavConfig, seed: u64) -> IoncavStatus {
    match cfg.as_mut() {
        Some(c) => {
            c.inner.base_seed = seed;
            IoncavStatus::Ok
        }
        None => fail(IoncavStatus::NullPointer, "cfg is null"),
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ioncav_config_set_trajectories(cfg: *mut IoncavConfig, n: usize) -> IoncavStatus {
    match cfg.as_mut() {
        Some(c) => {
            c.inner.n_trajectories = n;
            IoncavStatus::Ok
        }
        None => fail(IoncavStatus::NullPointer, "cfg is null"),
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ioncav_config_validate(cfg: *const IoncavConfig) -> IoncavStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or((IoncavStatus::NullPointer, "cfg is null".to_string()))?;
        c.inner.validate().map_err(core_err)
    })
}

/// Run the experiment, writing artifacts into `out_dir`. On success
/// `summary_json` receives the run summary (free with
/// [`ioncav_string_free`]); it may be null if not wanted.
///
/// # Safety
/// `cfg` must be a live handle, `out_dir` a nul-terminated string and
/// `summary_json` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ioncav_run(
    cfg: *const IoncavConfig,
    out_dir: *const c_char,
    summary_json: *mut *mut c_char,
) -> IoncavStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or((IoncavStatus::NullPointer, "cfg is null".to_string()))?;
        let dir = str_arg(out_dir, "out_dir")?;
        let result = experiments::run(&c.inner, Path::new(dir)).map_err(core_err)?;
        if !summary_json.is_null() {
            let text = serde_json::to_string(&result.summary)
                .map_err(|e| (IoncavStatus::Config, e.to_string()))?;
            *summary_json = CString::new(text).expect("json has no nul").into_raw();
        }
        Ok(())
    })
}
