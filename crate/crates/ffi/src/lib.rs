//! C ABI for the `mrmc` optimiser.
//!
//! Configurations and results are opaque handles created and destroyed by
//! this library. Every fallible call returns an [`MrmcStatus`]; on failure
//! a description is available from [`mrmc_last_error`] until the next call
//! on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mrmc::experiments::qos_thresholds;
use mrmc::linalg::{c64, CVec};
use mrmc::optimizer::{bcd_ap_mrmc, RunOptions, RunOutcome};
use mrmc::par::{par_project, ParFeasibleSet};
use mrmc::{oracles, Error, Scenario, SystemConfig};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
    BufferTooSmall = 7,
}

/// Opaque scenario configuration.
pub struct MrmcConfig {
    inner: SystemConfig,
}

/// Opaque result of one optimisation run.
pub struct MrmcResult {
    outcome: RunOutcome,
    i_fd: f64,
    k: usize,
    m_r: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> MrmcStatus {
    match err {
        Error::Config(_) | Error::Parse(_) => MrmcStatus::Config,
        Error::Shape(_) | Error::Argument(_) => MrmcStatus::InvalidArgument,
        Error::Numerical(_) => MrmcStatus::Numerical,
        Error::Io(_) => MrmcStatus::Io,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (MrmcStatus, String)>) -> MrmcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MrmcStatus::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            MrmcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (MrmcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MrmcStatus, String) {
    (MrmcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MrmcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MrmcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn mrmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mrmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// New configuration holding the reference defaults. Free with
/// [`mrmc_config_free`].
#[no_mangle]
pub extern "C" fn mrmc_config_default() -> *mut MrmcConfig {
    Box::into_raw(Box::new(MrmcConfig { inner: SystemConfig::defaults() }))
}

/// Parse a configuration from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrmc_config_from_toml(toml: *const c_char, out: *mut *mut MrmcConfig) -> MrmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let cfg = SystemConfig::from_toml_str(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MrmcConfig { inner: cfg }));
        Ok(())
    })
}

/// Set one key using config-file syntax, e.g. `("sigma2_si", "-30 dB")`.
/// The configuration is unchanged on failure.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn mrmc_config_set(cfg: *mut MrmcConfig, key: *const c_char, value: *const c_char) -> MrmcStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let pair = (str_arg(key, "key")?.to_string(), str_arg(value, "value")?.to_string());
        let mut next = cfg.inner.clone();
        next.apply_overrides(&[pair]).map_err(lib_err)?;
        cfg.inner = next;
        Ok(())
    })
}

/// QoS thresholds (bits/s/Hz) implied by the configuration's SNRs.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mrmc_qos_thresholds(cfg: *const MrmcConfig, r_ul: *mut f64, r_dl: *mut f64) -> MrmcStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if r_ul.is_null() || r_dl.is_null() {
            return Err(null("output"));
        }
        let (u, d) = qos_thresholds(&cfg.inner);
        *r_ul = u;
        *r_dl = d;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mrmc_config_free(cfg: *mut MrmcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Draw channels from `seed` and run the joint design.
///
/// # Safety
/// `cfg` must come from this library and `out` must be valid. Free the
/// result with [`mrmc_result_free`].
#[no_mangle]
pub unsafe extern "C" fn mrmc_run(cfg: *const MrmcConfig, seed: u64, out: *mut *mut MrmcResult) -> MrmcStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = &cfg.inner;
        let sc = Scenario::generate(c, seed).map_err(lib_err)?;
        let mut opts = RunOptions::from_config(c);
        opts.seed = seed;
        let outcome = bcd_ap_mrmc(&sc, &opts).map_err(lib_err)?;
        let i_fd = outcome.rates.i_fd(c);
        *out = Box::into_raw(Box::new(MrmcResult { outcome, i_fd, k: c.k, m_r: c.m_r }));
        Ok(())
    })
}

/// Final I_CWSM, or NaN for a NULL handle.
///
/// # Safety
/// `res` must come from [`mrmc_run`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mrmc_result_i_cwsm(res: *const MrmcResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.outcome.i_cwsm)
}

/// Final I_FD, or NaN for a NULL handle.
///
/// # Safety
/// `res` must come from [`mrmc_run`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mrmc_result_i_fd(res: *const MrmcResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.i_fd)
}

/// Outer iterations executed, or 0 for a NULL handle.
///
/// # Safety
/// `res` must come from [`mrmc_run`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mrmc_result_iterations(res: *const MrmcResult) -> usize {
    res.as_ref().map_or(0, |r| r.outcome.report.outer_iterations)
}

/// Copy the per-iteration I_CWSM trace into `buf`. `len` is the buffer
/// capacity on input and the trace length on output; a short buffer yields
/// `BufferTooSmall` with `len` set to the required size.
///
/// # Safety
/// `buf` must hold `*len` doubles (it may be NULL when `*len` is 0).
#[no_mangle]
pub unsafe extern "C" fn mrmc_result_trace(res: *const MrmcResult, buf: *mut f64, len: *mut usize) -> MrmcStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let trace = r.outcome.report.cwsm_trace();
        let cap = *len;
        *len = trace.len();
        if cap < trace.len() {
            return Err((MrmcStatus::BufferTooSmall, format!("need {} entries", trace.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(trace.as_ptr(), buf, trace.len());
        Ok(())
    })
}

/// Copy the `K x M_r` radar code matrix, column-major, as separate real
/// and imaginary arrays of `len = K * M_r` entries.
///
/// # Safety
/// `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mrmc_result_code(res: *const MrmcResult, re: *mut f64, im: *mut f64, len: usize) -> MrmcStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        let n = r.k * r.m_r;
        if len < n {
            return Err((MrmcStatus::BufferTooSmall, format!("need {n} entries")));
        }
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        for (idx, z) in r.outcome.design.a.iter().enumerate() {
            *re.add(idx) = z.re;
            *im.add(idx) = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `res` must come from [`mrmc_run`] (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mrmc_result_free(res: *mut MrmcResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Nearest vector with energy `p_r` and peak-to-average ratio at most
/// `gamma` (linear). Input and output arrays may alias.
///
/// # Safety
/// All four arrays must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mrmc_par_project(
    re: *const f64,
    im: *const f64,
    len: usize,
    p_r: f64,
    gamma: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> MrmcStatus {
    guard(|| {
        if re.is_null() || im.is_null() || out_re.is_null() || out_im.is_null() {
            return Err(null("array"));
        }
        let set = ParFeasibleSet::new(p_r, gamma, len).map_err(lib_err)?;
        let a = CVec::from_fn(len, |k, _| c64(*re.add(k), *im.add(k)));
        let b = par_project(&a, &set).map_err(lib_err)?;
        for (k, z) in b.iter().enumerate() {
            *out_re.add(k) = z.re;
            *out_im.add(k) = z.im;
        }
        Ok(())
    })
}

/// Run the built-in oracle suite and report how many checks passed and
/// failed. Returns `Ok` even when checks fail; inspect `failed`.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mrmc_verify(seed: u64, passed: *mut usize, failed: *mut usize) -> MrmcStatus {
    guard(|| {
        if passed.is_null() || failed.is_null() {
            return Err(null("output"));
        }
        let reports = oracles::run_suite(seed);
        let ok = reports.iter().filter(|r| r.pass).count();
        *passed = ok;
        *failed = reports.len() - ok;
        Ok(())
    })
}
