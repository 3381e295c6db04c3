//! C ABI for `hcp-core`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the
//! matching `*_free`. Every fallible call returns an [`HcpStatus`]; on failure
//! [`hcp_last_error`] gives the message for the calling thread.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hcp_core::commands::{self, prepare_output_dir, write_result};
use hcp_core::config::RunConfig;
use hcp_core::limits::{first_point_limit_transform, g_infinity, LimitLaw, LimitLawParams, Moment};
use hcp_core::measure::{c0_estimate, epoch_pushforward, law_to_measure, log_grid, AtomicMeasure, C0Options};
use hcp_core::spp::IntervalLaw;
use hcp_core::HcpError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Schedule = 4,
    Rates = 5,
    StateSpace = 6,
    WindowExhausted = 7,
    Numerical = 8,
    Truncation = 9,
    Domain = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcpCommand {
    Simulate = 0,
    Analytic = 1,
    Limits = 2,
    ReproduceFigb = 3,
}

/// Law of an epoch-starting interval on a finite support.
pub struct HcpMeasure(AtomicMeasure);

/// Tabulated universal limit law.
pub struct HcpLimitLaw(LimitLaw);

/// Validated run configuration.
pub struct HcpRunConfig(RunConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum FfiError {
    Null(&'static str),
    Core(HcpError),
}

impl From<HcpError> for FfiError {
    fn from(e: HcpError) -> Self {
        FfiError::Core(e)
    }
}

impl From<serde_json::Error> for FfiError {
    fn from(e: serde_json::Error) -> Self {
        FfiError::Core(e.into())
    }
}

fn status_of(e: &HcpError) -> HcpStatus {
    match e {
        HcpError::InvalidArgument(_) | HcpError::Sampling(_) => HcpStatus::InvalidArgument,
        HcpError::Config(_) | HcpError::Json(_) => HcpStatus::Config,
        HcpError::Schedule { .. } => HcpStatus::Schedule,
        HcpError::Rates(_) => HcpStatus::Rates,
        HcpError::StateSpace { .. } => HcpStatus::StateSpace,
        HcpError::WindowExhausted { .. } => HcpStatus::WindowExhausted,
        HcpError::Numerical(_) => HcpStatus::Numerical,
        HcpError::Truncation(_) => HcpStatus::Truncation,
        HcpError::Domain(_) => HcpStatus::Domain,
        HcpError::Io(_) | HcpError::Csv(_) => HcpStatus::Io,
    }
}

/// Run `f`, turning errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), FfiError>>(f: F) -> HcpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HcpStatus::Ok
        }
        Ok(Err(FfiError::Null(what))) => {
            set_error(format!("{what} is null"));
            HcpStatus::NullPointer
        }
        Ok(Err(FfiError::Core(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            HcpStatus::Panic
        }
    }
}

fn null(what: &'static str) -> FfiError {
    FfiError::Null(what)
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| HcpError::InvalidArgument(format!("{what} is not UTF-8")).into())
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or_else(|| null(what))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hcp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn hcp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_dirac(x: f64, l_max: f64, out: *mut *mut HcpMeasure) -> HcpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = boxed(HcpMeasure(AtomicMeasure::dirac(x, l_max)?));
        Ok(())
    })
}

/// Mass `masses[i]` at `i * step` for `i < n`.
///
/// # Safety
/// `masses` must point to `n` doubles and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_from_grid(
    step: f64,
    masses: *const f64,
    n: usize,
    l_max: f64,
    deficit: f64,
    out: *mut *mut HcpMeasure,
) -> HcpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if masses.is_null() {
            return Err(null("masses"));
        }
        if !(step > 0.0) {
            return Err(HcpError::InvalidArgument(format!("step = {step} must be positive")).into());
        }
        let masses = std::slice::from_raw_parts(masses, n);
        *out = boxed(HcpMeasure(AtomicMeasure::from_grid(step, masses, l_max, deficit)));
        Ok(())
    })
}

/// Interval law given as JSON, e.g. `{"type":"geometric","q":0.3}`, truncated
/// at `l_max`. A positive `step` snaps atoms to that grid.
///
/// # Safety
/// `law_json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_from_law_json(
    law_json: *const c_char,
    step: f64,
    l_max: f64,
    out: *mut *mut HcpMeasure,
) -> HcpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let law: IntervalLaw = serde_json::from_str(str_arg(law_json, "law_json")?)?;
        law.validate()?;
        let step = (step > 0.0).then_some(step);
        *out = boxed(HcpMeasure(law_to_measure(&law, step, l_max)?));
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_free(m: *mut HcpMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of atoms; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_len(m: *const HcpMeasure) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// Copy up to `cap` atoms into `xs` and `ws`; `*n_out` receives the total
/// atom count so a short buffer can be detected.
///
/// # Safety
/// `xs` and `ws` must hold `cap` doubles; `n_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_atoms(
    m: *const HcpMeasure,
    xs: *mut f64,
    ws: *mut f64,
    cap: usize,
    n_out: *mut usize,
) -> HcpStatus {
    guard(|| {
        let m = handle(m, "measure")?;
        let n_out = out_arg(n_out, "n_out")?;
        let atoms = m.0.atoms();
        *n_out = atoms.len();
        if cap > 0 && (xs.is_null() || ws.is_null()) {
            return Err(null("xs/ws"));
        }
        for (i, &(x, w)) in atoms.iter().take(cap).enumerate() {
            *xs.add(i) = x;
            *ws.add(i) = w;
        }
        Ok(())
    })
}

/// Mass on the support plus the truncation deficit.
///
/// # Safety
/// `m` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_total(m: *const HcpMeasure, out: *mut f64) -> HcpStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(m, "measure")?.0.total();
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_deficit(m: *const HcpMeasure, out: *mut f64) -> HcpStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(m, "measure")?.0.deficit();
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_cdf(m: *const HcpMeasure, x: f64, out: *mut f64) -> HcpStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(m, "measure")?.0.cdf(x);
        Ok(())
    })
}

/// Law after one epoch with active range `[d_min, d_max)`.
///
/// # Safety
/// `m` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_pushforward(
    m: *const HcpMeasure,
    d_min: f64,
    d_max: f64,
    out: *mut *mut HcpMeasure,
) -> HcpStatus {
    guard(|| {
        let m = handle(m, "measure")?;
        let out = out_arg(out, "out")?;
        *out = boxed(HcpMeasure(epoch_pushforward(&m.0, d_min, d_max)?));
        Ok(())
    })
}

/// Positions multiplied by `factor`.
///
/// # Safety
/// `m` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_measure_scale(m: *const HcpMeasure, factor: f64, out: *mut *mut HcpMeasure) -> HcpStatus {
    guard(|| {
        let m = handle(m, "measure")?;
        let out = out_arg(out, "out")?;
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(HcpError::InvalidArgument(format!("factor = {factor} must be positive")).into());
        }
        *out = boxed(HcpMeasure(m.0.scale_positions(factor)));
        Ok(())
    })
}

/// Small-`s` estimate of `c0` on a logarithmic grid from `s_max` down to `s_min`.
///
/// # Safety
/// `m` must be a live handle; `estimate` and `converged` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_c0_estimate(
    m: *const HcpMeasure,
    s_max: f64,
    s_min: f64,
    per_decade: usize,
    estimate: *mut f64,
    converged: *mut bool,
) -> HcpStatus {
    guard(|| {
        let m = handle(m, "measure")?;
        let (estimate, converged) = (out_arg(estimate, "estimate")?, out_arg(converged, "converged")?);
        if !(s_max > s_min && s_min > 0.0) || per_decade == 0 {
            return Err(HcpError::InvalidArgument("need s_max > s_min > 0 and per_decade > 0".into()).into());
        }
        let e = c0_estimate(&m.0, &log_grid(s_max, s_min, per_decade), C0Options::default())?;
        *estimate = e.estimate;
        *converged = e.converged;
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_limit_law_new(c0: f64, gamma: f64, out: *mut *mut HcpLimitLaw) -> HcpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = LimitLawParams { gamma, ..LimitLawParams::new(c0) };
        *out = boxed(HcpLimitLaw(LimitLaw::new(params)?));
        Ok(())
    })
}

/// # Safety
/// `l` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcp_limit_law_free(l: *mut HcpLimitLaw) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// Density at `x`; NaN for NULL.
///
/// # Safety
/// `l` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcp_limit_law_density(l: *const HcpLimitLaw, x: f64) -> f64 {
    l.as_ref().map_or(f64::NAN, |l| l.0.z_density(x))
}

/// Distribution function at `x`; NaN for NULL.
///
/// # Safety
/// `l` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcp_limit_law_cdf(l: *const HcpLimitLaw, x: f64) -> f64 {
    l.as_ref().map_or(f64::NAN, |l| l.0.z_cdf(x))
}

/// `k`-th moment. `*finite` is false, and `*value` infinite, when it diverges.
///
/// # Safety
/// `l` must be a live handle; `value` and `finite` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_limit_law_moment(l: *const HcpLimitLaw, k: u32, value: *mut f64, finite: *mut bool) -> HcpStatus {
    guard(|| {
        let l = handle(l, "limit law")?;
        let (value, finite) = (out_arg(value, "value")?, out_arg(finite, "finite")?);
        match l.0.limit_moment(k)? {
            Moment::Finite { value: v, .. } => {
                *value = v;
                *finite = true;
            }
            Moment::Infinite => {
                *value = f64::INFINITY;
                *finite = false;
            }
        }
        Ok(())
    })
}

/// Laplace transform of the limit interval law at `s`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_g_infinity(c0: f64, s: f64, out: *mut f64) -> HcpStatus {
    guard(|| {
        *out_arg(out, "out")? = g_infinity(c0, s)?;
        Ok(())
    })
}

/// Laplace transform of the rescaled first-point limit at `s`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_first_point_limit_transform(c0: f64, gamma: f64, s: f64, out: *mut f64) -> HcpStatus {
    guard(|| {
        *out_arg(out, "out")? = first_point_limit_transform(c0, gamma, s)?;
        Ok(())
    })
}

/// Parse and validate a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hcp_run_config_from_toml(toml: *const c_char, out: *mut *mut HcpRunConfig) -> HcpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = RunConfig::from_toml(str_arg(toml, "toml")?)?;
        cfg.validate()?;
        *out = boxed(HcpRunConfig(cfg));
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcp_run_config_free(c: *mut HcpRunConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Run a command and write its files and manifest into `out_dir`, which must
/// be empty or absent unless `overwrite` is set.
///
/// # Safety
/// `c` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hcp_run_command(
    c: *const HcpRunConfig,
    command: HcpCommand,
    out_dir: *const c_char,
    overwrite: bool,
) -> HcpStatus {
    guard(|| {
        let cfg = &handle(c, "config")?.0;
        let dir = Path::new(str_arg(out_dir, "out_dir")?);
        let result = match command {
            HcpCommand::Simulate => commands::simulate(cfg)?,
            HcpCommand::Analytic => commands::analytic(cfg)?,
            HcpCommand::Limits => commands::limits(cfg)?,
            HcpCommand::ReproduceFigb => commands::reproduce_figb(cfg)?,
        };
        prepare_output_dir(dir, overwrite)?;
        Ok(write_result(dir, &result)?)
    })
}
