//! C ABI over `meco-core`.
//!
//! Scenarios and reports are opaque heap handles created by this library
//! and released with the matching `*_free`. Every fallible call returns a
//! [`MecoStatus`]; on failure [`meco_last_error`] describes the most
//! recent error on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use meco_core::model::{CloudCapacity, Scenario, SystemParams, UserParams};
use meco_core::scalarfn::{self, RadioConstants};
use meco_core::scenario::{self, GenSpec};
use meco_core::solvers::{PolicyKind, SolveReport};
use meco_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MecoStatus {
    Ok = 0,
    NullPointer = 1,
    Infeasible = 2,
    Parse = 3,
    Numeric = 4,
    InvalidInput = 5,
    Domain = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MecoPolicy {
    P2Optimal = 0,
    P1Optimal = 1,
    Suboptimal = 2,
    Baseline = 3,
}

impl From<MecoPolicy> for PolicyKind {
    fn from(p: MecoPolicy) -> Self {
        match p {
            MecoPolicy::P2Optimal => PolicyKind::P2Optimal,
            MecoPolicy::P1Optimal => PolicyKind::P1Optimal,
            MecoPolicy::Suboptimal => PolicyKind::Suboptimal,
            MecoPolicy::Baseline => PolicyKind::Baseline,
        }
    }
}

/// System constants. A non-finite or non-positive `cloud_capacity` means
/// an unbounded cloud.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MecoSystem {
    pub slot: f64,
    pub bandwidth: f64,
    pub noise: f64,
    pub cloud_capacity: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MecoUser {
    pub beta: f64,
    pub cycles_per_bit: f64,
    pub energy_per_cycle: f64,
    pub h2: f64,
    pub data_bits: f64,
    pub cpu_speed: f64,
}

/// Opaque scenario handle.
pub struct MecoScenario(Scenario);

/// Opaque solve report handle.
pub struct MecoReport(SolveReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MecoStatus {
    match e {
        Error::Infeasible { .. } => MecoStatus::Infeasible,
        Error::Parse(_) => MecoStatus::Parse,
        Error::InvalidInput(_) => MecoStatus::InvalidInput,
        Error::Domain { .. } => MecoStatus::Domain,
        Error::Io(_) => MecoStatus::Io,
        Error::Violation(_) | Error::IterationLimit { .. } | Error::Numeric(_) => MecoStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MecoStatus>) -> MecoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MecoStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside meco".into());
            MecoStatus::Panic
        }
    }
}

fn fail(e: Error) -> MecoStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> MecoStatus {
    set_error(format!("{what} is null"));
    MecoStatus::NullPointer
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, MecoStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(Error::Parse(format!("{what} is not UTF-8"))))
}

fn boxed<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the last failed call on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn meco_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn meco_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a scenario from plain structs.
///
/// # Safety
/// `users` must point to `n_users` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meco_scenario_new(
    system: MecoSystem,
    users: *const MecoUser,
    n_users: usize,
    out: *mut *mut MecoScenario,
) -> MecoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if users.is_null() && n_users > 0 {
            return Err(null("users"));
        }
        let radio = RadioConstants::new(system.bandwidth, system.noise).map_err(fail)?;
        let cloud = if system.cloud_capacity.is_finite() && system.cloud_capacity > 0.0 {
            CloudCapacity::Finite(system.cloud_capacity)
        } else {
            CloudCapacity::Infinite
        };
        let sys = SystemParams { slot: system.slot, radio, cloud };
        let raw = if n_users == 0 { &[][..] } else { std::slice::from_raw_parts(users, n_users) };
        let list = raw
            .iter()
            .map(|u| UserParams {
                beta: u.beta,
                cycles_per_bit: u.cycles_per_bit,
                energy_per_cycle: u.energy_per_cycle,
                h2: u.h2,
                data_bits: u.data_bits,
                cpu_speed: u.cpu_speed,
            })
            .collect();
        let s = Scenario::new(sys, list).map_err(fail)?;
        boxed(out, MecoScenario(s));
        Ok(())
    })
}

/// Parses a scenario JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meco_scenario_from_json(json: *const c_char, out: *mut *mut MecoScenario) -> MecoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = Scenario::from_json(text(json, "json")?).map_err(fail)?;
        boxed(out, MecoScenario(s));
        Ok(())
    })
}

/// Draws a scenario from a generator-spec JSON document, or from the
/// desk preset if `spec_json` is null, with the given seed.
///
/// # Safety
/// `spec_json` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meco_scenario_generate(
    spec_json: *const c_char,
    seed: u64,
    out: *mut *mut MecoScenario,
) -> MecoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let base = if spec_json.is_null() {
            scenario::desk_spec()
        } else {
            GenSpec::from_json(text(spec_json, "spec_json")?).map_err(fail)?
        };
        let s = scenario::generate(&GenSpec { seed, ..base }).map_err(fail)?;
        boxed(out, MecoScenario(s));
        Ok(())
    })
}

/// Number of users, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn meco_scenario_len(s: *const MecoScenario) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn meco_scenario_free(s: *mut MecoScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Solves `s` with `policy`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meco_solve(s: *const MecoScenario, policy: MecoPolicy, out: *mut *mut MecoReport) -> MecoStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = PolicyKind::from(policy).solve(&s.0).map_err(fail)?;
        boxed(out, MecoReport(r));
        Ok(())
    })
}

/// Weighted total energy in joules, or NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn meco_report_objective(r: *const MecoReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.objective())
}

/// Writes the slot and cloud prices.
///
/// # Safety
/// `r` must be a live handle; `lambda` and `mu` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meco_report_dual(r: *const MecoReport, lambda: *mut f64, mu: *mut f64) -> MecoStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        if lambda.is_null() || mu.is_null() {
            return Err(null("lambda/mu"));
        }
        *lambda = r.0.dual.lambda;
        *mu = r.0.dual.mu;
        Ok(())
    })
}

/// Copies offloaded bits and slot times into caller buffers of `len`
/// elements each. `len` must be at least the number of users.
///
/// # Safety
/// `ell` and `t` must be writable for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn meco_report_allocation(r: *const MecoReport, ell: *mut f64, t: *mut f64, len: usize) -> MecoStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        if ell.is_null() || t.is_null() {
            return Err(null("ell/t"));
        }
        let a = &r.0.allocation;
        if len < a.len() {
            set_error(format!("buffers hold {len}, need {}", a.len()));
            return Err(MecoStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(a.ell.as_ptr(), ell, a.len());
        ptr::copy_nonoverlapping(a.t.as_ptr(), t, a.len());
        Ok(())
    })
}

/// The full report as JSON. Release with [`meco_string_free`].
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn meco_report_to_json(r: *const MecoReport) -> *mut c_char {
    match r.as_ref() {
        Some(r) => CString::new(r.0.to_json()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn meco_report_free(r: *mut MecoReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn meco_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Principal branch of the Lambert W function.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meco_lambert_w0(z: f64, out: *mut f64) -> MecoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = scalarfn::lambert_w0(z).map_err(fail)?;
        Ok(())
    })
}
