//! C ABI over `pwdlab`.
//!
//! Every fallible call returns a [`PwdStatus`]; on anything but `PWD_STATUS_OK` the
//! message is available from [`pwd_last_error`] on the same thread. Handles
//! are opaque and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pwdlab::cccn::{lab_parameters, noise_rates, LabParams};
use pwdlab::distributions::{kl_divergence, DistributionSpec};
use pwdlab::harness::config::bundled;
use pwdlab::harness::report::csv_string;
use pwdlab::harness::{run_experiment, verify_suite, ExperimentSummary, ScenarioSpec, SUITES};
use pwdlab::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    BudgetExhausted = 5,
    Failed = 6,
    Panic = 7,
}

/// A scenario description. Opaque to C.
pub struct PwdScenario {
    spec: ScenarioSpec,
}

/// The outcome of running a scenario. Opaque to C.
pub struct PwdReport {
    summary: ExperimentSummary,
    csv: CString,
}

/// Labeler parameters: `a_i` is the chance of emitting label `i` on a
/// positive base label, `b_i` on a negative one. The guesses they were built
/// from ride along.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwdLabParams {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub xi: f64,
    pub p_hat: f64,
    pub q_hat: f64,
}

impl From<LabParams> for PwdLabParams {
    fn from(p: LabParams) -> Self {
        PwdLabParams {
            a0: p.a0,
            a1: p.a1,
            b0: p.b0,
            b1: p.b1,
            xi: p.xi,
            p_hat: p.p_hat,
            q_hat: p.q_hat,
        }
    }
}

impl From<PwdLabParams> for LabParams {
    fn from(p: PwdLabParams) -> Self {
        LabParams {
            a0: p.a0,
            a1: p.a1,
            b0: p.b0,
            b1: p.b1,
            xi: p.xi,
            p_hat: p.p_hat,
            q_hat: p.q_hat,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(PwdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } => PwdStatus::Config,
            Error::BudgetExhausted { .. } => PwdStatus::BudgetExhausted,
            Error::InvalidParameter { .. }
            | Error::GuardViolation { .. }
            | Error::DegenerateGuesses(_)
            | Error::DimensionMismatch { .. }
            | Error::FamilyMismatch(_)
            | Error::EmptyInput(_) => PwdStatus::InvalidArgument,
            _ => PwdStatus::Failed,
        };
        Fail(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PwdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PwdStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside pwdlab");
            PwdStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(Fail(PwdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Fail(PwdStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(PwdStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(PwdStatus::NullPointer, format!("{what} is null")))
}

fn json_spec(s: &str, what: &str) -> Result<DistributionSpec, Fail> {
    serde_json::from_str(s).map_err(|e| Fail(PwdStatus::Config, format!("{what}: {e}")))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pwd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pwd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a scenario from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_scenario_from_json(json: *const c_char, out_handle: *mut *mut PwdScenario) -> PwdStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        let spec = ScenarioSpec::from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(PwdScenario { spec }));
        Ok(())
    })
}

/// Loads a scenario shipped with the library by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_scenario_bundled(name: *const c_char, out_handle: *mut *mut PwdScenario) -> PwdStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        let spec = bundled(text(name, "name")?)?;
        *slot = Box::into_raw(Box::new(PwdScenario { spec }));
        Ok(())
    })
}

/// Overrides the trial count and master seed.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pwd_scenario_configure(scenario: *mut PwdScenario, trials: usize, seed: u64) -> PwdStatus {
    guard(|| {
        let s = out(scenario, "scenario")?;
        let mut spec = s.spec.clone();
        spec.trials = trials;
        spec.seed = seed;
        spec.validate()?;
        s.spec = spec;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pwd_scenario_free(scenario: *mut PwdScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs every trial of a scenario.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_run(scenario: *const PwdScenario, out_report: *mut *mut PwdReport) -> PwdStatus {
    guard(|| {
        let slot = out(out_report, "out")?;
        let spec = &handle(scenario, "scenario")?.spec;
        let summary = run_experiment(spec, false)?;
        let csv = CString::new(csv_string(&summary.rows)?).map_err(|e| Fail(PwdStatus::Failed, e.to_string()))?;
        *slot = Box::into_raw(Box::new(PwdReport { summary, csv }));
        Ok(())
    })
}

/// Trial count, success count and success fraction of a report.
///
/// # Safety
/// `report` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_report_summary(
    report: *const PwdReport,
    trials: *mut usize,
    successes: *mut usize,
    fraction: *mut f64,
) -> PwdStatus {
    guard(|| {
        let s = &handle(report, "report")?.summary;
        *out(trials, "trials")? = s.trials;
        *out(successes, "successes")? = s.successes;
        *out(fraction, "fraction")? = s.success_fraction;
        Ok(())
    })
}

/// The report as CSV. Owned by the report; do not free.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pwd_report_csv(report: *const PwdReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.csv.as_ptr())
}

/// # Safety
/// `report` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pwd_report_free(report: *mut PwdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Labeler parameters for guesses `p_hat`, `q_hat` separated by at least `xi`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_lab_parameters(p_hat: f64, q_hat: f64, xi: f64, out_params: *mut PwdLabParams) -> PwdStatus {
    guard(|| {
        let slot = out(out_params, "out")?;
        *slot = lab_parameters(p_hat, q_hat, xi)?.into();
        Ok(())
    })
}

/// Flip rates `(eta0, eta1)` the labeler induces when the true positive rates
/// are `p` and `q`.
///
/// # Safety
/// `params` must be readable; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_noise_rates(
    p: f64,
    q: f64,
    params: *const PwdLabParams,
    eta0: *mut f64,
    eta1: *mut f64,
) -> PwdStatus {
    guard(|| {
        let a = *handle(params, "params")?;
        let (e0, e1) = noise_rates(p, q, &a.into());
        *out(eta0, "eta0")? = e0;
        *out(eta1, "eta1")? = e1;
        Ok(())
    })
}

/// `KL(P || Q)` in bits for two distributions given as JSON specs.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_kl(p_json: *const c_char, q_json: *const c_char, out_bits: *mut f64) -> PwdStatus {
    guard(|| {
        let slot = out(out_bits, "out")?;
        let p = json_spec(text(p_json, "p")?, "p")?;
        let q = json_spec(text(q_json, "q")?, "q")?;
        *slot = kl_divergence(&p, &q)?;
        Ok(())
    })
}

/// Runs a property suite (or `all`) and returns the results as a JSON string
/// to be released with [`pwd_string_free`]. `passed` is set to whether every
/// suite passed.
///
/// # Safety
/// `suite` must be NUL-terminated; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwd_verify(
    suite: *const c_char,
    seed: u64,
    json_out: *mut *mut c_char,
    passed: *mut bool,
) -> PwdStatus {
    guard(|| {
        let slot = out(json_out, "json_out")?;
        let ok = out(passed, "passed")?;
        let name = text(suite, "suite")?;
        if name != "all" && !SUITES.contains(&name) {
            return Err(Fail(PwdStatus::InvalidArgument, format!("unknown suite `{name}`")));
        }
        let results = verify_suite(name, seed)?;
        let json = serde_json::to_string(&results).map_err(|e| Fail(PwdStatus::Failed, e.to_string()))?;
        *ok = results.iter().all(|r| r.passed);
        *slot = CString::new(json).map_err(|e| Fail(PwdStatus::Failed, e.to_string()))?.into_raw();
        Ok(())
    })
}
