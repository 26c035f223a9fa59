//! C ABI over the `psps` planning library.
//!
//! Networks and results are opaque heap handles owned by the caller and
//! released with their `_free` function. Fallible calls return a
//! [`PspsStatus`]; on failure [`psps_last_error`] describes the problem.
//! Strings returned by the library are freed with [`psps_string_free`].
//!
//! The generated header lives at `include/psps.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use psps::analysis::{solve_plan, AnalysisError, PlanOutcome, Problem};
use psps::case_io::{generate_risk, parse_matpower, read_network_json, write_document};
use psps::formulation::{build_contingency_set, ContingencyPolicy};
use psps::network::{Network, PlanningParams};
use psps::solver::{SolveStatus, SolverOptions};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PspsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    Null = 1,
    Utf8 = 2,
    Parse = 3,
    InvalidArg = 4,
    Infeasible = 5,
    /// The solver stopped on a limit before proving optimality.
    SolverLimit = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PspsProblem {
    Ops = 0,
    Scops = 1,
}

/// Opaque network handle.
pub struct PspsNetwork {
    inner: Network,
}

/// Opaque solve result handle.
pub struct PspsResult {
    inner: PlanOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PspsStatus, String);

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        let status = match e {
            AnalysisError::Input(_) => PspsStatus::InvalidArg,
            _ => PspsStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PspsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PspsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("panic inside psps");
            PspsStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PspsStatus::Null, "null string argument".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(PspsStatus::Utf8, e.to_string()))
}

fn null(what: &str) -> Failure {
    Failure(PspsStatus::Null, format!("{what} is null"))
}

unsafe fn emit_network(out: *mut *mut PspsNetwork, network: Network) -> Result<(), Failure> {
    *out = Box::into_raw(Box::new(PspsNetwork { inner: network }));
    Ok(())
}

/// Parses native network JSON into `*out`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn psps_network_from_json(json: *const c_char, out: *mut *mut PspsNetwork) -> PspsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json)?;
        let network = read_network_json(text).map_err(|e| Failure(PspsStatus::Parse, e.to_string()))?;
        emit_network(out, network)
    })
}

/// Parses Matpower case text into `*out`.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn psps_network_from_matpower(text: *const c_char, out: *mut *mut PspsNetwork) -> PspsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text)?;
        let network = parse_matpower(text).map_err(|e| Failure(PspsStatus::Parse, e.to_string()))?;
        emit_network(out, network)
    })
}

/// # Safety
/// `network` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn psps_network_free(network: *mut PspsNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Replaces every line risk with the seeded synthetic risk profile.
///
/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn psps_network_apply_seeded_risk(network: *mut PspsNetwork, seed: u64) -> PspsStatus {
    guard(|| {
        let net = network.as_mut().ok_or_else(|| null("network"))?;
        generate_risk(&net.inner, seed)
            .apply(&mut net.inner)
            .map_err(|e| Failure(PspsStatus::Internal, e.to_string()))
    })
}

/// Number of lines, or 0 for a null handle.
///
/// # Safety
/// `network` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn psps_network_line_count(network: *const PspsNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.inner.lines.len())
}

/// Solves OPS or SC-OPS (against every non-bridge single-line outage) with
/// the built-in solver. `pflex` overrides every generator's flexibility;
/// pass NaN to keep the per-generator values. An infeasible or
/// limit-stopped solve still stores a result in `*out` and returns
/// `PSPS_STATUS_INFEASIBLE` or `PSPS_STATUS_SOLVER_LIMIT`.
///
/// # Safety
/// `network` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn psps_solve(
    network: *const PspsNetwork,
    problem: PspsProblem,
    alpha: f64,
    beta: f64,
    pflex: f64,
    out: *mut *mut PspsResult,
) -> PspsStatus {
    let mut outcome_status = PspsStatus::Ok;
    let status = guard(|| {
        let net = network.as_ref().ok_or_else(|| null("network"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut params = PlanningParams::new(alpha, beta);
        if !pflex.is_nan() {
            params = params.with_flex(pflex);
        }
        params
            .validate()
            .map_err(|e| Failure(PspsStatus::InvalidArg, e.to_string()))?;
        let (problem, set) = match problem {
            PspsProblem::Ops => (Problem::Ops, psps::formulation::ContingencySet::empty()),
            PspsProblem::Scops => (
                Problem::Scops,
                build_contingency_set(&net.inner, ContingencyPolicy::AllNonBridge)
                    .map_err(|e| Failure(PspsStatus::InvalidArg, e.to_string()))?,
            ),
        };
        let outcome = solve_plan(&net.inner, problem, &params, &set, &SolverOptions::default())?;
        outcome_status = result_code(&outcome);
        *out = Box::into_raw(Box::new(PspsResult { inner: outcome }));
        Ok(())
    });
    if status == PspsStatus::Ok && outcome_status != PspsStatus::Ok {
        set_error(match outcome_status {
            PspsStatus::Infeasible => "problem is infeasible",
            _ => "solver stopped on a limit",
        });
        return outcome_status;
    }
    status
}

fn result_code(outcome: &PlanOutcome) -> PspsStatus {
    match outcome.status {
        SolveStatus::Optimal => PspsStatus::Ok,
        SolveStatus::Infeasible => PspsStatus::Infeasible,
        SolveStatus::TimeLimit | SolveStatus::NodeLimit => PspsStatus::SolverLimit,
        SolveStatus::Unbounded => PspsStatus::Internal,
    }
}

/// # Safety
/// `result` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn psps_result_free(result: *mut PspsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// The status `psps_solve` returned for this result.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn psps_result_status(result: *const PspsResult) -> PspsStatus {
    result.as_ref().map_or(PspsStatus::Null, |r| result_code(&r.inner))
}

/// Objective (total energized risk), or NaN when there is no plan.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn psps_result_objective(result: *const PspsResult) -> f64 {
    result
        .as_ref()
        .and_then(|r| r.inner.objective)
        .unwrap_or(f64::NAN)
}

/// Energized risk as a fraction of total risk, or NaN when there is no plan.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn psps_result_active_risk(result: *const PspsResult) -> f64 {
    result
        .as_ref()
        .and_then(|r| r.inner.plan.as_ref())
        .map_or(f64::NAN, |p| p.summary.active_risk)
}

/// The result as the same JSON document `psps solve` writes, or null on a
/// null handle. Free with [`psps_string_free`].
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn psps_result_to_json(result: *const PspsResult) -> *mut c_char {
    let Some(r) = result.as_ref() else {
        set_error("result is null");
        return ptr::null_mut();
    };
    match CString::new(write_document(&r.inner)) {
        Ok(c) => c.into_raw(),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn psps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
