//! C ABI for the `rfvi` solver library.
//!
//! Conventions:
//!
//! * Problems and traces are opaque handles returned through an out
//!   pointer and released with `rfvi_problem_free`/`rfvi_trace_free`.
//! * Fallible functions return [`RfviStatus`]; on failure,
//!   [`rfvi_last_error`] describes the error on the calling thread.
//! * Optional values are reported as NaN.
//! * Panics never cross the boundary; they become [`RfviStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rfvi::feasibility::compute_q;
use rfvi::methods::{popov_tau, run, RunOptions};
use rfvi::problems::{
    build_imitation_game, build_matrix_game, instance_io, ImitationGameParams, MatrixGameParams,
    ProblemData, ProblemInstance,
};
use rfvi::{BatchSchedule, Error, Method, RunTrace, StepSchedule};

/// Result code of every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfviStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Format = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfviMethod {
    Projection = 0,
    Korpelevich = 1,
    Popov = 2,
}

impl From<RfviMethod> for Method {
    fn from(m: RfviMethod) -> Self {
        match m {
            RfviMethod::Projection => Method::Projection,
            RfviMethod::Korpelevich => Method::Korpelevich,
            RfviMethod::Popov => Method::Popov,
        }
    }
}

/// Parameters of [`rfvi_run`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RfviRunParams {
    pub method: RfviMethod,
    /// Constant batch size; 0 selects the `max(1, ⌈log₁₀ k⌉)` schedule.
    pub batch: usize,
    /// Polyak relaxation in (0, 2).
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Record every this many iterations (plus the first and last); 0 means 1.
    pub record_every: usize,
    /// Use the larger initial step `1/(4(L+μ))` for projection and Popov.
    pub bigstep: bool,
}

/// One recorded iteration; absent values are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RfviRecord {
    pub k: usize,
    pub alpha: f64,
    pub sq_dist_solution: f64,
    pub dist_set_or_violation: f64,
    pub feas_residual: f64,
    pub f_evals: u64,
}

/// A problem instance.
pub struct RfviProblem {
    data: ProblemData,
    instance: ProblemInstance,
}

/// The trace of one run.
pub struct RfviTrace {
    trace: RunTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RfviStatus {
    match e {
        Error::DimensionMismatch { .. }
        | Error::InvalidParameter { .. }
        | Error::QNotBelowOne { .. }
        | Error::UnknownPreset(_)
        | Error::Config { .. } => RfviStatus::InvalidArgument,
        Error::ZeroSubgradient { .. } | Error::Numerical(_) => RfviStatus::Numerical,
        Error::Format { .. } => RfviStatus::Format,
        Error::Io { .. } => RfviStatus::Io,
    }
}

struct Failure(RfviStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RfviStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RfviStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfviStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            RfviStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure(RfviStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_to(src: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if len < src.len() {
        return Err(Failure(
            RfviStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn wrap(data: ProblemData) -> Result<RfviProblem, Failure> {
    let instance = data.instance()?;
    Ok(RfviProblem { data, instance })
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn rfvi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rfvi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a two-player matrix game with quadratic constraints.
/// `full_scale` selects 100 variables and 10⁴ constraints per agent instead
/// of 20 and 10³.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_matrix_game(
    mu: f64,
    lipschitz: f64,
    seed: u64,
    full_scale: bool,
    out: *mut *mut RfviProblem,
) -> RfviStatus {
    guard(|| {
        let params = if full_scale {
            MatrixGameParams::full_scale(mu, lipschitz, seed)
        } else {
            MatrixGameParams::desk_scale(mu, lipschitz, seed)
        };
        let p = wrap(ProblemData::MatrixGame(build_matrix_game(&params)?))?;
        write_out(out, p)
    })
}

/// Builds the imitation game with exploration levels `ξ ~ U[0, xi_max]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_imitation(xi_max: f64, out: *mut *mut RfviProblem) -> RfviStatus {
    guard(|| {
        let params = ImitationGameParams {
            xi_max,
            ..ImitationGameParams::default()
        };
        let p = wrap(ProblemData::Imitation(build_imitation_game(&params)?))?;
        write_out(out, p)
    })
}

/// Loads an instance file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_load(path: *const c_char, out: *mut *mut RfviProblem) -> RfviStatus {
    guard(|| {
        let path = path_arg(path)?;
        let p = wrap(instance_io::load_problem(&path)?)?;
        write_out(out, p)
    })
}

/// Saves an instance file.
///
/// # Safety
/// `problem` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_save(problem: *const RfviProblem, path: *const c_char) -> RfviStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let path = path_arg(path)?;
        instance_io::save_problem(&p.data, &path)?;
        Ok(())
    })
}

/// Total dimension of the joint decision; 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_dim(problem: *const RfviProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.instance.layout.total())
}

/// Number of agents; 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_num_agents(problem: *const RfviProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.instance.num_agents())
}

/// Strong monotonicity and Lipschitz constants of the mapping.
///
/// # Safety
/// `problem` must be a live handle; `mu` and `lipschitz` writable.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_constants(
    problem: *const RfviProblem,
    mu: *mut f64,
    lipschitz: *mut f64,
) -> RfviStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if mu.is_null() || lipschitz.is_null() {
            return Err(null("output"));
        }
        *mu = p.instance.mapping.mu();
        *lipschitz = p.instance.mapping.lipschitz();
        Ok(())
    })
}

/// Copies the known solution into `out[0..dim]`.
///
/// # Safety
/// `problem` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_solution(problem: *const RfviProblem, out: *mut f64, len: usize) -> RfviStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let sol = p
            .instance
            .solution
            .as_ref()
            .ok_or_else(|| Failure(RfviStatus::InvalidArgument, "solution unknown".into()))?;
        copy_to(sol.values(), out, len)
    })
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfvi_problem_free(problem: *mut RfviProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs one trial of a method.
///
/// # Safety
/// `problem` must be a live handle, `params` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfvi_run(
    problem: *const RfviProblem,
    params: *const RfviRunParams,
    out: *mut *mut RfviTrace,
) -> RfviStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let method = Method::from(params.method);
        let (mu, l) = (p.instance.mapping.mu(), p.instance.mapping.lipschitz());
        let mut step = StepSchedule::new(method, mu, l)?;
        if params.bigstep && method != Method::Korpelevich {
            step = step.with_cap_override(StepSchedule::bigstep_cap(mu, l))?;
        }
        let batch = match params.batch {
            0 => BatchSchedule::LogTen,
            n => BatchSchedule::Constant(n),
        };
        let options = RunOptions {
            record_every: params.record_every.max(1),
            initial: None,
        };
        let trace = run(
            &p.instance,
            &step,
            &batch,
            params.beta,
            params.iterations,
            params.seed,
            &options,
        )?;
        write_out(out, RfviTrace { trace })
    })
}

/// Number of recorded iterations; 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfvi_trace_len(trace: *const RfviTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.records.len())
}

/// Copies record `index` into `out`.
///
/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfvi_trace_record(trace: *const RfviTrace, index: usize, out: *mut RfviRecord) -> RfviStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = t.trace.records.get(index).ok_or_else(|| {
            Failure(
                RfviStatus::InvalidArgument,
                format!("record {index} out of range ({} records)", t.trace.records.len()),
            )
        })?;
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = RfviRecord {
            k: r.k,
            alpha: nan(r.alpha),
            sq_dist_solution: nan(r.sq_dist_solution),
            dist_set_or_violation: nan(r.dist_set_or_violation()),
            feas_residual: nan(r.feas_residual),
            f_evals: r.f_evals,
        };
        Ok(())
    })
}

/// Copies the final iterate into `out[0..dim]`.
///
/// # Safety
/// `trace` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rfvi_trace_final_x(trace: *const RfviTrace, out: *mut f64, len: usize) -> RfviStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        copy_to(t.trace.final_x.values(), out, len)
    })
}

/// Smallest feasibility residual over all iterations; NaN when none was
/// computed or the handle is null.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfvi_trace_min_feas_residual(trace: *const RfviTrace) -> f64 {
    trace
        .as_ref()
        .and_then(|t| t.trace.min_feas_residual)
        .unwrap_or(f64::NAN)
}

/// # Safety
/// `trace` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfvi_trace_free(trace: *mut RfviTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Popov parameter `τ(μ, L)`; NaN for invalid constants.
#[no_mangle]
pub extern "C" fn rfvi_popov_tau(mu: f64, lipschitz: f64) -> f64 {
    if mu > 0.0 && lipschitz >= mu && lipschitz.is_finite() {
        popov_tau(mu, lipschitz)
    } else {
        f64::NAN
    }
}

/// `q = β(2−β)/(c·M_g²)`; fails unless `q < 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfvi_compute_q(beta: f64, c: f64, mg: f64, out: *mut f64) -> RfviStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = compute_q(beta, c, mg, false)?.q;
        Ok(())
    })
}
