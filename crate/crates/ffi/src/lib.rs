//! C ABI over the gsma solver.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a [`GsmaStatus`];
//! on failure a message is available from [`gsma_last_error`] until the
//! next failing call on the same thread. Complex arrays are interleaved
//! `(re, im)` pairs; matrices are column-major.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::path::Path;

use gsma::Error;
use gsma::composite::assemble_monolithic;
use gsma::io::{Problem, load};
use gsma::linalg::{C64, CMat, Matrix};
use gsma::pencil::{ModeEstimate, ProjectionPencil};
use gsma::run::{SolveSpec, Solved, solve_pencil};

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsmaStatus {
    Ok = 0,
    NullArgument = 1,
    /// Malformed matrices, configuration or files.
    InvalidInput = 2,
    /// The iteration failed or a shifted operator was singular.
    SolverFailure = 3,
    Io = 4,
    IndexOutOfRange = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Pencil `λEv = Av` with `E` a symmetric projection.
pub struct GsmaPencil {
    pencil: ProjectionPencil,
}

/// Converged modes and their JSON report.
pub struct GsmaSolution {
    solved: Solved,
    report: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GsmaStatus {
    match err {
        Error::Io(_) => GsmaStatus::Io,
        e if e.is_input_error() => GsmaStatus::InvalidInput,
        _ => GsmaStatus::SolverFailure,
    }
}

fn fail(status: GsmaStatus, msg: impl Into<String>) -> GsmaStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), GsmaStatus>) -> GsmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsmaStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(GsmaStatus::Panic, "internal panic"),
    }
}

fn lift(err: Error) -> GsmaStatus {
    fail(status_of(&err), format!("{}: {err}", err.kind()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), GsmaStatus> {
    if p.is_null() { Err(fail(GsmaStatus::NullArgument, format!("{name} is null"))) } else { Ok(()) }
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, GsmaStatus> {
    non_null(p, name)?;
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| fail(GsmaStatus::InvalidInput, format!("{name} is not UTF-8")))
}

fn square_len(m: usize, per_entry: usize) -> Result<usize, GsmaStatus> {
    m.checked_mul(m)
        .and_then(|x| x.checked_mul(per_entry))
        .filter(|_| m > 0)
        .ok_or_else(|| fail(GsmaStatus::InvalidInput, format!("invalid order {m}")))
}

fn publish<T>(out: *mut *mut T, value: T) {
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

fn new_pencil(e: CMat, a: CMat, out: *mut *mut GsmaPencil) -> Result<(), GsmaStatus> {
    let pencil = ProjectionPencil::new(Matrix::Dense(e), Matrix::Dense(a)).map_err(lift)?;
    publish(out, GsmaPencil { pencil });
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn gsma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn gsma_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Pencil from real column-major `m×m` arrays.
///
/// # Safety
/// `e` and `a` must point to `m·m` doubles; `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_pencil_from_dense(m: usize, e: *const f64, a: *const f64, out: *mut *mut GsmaPencil) -> GsmaStatus {
    guard(|| {
        non_null(e, "e")?;
        non_null(a, "a")?;
        non_null(out, "out")?;
        let len = square_len(m, 1)?;
        // SAFETY: lengths guaranteed by the caller.
        let (e, a) = unsafe { (std::slice::from_raw_parts(e, len), std::slice::from_raw_parts(a, len)) };
        let lift_real = |x: &[f64]| CMat::from_iterator(m, m, x.iter().map(|&v| C64::new(v, 0.0)));
        new_pencil(lift_real(e), lift_real(a), out)
    })
}

/// Pencil from complex column-major `m×m` arrays of interleaved pairs.
///
/// # Safety
/// `e` and `a` must point to `2·m·m` doubles; `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_pencil_from_dense_complex(m: usize, e: *const f64, a: *const f64, out: *mut *mut GsmaPencil) -> GsmaStatus {
    guard(|| {
        non_null(e, "e")?;
        non_null(a, "a")?;
        non_null(out, "out")?;
        let len = square_len(m, 2)?;
        // SAFETY: lengths guaranteed by the caller.
        let (e, a) = unsafe { (std::slice::from_raw_parts(e, len), std::slice::from_raw_parts(a, len)) };
        let lift_pairs = |x: &[f64]| CMat::from_iterator(m, m, x.chunks_exact(2).map(|p| C64::new(p[0], p[1])));
        new_pencil(lift_pairs(e), lift_pairs(a), out)
    })
}

/// Pencil from a problem manifest; composite models are assembled into
/// their monolithic pencil.
///
/// # Safety
/// `manifest` must be a NUL-terminated path; `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_pencil_load(manifest: *const c_char, out: *mut *mut GsmaPencil) -> GsmaStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let path = unsafe { c_str(manifest, "manifest") }?;
        non_null(out, "out")?;
        let pencil = match load(Path::new(path)).map_err(lift)?.1 {
            Problem::Pencil(p) => p,
            Problem::Composite(m) => assemble_monolithic(&m).map_err(lift)?,
        };
        publish(out, GsmaPencil { pencil });
        Ok(())
    })
}

/// Order of the pencil, zero for a null handle.
///
/// # Safety
/// `pencil` must be null or a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_pencil_dim(pencil: *const GsmaPencil) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { pencil.as_ref() }.map_or(0, |p| p.pencil.dim())
}

/// # Safety
/// `pencil` must be null or a handle not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_pencil_free(pencil: *mut GsmaPencil) {
    if !pencil.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(pencil) });
    }
}

/// Runs an algorithm described by JSON, for example
/// `{"algorithm": 6, "initial": {"kind": "canonical", "n": 2},
///   "selectors": [{"kind": "nearest", "target": [1.0, 0.0]}]}`.
///
/// # Safety
/// `pencil` must be a live handle, `spec_json` NUL-terminated and `out`
/// writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_solve(pencil: *const GsmaPencil, spec_json: *const c_char, out: *mut *mut GsmaSolution) -> GsmaStatus {
    guard(|| {
        non_null(pencil, "pencil")?;
        non_null(out, "out")?;
        // SAFETY: forwarded from the caller.
        let text = unsafe { c_str(spec_json, "spec_json") }?;
        let spec: SolveSpec = serde_json::from_str(text).map_err(|e| lift(Error::Json(e)))?;
        // SAFETY: checked non-null; live per the contract.
        let pencil = unsafe { &(*pencil).pencil };
        let solved = solve_pencil(pencil, &spec).map_err(lift)?;
        let json = serde_json::json!({ "modes": solved.modes });
        let report = CString::new(json.to_string()).map_err(|_| fail(GsmaStatus::Panic, "report contains NUL"))?;
        publish(out, GsmaSolution { solved, report });
        Ok(())
    })
}

/// Number of modes, zero for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_solution_mode_count(solution: *const GsmaSolution) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { solution.as_ref() }.map_or(0, |s| s.solved.estimates.len())
}

fn mode<'a>(solution: *const GsmaSolution, k: usize) -> Result<&'a ModeEstimate, GsmaStatus> {
    non_null(solution, "solution")?;
    // SAFETY: checked non-null; the caller keeps it alive for the call.
    let s = unsafe { &*solution };
    s.solved.estimates.get(k).ok_or_else(|| fail(GsmaStatus::IndexOutOfRange, format!("mode {k} of {}", s.solved.estimates.len())))
}

/// Eigenvalue of mode `k`.
///
/// # Safety
/// `solution` must be a live handle; `re` and `im` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_solution_eigenvalue(solution: *const GsmaSolution, k: usize, re: *mut f64, im: *mut f64) -> GsmaStatus {
    guard(|| {
        non_null(re, "re")?;
        non_null(im, "im")?;
        let lambda = mode(solution, k)?.lambda;
        // SAFETY: checked non-null.
        unsafe {
            *re = lambda.re;
            *im = lambda.im;
        }
        Ok(())
    })
}

/// Copies the unit right vector of mode `k` as interleaved pairs; `len`
/// must be at least twice the pencil order.
///
/// # Safety
/// `solution` must be a live handle and `out` must hold `len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_solution_right_vector(solution: *const GsmaSolution, k: usize, out: *mut f64, len: usize) -> GsmaStatus {
    guard(|| {
        non_null(out, "out")?;
        let v = mode(solution, k)?.v.as_ref().ok_or_else(|| fail(GsmaStatus::SolverFailure, "mode has no right vector"))?;
        if len < 2 * v.len() {
            return Err(fail(GsmaStatus::InvalidInput, format!("buffer of {len} doubles for {} entries", v.len())));
        }
        // SAFETY: the caller guarantees `len` writable doubles.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, len) };
        for (pair, x) in dst.chunks_exact_mut(2).zip(v.iter()) {
            pair[0] = x.re;
            pair[1] = x.im;
        }
        Ok(())
    })
}

/// Per-mode JSON report, owned by the solution.
///
/// # Safety
/// `solution` must be null or a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_solution_report_json(solution: *const GsmaSolution) -> *const c_char {
    // SAFETY: null or live per the contract.
    unsafe { solution.as_ref() }.map_or(std::ptr::null(), |s| s.report.as_ptr())
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn gsma_solution_free(solution: *mut GsmaSolution) {
    if !solution.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(solution) });
    }
}
