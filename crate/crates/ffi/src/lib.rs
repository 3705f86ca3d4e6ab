//! C interface to `limid-core`.
//!
//! Every function returns a [`LimidStatus`]. On failure the message is kept
//! per thread and can be read with [`limid_last_error_message`]. Strings
//! handed out by the library must be released with [`limid_string_free`],
//! handles with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use limid_core::emit::{read_solution, write_lp, write_mps};
use limid_core::formulation::{build_improved, build_original, stats, ImprovedOptions, ModelIR, OriginalOptions};
use limid_core::io::{DiagramDocument, IoError};
use limid_core::paths::{enumerate_paths, PathError, PathTable, DEFAULT_PATH_CAP};
use limid_core::solvers::{brute_force, spu_multistart, SolverError, DEFAULT_STRATEGY_CAP};
use limid_core::strategy::Strategy;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimidStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    CapacityExceeded = 5,
    ModelMismatch = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimidFormulation {
    Original = 0,
    Improved = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimidFormat {
    Lp = 0,
    Mps = 1,
}

/// Size accounting of a built model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LimidStats {
    pub n_binary: u64,
    pub n_continuous: u64,
    pub n_constraints: u64,
    pub n_bounds: u64,
    pub one_hot_rows: u64,
    pub local_rows: u64,
    pub lower_bound_rows: u64,
    pub probability_cut_rows: u64,
    pub headline_total: u64,
}

/// A validated diagram together with its effective paths.
pub struct LimidDiagram {
    doc: DiagramDocument,
    table: PathTable,
}

/// A formulation built from a [`LimidDiagram`].
pub struct LimidModel {
    model: ModelIR,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LimidStatus, String);

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse(_) => Failure(LimidStatus::ParseError, e.to_string()),
            IoError::Paths(p) => p.into(),
            IoError::Diagram(_) => Failure(LimidStatus::ValidationError, e.to_string()),
        }
    }
}

impl From<PathError> for Failure {
    fn from(e: PathError) -> Self {
        let status = match e {
            PathError::PathExplosion { .. } => LimidStatus::CapacityExceeded,
            _ => LimidStatus::ValidationError,
        };
        Failure(status, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let status = match e {
            SolverError::StrategySpaceTooLarge { .. } => LimidStatus::CapacityExceeded,
            SolverError::TableMismatch => LimidStatus::ModelMismatch,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording its error and converting panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LimidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LimidStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LimidStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(LimidStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(LimidStatus::InvalidUtf8, "string is not UTF-8".into()))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(LimidStatus::NullArgument, "null handle".into()))
}

fn out_ptr<T>(p: *mut T) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(LimidStatus::NullArgument, "null output pointer".into()))
    } else {
        Ok(())
    }
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn limid_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn limid_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a JSON diagram document and enumerates its paths.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_diagram_from_json(json: *const c_char, out: *mut *mut LimidDiagram) -> LimidStatus {
    guard(|| {
        out_ptr(out)?;
        let doc = DiagramDocument::from_json_str(text(json)?)?;
        let table = enumerate_paths(&doc.diagram, &doc.enumeration_options(DEFAULT_PATH_CAP))?;
        *out = Box::into_raw(Box::new(LimidDiagram { doc, table }));
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a handle from [`limid_diagram_from_json`].
#[no_mangle]
pub unsafe extern "C" fn limid_diagram_free(d: *mut LimidDiagram) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of effective paths.
///
/// # Safety
/// `d` must be a live diagram handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_diagram_path_count(d: *const LimidDiagram, out: *mut u64) -> LimidStatus {
    guard(|| {
        out_ptr(out)?;
        *out = handle(d)?.table.len() as u64;
        Ok(())
    })
}

/// Builds a formulation with default options: lower-bound rows chosen
/// automatically for the original form, probability row on for the improved.
///
/// # Safety
/// `d` must be a live diagram handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_model_build(
    d: *const LimidDiagram,
    kind: LimidFormulation,
    out: *mut *mut LimidModel,
) -> LimidStatus {
    guard(|| {
        out_ptr(out)?;
        let d = handle(d)?;
        let built = match kind {
            LimidFormulation::Original => build_original(&d.doc.diagram, &d.table, OriginalOptions::default()),
            LimidFormulation::Improved => build_improved(&d.doc.diagram, &d.table, ImprovedOptions::default()),
        };
        let model = built.map_err(|e| Failure(LimidStatus::ValidationError, e.to_string()))?;
        *out = Box::into_raw(Box::new(LimidModel { model }));
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from [`limid_model_build`].
#[no_mangle]
pub unsafe extern "C" fn limid_model_free(m: *mut LimidModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_model_stats(m: *const LimidModel, out: *mut LimidStats) -> LimidStatus {
    guard(|| {
        out_ptr(out)?;
        let s = stats(&handle(m)?.model);
        *out = LimidStats {
            n_binary: s.n_binary as u64,
            n_continuous: s.n_continuous as u64,
            n_constraints: s.n_constraints as u64,
            n_bounds: s.n_bounds as u64,
            one_hot_rows: s.one_hot_rows as u64,
            local_rows: s.local_rows as u64,
            lower_bound_rows: s.lower_bound_rows as u64,
            probability_cut_rows: s.probability_cut_rows as u64,
            headline_total: s.headline_total as u64,
        };
        Ok(())
    })
}

/// Renders the model as LP or MPS text into a new string.
///
/// # Safety
/// `m` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_model_write(m: *const LimidModel, format: LimidFormat, out: *mut *mut c_char) -> LimidStatus {
    guard(|| {
        out_ptr(out)?;
        let model = &handle(m)?.model;
        let body = match format {
            LimidFormat::Lp => write_lp(model),
            LimidFormat::Mps => write_mps(model).map_err(|e| Failure(LimidStatus::ValidationError, e.to_string()))?,
        };
        *out = owned(body);
        Ok(())
    })
}

unsafe fn report(d: &LimidDiagram, strategy: &Strategy, eu: f64, eu_out: *mut f64, json_out: *mut *mut c_char) {
    *eu_out = eu;
    if !json_out.is_null() {
        *json_out = owned(strategy.to_json(&d.doc.diagram).to_string());
    }
}

/// Exhaustive search with the default strategy cap. The optimal strategy is
/// written as JSON to `strategy_json` unless it is NULL.
///
/// # Safety
/// `d` must be a live diagram handle; `eu` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_solve_brute(
    d: *const LimidDiagram,
    eu: *mut f64,
    strategy_json: *mut *mut c_char,
) -> LimidStatus {
    guard(|| {
        out_ptr(eu)?;
        let d = handle(d)?;
        let r = brute_force(&d.doc.diagram, &d.table, DEFAULT_STRATEGY_CAP)?;
        report(d, &r.strategy, r.expected_utility, eu, strategy_json);
        Ok(())
    })
}

/// Single policy update from `restarts` random strategies drawn from `seed`.
///
/// # Safety
/// `d` must be a live diagram handle; `eu` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_solve_spu(
    d: *const LimidDiagram,
    restarts: u64,
    seed: u64,
    eu: *mut f64,
    strategy_json: *mut *mut c_char,
) -> LimidStatus {
    guard(|| {
        out_ptr(eu)?;
        let d = handle(d)?;
        let r = spu_multistart(&d.doc.diagram, &d.table, restarts, seed)?.best;
        report(d, &r.strategy, r.expected_utility, eu, strategy_json);
        Ok(())
    })
}

/// Maps a `name value` solution file of `m` back to a strategy and its
/// expected utility.
///
/// # Safety
/// `d` and `m` must be live handles, `m` built from `d`; `solution` must be
/// a NUL-terminated string; `eu` must be writable.
#[no_mangle]
pub unsafe extern "C" fn limid_read_solution(
    d: *const LimidDiagram,
    m: *const LimidModel,
    solution: *const c_char,
    eu: *mut f64,
    strategy_json: *mut *mut c_char,
) -> LimidStatus {
    guard(|| {
        out_ptr(eu)?;
        let (d, m) = (handle(d)?, handle(m)?);
        let r = read_solution(&m.model, &d.doc.diagram, &d.table, text(solution)?).map_err(|e| {
            let status = match e {
                limid_core::emit::EmitError::UnknownVariable { .. } | limid_core::emit::EmitError::Malformed { .. } => {
                    LimidStatus::ParseError
                }
                limid_core::emit::EmitError::ModelMismatch(_) => LimidStatus::ModelMismatch,
                _ => LimidStatus::ValidationError,
            };
            Failure(status, e.to_string())
        })?;
        report(d, &r.strategy, r.expected_utility, eu, strategy_json);
        Ok(())
    })
}
