//! C ABI for the assignment engine: opaque handles, integer status codes,
//! and JSON hand-off for structured results. The generated header lands in
//! `include/remedia.h` at build time.
//!
//! Conventions:
//! - Constructors return a status and write the handle through an out
//!   pointer; every handle has a matching `_free` that accepts null.
//! - Strings returned to the caller are NUL-terminated copies owned by the
//!   caller; release them with `remedia_string_free`.
//! - On any non-zero status, `remedia_last_error` returns a human-readable
//!   message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use remedia_core::hybrid::SolverMode;
use remedia_core::io;
use remedia_core::model::{ContentItem, PrereqGraph};
use remedia_core::pipeline::{assign_all, slack_report, slates_document, RunConfig};
use remedia_core::Error;

/// Status codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemediaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File access failed.
    Io = 3,
    /// Input data or configuration was rejected.
    InvalidInput = 4,
    /// The solver could not produce a result.
    Solve = 5,
    /// Unexpected internal failure (a bug; see `remedia_last_error`).
    Internal = 6,
}

/// Solver dispatch requested through the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemediaSolver {
    Auto = 0,
    Greedy = 1,
    Gradient = 2,
    Hybrid = 3,
}

impl From<RemediaSolver> for SolverMode {
    fn from(s: RemediaSolver) -> Self {
        match s {
            RemediaSolver::Auto => SolverMode::Auto,
            RemediaSolver::Greedy => SolverMode::ForceGreedy,
            RemediaSolver::Gradient => SolverMode::ForceGradient,
            RemediaSolver::Hybrid => SolverMode::ForceHybrid,
        }
    }
}

/// Opaque run configuration handle.
pub struct RemediaConfig {
    inner: RunConfig,
}

/// Opaque content repository handle.
pub struct RemediaPool {
    items: Vec<ContentItem>,
}

/// Opaque result of one assignment run.
pub struct RemediaAssignment {
    slates_json: CString,
    slack_json: CString,
    n_learners: usize,
    n_uncovered: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(sanitized).expect("NULs removed"));
    });
}

fn status_of(err: &Error) -> RemediaStatus {
    match err {
        Error::Io(_) | Error::Csv(_) => RemediaStatus::Io,
        Error::Parse { .. }
        | Error::Config(_)
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::NonFinite(_)
        | Error::EmptyInput(_)
        | Error::CyclicPrereqs(_) => RemediaStatus::InvalidInput,
        _ => RemediaStatus::Solve,
    }
}

fn fail(err: Error) -> RemediaStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Run `body` with panic isolation so unwinding never crosses the ABI.
fn guarded(body: impl FnOnce() -> RemediaStatus) -> RemediaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {message}"));
            RemediaStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, RemediaStatus> {
    if ptr.is_null() {
        set_error("required string argument is null".into());
        return Err(RemediaStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| {
        set_error(format!("argument is not valid UTF-8: {e}"));
        RemediaStatus::InvalidUtf8
    })
}

/// Latest error message for this thread, or null if none was recorded.
/// The returned copy must be released with `remedia_string_free`.
#[no_mangle]
pub extern "C" fn remedia_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a pointer previously returned by this library and
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn remedia_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Create a configuration with library defaults. Never fails.
#[no_mangle]
pub extern "C" fn remedia_config_new() -> *mut RemediaConfig {
    Box::into_raw(Box::new(RemediaConfig {
        inner: RunConfig::default(),
    }))
}

/// Load a configuration from a TOML file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn remedia_config_load(
    path: *const c_char,
    out: *mut *mut RemediaConfig,
) -> RemediaStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null".into());
            return RemediaStatus::NullPointer;
        }
        let path = match utf8_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match RunConfig::load(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RemediaConfig { inner }));
                RemediaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Override the run seed.
///
/// # Safety
/// `config` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_config_set_seed(
    config: *mut RemediaConfig,
    seed: u64,
) -> RemediaStatus {
    if config.is_null() {
        set_error("config handle is null".into());
        return RemediaStatus::NullPointer;
    }
    (*config).inner.seed = seed;
    RemediaStatus::Ok
}

/// Select which solver handles every learner.
///
/// # Safety
/// `config` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_config_set_solver(
    config: *mut RemediaConfig,
    solver: RemediaSolver,
) -> RemediaStatus {
    if config.is_null() {
        set_error("config handle is null".into());
        return RemediaStatus::NullPointer;
    }
    (*config).inner.regime.mode = solver.into();
    RemediaStatus::Ok
}

/// Release a configuration handle. Null is a no-op.
///
/// # Safety
/// `config` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_config_free(config: *mut RemediaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Load a content repository from CSV
/// (`content_id,duration_min,level,skill_1..skill_K`).
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn remedia_pool_load(
    path: *const c_char,
    out: *mut *mut RemediaPool,
) -> RemediaStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null".into());
            return RemediaStatus::NullPointer;
        }
        let path = match utf8_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match io::load_content_csv(Path::new(path)) {
            Ok(items) => {
                *out = Box::into_raw(Box::new(RemediaPool { items }));
                RemediaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of content items in the repository; 0 for a null handle.
///
/// # Safety
/// `pool` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_pool_size(pool: *const RemediaPool) -> usize {
    if pool.is_null() {
        return 0;
    }
    (*pool).items.len()
}

/// Release a repository handle. Null is a no-op.
///
/// # Safety
/// `pool` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_pool_free(pool: *mut RemediaPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

/// Solve one slate per learner. `learners_path` points to the learners CSV
/// (`learner_id,theta,skill_1..skill_K`); `prereqs_path` may be null for no
/// prerequisite constraints.
///
/// # Safety
/// All non-null pointers must be valid; handles must be live handles from
/// this library; `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn remedia_assign(
    config: *const RemediaConfig,
    pool: *const RemediaPool,
    learners_path: *const c_char,
    prereqs_path: *const c_char,
    out: *mut *mut RemediaAssignment,
) -> RemediaStatus {
    guarded(|| {
        if config.is_null() || pool.is_null() || out.is_null() {
            set_error("config, pool, and out must all be non-null".into());
            return RemediaStatus::NullPointer;
        }
        let learners_path = match utf8_arg(learners_path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let cfg = &(*config).inner;
        let items = &(*pool).items;

        let run = (|| {
            let rows = io::load_learners_csv(Path::new(learners_path))?;
            let learners: Vec<_> = rows
                .into_iter()
                .map(|(id, theta, mastery, n_skills)| {
                    cfg.materialize_learner(id, theta, mastery, n_skills, items.len())
                })
                .collect();
            let prereqs = if prereqs_path.is_null() {
                PrereqGraph::empty()
            } else {
                let path = CStr::from_ptr(prereqs_path)
                    .to_str()
                    .map_err(|e| Error::Config(format!("prereqs path is not UTF-8: {e}")))?;
                io::load_prereqs_csv(Path::new(path))?
            };
            let run = assign_all(&learners, items, &prereqs, cfg)?;
            let slates = serde_json::to_string(&slates_document(&run, cfg)?)
                .map_err(|e| Error::Config(e.to_string()))?;
            let slack = serde_json::to_string(&slack_report(&run, cfg)?)
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok::<_, Error>(RemediaAssignment {
                slates_json: CString::new(slates).expect("JSON has no NULs"),
                slack_json: CString::new(slack).expect("JSON has no NULs"),
                n_learners: run.assignments.len(),
                n_uncovered: run.certificate.len(),
            })
        })();
        match run {
            Ok(result) => {
                *out = Box::into_raw(Box::new(result));
                RemediaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of learners solved; 0 for a null handle.
///
/// # Safety
/// `assignment` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_assignment_count(
    assignment: *const RemediaAssignment,
) -> usize {
    if assignment.is_null() {
        return 0;
    }
    (*assignment).n_learners
}

/// Number of (learner, skill) pairs no repository content can cover;
/// 0 for a null handle.
///
/// # Safety
/// `assignment` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_assignment_uncovered(
    assignment: *const RemediaAssignment,
) -> usize {
    if assignment.is_null() {
        return 0;
    }
    (*assignment).n_uncovered
}

/// Full slates document (selections, traces, config hash) as JSON. Returns
/// null for a null handle; release with `remedia_string_free`.
///
/// # Safety
/// `assignment` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_assignment_slates_json(
    assignment: *const RemediaAssignment,
) -> *mut c_char {
    if assignment.is_null() {
        return std::ptr::null_mut();
    }
    (*assignment).slates_json.clone().into_raw()
}

/// Slack report (uncovered learner-skill pairs) as JSON. Returns null for a
/// null handle; release with `remedia_string_free`.
///
/// # Safety
/// `assignment` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_assignment_slack_json(
    assignment: *const RemediaAssignment,
) -> *mut c_char {
    if assignment.is_null() {
        return std::ptr::null_mut();
    }
    (*assignment).slack_json.clone().into_raw()
}

/// Release an assignment handle. Null is a no-op.
///
/// # Safety
/// `assignment` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn remedia_assignment_free(assignment: *mut RemediaAssignment) {
    if !assignment.is_null() {
        drop(Box::from_raw(assignment));
    }
}
