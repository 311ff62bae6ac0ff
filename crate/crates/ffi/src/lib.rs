//! C ABI over `misalloc`.
//!
//! Objects are opaque handles created from JSON and released with their
//! `_free` function. Every fallible call returns a [`MisallocStatus`]; on
//! failure the message is kept per thread and read with
//! [`misalloc_last_error`]. Strings returned by the library are released with
//! [`misalloc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use misalloc::alloc::{
    efficient_allocation, greedy_controlled_allocation, misallocation_loss, worst_case_allocation, TieBreak,
};
use misalloc::bounds::{solve_bounds_seeded, AnchorMode, BoundsProblem};
use misalloc::model::{caps_at_ceiling, FeasibleSet, MarketSpec};
use misalloc::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisallocStatus {
    Ok = 0,
    InvalidInput = 1,
    Domain = 2,
    Infeasible = 3,
    NonConvergence = 4,
    CostTie = 5,
    Degenerate = 6,
    EmptyInterval = 7,
    TooLarge = 8,
    Row = 9,
    Io = 10,
    NullPointer = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

pub const MISALLOC_TIE_BREAK_ERROR: u32 = 0;
pub const MISALLOC_TIE_BREAK_INDEX: u32 = 1;
pub const MISALLOC_ANCHORS_FIXED: u32 = 0;
pub const MISALLOC_ANCHORS_INTERVAL: u32 = 1;

/// Markets facing one ceiling with a fixed supply.
pub struct MisallocMarkets {
    markets: Vec<MarketSpec>,
    feasible: FeasibleSet,
}

/// A robust-bounds problem.
pub struct MisallocBoundsProblem {
    problem: BoundsProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn status_of(e: &Error) -> MisallocStatus {
    match e {
        Error::Domain { .. } => MisallocStatus::Domain,
        Error::InvalidInput(_) => MisallocStatus::InvalidInput,
        Error::Infeasible(_) => MisallocStatus::Infeasible,
        Error::NonConvergence { .. } => MisallocStatus::NonConvergence,
        Error::CostTie { .. } => MisallocStatus::CostTie,
        Error::Degenerate(_) => MisallocStatus::Degenerate,
        Error::EmptyInterval => MisallocStatus::EmptyInterval,
        Error::TooLarge { .. } => MisallocStatus::TooLarge,
        Error::Row { .. } => MisallocStatus::Row,
        Error::Io(_) => MisallocStatus::Io,
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MisallocStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Failure {
    Failure(MisallocStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MisallocStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MisallocStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside misalloc".into());
            MisallocStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(MisallocStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn write_slice(out: *mut f64, len: usize, values: &[f64]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < values.len() {
        return Err(Failure(
            MisallocStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

unsafe fn put<T>(out: *mut T, value: T) {
    if !out.is_null() {
        *out = value;
    }
}

/// Copy of the last error message on this thread, or null if the last call
/// succeeded. Release with [`misalloc_string_free`].
#[no_mangle]
pub extern "C" fn misalloc_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library, released once.
#[no_mangle]
pub unsafe extern "C" fn misalloc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn misalloc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds markets from a JSON array of market specs; caps are demand at `ceiling`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn misalloc_markets_from_json(
    json: *const c_char,
    ceiling: f64,
    supply: f64,
    out: *mut *mut MisallocMarkets,
) -> MisallocStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let markets: Vec<MarketSpec> = serde_json::from_str(read_str(json, "json")?).map_err(Error::from)?;
        for m in &markets {
            m.validate()?;
        }
        let feasible = FeasibleSet::new(caps_at_ceiling(&markets, ceiling), supply)?;
        *out = Box::into_raw(Box::new(MisallocMarkets { markets, feasible }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`misalloc_markets_from_json`], released once.
#[no_mangle]
pub unsafe extern "C" fn misalloc_markets_free(h: *mut MisallocMarkets) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of markets, 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn misalloc_markets_len(h: *const MisallocMarkets) -> usize {
    h.as_ref().map_or(0, |m| m.markets.len())
}

/// Surplus-maximizing split of the supply; writes quantities and the common
/// shadow price.
///
/// # Safety
/// `h` must be live; `q_out` must hold `len` doubles; `price_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn misalloc_efficient_allocation(
    h: *const MisallocMarkets,
    q_out: *mut f64,
    len: usize,
    price_out: *mut f64,
) -> MisallocStatus {
    guard(|| {
        let m = h.as_ref().ok_or_else(|| null("handle"))?;
        let (a, p) = efficient_allocation(&m.markets, &m.feasible)?;
        write_slice(q_out, len, &a.quantities)?;
        put(price_out, p);
        Ok(())
    })
}

/// Delivery-cost-minimizing allocation under the ceiling.
///
/// # Safety
/// `h` must be live; `q_out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn misalloc_controlled_allocation(
    h: *const MisallocMarkets,
    tie_break: u32,
    q_out: *mut f64,
    len: usize,
) -> MisallocStatus {
    guard(|| {
        let m = h.as_ref().ok_or_else(|| null("handle"))?;
        let tie = match tie_break {
            MISALLOC_TIE_BREAK_ERROR => TieBreak::Error,
            MISALLOC_TIE_BREAK_INDEX => TieBreak::Index,
            other => {
                return Err(Failure(
                    MisallocStatus::InvalidInput,
                    format!("unknown tie-break {other}"),
                ));
            }
        };
        let a = greedy_controlled_allocation(&m.markets, &m.feasible, tie)?;
        write_slice(q_out, len, &a.quantities)
    })
}

/// Surplus-minimizing feasible allocation and its cutoff value.
///
/// # Safety
/// `h` must be live; `q_out` must hold `len` doubles; `cutoff_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn misalloc_worst_case_allocation(
    h: *const MisallocMarkets,
    q_out: *mut f64,
    len: usize,
    cutoff_out: *mut f64,
) -> MisallocStatus {
    guard(|| {
        let m = h.as_ref().ok_or_else(|| null("handle"))?;
        let w = worst_case_allocation(&m.markets, &m.feasible)?;
        write_slice(q_out, len, &w.allocation.quantities)?;
        put(cutoff_out, w.cutoff);
        Ok(())
    })
}

/// Surplus lost by `q` relative to the efficient split.
///
/// # Safety
/// `h` must be live; `q` must hold `len` doubles; `loss_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn misalloc_misallocation_loss(
    h: *const MisallocMarkets,
    q: *const f64,
    len: usize,
    loss_out: *mut f64,
) -> MisallocStatus {
    guard(|| {
        let m = h.as_ref().ok_or_else(|| null("handle"))?;
        if q.is_null() {
            return Err(null("q"));
        }
        if loss_out.is_null() {
            return Err(null("loss_out"));
        }
        let q = std::slice::from_raw_parts(q, len);
        *loss_out = misallocation_loss(&m.markets, &m.feasible, q)?;
        Ok(())
    })
}

/// Parses a bounds problem from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn misalloc_bounds_problem_from_json(
    json: *const c_char,
    out: *mut *mut MisallocBoundsProblem,
) -> MisallocStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let problem: BoundsProblem = serde_json::from_str(read_str(json, "json")?).map_err(Error::from)?;
        problem.validate()?;
        *out = Box::into_raw(Box::new(MisallocBoundsProblem { problem }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`misalloc_bounds_problem_from_json`], released once.
#[no_mangle]
pub unsafe extern "C" fn misalloc_bounds_problem_free(h: *mut MisallocBoundsProblem) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

fn anchor_mode(mode: u32) -> Result<AnchorMode, Failure> {
    match mode {
        MISALLOC_ANCHORS_FIXED => Ok(AnchorMode::Fixed),
        MISALLOC_ANCHORS_INTERVAL => Ok(AnchorMode::Interval),
        other => Err(Failure(
            MisallocStatus::InvalidInput,
            format!("unknown anchor mode {other}"),
        )),
    }
}

/// Lower and upper bounds on misallocation loss.
///
/// # Safety
/// `h` must be live; `lower_out` and `upper_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn misalloc_solve_bounds(
    h: *const MisallocBoundsProblem,
    anchors: u32,
    seed: u64,
    lower_out: *mut f64,
    upper_out: *mut f64,
) -> MisallocStatus {
    guard(|| {
        let p = h.as_ref().ok_or_else(|| null("handle"))?;
        if lower_out.is_null() || upper_out.is_null() {
            return Err(null("output"));
        }
        let r = solve_bounds_seeded(&p.problem, anchor_mode(anchors)?, seed)?;
        *lower_out = r.phi_lower;
        *upper_out = r.phi_upper;
        Ok(())
    })
}

/// Full bounds result as JSON, including extremal curves. Release the string
/// with [`misalloc_string_free`].
///
/// # Safety
/// `h` must be live; `json_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn misalloc_solve_bounds_json(
    h: *const MisallocBoundsProblem,
    anchors: u32,
    seed: u64,
    json_out: *mut *mut c_char,
) -> MisallocStatus {
    guard(|| {
        let p = h.as_ref().ok_or_else(|| null("handle"))?;
        if json_out.is_null() {
            return Err(null("json_out"));
        }
        *json_out = ptr::null_mut();
        let r = solve_bounds_seeded(&p.problem, anchor_mode(anchors)?, seed)?;
        let text = serde_json::to_string(&r).map_err(Error::from)?;
        *json_out = CString::new(text)
            .map_err(|e| Failure(MisallocStatus::InvalidInput, e.to_string()))?
            .into_raw();
        Ok(())
    })
}
