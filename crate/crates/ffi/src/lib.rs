//! C ABI over `chain-ipf`.
//!
//! Objects cross the boundary as opaque handles created by the `*_from_*`
//! functions or by a fit, and released with the matching `*_free`. Every fallible call
//! returns a [`ChainIpfStatus`]; on failure the message is available through
//! [`chain_ipf_last_error`] on the same thread. Strings returned to the caller
//! are owned by the caller and released with [`chain_ipf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chain_ipf::cml_ipf::{fit_cml, CmlOptions};
use chain_ipf::io::{parse_dataset, parse_model, write_model, write_trace_csv};
use chain_ipf::ml_ipf::{fit_ml, FitConfig, Termination};
use chain_ipf::{
    conditional_log_likelihood, joint_probability, log_likelihood, ChainFactorGraph, Dataset,
    Error, FitTrace,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainIpfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed model, dataset or trace text.
    Schema = 3,
    /// The model violates a structural rule.
    Validation = 4,
    /// A numerical failure during inference or fitting.
    Numerical = 5,
    /// The model/data combination is not supported by the requested fit.
    Unsupported = 6,
    InvalidArgument = 7,
    /// A panic was caught at the boundary.
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainIpfObjective {
    Likelihood = 0,
    ConditionalLikelihood = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainIpfFitOptions {
    pub max_cycles: usize,
    pub tol: f64,
    pub potential_floor: f64,
}

pub struct ChainIpfGraph(ChainFactorGraph);

pub struct ChainIpfDataset(Dataset);

pub struct ChainIpfTrace(FitTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ChainIpfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Schema { .. }
            | Error::UnknownState { .. }
            | Error::UnknownVariable { .. }
            | Error::NonPositiveWeight { .. } => ChainIpfStatus::Schema,
            Error::Validation(_) => ChainIpfStatus::Validation,
            Error::UnsupportedRegime(_) | Error::NonSigmoidShape(_) => ChainIpfStatus::Unsupported,
            Error::InvalidArgument(_) | Error::NonPositiveFactor(_) => {
                ChainIpfStatus::InvalidArgument
            }
            _ => ChainIpfStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ChainIpfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChainIpfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            ChainIpfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ChainIpfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(ChainIpfStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).expect("library output has no NULs").into_raw()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chain_ipf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default fit options: 500 cycles, tolerance 1e-7, no floor.
#[no_mangle]
pub extern "C" fn chain_ipf_fit_options_default() -> ChainIpfFitOptions {
    let d = FitConfig::default();
    ChainIpfFitOptions {
        max_cycles: d.max_cycles,
        tol: d.tol,
        potential_floor: d.potential_floor,
    }
}

/// Parses and validates a JSON model.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_graph_from_json(
    json: *const c_char,
    out: *mut *mut ChainIpfGraph,
) -> ChainIpfStatus {
    guard(|| {
        let g = parse_model(text(json, "json")?)?;
        put(out, Box::into_raw(Box::new(ChainIpfGraph(g))), "out")
    })
}

/// Serializes a model to JSON; free the result with `chain_ipf_string_free`.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_graph_to_json(
    graph: *const ChainIpfGraph,
    out: *mut *mut c_char,
) -> ChainIpfStatus {
    guard(|| {
        let g = borrow(graph, "graph")?;
        put(out, owned_string(write_model(&g.0)), "out")
    })
}

/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_graph_free(graph: *mut ChainIpfGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_graph_num_variables(
    graph: *const ChainIpfGraph,
    out: *mut usize,
) -> ChainIpfStatus {
    guard(|| put(out, borrow(graph, "graph")?.0.space().len(), "out"))
}

/// `P(x)` for a full assignment of `len` state indices in variable order.
///
/// # Safety
/// `graph` must be a live handle, `config` must point to `len` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_joint_probability(
    graph: *const ChainIpfGraph,
    config: *const usize,
    len: usize,
    out: *mut f64,
) -> ChainIpfStatus {
    guard(|| {
        let g = borrow(graph, "graph")?;
        if config.is_null() {
            return Err(null("config"));
        }
        let config = std::slice::from_raw_parts(config, len);
        put(out, joint_probability(&g.0, config)?, "out")
    })
}

/// Parses a CSV dataset against the model's variables.
///
/// # Safety
/// `graph` must be a live handle, `csv` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_dataset_from_csv(
    graph: *const ChainIpfGraph,
    csv: *const c_char,
    out: *mut *mut ChainIpfDataset,
) -> ChainIpfStatus {
    guard(|| {
        let g = borrow(graph, "graph")?;
        let d = parse_dataset(text(csv, "csv")?, g.0.space())?;
        put(out, Box::into_raw(Box::new(ChainIpfDataset(d))), "out")
    })
}

/// # Safety
/// `data` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_dataset_free(data: *mut ChainIpfDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_dataset_len(
    data: *const ChainIpfDataset,
    out: *mut usize,
) -> ChainIpfStatus {
    guard(|| put(out, borrow(data, "data")?.0.len(), "out"))
}

/// Weighted average log-likelihood of the data.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_log_likelihood(
    graph: *const ChainIpfGraph,
    data: *const ChainIpfDataset,
    out: *mut f64,
) -> ChainIpfStatus {
    guard(|| {
        let v = log_likelihood(&borrow(graph, "graph")?.0, &borrow(data, "data")?.0)?;
        put(out, v, "out")
    })
}

/// Weighted average conditional log-likelihood (clamped cells conditioned on).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_conditional_log_likelihood(
    graph: *const ChainIpfGraph,
    data: *const ChainIpfDataset,
    out: *mut f64,
) -> ChainIpfStatus {
    guard(|| {
        let v = conditional_log_likelihood(&borrow(graph, "graph")?.0, &borrow(data, "data")?.0)?;
        put(out, v, "out")
    })
}

/// Fits the model by IPF. `options` may be NULL for defaults. The input
/// graph is not modified; the fitted model is available from the trace.
///
/// # Safety
/// Handles must be live; `options` must be NULL or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_fit(
    graph: *const ChainIpfGraph,
    data: *const ChainIpfDataset,
    objective: ChainIpfObjective,
    options: *const ChainIpfFitOptions,
    out: *mut *mut ChainIpfTrace,
) -> ChainIpfStatus {
    guard(|| {
        let g = &borrow(graph, "graph")?.0;
        let d = &borrow(data, "data")?.0;
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| chain_ipf_fit_options_default());
        let config = FitConfig {
            max_cycles: o.max_cycles,
            tol: o.tol,
            potential_floor: o.potential_floor,
            ..FitConfig::default()
        };
        let trace = match objective {
            ChainIpfObjective::Likelihood => fit_ml(g, d, &config)?,
            ChainIpfObjective::ConditionalLikelihood => {
                fit_cml(g, d, &config, &CmlOptions::default())?
            }
        };
        put(out, Box::into_raw(Box::new(ChainIpfTrace(trace))), "out")
    })
}

/// # Safety
/// `trace` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_trace_free(trace: *mut ChainIpfTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of trace entries (cycle 0 is the initial model).
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_trace_len(
    trace: *const ChainIpfTrace,
    out: *mut usize,
) -> ChainIpfStatus {
    guard(|| put(out, borrow(trace, "trace")?.0.cycles.len(), "out"))
}

/// Objective after `cycle` cycles.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_trace_objective(
    trace: *const ChainIpfTrace,
    cycle: usize,
    out: *mut f64,
) -> ChainIpfStatus {
    guard(|| {
        let t = &borrow(trace, "trace")?.0;
        let c = t.cycles.get(cycle).ok_or_else(|| {
            Failure(
                ChainIpfStatus::InvalidArgument,
                format!("cycle {cycle} out of range (trace has {})", t.cycles.len()),
            )
        })?;
        put(out, c.objective, "out")
    })
}

/// Whether the fit met its tolerance before the cycle limit.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_trace_converged(
    trace: *const ChainIpfTrace,
    out: *mut bool,
) -> ChainIpfStatus {
    guard(|| {
        let t = &borrow(trace, "trace")?.0;
        put(out, t.termination == Termination::Converged, "out")
    })
}

/// Copy of the fitted model as a new graph handle.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_trace_graph(
    trace: *const ChainIpfTrace,
    out: *mut *mut ChainIpfGraph,
) -> ChainIpfStatus {
    guard(|| {
        let g = borrow(trace, "trace")?.0.graph.clone();
        put(out, Box::into_raw(Box::new(ChainIpfGraph(g))), "out")
    })
}

/// Trace as CSV (`cycle,objective,wall_ms,optimizer,seed`).
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chain_ipf_trace_to_csv(
    trace: *const ChainIpfTrace,
    out: *mut *mut c_char,
) -> ChainIpfStatus {
    guard(|| {
        let t = borrow(trace, "trace")?;
        put(out, owned_string(write_trace_csv(&t.0)), "out")
    })
}
