//! C ABI over `pulseprop`.
//!
//! Every fallible call returns a [`PpStatus`]; on failure the message is
//! available from [`pp_last_error_message`] on the same thread. Objects are
//! opaque handles released by their `*_free` function. Strings returned by the
//! library are released with [`pp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pulseprop::error::Error;
use pulseprop::labelprop::{self, PropagationConfig, PropagationGraph};
use pulseprop::metrics;
use pulseprop::pipeline::{self, PipelineConfig};
use pulseprop::preprocess::{self, Bandpass, BandpassSpec};
use pulseprop::{statlabel, PulseMatrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidLabel = 5,
    TooShort = 6,
    Degenerate = 7,
    Graph = 8,
    Json = 9,
    Utf8 = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PpStatus {
    match e {
        Error::Io { .. } | Error::MissingInput(_) => PpStatus::Io,
        Error::Parse { .. } => PpStatus::Parse,
        Error::InvalidLabel(_) => PpStatus::InvalidLabel,
        Error::TooShort { .. } => PpStatus::TooShort,
        Error::Flatline | Error::Unlabelable(_) | Error::SingleClass(_) | Error::TooFewMinority { .. } => {
            PpStatus::Degenerate
        }
        Error::Graph(_) => PpStatus::Graph,
        Error::Json(_) => PpStatus::Json,
        Error::Stage { source, .. } => status_of(source),
        _ => PpStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (PpStatus, String)>) -> PpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PpStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PpStatus::Panic
        }
    }
}

fn lib(e: Error) -> (PpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (PpStatus, String) {
    (PpStatus::NullPointer, format!("{name} is null"))
}

/// Borrow `n` elements, treating `n == 0` as empty regardless of `p`.
unsafe fn input<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], (PpStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a, T>(p: *mut T, n: usize, name: &str) -> Result<&'a mut [T], (PpStatus, String)> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ----------------------------------------------------------------- statistics

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PpPulseStats {
    pub skewness: f64,
    pub kurtosis: f64,
    pub std: f64,
}

/// Skewness, kurtosis and standard deviation of one pulse.
///
/// # Safety
/// `x` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_pulse_stats(x: *const f64, n: usize, out: *mut PpPulseStats) -> PpStatus {
    guard(|| {
        let x = input(x, n, "x")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = statlabel::pulse_stats(x).map_err(lib)?;
        *out = PpPulseStats {
            skewness: s.skewness,
            kurtosis: s.kurtosis,
            std: s.std,
        };
        Ok(())
    })
}

// -------------------------------------------------------------------- filter

/// Opaque zero-phase band-pass filter.
pub struct PpBandpass(Bandpass);

/// Design a Butterworth band-pass filter.
///
/// # Safety
/// `out` must be writable; on success it receives a handle to release with
/// [`pp_bandpass_free`].
#[no_mangle]
pub unsafe extern "C" fn pp_bandpass_new(
    low_cut_hz: f64,
    high_cut_hz: f64,
    order: usize,
    sampling_rate_hz: f64,
    out: *mut *mut PpBandpass,
) -> PpStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = BandpassSpec {
            low_cut_hz,
            high_cut_hz,
            order,
        };
        let f = preprocess::design_bandpass(&spec, sampling_rate_hz).map_err(lib)?;
        *out = Box::into_raw(Box::new(PpBandpass(f)));
        Ok(())
    })
}

/// Zero-phase filtering of `n` samples from `x` into `y` (which may alias `x`).
///
/// # Safety
/// `filter` must be a live handle; `x` and `y` must each span `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pp_bandpass_filtfilt(filter: *const PpBandpass, x: *const f64, n: usize, y: *mut f64) -> PpStatus {
    guard(|| {
        let f = filter.as_ref().ok_or_else(|| null("filter"))?;
        let filtered = preprocess::filtfilt(&f.0, input(x, n, "x")?).map_err(lib)?;
        output(y, n, "y")?.copy_from_slice(&filtered);
        Ok(())
    })
}

/// Magnitude response at `f_hz`; NaN for a null handle.
///
/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pp_bandpass_magnitude(filter: *const PpBandpass, f_hz: f64) -> f64 {
    filter.as_ref().map_or(f64::NAN, |f| f.0.magnitude(f_hz))
}

/// # Safety
/// `filter` must be null or a handle from [`pp_bandpass_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_bandpass_free(filter: *mut PpBandpass) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

// ---------------------------------------------------------------------- graph

/// Opaque propagation graph.
pub struct PpGraph(PropagationGraph, PropagationConfig);

/// Build a binary-weight KNN-union graph over `n_rows` row-major feature
/// vectors. `labels` holds 0, 1 or -1 (unlabelled) per row.
///
/// # Safety
/// `features` must span `n_rows * dim` doubles, `labels` `n_rows` bytes, and
/// `out` must be writable; release the handle with [`pp_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn pp_graph_build(
    features: *const f64,
    n_rows: usize,
    dim: usize,
    labels: *const i8,
    n_neighbors: usize,
    out: *mut *mut PpGraph,
) -> PpStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let data = input(features, n_rows * dim, "features")?;
        let labels = input(labels, n_rows, "labels")?;
        let rows = data.chunks_exact(dim.max(1)).map(<[f64]>::to_vec).collect();
        let x = PulseMatrix::from_rows(rows).map_err(lib)?;
        let cfg = PropagationConfig {
            n_neighbors,
            ..Default::default()
        };
        let g = labelprop::build_graph(&x, labels, &cfg).map_err(lib)?;
        *out = Box::into_raw(Box::new(PpGraph(g, cfg)));
        Ok(())
    })
}

/// Number of nodes; 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pp_graph_len(graph: *const PpGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.len())
}

/// Propagate labels and write each node's artifact-class probability to
/// `prob` (length [`pp_graph_len`]). `n_stranded`, when non-null, receives the
/// count of nodes that fell back to the labelled prior.
///
/// # Safety
/// `graph` must be a live handle; `prob` must span `pp_graph_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pp_graph_propagate(graph: *const PpGraph, prob: *mut f64, n_stranded: *mut usize) -> PpStatus {
    guard(|| {
        let PpGraph(g, cfg) = graph.as_ref().ok_or_else(|| null("graph"))?;
        let out = labelprop::propagate(g, cfg);
        let dst = output(prob, g.len(), "prob")?;
        for (i, p) in dst.iter_mut().enumerate() {
            *p = out.distribution.prob(i, 1);
        }
        if let Some(s) = n_stranded.as_mut() {
            *s = out.stranded.len();
        }
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from [`pp_graph_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_graph_free(graph: *mut PpGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

// -------------------------------------------------------------------- metrics

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PpMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub kappa: f64,
    pub csi: f64,
}

/// Scalar metrics of a confusion matrix; zero-denominator metrics are 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_metrics_from_confusion(tp: u64, fp: u64, tn: u64, fn_: u64, out: *mut PpMetrics) -> PpStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = metrics::scalar_metrics(&metrics::ConfusionMatrix { tp, fp, tn, fn_ });
        *out = PpMetrics {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            mcc: m.mcc,
            kappa: m.kappa,
            csi: m.csi,
        };
        Ok(())
    })
}

/// Area under the ROC curve of `scores` against 0/1 `truth`.
///
/// # Safety
/// `scores` and `truth` must span `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_roc_auc(scores: *const f64, truth: *const i8, n: usize, out: *mut f64) -> PpStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (_, auc) = metrics::roc_auc(input(scores, n, "scores")?, input(truth, n, "truth")?).map_err(lib)?;
        *out = auc;
        Ok(())
    })
}

// ------------------------------------------------------------------- pipeline

/// Run the full pipeline from a JSON configuration (unknown keys rejected,
/// missing keys defaulted). On success `*report_json` receives a JSON array
/// of evaluation reports, to release with [`pp_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn pp_pipeline_run(config_json: *const c_char, report_json: *mut *mut c_char) -> PpStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let out = report_json.as_mut().ok_or_else(|| null("report_json"))?;
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| (PpStatus::Utf8, e.to_string()))?;
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| lib(e.into()))?;
        let run = pipeline::run_pipeline(&cfg).map_err(lib)?;
        let json = serde_json::to_string(&run.reports).map_err(|e| lib(e.into()))?;
        *out = CString::new(json).map_err(|e| (PpStatus::Utf8, e.to_string()))?.into_raw();
        Ok(())
    })
}
