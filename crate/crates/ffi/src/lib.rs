//! C ABI over the faultline classifier: opaque matrix handles, status
//! codes, and flat-buffer variants of featurization, the closed-form
//! log-likelihoods, window classification, and ridge least squares.
//!
//! Conventions:
//! - Every fallible call returns [`FlStatus`]; `FL_STATUS_OK` is 0.
//! - On failure, a human-readable message is stored per thread and can be
//!   read with [`fl_last_error_message`] until the next faultline call on
//!   that thread.
//! - Matrix buffers are row-major `f64`. Sequence buffers are
//!   sample-major: sample `t` of a `samples × dim` buffer occupies
//!   `[t*dim, (t+1)*dim)`.
//! - Handles returned through out-pointers are owned by the caller and
//!   must be released with [`fl_matrix_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};

use faultline::bayes::{
    classify_sequence, classify_single, extract_features, loglik_fault, loglik_normal, Label,
};
use faultline::estimation::{fit_ls, FitConfig};
use faultline::kernel::{featurize, Dataset, KernelConfig, TransitionMatrix};
use faultline::Error;

/// Status of a faultline call. Nonzero values are failures; the matching
/// message is available from [`fl_last_error_message`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments were structurally invalid (bad sizes, non-finite values).
    InvalidInput = 2,
    /// Two arguments disagreed about a dimension.
    DimensionMismatch = 3,
    /// A matrix was numerically singular where a solve was required.
    Singular = 4,
    /// A computation produced non-finite values or failed to converge.
    Numerical = 5,
    /// Text input could not be parsed.
    Parse = 6,
    /// An I/O operation failed.
    Io = 7,
    /// The library panicked; the handle state is unchanged.
    Panic = 8,
}

/// Opaque transition-matrix handle.
pub struct FlMatrix {
    inner: TransitionMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::default();
    });
}

fn fail(status: FlStatus, message: &str) -> FlStatus {
    set_error(message);
    status
}

fn status_of(error: &Error) -> FlStatus {
    match error {
        Error::InvalidInput(_) => FlStatus::InvalidInput,
        Error::DimensionMismatch { .. } => FlStatus::DimensionMismatch,
        Error::Singular { .. } => FlStatus::Singular,
        Error::Numerical(_) => FlStatus::Numerical,
        Error::Parse { .. } => FlStatus::Parse,
        Error::Io { .. } => FlStatus::Io,
    }
}

fn from_error(error: &Error) -> FlStatus {
    fail(status_of(error), &error.to_string())
}

/// Runs a closure, translating panics into `FL_STATUS_PANIC` instead of
/// unwinding across the C boundary.
fn guard(body: impl FnOnce() -> FlStatus) -> FlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => {
            if status == FlStatus::Ok {
                clear_error();
            }
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unidentified panic".into());
            fail(FlStatus::Panic, &format!("internal panic: {message}"))
        }
    }
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

macro_rules! require {
    ($ptr:expr, $name:literal) => {
        match $ptr {
            Some(value) => value,
            None => return fail(FlStatus::NullArgument, concat!($name, " is null")),
        }
    };
}

macro_rules! nonnull {
    ($ptr:expr, $name:literal) => {
        if $ptr.is_null() {
            return fail(FlStatus::NullArgument, concat!($name, " is null"));
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing this thread's most recent failure, or an empty
/// string after a success. The pointer stays valid until the next
/// faultline call on the same thread.
#[no_mangle]
pub extern "C" fn fl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a `rows × cols` matrix handle from row-major entries.
///
/// # Safety
/// `entries` must point to `rows * cols` readable doubles and `out` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fl_matrix_new(
    entries: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut FlMatrix,
) -> FlStatus {
    guard(|| {
        nonnull!(out, "out");
        let len = rows.checked_mul(cols).unwrap_or(0);
        if len == 0 {
            return fail(FlStatus::InvalidInput, "matrix must be non-empty");
        }
        let entries = require!(unsafe { slice_arg(entries, len) }, "entries");
        match TransitionMatrix::raw(DMatrix::from_row_slice(rows, cols, entries)) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(FlMatrix { inner })) };
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Releases a matrix handle. Null is a no-op.
///
/// # Safety
/// `matrix` must be null or a handle obtained from this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fl_matrix_free(matrix: *mut FlMatrix) {
    if !matrix.is_null() {
        drop(unsafe { Box::from_raw(matrix) });
    }
}

/// Writes the matrix's row count to `out`.
///
/// # Safety
/// `matrix` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fl_matrix_rows(matrix: *const FlMatrix, out: *mut usize) -> FlStatus {
    guard(|| {
        nonnull!(matrix, "matrix");
        nonnull!(out, "out");
        unsafe { *out = (*matrix).inner.output_dim() };
        FlStatus::Ok
    })
}

/// Writes the matrix's column count to `out`.
///
/// # Safety
/// `matrix` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fl_matrix_cols(matrix: *const FlMatrix, out: *mut usize) -> FlStatus {
    guard(|| {
        nonnull!(matrix, "matrix");
        nonnull!(out, "out");
        unsafe { *out = (*matrix).inner.feature_dim() };
        FlStatus::Ok
    })
}

/// Copies the matrix entries (row-major) into `out`, which holds `len`
/// doubles; `len` must equal rows × cols.
///
/// # Safety
/// `matrix` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fl_matrix_copy_entries(
    matrix: *const FlMatrix,
    out: *mut f64,
    len: usize,
) -> FlStatus {
    guard(|| {
        nonnull!(matrix, "matrix");
        nonnull!(out, "out");
        let entries = unsafe { (*matrix).inner.entries() };
        let expected = entries.nrows() * entries.ncols();
        if len != expected {
            return fail(
                FlStatus::DimensionMismatch,
                &format!("entry buffer holds {len} doubles, matrix needs {expected}"),
            );
        }
        let out = unsafe { std::slice::from_raw_parts_mut(out, len) };
        for i in 0..entries.nrows() {
            for j in 0..entries.ncols() {
                out[i * entries.ncols() + j] = entries[(i, j)];
            }
        }
        FlStatus::Ok
    })
}

/// Writes the feature dimension p = degree·(n + k) + 1 of the polynomial
/// kernel to `out`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_feature_dim(
    n: usize,
    k: usize,
    degree: usize,
    out: *mut usize,
) -> FlStatus {
    guard(|| {
        nonnull!(out, "out");
        match KernelConfig::new(n, k, degree) {
            Ok(config) => {
                unsafe { *out = config.p() };
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Featurizes a state `x` (length n) and input `u` (length k) under the
/// degree-`degree` polynomial kernel, writing p doubles to `out`.
///
/// # Safety
/// `x` and `u` must be readable for their stated lengths; `out` must be
/// writable for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fl_featurize(
    n: usize,
    k: usize,
    degree: usize,
    x: *const f64,
    u: *const f64,
    out: *mut f64,
    out_len: usize,
) -> FlStatus {
    guard(|| {
        nonnull!(out, "out");
        let x = require!(unsafe { slice_arg(x, n) }, "x");
        let u = require!(unsafe { slice_arg(u, k) }, "u");
        let config = match KernelConfig::new(n, k, degree) {
            Ok(config) => config,
            Err(e) => return from_error(&e),
        };
        if out_len != config.p() {
            return fail(
                FlStatus::DimensionMismatch,
                &format!("feature buffer holds {out_len} doubles, kernel needs {}", config.p()),
            );
        }
        match featurize(&DVector::from_column_slice(x), &DVector::from_column_slice(u), &config) {
            Ok(features) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out, out_len) };
                out.copy_from_slice(features.as_slice());
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

type PointFn = fn(&DVector<f64>, &DVector<f64>, &TransitionMatrix) -> faultline::Result<f64>;

unsafe fn point_eval(
    matrix: *const FlMatrix,
    s: *const f64,
    s_len: usize,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    eval: PointFn,
) -> FlStatus {
    guard(|| {
        nonnull!(matrix, "matrix");
        nonnull!(out, "out");
        let s = require!(unsafe { slice_arg(s, s_len) }, "s");
        let x = require!(unsafe { slice_arg(x, x_len) }, "x");
        let matrix = unsafe { &(*matrix).inner };
        match eval(&DVector::from_column_slice(x), &DVector::from_column_slice(s), matrix) {
            Ok(value) => {
                unsafe { *out = value };
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Log-density of `x` under the no-fault model N(x; As, I).
///
/// # Safety
/// `matrix` must be a live handle; `s`, `x` readable for their lengths;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fl_loglik_normal(
    matrix: *const FlMatrix,
    s: *const f64,
    s_len: usize,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> FlStatus {
    unsafe { point_eval(matrix, s, s_len, x, x_len, out, loglik_normal) }
}

/// Log of the fault marginal: x = Bs + ε with B matrix-normal around A.
///
/// # Safety
/// Same contract as [`fl_loglik_normal`].
#[no_mangle]
pub unsafe extern "C" fn fl_loglik_fault(
    matrix: *const FlMatrix,
    s: *const f64,
    s_len: usize,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> FlStatus {
    unsafe { point_eval(matrix, s, s_len, x, x_len, out, loglik_fault) }
}

/// Extracts the classifier features of one (s, x) pair into `out[3]` as
/// (residual_trace, cross_trace, logdet_term).
///
/// # Safety
/// `matrix` must be a live handle; `s`, `x` readable; `out` writable for
/// three doubles.
#[no_mangle]
pub unsafe extern "C" fn fl_extract_features(
    matrix: *const FlMatrix,
    s: *const f64,
    s_len: usize,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> FlStatus {
    guard(|| {
        nonnull!(matrix, "matrix");
        nonnull!(out, "out");
        let s = require!(unsafe { slice_arg(s, s_len) }, "s");
        let x = require!(unsafe { slice_arg(x, x_len) }, "x");
        let matrix = unsafe { &(*matrix).inner };
        match extract_features(
            &DVector::from_column_slice(s),
            &DVector::from_column_slice(x),
            matrix,
        ) {
            Ok(features) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out, 3) };
                out.copy_from_slice(&features.to_array());
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

fn write_ratio(value: f64, label: Label, out_value: *mut f64, out_is_fault: *mut c_int) {
    unsafe {
        *out_value = value;
        *out_is_fault = c_int::from(label == Label::Fault);
    }
}

/// Classifies one (s, x) pair: the log-likelihood ratio
/// normal − fault goes to `out_value`, the thresholded decision
/// (1 = fault, 0 = normal; ties are normal) to `out_is_fault`.
///
/// # Safety
/// `matrix` must be a live handle; `s`, `x` readable; both out-pointers
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fl_classify(
    matrix: *const FlMatrix,
    s: *const f64,
    s_len: usize,
    x: *const f64,
    x_len: usize,
    out_value: *mut f64,
    out_is_fault: *mut c_int,
) -> FlStatus {
    guard(|| {
        nonnull!(matrix, "matrix");
        nonnull!(out_value, "out_value");
        nonnull!(out_is_fault, "out_is_fault");
        let s = require!(unsafe { slice_arg(s, s_len) }, "s");
        let x = require!(unsafe { slice_arg(x, x_len) }, "x");
        let matrix = unsafe { &(*matrix).inner };
        match classify_single(
            &DVector::from_column_slice(s),
            &DVector::from_column_slice(x),
            matrix,
        ) {
            Ok(ratio) => {
                write_ratio(ratio.value, ratio.decision, out_value, out_is_fault);
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Classifies a window of `samples` pairs. `s` is sample-major
/// `samples × feature_dim`, `x` is sample-major `samples × output_dim`;
/// the summed ratio and decision are written like in [`fl_classify`].
///
/// # Safety
/// `matrix` must be a live handle; `s` readable for
/// `samples * feature_dim` doubles and `x` for `samples * output_dim`;
/// both out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn fl_classify_sequence(
    matrix: *const FlMatrix,
    s: *const f64,
    x: *const f64,
    samples: usize,
    out_value: *mut f64,
    out_is_fault: *mut c_int,
) -> FlStatus {
    guard(|| {
        nonnull!(matrix, "matrix");
        nonnull!(out_value, "out_value");
        nonnull!(out_is_fault, "out_is_fault");
        if samples == 0 {
            return fail(FlStatus::InvalidInput, "sequence must contain at least one sample");
        }
        let handle = unsafe { &(*matrix).inner };
        let p = handle.feature_dim();
        let n = handle.output_dim();
        let s = require!(unsafe { slice_arg(s, samples * p) }, "s");
        let x = require!(unsafe { slice_arg(x, samples * n) }, "x");
        let dataset = match Dataset::new(
            DMatrix::from_fn(p, samples, |i, t| s[t * p + i]),
            DMatrix::from_fn(n, samples, |i, t| x[t * n + i]),
            None,
        ) {
            Ok(dataset) => dataset,
            Err(e) => return from_error(&e),
        };
        match classify_sequence(&dataset, handle) {
            Ok(ratio) => {
                write_ratio(ratio.value, ratio.decision, out_value, out_is_fault);
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Fits `output_dim × feature_dim` transition matrix entries by ridge
/// least squares over `samples` pairs (layouts as in
/// [`fl_classify_sequence`]) and returns a new handle through `out`.
///
/// # Safety
/// `s` must be readable for `samples * feature_dim` doubles, `x` for
/// `samples * output_dim`, and `out` must be a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fl_fit_ls(
    s: *const f64,
    x: *const f64,
    samples: usize,
    feature_dim: usize,
    output_dim: usize,
    ridge_alpha: f64,
    out: *mut *mut FlMatrix,
) -> FlStatus {
    guard(|| {
        nonnull!(out, "out");
        if samples == 0 || feature_dim == 0 || output_dim == 0 {
            return fail(
                FlStatus::InvalidInput,
                "samples, feature_dim and output_dim must all be positive",
            );
        }
        let s = require!(unsafe { slice_arg(s, samples * feature_dim) }, "s");
        let x = require!(unsafe { slice_arg(x, samples * output_dim) }, "x");
        let build = || -> faultline::Result<TransitionMatrix> {
            let dataset = Dataset::new(
                DMatrix::from_fn(feature_dim, samples, |i, t| s[t * feature_dim + i]),
                DMatrix::from_fn(output_dim, samples, |i, t| x[t * output_dim + i]),
                None,
            )?;
            fit_ls(&dataset, &FitConfig::new(ridge_alpha)?)
        };
        match build() {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(FlMatrix { inner })) };
                FlStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}
