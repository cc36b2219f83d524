//! C interface to `vcselect`.
//!
//! Datasets and fits are opaque handles created and released by this
//! library. Every fallible call returns a [`VcsStatus`]; on failure the
//! message is available from [`vcs_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vcselect::io::{digest_bytes, parse_dataset};
use vcselect::simulation::{run_monte_carlo, SimConfig};
use vcselect::{run_fit, CriterionMode, Dataset, Error, FitExport, FitOptions, GridOptions, ReadOptions};

/// Result codes. Values are stable across releases.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed or out-of-range input.
    InvalidInput = 2,
    /// The fit finished but did not reach the stationarity tolerance.
    NotConverged = 3,
    Io = 4,
    IndexOutOfRange = 5,
    Panic = 6,
}

/// Classification of one coefficient function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcsClass {
    Zero = 0,
    Constant = 1,
    Varying = 2,
}

/// Tuning criterion.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcsCriterion {
    Bic = 0,
    Ebic = 1,
}

/// Options for [`vcs_fit`]. Lambdas set to NaN are tuned from the data.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VcsFitOptions {
    pub n_basis: usize,
    pub order: usize,
    pub initial_criterion: VcsCriterion,
    pub criterion: VcsCriterion,
    pub grid_size: usize,
    pub grid_ratio: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Nonzero: fit once at `lambda1`, `lambda2`.
    pub no_tune: c_int,
}

/// Opaque dataset handle.
pub struct VcsDataset {
    data: Dataset,
    digest: String,
}

/// Opaque fit handle.
pub struct VcsFit {
    export: FitExport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> VcsStatus {
    match err {
        Error::Io(_) => VcsStatus::Io,
        Error::NoConvergedFit => VcsStatus::NotConverged,
        _ => VcsStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> VcsStatus) -> VcsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            VcsStatus::Panic
        }
    }
}

fn fail(err: Error) -> VcsStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null() -> VcsStatus {
    set_error("null pointer argument");
    VcsStatus::NullPointer
}

fn to_c_string(s: String, out: *mut *mut c_char) -> VcsStatus {
    match CString::new(s) {
        Ok(c) => {
            // SAFETY: caller guarantees `out` is valid; checked non-null before.
            unsafe { *out = c.into_raw() };
            VcsStatus::Ok
        }
        Err(_) => {
            set_error("output contains an interior NUL byte");
            VcsStatus::InvalidInput
        }
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn vcs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vcs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dataset from column-major `x` (`n * p` values) and length-`n`
/// `t` and `y`.
///
/// # Safety
/// `t` and `y` must point to `n` doubles, `x` to `n * p` doubles, and `out`
/// to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn vcs_dataset_new(
    n: usize,
    p: usize,
    t: *const f64,
    y: *const f64,
    x: *const f64,
    out: *mut *mut VcsDataset,
) -> VcsStatus {
    guard(|| {
        if t.is_null() || y.is_null() || x.is_null() || out.is_null() {
            return null();
        }
        let Some(len) = n.checked_mul(p) else {
            return fail(Error::DimensionMismatch("n * p overflows".into()));
        };
        // SAFETY: lengths are guaranteed by the caller.
        let (t, y, x) = unsafe {
            (
                std::slice::from_raw_parts(t, n),
                std::slice::from_raw_parts(y, n),
                std::slice::from_raw_parts(x, len),
            )
        };
        match Dataset::from_column_major(y.to_vec(), t.to_vec(), x, p) {
            Ok(data) => {
                let mut bytes = Vec::with_capacity(8 * (2 * n + len));
                for v in t.iter().chain(y).chain(x) {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                let handle = Box::new(VcsDataset {
                    data,
                    digest: digest_bytes(&bytes),
                });
                // SAFETY: `out` checked non-null.
                unsafe { *out = Box::into_raw(handle) };
                VcsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Reads a comma-separated file with header `t,y,x1,...,xp`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_dataset_read_csv(
    path: *const c_char,
    rescale_t: c_int,
    out: *mut *mut VcsDataset,
) -> VcsStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return null();
        }
        // SAFETY: caller passes a valid C string.
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p.to_owned(),
            Err(_) => return fail(Error::InvalidConfig("path is not valid UTF-8".into())),
        };
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) => return fail(e.into()),
        };
        match parse_dataset(bytes.as_slice(), ReadOptions { rescale_t: rescale_t != 0 }) {
            Ok(data) => {
                let handle = Box::new(VcsDataset {
                    data,
                    digest: digest_bytes(&bytes),
                });
                // SAFETY: `out` checked non-null.
                unsafe { *out = Box::into_raw(handle) };
                VcsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `ds` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vcs_dataset_free(ds: *mut VcsDataset) {
    if !ds.is_null() {
        // SAFETY: handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Number of observations, 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn vcs_dataset_n(ds: *const VcsDataset) -> usize {
    // SAFETY: live handle or NULL.
    unsafe { ds.as_ref() }.map_or(0, |d| d.data.n())
}

/// Number of covariates, 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn vcs_dataset_p(ds: *const VcsDataset) -> usize {
    // SAFETY: live handle or NULL.
    unsafe { ds.as_ref() }.map_or(0, |d| d.data.p())
}

/// Fills `opts` with the defaults: cubic splines, 10 basis functions, BIC
/// for the initial fit, EBIC for the adaptive fit, 15-point grids.
///
/// # Safety
/// `opts` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_options_default(opts: *mut VcsFitOptions) {
    let d = FitOptions::default();
    // SAFETY: writable or NULL.
    if let Some(o) = unsafe { opts.as_mut() } {
        *o = VcsFitOptions {
            n_basis: d.n_basis,
            order: d.order,
            initial_criterion: VcsCriterion::Bic,
            criterion: VcsCriterion::Ebic,
            grid_size: d.grid.points,
            grid_ratio: d.grid.ratio,
            lambda0: f64::NAN,
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            no_tune: 0,
        };
    }
}

fn mode(c: VcsCriterion) -> CriterionMode {
    match c {
        VcsCriterion::Bic => CriterionMode::Bic,
        VcsCriterion::Ebic => CriterionMode::Ebic,
    }
}

fn manual(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Runs the selection pipeline. On `VCS_STATUS_NOT_CONVERGED` the handle is
/// still written and can be inspected.
///
/// # Safety
/// `ds` must be a live dataset, `opts` NULL (defaults) or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit(
    ds: *const VcsDataset,
    opts: *const VcsFitOptions,
    out: *mut *mut VcsFit,
) -> VcsStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let Some(ds) = (unsafe { ds.as_ref() }) else { return null() };
        if out.is_null() {
            return null();
        }
        let mut o = std::mem::MaybeUninit::<VcsFitOptions>::uninit();
        // SAFETY: NULL means defaults; otherwise caller passes a valid struct.
        let o = match unsafe { opts.as_ref() } {
            Some(v) => *v,
            None => unsafe {
                vcs_fit_options_default(o.as_mut_ptr());
                o.assume_init()
            },
        };
        let options = FitOptions {
            n_basis: o.n_basis,
            order: o.order,
            initial_criterion: mode(o.initial_criterion),
            criterion: mode(o.criterion),
            grid: GridOptions {
                points: o.grid_size,
                ratio: o.grid_ratio,
            },
            lambda0: manual(o.lambda0),
            lambda1: manual(o.lambda1),
            lambda2: manual(o.lambda2),
            no_tune: o.no_tune != 0,
            ..FitOptions::default()
        };
        match run_fit(&ds.data, &ds.digest, &options) {
            Ok(export) => {
                let converged = export.diagnostics.converged;
                // SAFETY: `out` checked non-null.
                unsafe { *out = Box::into_raw(Box::new(VcsFit { export })) };
                if converged {
                    VcsStatus::Ok
                } else {
                    set_error("solver did not reach the KKT tolerance");
                    VcsStatus::NotConverged
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `fit` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_free(fit: *mut VcsFit) {
    if !fit.is_null() {
        // SAFETY: handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Classification of covariate `j` (0-based); `value` receives the constant
/// for constant coefficients and 0 otherwise.
///
/// # Safety
/// `fit` must be a live handle; `class_out` and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_class(
    fit: *const VcsFit,
    j: usize,
    class_out: *mut VcsClass,
    value: *mut f64,
) -> VcsStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let Some(fit) = (unsafe { fit.as_ref() }) else { return null() };
        if class_out.is_null() || value.is_null() {
            return null();
        }
        let Some(c) = fit.export.covariates.get(j) else {
            set_error(format!("covariate {j} out of range"));
            return VcsStatus::IndexOutOfRange;
        };
        let class = match c.class.as_str() {
            "zero" => VcsClass::Zero,
            "constant" => VcsClass::Constant,
            _ => VcsClass::Varying,
        };
        // SAFETY: checked non-null.
        unsafe {
            *class_out = class;
            *value = c.value.unwrap_or(0.0);
        }
        VcsStatus::Ok
    })
}

/// Chosen tuning parameters; `lambda0` is NaN when no initial fit was run.
///
/// # Safety
/// `fit` must be a live handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_lambdas(
    fit: *const VcsFit,
    lambda0: *mut f64,
    lambda1: *mut f64,
    lambda2: *mut f64,
) -> VcsStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let Some(fit) = (unsafe { fit.as_ref() }) else { return null() };
        if lambda0.is_null() || lambda1.is_null() || lambda2.is_null() {
            return null();
        }
        let t = &fit.export.tuning;
        // SAFETY: checked non-null.
        unsafe {
            *lambda0 = t.lambda0.unwrap_or(f64::NAN);
            *lambda1 = t.lambda1;
            *lambda2 = t.lambda2;
        }
        VcsStatus::Ok
    })
}

/// Convergence flag, scaled KKT residual and residual sum of squares.
///
/// # Safety
/// `fit` must be a live handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_diagnostics(
    fit: *const VcsFit,
    converged: *mut c_int,
    kkt: *mut f64,
    rss: *mut f64,
) -> VcsStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let Some(fit) = (unsafe { fit.as_ref() }) else { return null() };
        if converged.is_null() || kkt.is_null() || rss.is_null() {
            return null();
        }
        // SAFETY: checked non-null.
        unsafe {
            *converged = c_int::from(fit.export.diagnostics.converged);
            *kkt = fit.export.diagnostics.kkt_residual;
            *rss = fit.export.rss;
        }
        VcsStatus::Ok
    })
}

/// Number of points in the evaluation grid on [0, 1].
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_grid_len(fit: *const VcsFit) -> usize {
    // SAFETY: live handle or NULL.
    unsafe { fit.as_ref() }.map_or(0, |f| f.export.grid.len())
}

/// Copies the estimated coefficient function `j` on the evaluation grid into
/// `values`, which must hold `vcs_fit_grid_len(fit)` doubles.
///
/// # Safety
/// `fit` must be a live handle and `values` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_function(
    fit: *const VcsFit,
    j: usize,
    values: *mut f64,
    len: usize,
) -> VcsStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let Some(fit) = (unsafe { fit.as_ref() }) else { return null() };
        if values.is_null() {
            return null();
        }
        let e = &fit.export;
        let Some(c) = e.covariates.get(j) else {
            set_error(format!("covariate {j} out of range"));
            return VcsStatus::IndexOutOfRange;
        };
        if len != e.grid.len() {
            set_error(format!("buffer holds {len} values, grid has {}", e.grid.len()));
            return VcsStatus::InvalidInput;
        }
        // SAFETY: caller guarantees `len` writable doubles.
        let dst = unsafe { std::slice::from_raw_parts_mut(values, len) };
        match (&c.function, c.value) {
            (Some(f), _) => dst.copy_from_slice(f),
            (None, Some(v)) => dst.fill(v),
            (None, None) => dst.fill(0.0),
        }
        VcsStatus::Ok
    })
}

/// Serializes the fit as JSON. Release the string with [`vcs_string_free`].
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_fit_export_json(fit: *const VcsFit, out: *mut *mut c_char) -> VcsStatus {
    guard(|| {
        // SAFETY: live handle or NULL.
        let Some(fit) = (unsafe { fit.as_ref() }) else { return null() };
        if out.is_null() {
            return null();
        }
        match fit.export.to_json() {
            Ok(s) => to_c_string(s, out),
            Err(e) => fail(e),
        }
    })
}

/// Runs the Monte Carlo study with default settings apart from the given
/// arguments and returns the report as JSON.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vcs_simulate_json(
    n: usize,
    p: usize,
    reps: usize,
    seed: u64,
    noise_var: f64,
    out: *mut *mut c_char,
) -> VcsStatus {
    guard(|| {
        if out.is_null() {
            return null();
        }
        let config = SimConfig {
            n,
            p,
            reps,
            seed,
            noise_var,
            ..SimConfig::default()
        };
        let report = match run_monte_carlo(&config) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        match report.to_json() {
            Ok(s) => to_c_string(s, out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vcs_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: created by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}
