//! C interface to `unmix`.
//!
//! Matrices cross the boundary as opaque [`UnmixMatrix`] handles built from
//! row-major buffers. Every function returns an [`UnmixStatus`]; on failure
//! [`unmix_last_error_message`] describes what went wrong on the calling
//! thread. β is passed as a `double` where `INFINITY` selects the
//! single-penalty problem.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;
use unmix::conditions::{RegionOptions, SupportAnalyzer};
use unmix::solvers::{
    solve_multi_alternating, solve_multi_reduced, AlternatingOptions, IstaOptions, PenaltyParams,
};
use unmix::{Beta, Error, IndexSet, Matrix};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnmixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    IndexOutOfRange = 4,
    SingularGram = 5,
    NumericalFailure = 6,
    EnumerationTooLarge = 7,
    Panic = 8,
    Other = 9,
}

/// Opaque dense matrix.
pub struct UnmixMatrix(Matrix);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct UnmixCertificate {
    pub condition_value: f64,
    /// Smallest admissible c/d; `INFINITY` when the condition fails.
    pub cd_bound: f64,
    /// Lower end of the α interval divided by d.
    pub alpha_min_per_d: f64,
    /// Upper end of the α interval is `(c - d * signal_norm) / sensitivity`.
    pub signal_norm: f64,
    pub sensitivity: f64,
    pub satisfiable: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct UnmixRegionSummary {
    pub r_value: f64,
    pub sigma_value: f64,
    pub theta_min: f64,
    pub failure_fraction: f64,
    pub supports_checked: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnmixSolveMode {
    Reduced = 0,
    Alternating = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct UnmixSolveOptions {
    pub mode: UnmixSolveMode,
    /// Reduced mode iteration cap.
    pub max_iters: usize,
    /// Residual tolerance; negative disables it in alternating mode.
    pub tol: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct UnmixSolveInfo {
    pub iterations: usize,
    pub objective: f64,
    pub optimality_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> UnmixStatus {
    match err {
        Error::InvalidMatrix(_) | Error::InvalidArgument(_) | Error::Usage(_) | Error::Parse(_) => {
            UnmixStatus::InvalidArgument
        }
        Error::DimensionMismatch(_) => UnmixStatus::DimensionMismatch,
        Error::IndexOutOfRange { .. } => UnmixStatus::IndexOutOfRange,
        Error::SingularGram { .. } => UnmixStatus::SingularGram,
        Error::NumericalFailure(_) | Error::NonFiniteIterate { .. } => UnmixStatus::NumericalFailure,
        Error::EnumerationTooLarge { .. } => UnmixStatus::EnumerationTooLarge,
        _ => UnmixStatus::Other,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UnmixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UnmixStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed for {name}"));
            UnmixStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            UnmixStatus::Panic
        }
    }
}

unsafe fn matrix_ref<'a>(m: *const UnmixMatrix) -> Result<&'a Matrix, Failure> {
    m.as_ref().map(|h| &h.0).ok_or(Failure::Null("matrix"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

fn beta_of(beta: f64) -> Result<Beta, Failure> {
    Ok(Beta::from_f64(beta)?)
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn unmix_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies a row-major `rows x cols` buffer into a new matrix handle.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn unmix_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut UnmixMatrix,
) -> UnmixStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidMatrix("dimensions overflow".into()))?;
        let values = slice(data, len, "data")?.to_vec();
        let m = Matrix::from_row_major(rows, cols, values)?;
        *out = Box::into_raw(Box::new(UnmixMatrix(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from [`unmix_matrix_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn unmix_matrix_free(m: *mut UnmixMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn unmix_matrix_shape(
    m: *const UnmixMatrix,
    rows: *mut usize,
    cols: *mut usize,
) -> UnmixStatus {
    guard(|| {
        let a = matrix_ref(m)?;
        *out_ref(rows, "rows")? = a.rows();
        *out_ref(cols, "cols")? = a.cols();
        Ok(())
    })
}

/// Recovery certificate for the support given as `support_len` column
/// indices.
///
/// # Safety
/// `m` must be a live handle, `support` must hold `support_len` indices and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn unmix_certificate(
    m: *const UnmixMatrix,
    beta: f64,
    support: *const usize,
    support_len: usize,
    out: *mut UnmixCertificate,
) -> UnmixStatus {
    guard(|| {
        let a = matrix_ref(m)?;
        let idx = IndexSet::new(slice(support, support_len, "support")?.to_vec(), a.cols())?;
        let cert = SupportAnalyzer::new(a, beta_of(beta)?)?.certificate(&idx)?;
        *out_ref(out, "out")? = UnmixCertificate {
            condition_value: cert.condition_value,
            cd_bound: cert.cd_bound,
            alpha_min_per_d: cert.alpha_min_per_d,
            signal_norm: cert.alpha_max_fn.0,
            sensitivity: cert.alpha_max_fn.1,
            satisfiable: cert.satisfiable,
        };
        Ok(())
    })
}

/// Admissible `[lo, hi)` for α given signal floor `c` and noise level `d`.
/// `*nonempty` is false when no α works; `lo` and `hi` are then unspecified.
///
/// # Safety
/// As for [`unmix_certificate`]; `lo`, `hi` and `nonempty` writable.
#[no_mangle]
pub unsafe extern "C" fn unmix_alpha_interval(
    m: *const UnmixMatrix,
    beta: f64,
    support: *const usize,
    support_len: usize,
    c: f64,
    d: f64,
    lo: *mut f64,
    hi: *mut f64,
    nonempty: *mut bool,
) -> UnmixStatus {
    guard(|| {
        let a = matrix_ref(m)?;
        let idx = IndexSet::new(slice(support, support_len, "support")?.to_vec(), a.cols())?;
        let interval = unmix::conditions::alpha_interval(a, beta_of(beta)?, &idx, c, d)?;
        let (lo, hi, nonempty) = (out_ref(lo, "lo")?, out_ref(hi, "hi")?, out_ref(nonempty, "nonempty")?);
        match interval {
            Some(iv) => {
                *lo = iv.lo;
                *hi = iv.hi;
                *nonempty = true;
            }
            None => {
                *lo = f64::NAN;
                *hi = f64::NAN;
                *nonempty = false;
            }
        }
        Ok(())
    })
}

/// Worst case over all supports of size exactly `k`. When `worst_support`
/// is non-null it receives the `k` indices of the maximizing support.
///
/// # Safety
/// `m` must be a live handle, `out` writable and `worst_support` null or
/// writable for `k` entries.
#[no_mangle]
pub unsafe extern "C" fn unmix_region_summary(
    m: *const UnmixMatrix,
    beta: f64,
    k: usize,
    out: *mut UnmixRegionSummary,
    worst_support: *mut usize,
) -> UnmixStatus {
    guard(|| {
        let a = matrix_ref(m)?;
        let s = unmix::conditions::region_summary(a, beta_of(beta)?, k, &RegionOptions::default())?;
        *out_ref(out, "out")? = UnmixRegionSummary {
            r_value: s.r_value,
            sigma_value: s.sigma_value,
            theta_min: s.theta_min,
            failure_fraction: s.failure_fraction,
            supports_checked: u64::try_from(s.supports_checked).unwrap_or(u64::MAX),
        };
        if !worst_support.is_null() {
            let dst = std::slice::from_raw_parts_mut(worst_support, k);
            for (slot, &i) in dst.iter_mut().zip(s.worst_support.as_slice()) {
                *slot = i;
            }
        }
        Ok(())
    })
}

/// Default options: reduced mode, 100000 iterations, tolerance 1e-10,
/// 50 outer by 50 inner iterations for alternating mode.
#[no_mangle]
pub extern "C" fn unmix_solve_options_default() -> UnmixSolveOptions {
    let ista = IstaOptions::default();
    let alt = AlternatingOptions::default();
    UnmixSolveOptions {
        mode: UnmixSolveMode::Reduced,
        max_iters: ista.max_iters,
        tol: ista.tol,
        outer_iters: alt.outer_iters,
        inner_iters: alt.inner_iters,
    }
}

/// Minimizes the multi-penalty functional for data `y` of length `rows`.
/// `u_out` and `v_out` must each hold `cols` doubles.
///
/// # Safety
/// `m` must be a live handle, `y` readable for `rows` entries, `u_out` and
/// `v_out` writable for `cols` entries, `opts` readable and `info` null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn unmix_solve(
    m: *const UnmixMatrix,
    y: *const f64,
    y_len: usize,
    alpha: f64,
    beta: f64,
    opts: *const UnmixSolveOptions,
    u_out: *mut f64,
    v_out: *mut f64,
    info: *mut UnmixSolveInfo,
) -> UnmixStatus {
    guard(|| {
        let a = matrix_ref(m)?;
        let opts = opts.as_ref().ok_or(Failure::Null("opts"))?;
        let y = DVector::from_column_slice(slice(y, y_len, "y")?);
        let params = PenaltyParams::new(alpha, beta_of(beta)?)?;
        if u_out.is_null() {
            return Err(Failure::Null("u_out"));
        }
        if v_out.is_null() {
            return Err(Failure::Null("v_out"));
        }
        let result = match opts.mode {
            UnmixSolveMode::Reduced => solve_multi_reduced(
                a,
                &y,
                &params,
                &IstaOptions {
                    max_iters: opts.max_iters,
                    tol: opts.tol.max(0.0),
                },
            )?,
            UnmixSolveMode::Alternating => solve_multi_alternating(
                a,
                &y,
                &params,
                &AlternatingOptions {
                    outer_iters: opts.outer_iters,
                    inner_iters: opts.inner_iters,
                    tol: (opts.tol >= 0.0).then_some(opts.tol),
                },
            )?,
        };
        std::slice::from_raw_parts_mut(u_out, a.cols()).copy_from_slice(result.u.as_slice());
        std::slice::from_raw_parts_mut(v_out, a.cols()).copy_from_slice(result.v.as_slice());
        if let Some(info) = info.as_mut() {
            *info = UnmixSolveInfo {
                iterations: result.iterations,
                objective: result.final_objective(),
                optimality_residual: result.optimality_residual,
            };
        }
        Ok(())
    })
}
