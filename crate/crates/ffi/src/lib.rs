//! C ABI over the circlaw core.
//!
//! Every fallible function returns a [`CirclawStatus`]; on failure the
//! message is available from [`circlaw_last_error`] on the same thread.
//! Matrices are passed as row-major `n * n` arrays of `double`. Handles
//! returned by `*_new` or by out-parameters are owned by the caller and must
//! be released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use circlaw::anticoncentration::{rho_iid, rho_star, BallModel, SmallBallQuery, SmallBallValue};
use circlaw::linalg::{shifted_rows, C64};
use circlaw::logdet::logdet_via_distances;
use circlaw::rng::{self, Generator};
use circlaw::sampler::{sample_row_sum_matrix, type_split_probabilities, RowModel};
use circlaw::spectral::{self, EsdFunction, NormalizedSpectrum};
use circlaw::{exact, Error};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CirclawStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Parity = 3,
    Dimension = 4,
    Degenerate = 5,
    NoConvergence = 6,
    TooLarge = 7,
    Io = 8,
    Format = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CirclawRowModel {
    /// Uniform over sign vectors with entry sum `s`.
    FixedSum = 0,
    /// Uniform over sign vectors with entry sum `s - 1` or `s + 1`.
    UnionS = 1,
    /// Independent entries with `P(+1) = 1/2 + s/(2n)`.
    Iid = 2,
}

impl From<CirclawRowModel> for RowModel {
    fn from(m: CirclawRowModel) -> Self {
        match m {
            CirclawRowModel::FixedSum => RowModel::FixedSum,
            CirclawRowModel::UnionS => RowModel::UnionS,
            CirclawRowModel::Iid => RowModel::Iid,
        }
    }
}

/// Seeded ChaCha8 generator.
pub struct CirclawRng(Generator);

/// Eigenvalues of a matrix, optionally normalized by `1/(sigma sqrt(n))`.
pub struct CirclawSpectrum {
    points: Vec<C64>,
    normalized: Option<NormalizedSpectrum>,
}

impl CirclawSpectrum {
    fn esd(&self) -> EsdFunction {
        match &self.normalized {
            Some(ns) => ns.esd(),
            None => EsdFunction::new(self.points.clone()),
        }
    }
}

struct Failure {
    status: CirclawStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parity { .. } => CirclawStatus::Parity,
            Error::InvalidParameter { .. } => CirclawStatus::InvalidParameter,
            Error::Dimension(_) => CirclawStatus::Dimension,
            Error::Degenerate { .. } => CirclawStatus::Degenerate,
            Error::NoConvergence { .. } => CirclawStatus::NoConvergence,
            Error::TooLarge { .. } => CirclawStatus::TooLarge,
            Error::Io(_) => CirclawStatus::Io,
            Error::Format(_) => CirclawStatus::Format,
        };
        Failure { status, message: e.to_string() }
    }
}

fn null(what: &str) -> Failure {
    Failure { status: CirclawStatus::NullPointer, message: format!("`{what}` is null") }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { status: CirclawStatus::InvalidParameter, message: message.into() }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CirclawStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            CirclawStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            CirclawStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn square_matrix(data: *const f64, n: usize) -> Result<DMatrix<f64>, Failure> {
    if data.is_null() {
        return Err(null("matrix"));
    }
    if n == 0 {
        return Err(invalid("matrix dimension must be positive"));
    }
    let len = n.checked_mul(n).ok_or_else(|| invalid("matrix dimension overflows"))?;
    Ok(DMatrix::from_row_slice(n, n, std::slice::from_raw_parts(data, len)))
}

unsafe fn points(data: *const f64, n: usize, dim: usize) -> Result<Vec<[f64; 2]>, Failure> {
    if data.is_null() {
        return Err(null("points"));
    }
    if dim != 1 && dim != 2 {
        return Err(invalid(format!("dimension must be 1 or 2, got {dim}")));
    }
    let raw = std::slice::from_raw_parts(data, n * dim);
    Ok(raw.chunks(dim).map(|c| [c[0], if dim == 2 { c[1] } else { 0.0 }]).collect())
}

fn write_ball(v: SmallBallValue, value: &mut f64, center: *mut f64) {
    *value = v.value_f64();
    if !center.is_null() {
        unsafe {
            *center = v.center[0];
            *center.add(1) = v.center[1];
        }
    }
}

/// Message of the last failure on this thread; empty after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn circlaw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn circlaw_status_name(status: CirclawStatus) -> *const c_char {
    let name: &'static CStr = match status {
        CirclawStatus::Ok => c"ok",
        CirclawStatus::NullPointer => c"null pointer",
        CirclawStatus::InvalidParameter => c"invalid parameter",
        CirclawStatus::Parity => c"infeasible parity",
        CirclawStatus::Dimension => c"dimension mismatch",
        CirclawStatus::Degenerate => c"degenerate input",
        CirclawStatus::NoConvergence => c"no convergence",
        CirclawStatus::TooLarge => c"too large",
        CirclawStatus::Io => c"i/o failure",
        CirclawStatus::Format => c"malformed input",
        CirclawStatus::Panic => c"internal panic",
    };
    name.as_ptr()
}

#[no_mangle]
pub extern "C" fn circlaw_rng_new(seed: u64) -> *mut CirclawRng {
    Box::into_raw(Box::new(CirclawRng(rng::from_seed(seed))))
}

/// Generator of trial `index` under master seed `seed`.
#[no_mangle]
pub extern "C" fn circlaw_rng_trial(seed: u64, index: u64) -> *mut CirclawRng {
    Box::into_raw(Box::new(CirclawRng(rng::trial_stream(seed, index))))
}

/// # Safety
/// `rng` must come from `circlaw_rng_new` or `circlaw_rng_trial`, or be null.
#[no_mangle]
pub unsafe extern "C" fn circlaw_rng_free(rng: *mut CirclawRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// One row of length `n` written to `out` as +1/-1.
///
/// # Safety
/// `rng` must be a live handle and `out` must hold `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_sample_row(
    rng: *mut CirclawRng,
    n: usize,
    s: i64,
    model: CirclawRowModel,
    out: *mut i8,
) -> CirclawStatus {
    guard(|| {
        let rng = self::out(rng, "rng")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let row = RowModel::from(model).sample_row(n, s, &mut rng.0)?;
        std::ptr::copy_nonoverlapping(row.entries().as_ptr(), out, n);
        Ok(())
    })
}

/// `n x n` matrix with independent rows, row-major into `out`.
///
/// # Safety
/// `rng` must be a live handle and `out` must hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn circlaw_sample_matrix(
    rng: *mut CirclawRng,
    n: usize,
    s: i64,
    model: CirclawRowModel,
    out: *mut f64,
) -> CirclawStatus {
    guard(|| {
        let rng = self::out(rng, "rng")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = sample_row_sum_matrix(n, s, model.into(), &mut rng.0)?;
        let dst = std::slice::from_raw_parts_mut(out, n * n);
        for (i, row) in dst.chunks_mut(n.max(1)).enumerate().take(n) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Probabilities that a uniform draw from the union of the sum `s - 1` and
/// sum `s + 1` classes lands in each class.
///
/// # Safety
/// `type1` and `type2` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_type_split(n: usize, s: i64, type1: *mut f64, type2: *mut f64) -> CirclawStatus {
    guard(|| {
        let t1 = out(type1, "type1")?;
        let t2 = out(type2, "type2")?;
        let split = type_split_probabilities(n, s)?;
        *t1 = exact::to_f64(&split.type1);
        *t2 = exact::to_f64(&split.type2);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn circlaw_sigma(n: usize, s: i64) -> f64 {
    spectral::sigma(n, s)
}

/// Circular-law mass of `{Re z <= s, Im z <= t}`.
#[no_mangle]
pub extern "C" fn circlaw_circular_cdf(s: f64, t: f64) -> f64 {
    spectral::circular_cdf(s, t)
}

/// Eigenvalues of a real matrix.
///
/// # Safety
/// `matrix` must hold `n * n` doubles and `spectrum` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_eigenvalues(
    matrix: *const f64,
    n: usize,
    spectrum: *mut *mut CirclawSpectrum,
) -> CirclawStatus {
    guard(|| {
        let slot = out(spectrum, "spectrum")?;
        let m = square_matrix(matrix, n)?;
        let points = spectral::eigenvalues_dense(&m)?;
        *slot = Box::into_raw(Box::new(CirclawSpectrum { points, normalized: None }));
        Ok(())
    })
}

/// Eigenvalues of `M / (sigma sqrt(n))` for a matrix with row sums `s`,
/// with the eigenvalue near `s / (sigma sqrt(n))` located.
///
/// # Safety
/// `matrix` must hold `n * n` doubles and `spectrum` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_normalized_esd(
    matrix: *const f64,
    n: usize,
    s: i64,
    spectrum: *mut *mut CirclawSpectrum,
) -> CirclawStatus {
    guard(|| {
        let slot = out(spectrum, "spectrum")?;
        let m = square_matrix(matrix, n)?;
        let ns = spectral::normalized_esd(&m, s)?;
        *slot = Box::into_raw(Box::new(CirclawSpectrum { points: ns.points.clone(), normalized: Some(ns) }));
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn circlaw_spectrum_len(spectrum: *const CirclawSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.points.len())
}

/// # Safety
/// `spectrum` must be a live handle; `re` and `im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_spectrum_get(
    spectrum: *const CirclawSpectrum,
    index: usize,
    re: *mut f64,
    im: *mut f64,
) -> CirclawStatus {
    guard(|| {
        let spec = spectrum.as_ref().ok_or_else(|| null("spectrum"))?;
        let (re, im) = (out(re, "re")?, out(im, "im")?);
        let z = spec
            .points
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range for {} eigenvalues", spec.points.len())))?;
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Index of the eigenvalue nearest `s / (sigma sqrt(n))` (-1 if the
/// spectrum is not normalized) and whether it is excluded from the ESD.
///
/// # Safety
/// `spectrum` must be a live handle; `index` and `excluded` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_spectrum_outlier(
    spectrum: *const CirclawSpectrum,
    index: *mut i64,
    excluded: *mut bool,
) -> CirclawStatus {
    guard(|| {
        let spec = spectrum.as_ref().ok_or_else(|| null("spectrum"))?;
        let (index, excluded) = (out(index, "index")?, out(excluded, "excluded")?);
        let ns = spec.normalized.as_ref();
        *index = ns.and_then(|ns| ns.outlier_index).map_or(-1, |i| i as i64);
        *excluded = ns.is_some_and(|ns| ns.outlier_excluded);
        Ok(())
    })
}

/// Sup distance between the spectrum's ESD and the circular law on a
/// `grid x grid` lattice of `[-1.5, 1.5]^2`.
///
/// # Safety
/// `spectrum` must be a live handle; `distance` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_spectrum_ks_distance(
    spectrum: *const CirclawSpectrum,
    grid: usize,
    distance: *mut f64,
) -> CirclawStatus {
    guard(|| {
        let spec = spectrum.as_ref().ok_or_else(|| null("spectrum"))?;
        let d = out(distance, "distance")?;
        *d = spectral::ks_distance_to_circular(&spec.esd(), grid)?;
        Ok(())
    })
}

/// # Safety
/// `spectrum` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn circlaw_spectrum_free(spectrum: *mut CirclawSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Largest distance between the spectrum of `M` and `{s}` together with the
/// spectrum of its reduced matrix. Integer matrices whose floating-point
/// error exceeds `refine_above` are recomputed exactly; `refined` reports it.
///
/// # Safety
/// `matrix` must hold `n * n` doubles; `error` and `refined` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_reduction_error(
    matrix: *const f64,
    n: usize,
    refine_above: f64,
    error: *mut f64,
    refined: *mut bool,
) -> CirclawStatus {
    guard(|| {
        let (error, refined) = (out(error, "error")?, out(refined, "refined")?);
        let m = square_matrix(matrix, n)?;
        let check = spectral::reduction_check(&m, refine_above)?;
        *error = check.error;
        *refined = check.refined;
        Ok(())
    })
}

/// `log|det(M - z sqrt(n) I)|` as a sum of log distances of each row to the
/// span of the rows before it.
///
/// # Safety
/// `matrix` must hold `n * n` doubles; `logdet` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_logdet_shifted(
    matrix: *const f64,
    n: usize,
    z_re: f64,
    z_im: f64,
    logdet: *mut f64,
) -> CirclawStatus {
    guard(|| {
        let d = out(logdet, "logdet")?;
        let m = square_matrix(matrix, n)?;
        let z = C64::new(z_re, z_im);
        *d = logdet_via_distances(&shifted_rows(&m, None, z), z)?.total;
        Ok(())
    })
}

/// Exact largest probability that `sum x_i v_i` lands in a closed ball of
/// radius `beta`, for independent signs with `P(+1) = 1/2 + s/(2n)`.
/// `points` holds `n` points of dimension `dim` (1 or 2); `center` may be
/// null, otherwise it receives two coordinates.
///
/// # Safety
/// `points` must hold `n * dim` doubles; `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_rho_iid(
    points: *const f64,
    n: usize,
    dim: usize,
    beta: f64,
    s: i64,
    value: *mut f64,
    center: *mut f64,
) -> CirclawStatus {
    guard(|| {
        let v = out(value, "value")?;
        let q = SmallBallQuery::new(self::points(points, n, dim)?, dim, beta, BallModel::Iid { s })?;
        write_ball(rho_iid(&q)?, v, center);
        Ok(())
    })
}

/// As [`circlaw_rho_iid`] for signs uniform among vectors with entry sum `s_bar`.
///
/// # Safety
/// `points` must hold `n * dim` doubles; `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn circlaw_rho_star(
    points: *const f64,
    n: usize,
    dim: usize,
    beta: f64,
    s_bar: i64,
    value: *mut f64,
    center: *mut f64,
) -> CirclawStatus {
    guard(|| {
        let v = out(value, "value")?;
        let q = SmallBallQuery::new(self::points(points, n, dim)?, dim, beta, BallModel::FixedSum { s_bar })?;
        write_ball(rho_star(&q)?, v, center);
        Ok(())
    })
}
