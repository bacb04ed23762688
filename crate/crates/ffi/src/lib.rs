//! C interface to `ibnn`.
//!
//! Every fallible function returns an [`IbnnStatus`]; on failure the message
//! is available from [`ibnn_last_error`] on the same thread. Objects cross
//! the boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Panics are caught and reported as
//! `IBNN_STATUS_PANIC`, never unwound into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ibnn::bnn::Head;
use ibnn::credal::{EventMask, FiniteCredalSet};
use ibnn::ibnn::{ihdr, imprecise_credible_set, predictive_au_eu, predictive_credal_set, HdrMethod, PosteriorCredalSet};
use ibnn::prob::RngStream;
use ibnn::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Format = 4,
    Io = 5,
    Training = 6,
    Panic = 7,
}

impl From<&Error> for IbnnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => IbnnStatus::DimensionMismatch,
            Error::InvalidDistribution(_) | Error::InvalidArgument(_) | Error::TooFewSamples { .. } | Error::Config(_) => {
                IbnnStatus::InvalidArgument
            }
            Error::Diverged { .. } | Error::MemberDiverged { .. } => IbnnStatus::Training,
            Error::Format(_) | Error::Json(_) | Error::Csv(_) => IbnnStatus::Format,
            Error::Io(_) => IbnnStatus::Io,
        }
    }
}

/// How each member's highest density region is computed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbnnHdrMethod {
    /// Mean plus/minus a normal quantile times the predictive sd.
    Gaussian = 0,
    /// Shortest window over Monte Carlo samples (needs `n_mc >= 20`).
    EmpiricalShortest = 1,
    /// Kernel density level set; may be a union of intervals.
    GridDensity = 2,
}

impl From<IbnnHdrMethod> for HdrMethod {
    fn from(m: IbnnHdrMethod) -> Self {
        match m {
            IbnnHdrMethod::Gaussian => HdrMethod::Gaussian,
            IbnnHdrMethod::EmpiricalShortest => HdrMethod::EmpiricalShortest,
            IbnnHdrMethod::GridDensity => HdrMethod::GridDensity,
        }
    }
}

/// A trained posterior credal set.
pub struct IbnnPosteriorSet(PosteriorCredalSet);

/// A finite credal set over class labels, given by its extreme points.
pub struct IbnnCredalSet(FiniteCredalSet);

/// Shape of a posterior set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IbnnSetInfo {
    pub members: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    /// True for a softmax head (labels), false for Gaussian regression.
    pub classification: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IbnnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(IbnnStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(IbnnStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(IbnnStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IbnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            IbnnStatus::Ok
        }
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
            IbnnStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. Valid until the next `ibnn_*` call on the thread.
#[no_mangle]
pub extern "C" fn ibnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ibnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from an `ibnn_*` function that documents the string as
/// owned by the caller, and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ibnn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a posterior set saved as JSON (the `ibnn train` output).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ibnn_posterior_set_from_json(json: *const c_char, out: *mut *mut IbnnPosteriorSet) -> IbnnStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| invalid(format!("json is not UTF-8: {e}")))?;
        let set = PosteriorCredalSet::from_json(text)?;
        *out = Box::into_raw(Box::new(IbnnPosteriorSet(set)));
        Ok(())
    })
}

/// Serializes a posterior set to JSON; free the result with
/// [`ibnn_string_free`].
///
/// # Safety
/// `set` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ibnn_posterior_set_to_json(set: *const IbnnPosteriorSet, out: *mut *mut c_char) -> IbnnStatus {
    guard(|| {
        let set = handle(set, "set")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = CString::new(set.0.to_json()?).map_err(|e| invalid(e.to_string()))?;
        *out = json.into_raw();
        Ok(())
    })
}

/// # Safety
/// `set` must be a live handle or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ibnn_posterior_set_free(set: *mut IbnnPosteriorSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// # Safety
/// `set` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ibnn_posterior_set_info(set: *const IbnnPosteriorSet, out: *mut IbnnSetInfo) -> IbnnStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = IbnnSetInfo {
            members: set.len(),
            input_dim: set.input_dim(),
            output_dim: set.output_dim(),
            classification: set.head() == Head::CategoricalSoftmax,
        };
        Ok(())
    })
}

fn predictive(
    set: &PosteriorCredalSet,
    x: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<ibnn::ibnn::PredictiveCredalSet, Failure> {
    if n_mc == 0 {
        return Err(invalid("n_mc must be positive"));
    }
    let mut rng = RngStream::new(seed, 0);
    Ok(predictive_credal_set(set, x, n_mc, &mut rng)?)
}

/// Imprecise highest density region of a regression set at level
/// `1 - alpha`, one output dimension at a time. Writes the hull of each
/// region to `lo[k]`, `hi[k]` and, when `length` is not NULL, its total
/// length (smaller than the hull width when the region is a union of
/// disjoint intervals). Arrays must hold `out_len == output_dim` values.
///
/// # Safety
/// `set` must be a live handle; `x` must point to `x_len` doubles; `lo`,
/// `hi` and (if not NULL) `length` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ibnn_predict_ihdr(
    set: *const IbnnPosteriorSet,
    x: *const f64,
    x_len: usize,
    alpha: f64,
    method: IbnnHdrMethod,
    n_mc: usize,
    seed: u64,
    lo: *mut f64,
    hi: *mut f64,
    length: *mut f64,
    out_len: usize,
) -> IbnnStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        if set.head() != Head::GaussianRegression {
            return Err(invalid("IHDRs need a regression posterior set"));
        }
        if out_len != set.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: set.output_dim(),
                got: out_len,
            }
            .into());
        }
        let x = slice_in(x, x_len, "x")?;
        let (lo, hi) = (slice_out(lo, out_len, "lo")?, slice_out(hi, out_len, "hi")?);
        let mut length = if length.is_null() { None } else { Some(slice_out(length, out_len, "length")?) };
        let regions = ihdr(&predictive(set, x, n_mc, seed)?, alpha, method.into())?;
        for (k, r) in regions.iter().enumerate() {
            let hull = r.hull();
            lo[k] = hull.lo;
            hi[k] = hull.hi;
            if let Some(len) = length.as_deref_mut() {
                len[k] = r.total_length();
            }
        }
        Ok(())
    })
}

/// Imprecise credible label set of a classification set at level
/// `1 - alpha`: `mask[c]` is set to 1 for included labels and 0 otherwise.
///
/// # Safety
/// `set` must be a live handle; `x` must point to `x_len` doubles and
/// `mask` to `n_classes` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ibnn_predict_credible_set(
    set: *const IbnnPosteriorSet,
    x: *const f64,
    x_len: usize,
    alpha: f64,
    n_mc: usize,
    seed: u64,
    mask: *mut u8,
    n_classes: usize,
) -> IbnnStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        if set.head() != Head::CategoricalSoftmax {
            return Err(invalid("credible label sets need a classification posterior set"));
        }
        if n_classes != set.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: set.output_dim(),
                got: n_classes,
            }
            .into());
        }
        let x = slice_in(x, x_len, "x")?;
        let mask = slice_out(mask, n_classes, "mask")?;
        let ics = imprecise_credible_set(&predictive(set, x, n_mc, seed)?, alpha)?;
        mask.fill(0);
        for &c in &ics.labels {
            mask[c] = 1;
        }
        Ok(())
    })
}

/// Aleatoric and epistemic uncertainty of the predictive credal set at `x`.
///
/// # Safety
/// `set` must be a live handle; `x` must point to `x_len` doubles;
/// `aleatoric` and `epistemic` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ibnn_predict_uncertainty(
    set: *const IbnnPosteriorSet,
    x: *const f64,
    x_len: usize,
    n_mc: usize,
    seed: u64,
    aleatoric: *mut f64,
    epistemic: *mut f64,
) -> IbnnStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        if aleatoric.is_null() || epistemic.is_null() {
            return Err(null("output"));
        }
        let x = slice_in(x, x_len, "x")?;
        let split = predictive_au_eu(&predictive(set, x, n_mc, seed)?)?;
        *aleatoric = split.aleatoric;
        *epistemic = split.epistemic;
        Ok(())
    })
}

/// Builds a credal set from `n_members` distributions over `n_classes`
/// labels, stored row-major in `probs`.
///
/// # Safety
/// `probs` must point to `n_members * n_classes` doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ibnn_credal_set_new(
    probs: *const f64,
    n_members: usize,
    n_classes: usize,
    out: *mut *mut IbnnCredalSet,
) -> IbnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n_members
            .checked_mul(n_classes)
            .ok_or_else(|| invalid("n_members * n_classes overflows"))?;
        let probs = slice_in(probs, len, "probs")?;
        if n_classes == 0 {
            return Err(invalid("n_classes must be positive"));
        }
        let rows = probs.chunks(n_classes).map(<[f64]>::to_vec).collect();
        let set = FiniteCredalSet::from_vectors(rows)?;
        *out = Box::into_raw(Box::new(IbnnCredalSet(set)));
        Ok(())
    })
}

/// # Safety
/// `set` must be a live handle or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ibnn_credal_set_free(set: *mut IbnnCredalSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Lower and upper probability of the event whose labels have a nonzero
/// byte in `mask`.
///
/// # Safety
/// `set` must be a live handle; `mask` must point to `n_classes` bytes;
/// `lower` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ibnn_credal_set_event_bounds(
    set: *const IbnnCredalSet,
    mask: *const u8,
    n_classes: usize,
    lower: *mut f64,
    upper: *mut f64,
) -> IbnnStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        if lower.is_null() || upper.is_null() {
            return Err(null("output"));
        }
        let event = EventMask::new(slice_in(mask, n_classes, "mask")?.iter().map(|b| *b != 0).collect());
        *lower = set.lower_prob(&event)?;
        *upper = set.upper_prob(&event)?;
        Ok(())
    })
}

/// Aleatoric (lower entropy) and epistemic (upper minus lower entropy)
/// uncertainty of a credal set.
///
/// # Safety
/// `set` must be a live handle; `aleatoric` and `epistemic` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ibnn_credal_set_uncertainty(
    set: *const IbnnCredalSet,
    aleatoric: *mut f64,
    epistemic: *mut f64,
) -> IbnnStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        if aleatoric.is_null() || epistemic.is_null() {
            return Err(null("output"));
        }
        let split = set.au_eu();
        *aleatoric = split.aleatoric;
        *epistemic = split.epistemic;
        Ok(())
    })
}
