//! C ABI over `bergman-lab`.
//!
//! Domains and measures are opaque handles created and freed through this
//! interface. Points are passed as `2n` doubles `re_1, im_1, ..., re_n, im_n`.
//! Every fallible call returns a [`BlStatus`]; on failure
//! [`bl_last_error_message`] describes the error of the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bergman_lab::kernel::kernel;
use bergman_lab::measures::{ball_mass, berezin_transform, Measure};
use bergman_lab::toeplitz::{gain_case, gain_exponent, GainCase};
use bergman_lab::{LabError, ModelDomain, Point, QuadratureRule};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InadmissiblePoint = 3,
    DimensionMismatch = 4,
    InvalidMeasure = 5,
    Numerical = 6,
    Panic = 7,
}

/// Opaque model domain.
pub struct BlDomain(ModelDomain);

/// Opaque measure.
pub struct BlMeasure(Measure);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &LabError) -> BlStatus {
    match e {
        LabError::InadmissiblePoint { .. } => BlStatus::InadmissiblePoint,
        LabError::DimensionMismatch { .. } => BlStatus::DimensionMismatch,
        LabError::InvalidMeasure(_) => BlStatus::InvalidMeasure,
        LabError::NonFiniteIntegrand { .. } | LabError::ProfilePoint { .. } => BlStatus::Numerical,
        _ => BlStatus::InvalidArgument,
    }
}

struct Failure(BlStatus, String);

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording its error (or panic) for [`bl_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BlStatus::Ok
        }
        Ok(Err(Failure(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            BlStatus::Panic
        }
    }
}

unsafe fn domain_ref<'a>(d: *const BlDomain) -> Result<&'a ModelDomain, Failure> {
    d.as_ref().map(|d| &d.0).ok_or_else(|| null("domain"))
}

unsafe fn measure_ref<'a>(m: *const BlMeasure) -> Result<&'a Measure, Failure> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("measure"))
}

unsafe fn point(d: &ModelDomain, coords: *const f64) -> Result<Point, Failure> {
    if coords.is_null() {
        return Err(null("point"));
    }
    let raw = std::slice::from_raw_parts(coords, 2 * d.dim());
    let p = d.point(raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())?;
    Ok(p)
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bl_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"",
    };
    V.as_ptr()
}

/// The unit ball of `C^n` (`kind = 0` with `n = 1` gives the disk).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn bl_domain_new(kind: u32, n: usize, out: *mut *mut BlDomain) -> BlStatus {
    guard(|| {
        let d = match kind {
            0 => ModelDomain::new(bergman_lab::DomainKind::UnitDisk, n)?,
            1 => ModelDomain::ball(n)?,
            k => return Err(Failure(BlStatus::InvalidArgument, format!("unknown domain kind {k}"))),
        };
        write(out, Box::into_raw(Box::new(BlDomain(d))))
    })
}

/// # Safety
/// `d` must come from [`bl_domain_new`] and not be used afterwards; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn bl_domain_free(d: *mut BlDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Complex dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bl_domain_dim(d: *const BlDomain) -> usize {
    d.as_ref().map_or(0, |d| d.0.dim())
}

/// Parses a measure from its JSON form, e.g.
/// `{"variant":"density","eta":1}` or
/// `{"variant":"atomic","atoms":[[0.5,0.0,1.0]]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn bl_measure_from_json(json: *const c_char, out: *mut *mut BlMeasure) -> BlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(BlStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let m = Measure::from_json(s).map_err(|e| Failure(BlStatus::InvalidMeasure, e.to_string()))?;
        write(out, Box::into_raw(Box::new(BlMeasure(m))))
    })
}

/// # Safety
/// `m` must come from [`bl_measure_from_json`] and not be used afterwards;
/// null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bl_measure_free(m: *mut BlMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Bergman kernel `K(z, w)`.
///
/// # Safety
/// `z`, `w` must point to `2n` doubles; `re`, `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_kernel(
    d: *const BlDomain,
    z: *const f64,
    w: *const f64,
    re: *mut f64,
    im: *mut f64,
) -> BlStatus {
    guard(|| {
        let d = domain_ref(d)?;
        let k = kernel(d, &point(d, z)?, &point(d, w)?)?;
        write(re, k.re)?;
        write(im, k.im)
    })
}

/// Berezin transform `B mu(z)` with the default quadrature.
///
/// # Safety
/// `z` must point to `2n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_berezin(m: *const BlMeasure, d: *const BlDomain, z: *const f64, out: *mut f64) -> BlStatus {
    guard(|| {
        let (m, d) = (measure_ref(m)?, domain_ref(d)?);
        let v = berezin_transform(m, d, &point(d, z)?, &QuadratureRule::default())?;
        write(out, v)
    })
}

/// `mu(B(z0, r))` for the pseudohyperbolic ball of radius `r`.
///
/// # Safety
/// `z0` must point to `2n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_ball_mass(
    m: *const BlMeasure,
    d: *const BlDomain,
    z0: *const f64,
    r: f64,
    out: *mut f64,
) -> BlStatus {
    guard(|| {
        let (m, d) = (measure_ref(m)?, domain_ref(d)?);
        write(out, ball_mass(m, d, &point(d, z0)?, r)?)
    })
}

/// `mu(B(z0, r)) / nu(B(z0, r))^theta`.
///
/// # Safety
/// `z0` must point to `2n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_carleson_ratio(
    m: *const BlMeasure,
    d: *const BlDomain,
    z0: *const f64,
    r: f64,
    theta: f64,
    out: *mut f64,
) -> BlStatus {
    guard(|| {
        let (m, d) = (measure_ref(m)?, domain_ref(d)?);
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Failure(BlStatus::InvalidArgument, format!("theta must be > 0, got {theta}")));
        }
        let z0 = point(d, z0)?;
        let mass = ball_mass(m, d, &z0, r)?;
        write(out, mass / d.kobayashi_ball_volume(&z0, r)?.powf(theta))
    })
}

/// Integrability gain `G = p^2 / ((n+1)/eta - p)` of `T_{delta^eta}`;
/// `InvalidArgument` outside the case `(n+1)/(n+1-eta) < p'` where it applies.
#[no_mangle]
pub extern "C" fn bl_gain_exponent(n: usize, eta: f64, p: f64, out: *mut f64) -> BlStatus {
    guard(|| {
        if n == 0 {
            return Err(Failure(BlStatus::InvalidArgument, "n must be >= 1".into()));
        }
        match gain_case(n, eta, p)? {
            GainCase::Sharp => unsafe { write(out, gain_exponent(n, eta, p)) },
            c => Err(Failure(BlStatus::InvalidArgument, format!("no finite gain exponent in case {c:?}"))),
        }
    })
}
