//! C interface to `tbcurv`.
//!
//! Families and manifolds are opaque handles created by `tbc_*_new`
//! functions and released with the matching `tbc_*_free`. Every other call
//! returns a [`TbcStatus`]; on failure, [`tbc_last_error_message`] describes
//! what went wrong on the calling thread.
//!
//! Coefficient functions take `s = |v|^2`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tbcurv::basemanifold::{ChartManifold, ManifoldSpec};
use tbcurv::bundlemetric::BundlePoint;
use tbcurv::closedform;
use tbcurv::metricfamily::{FamilyPreset, FiberArg, NaturalMetricFamily};
use tbcurv::oracle::{self, OracleConfig, Tolerance};
use tbcurv::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// an expression or manifold string did not parse
    Parse = 3,
    /// the family is not a valid metric at the requested argument
    Validity = 4,
    /// a point is outside the chart or the metric degenerates there
    Domain = 5,
    BufferTooSmall = 6,
    /// the closed form and the oracle disagree
    VerificationFailed = 7,
    Internal = 8,
}

/// A natural metric family.
pub struct TbcFamily(NaturalMetricFamily);

/// A chart manifold from the catalog.
pub struct TbcManifold(ChartManifold);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TbcStatus {
    match e {
        Error::Syntax { .. } | Error::UnknownIdentifier { .. } => TbcStatus::Parse,
        Error::Validity { .. } => TbcStatus::Validity,
        Error::Domain { .. } | Error::SingularMetric { .. } | Error::StencilOutOfDomain { .. } => {
            TbcStatus::Domain
        }
        Error::DegenerateInput(_) | Error::Config(_) => TbcStatus::InvalidArgument,
        Error::MissingNablaR => TbcStatus::Internal,
    }
}

/// Runs `f`, records any error message, and never lets a panic cross the
/// boundary.
fn guard(f: impl FnOnce() -> Result<(), (TbcStatus, String)>) -> TbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TbcStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            TbcStatus::Internal
        }
    }
}

fn lib<T>(r: tbcurv::Result<T>) -> Result<T, (TbcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TbcStatus, String) {
    (TbcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TbcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TbcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (TbcStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (TbcStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn point_arg(
    x: *const f64,
    v: *const f64,
    n: usize,
    m: &ChartManifold,
) -> Result<BundlePoint, (TbcStatus, String)> {
    if x.is_null() || v.is_null() {
        return Err(null("point"));
    }
    if n != m.dim() {
        return Err((
            TbcStatus::InvalidArgument,
            format!("point has dimension {n}, manifold has {}", m.dim()),
        ));
    }
    Ok(BundlePoint::new(
        std::slice::from_raw_parts(x, n).to_vec(),
        std::slice::from_raw_parts(v, n).to_vec(),
    ))
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn tbc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tbc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Family from a preset name: `sasaki`, `cheeger-gromoll`, `exp+`, `exp-`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tbc_family_preset(
    name: *const c_char,
    out: *mut *mut TbcFamily,
) -> TbcStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = out_arg(out, "out")?;
        let fam = lib(lib(name.parse::<FamilyPreset>())?.build())?;
        *out = Box::into_raw(Box::new(TbcFamily(fam)));
        Ok(())
    })
}

/// Family from two expressions in `t` (standing for `s = |v|^2`). A null
/// `beta` derives beta from alpha so that the vertical curvature function F
/// vanishes.
///
/// # Safety
/// `alpha` (and `beta` when not null) must be NUL-terminated strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tbc_family_custom(
    alpha: *const c_char,
    beta: *const c_char,
    out: *mut *mut TbcFamily,
) -> TbcStatus {
    guard(|| {
        let alpha = str_arg(alpha, "alpha")?.to_owned();
        let out = out_arg(out, "out")?;
        let preset = if beta.is_null() {
            FamilyPreset::Flatness { alpha }
        } else {
            FamilyPreset::Custom {
                alpha,
                beta: str_arg(beta, "beta")?.to_owned(),
            }
        };
        *out = Box::into_raw(Box::new(TbcFamily(lib(preset.build())?)));
        Ok(())
    })
}

/// Restricts the validated range of `s` to `[0, t_max]`.
///
/// # Safety
/// `fam` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tbc_family_set_t_max(fam: *mut TbcFamily, t_max: f64) -> TbcStatus {
    guard(|| {
        let fam = out_arg(fam, "family")?;
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err((TbcStatus::InvalidArgument, "t_max must be positive".into()));
        }
        fam.0.t_max = t_max;
        Ok(())
    })
}

/// # Safety
/// `fam` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tbc_family_free(fam: *mut TbcFamily) {
    if !fam.is_null() {
        drop(Box::from_raw(fam));
    }
}

/// `F(s)`.
///
/// # Safety
/// `fam` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tbc_family_f(fam: *const TbcFamily, s: f64, out: *mut f64) -> TbcStatus {
    guard(|| {
        let fam = ref_arg(fam, "family")?;
        *out_arg(out, "out")? = lib(fam.0.f(FiberArg::from_sq(s)))?;
        Ok(())
    })
}

/// `H(s)`.
///
/// # Safety
/// `fam` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tbc_family_h(fam: *const TbcFamily, s: f64, out: *mut f64) -> TbcStatus {
    guard(|| {
        let fam = ref_arg(fam, "family")?;
        *out_arg(out, "out")? = lib(fam.0.h(FiberArg::from_sq(s)))?;
        Ok(())
    })
}

/// Samples the validity conditions on `[0, t_max]`. `*valid` is set to 1 or
/// 0; when invalid, `*first_violation` receives the first failing `s`.
///
/// # Safety
/// `fam` must be a live handle; `valid` must be valid; `first_violation`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn tbc_family_validate(
    fam: *const TbcFamily,
    samples: usize,
    valid: *mut i32,
    first_violation: *mut f64,
) -> TbcStatus {
    guard(|| {
        let fam = ref_arg(fam, "family")?;
        let valid = out_arg(valid, "valid")?;
        let report = lib(fam.0.validate(samples))?;
        *valid = i32::from(report.is_valid());
        if let (Some(v), Some(out)) = (report.violation, first_violation.as_mut()) {
            *out = v.t;
        }
        Ok(())
    })
}

/// Manifold from a catalog string such as `sphere:2`, `hyperbolic:2`,
/// `euclidean:3` or `conformal:3:[[0.1,1,1,0]]`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tbc_manifold_new(
    spec: *const c_char,
    out: *mut *mut TbcManifold,
) -> TbcStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        let out = out_arg(out, "out")?;
        let spec: ManifoldSpec = spec
            .parse()
            .map_err(|e: Error| (TbcStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(TbcManifold(lib(spec.build())?)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tbc_manifold_free(m: *mut TbcManifold) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tbc_manifold_dim(m: *const TbcManifold, out: *mut usize) -> TbcStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(m, "manifold")?.0.dim();
        Ok(())
    })
}

/// Closed-form curvature table `<R(e_a,e_b)e_c,e_d>` at `(x, v)`, written
/// row-major into `out` (`(2n)^4` entries). Indices `0..n` are horizontal
/// lifts, `n..2n` vertical lifts, with `e_1` along `v`.
///
/// # Safety
/// `x` and `v` must point to `n` doubles; `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tbc_tm_curvature(
    m: *const TbcManifold,
    fam: *const TbcFamily,
    x: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> TbcStatus {
    guard(|| {
        let m = &ref_arg(m, "manifold")?.0;
        let fam = &ref_arg(fam, "family")?.0;
        let p = point_arg(x, v, n, m)?;
        let need = (2 * n).pow(4);
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < need {
            return Err((
                TbcStatus::BufferTooSmall,
                format!("need {need} entries, got {out_len}"),
            ));
        }
        let fp = lib(m.adapted_frame(&p.x, &p.v))?;
        let table = lib(closedform::tm_curvature(m, fam, &fp))?;
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(table.data.as_slice());
        Ok(())
    })
}

/// Scalar curvature of the tangent bundle at `(x, v)`.
///
/// # Safety
/// `x` and `v` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tbc_tm_scalar(
    m: *const TbcManifold,
    fam: *const TbcFamily,
    x: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
) -> TbcStatus {
    guard(|| {
        let m = &ref_arg(m, "manifold")?.0;
        let fam = &ref_arg(fam, "family")?.0;
        let p = point_arg(x, v, n, m)?;
        let out = out_arg(out, "out")?;
        let fp = lib(m.adapted_frame(&p.x, &p.v))?;
        *out = lib(closedform::tm_scalar(m, fam, &fp))?;
        Ok(())
    })
}

/// Compares the closed-form table at one point with the numerical oracle.
/// Non-positive tolerances select the defaults. Returns
/// `VerificationFailed` when they disagree; `*max_abs_dev` (may be null) is
/// filled either way.
///
/// # Safety
/// `x` and `v` must point to `n` doubles; `max_abs_dev` may be null.
#[no_mangle]
pub unsafe extern "C" fn tbc_verify_point(
    m: *const TbcManifold,
    fam: *const TbcFamily,
    x: *const f64,
    v: *const f64,
    n: usize,
    tol_abs: f64,
    tol_rel: f64,
    max_abs_dev: *mut f64,
) -> TbcStatus {
    guard(|| {
        let m = &ref_arg(m, "manifold")?.0;
        let fam = &ref_arg(fam, "family")?.0;
        let p = point_arg(x, v, n, m)?;
        let mut cfg = OracleConfig::default();
        if tol_abs > 0.0 || tol_rel > 0.0 {
            let d = cfg.tolerance;
            cfg.tolerance = Tolerance {
                abs: if tol_abs > 0.0 { tol_abs } else { d.abs },
                rel: if tol_rel > 0.0 { tol_rel } else { d.rel },
            };
        }
        let run = lib(oracle::compare(m, fam, &[p], &cfg))?;
        let r = &run.reports[0];
        if let Some(e) = &r.error {
            return Err((TbcStatus::Domain, e.clone()));
        }
        if let Some(out) = max_abs_dev.as_mut() {
            *out = r.max_abs_dev;
        }
        if !r.pass {
            return Err((TbcStatus::VerificationFailed, r.summary()));
        }
        Ok(())
    })
}
