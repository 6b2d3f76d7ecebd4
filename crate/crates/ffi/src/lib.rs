//! C ABI for the `simes` crate.
//!
//! Every fallible function returns a [`SimesStatus`] and writes results
//! through out-pointers. On failure, [`simes_last_error`] returns a copy of
//! the message for the calling thread. Strings handed out by this library
//! are released with [`simes_string_free`]; handles with their matching
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use libc::{c_char, c_double, size_t};
use simes::dependence::{equicorrelated, mtp2_normal_check, sign_balance_check, CorrelationMatrix};
use simes::dist::Marginal;
use simes::orderstats::noncrossing_probability;
use simes::procedures::{
    benjamini_hochberg, generalized_critical_values, hochberg, max_k_cdf_equicorrelated,
    min_k_cdf_equicorrelated, simes_critical_values as simes_boundary, simes_test,
    ExchangeableModel, Extreme, MaxMinCdf, PValueVector, TestOutcome,
};
use simes::twosample::{tn_null_distribution, tn_test_with, NullDistribution, TwoSampleData};
use simes::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    Singular = 4,
    Numerical = 5,
    Parse = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimesMarginal {
    Uniform = 0,
    Normal = 1,
    StudentT = 2,
    AbsNormal = 3,
    AbsStudentT = 4,
}

/// Opaque correlation matrix.
pub struct SimesCorrelation {
    inner: CorrelationMatrix,
}

/// Opaque exact null distribution of the two-sample statistic.
pub struct SimesNullDistribution {
    inner: NullDistribution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SimesStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Precondition(_) => SimesStatus::Precondition,
            Error::Singular { .. } => SimesStatus::Singular,
            Error::Bracketing { .. } => SimesStatus::Numerical,
            Error::Config { .. } | Error::Parse(_) => SimesStatus::Parse,
            Error::Io { .. } => SimesStatus::Io,
            _ => SimesStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null_pointer(name: &str) -> Failure {
    Failure(SimesStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SimesStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SimesStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SimesStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: size_t, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_pointer(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: size_t, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null_pointer(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null_pointer(name));
    }
    *p = value;
    Ok(())
}

fn marginal(kind: SimesMarginal, nu: u32) -> Result<Marginal, Failure> {
    let nu = Some(nu);
    Ok(match kind {
        SimesMarginal::Uniform => Marginal::Uniform,
        SimesMarginal::Normal => Marginal::Normal,
        SimesMarginal::StudentT => Marginal::parse("t", nu)?,
        SimesMarginal::AbsNormal => Marginal::AbsNormal,
        SimesMarginal::AbsStudentT => Marginal::parse("abs-t", nu)?,
    })
}

/// Message of the last failed call on this thread, or NULL. Free with
/// [`simes_string_free`].
#[no_mangle]
pub extern "C" fn simes_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |c| c.clone().into_raw())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn simes_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a correlation matrix from `n * n` row-major entries.
///
/// # Safety
/// `entries` must point to `n * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_correlation_new(
    n: size_t,
    entries: *const c_double,
    out: *mut *mut SimesCorrelation,
) -> SimesStatus {
    guard(|| {
        let e = input(entries, n * n, "entries")?;
        let inner = CorrelationMatrix::new(n, e.to_vec())?;
        write(
            out,
            Box::into_raw(Box::new(SimesCorrelation { inner })),
            "out",
        )
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_correlation_equicorrelated(
    n: size_t,
    rho: c_double,
    out: *mut *mut SimesCorrelation,
) -> SimesStatus {
    guard(|| {
        let inner = equicorrelated(n, rho)?;
        write(
            out,
            Box::into_raw(Box::new(SimesCorrelation { inner })),
            "out",
        )
    })
}

/// # Safety
/// `sigma` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn simes_correlation_free(sigma: *mut SimesCorrelation) {
    if !sigma.is_null() {
        drop(Box::from_raw(sigma));
    }
}

/// # Safety
/// `sigma` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn simes_correlation_dim(sigma: *const SimesCorrelation) -> size_t {
    sigma.as_ref().map_or(0, |s| s.inner.dim())
}

/// Whether every off-diagonal entry of the precision matrix is `≤ tol`.
///
/// # Safety
/// `sigma` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_correlation_mtp2(
    sigma: *const SimesCorrelation,
    tol: c_double,
    out: *mut bool,
) -> SimesStatus {
    guard(|| {
        let s = sigma.as_ref().ok_or_else(|| null_pointer("sigma"))?;
        write(out, mtp2_normal_check(&s.inner, tol)?, "out")
    })
}

/// Searches for signs `d` making `−DΣ⁻¹D` nonnegative off the diagonal.
/// On success `*balanced` says whether one exists and, if so, `signs`
/// (length `dim`) receives ±1 entries.
///
/// # Safety
/// `sigma` must be a live handle; `signs` must hold `dim` entries.
#[no_mangle]
pub unsafe extern "C" fn simes_correlation_sign_balance(
    sigma: *const SimesCorrelation,
    tol: c_double,
    signs: *mut i8,
    balanced: *mut bool,
) -> SimesStatus {
    guard(|| {
        let s = sigma.as_ref().ok_or_else(|| null_pointer("sigma"))?;
        let out = output(signs, s.inner.dim(), "signs")?;
        match sign_balance_check(&s.inner, tol)? {
            Some(d) => {
                out.copy_from_slice(d.signs());
                write(balanced, true, "balanced")
            }
            None => write(balanced, false, "balanced"),
        }
    })
}

/// Exact `P{U_(i) ≥ c_i for all i}` for `n` iid uniforms.
///
/// # Safety
/// `c` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_noncrossing_probability(
    c: *const c_double,
    n: size_t,
    out: *mut c_double,
) -> SimesStatus {
    guard(|| {
        let c = input(c, n, "c")?;
        write(out, noncrossing_probability(c)?, "out")
    })
}

unsafe fn p_values(p: *const c_double, n: size_t) -> Result<PValueVector, Failure> {
    Ok(PValueVector::new(input(p, n, "p")?.to_vec())?)
}

/// Global Simes test.
///
/// # Safety
/// `p` must point to `n` doubles; `reject` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_simes_test(
    p: *const c_double,
    n: size_t,
    alpha: c_double,
    reject: *mut bool,
) -> SimesStatus {
    guard(|| {
        let o = simes_test(&p_values(p, n)?, alpha)?;
        write(reject, o.reject_global, "reject")
    })
}

unsafe fn step_up(
    outcome: TestOutcome,
    mask: *mut bool,
    count: *mut size_t,
) -> Result<(), Failure> {
    let m = output(mask, outcome.n, "rejected")?;
    m.fill(false);
    for &i in &outcome.rejected {
        m[i - 1] = true;
    }
    write(count, outcome.rejected.len(), "count")
}

/// Hochberg step-up. `rejected[i]` is set for each rejected hypothesis.
///
/// # Safety
/// `p` and `rejected` must hold `n` entries; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_hochberg(
    p: *const c_double,
    n: size_t,
    alpha: c_double,
    rejected: *mut bool,
    count: *mut size_t,
) -> SimesStatus {
    guard(|| step_up(hochberg(&p_values(p, n)?, alpha)?, rejected, count))
}

/// Benjamini–Hochberg step-up at level `q`.
///
/// # Safety
/// `p` and `rejected` must hold `n` entries; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_benjamini_hochberg(
    p: *const c_double,
    n: size_t,
    q: c_double,
    rejected: *mut bool,
    count: *mut size_t,
) -> SimesStatus {
    guard(|| step_up(benjamini_hochberg(&p_values(p, n)?, q)?, rejected, count))
}

/// Lower-tail critical values `a_k..a_n` written to `out` (length
/// `n − k + 1`). `k = 1` gives marginal quantiles at `jα/n`; `k ≥ 2` uses the
/// equicorrelated model with correlation `rho` (uniform is not allowed).
/// `nu` is read only for the t marginals.
///
/// # Safety
/// `out` must hold `n − k + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn simes_critical_values(
    n: size_t,
    k: size_t,
    alpha: c_double,
    kind: SimesMarginal,
    nu: u32,
    rho: c_double,
    out: *mut c_double,
) -> SimesStatus {
    guard(|| {
        if k == 0 || k > n {
            return Err(Failure(
                SimesStatus::InvalidArgument,
                format!("k = {k} is outside [1, {n}]"),
            ));
        }
        let m = marginal(kind, nu)?;
        let b = if k == 1 {
            simes_boundary(n, alpha, m)?
        } else {
            let model = match m {
                Marginal::Normal => ExchangeableModel::EquicorrelatedNormal { rho },
                Marginal::AbsNormal => ExchangeableModel::EquicorrelatedAbsNormal { rho },
                Marginal::StudentT { nu } => ExchangeableModel::EquicorrelatedT { rho, nu },
                Marginal::AbsStudentT { nu } => ExchangeableModel::EquicorrelatedAbsT { rho, nu },
                Marginal::Uniform => {
                    return Err(Failure(
                        SimesStatus::InvalidArgument,
                        "k ≥ 2 needs a normal or t marginal".into(),
                    ))
                }
            };
            let fk = MaxMinCdf::new(k as u32, Extreme::Max, model)?;
            generalized_critical_values(n, k, alpha, &fk)?
        };
        output(out, n - k + 1, "out")?.copy_from_slice(b.constants());
        Ok(())
    })
}

/// `P(max of k equicorrelated standard normals ≤ x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_max_k_cdf(
    k: u32,
    rho: c_double,
    x: c_double,
    out: *mut c_double,
) -> SimesStatus {
    guard(|| write(out, max_k_cdf_equicorrelated(k, rho, x)?, "out"))
}

/// `P(min of k equicorrelated standard normals ≤ x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_min_k_cdf(
    k: u32,
    rho: c_double,
    x: c_double,
    out: *mut c_double,
) -> SimesStatus {
    guard(|| write(out, min_k_cdf_equicorrelated(k, rho, x)?, "out"))
}

/// Student-t CDF; NaN for `nu ≤ 0`.
#[no_mangle]
pub extern "C" fn simes_t_cdf(x: c_double, nu: c_double) -> c_double {
    if nu > 0.0 {
        simes::dist::student_t_cdf(x, nu)
    } else {
        f64::NAN
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_t_quantile(
    p: c_double,
    nu: c_double,
    out: *mut c_double,
) -> SimesStatus {
    guard(|| write(out, simes::dist::student_t_quantile(p, nu)?, "out"))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_null_distribution_new(
    n: size_t,
    out: *mut *mut SimesNullDistribution,
) -> SimesStatus {
    guard(|| {
        let inner = tn_null_distribution(n)?;
        write(
            out,
            Box::into_raw(Box::new(SimesNullDistribution { inner })),
            "out",
        )
    })
}

/// # Safety
/// `dist` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn simes_null_distribution_free(dist: *mut SimesNullDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Writes `P₀(T_n = t)` for `t = 0..=n` into `pmf` (length `n + 1`).
///
/// # Safety
/// `dist` must be a live handle; `pmf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn simes_null_distribution_pmf(
    dist: *const SimesNullDistribution,
    pmf: *mut c_double,
    len: size_t,
) -> SimesStatus {
    guard(|| {
        let d = dist.as_ref().ok_or_else(|| null_pointer("dist"))?;
        if len != d.inner.n() + 1 {
            return Err(Error::LengthMismatch {
                expected: d.inner.n() + 1,
                actual: len,
            }
            .into());
        }
        output(pmf, len, "pmf")?.copy_from_slice(&d.inner.pmf());
        Ok(())
    })
}

/// `P₀(T_n ≥ t)`.
///
/// # Safety
/// `dist` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_null_distribution_upper_tail(
    dist: *const SimesNullDistribution,
    t: size_t,
    out: *mut c_double,
) -> SimesStatus {
    guard(|| {
        let d = dist.as_ref().ok_or_else(|| null_pointer("dist"))?;
        write(out, d.inner.upper_tail(t), "out")
    })
}

/// Two-sample test of `F = G` against `G` stochastically larger.
///
/// # Safety
/// `x` and `y` must each hold `n` doubles; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_tn_test(
    x: *const c_double,
    y: *const c_double,
    n: size_t,
    alpha: c_double,
    statistic: *mut size_t,
    p_value: *mut c_double,
    reject: *mut bool,
) -> SimesStatus {
    guard(|| {
        let data = TwoSampleData::new(input(x, n, "x")?.to_vec(), input(y, n, "y")?.to_vec())?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Failure(
                SimesStatus::InvalidArgument,
                format!("alpha = {alpha} is outside (0, 1)"),
            ));
        }
        let null = tn_null_distribution(n)?;
        let o = tn_test_with(&data, alpha, &null);
        write(statistic, o.statistic, "statistic")?;
        write(p_value, o.p_value, "p_value")?;
        write(reject, o.reject, "reject")
    })
}

/// Runs a verification experiment described by `key = value` config text
/// (relative matrix paths resolve against the working directory) and
/// returns the JSON report in `*json`, to be freed with
/// [`simes_string_free`]. `*pass` receives the verdict.
///
/// # Safety
/// `config` must be a NUL-terminated string; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn simes_verify_config(
    config: *const c_char,
    json: *mut *mut c_char,
    pass: *mut bool,
) -> SimesStatus {
    guard(|| {
        if config.is_null() {
            return Err(null_pointer("config"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| Failure(SimesStatus::Parse, format!("config is not UTF-8: {e}")))?;
        let cfg = simes::cli::parse_config_str(text, "<config>", None)?;
        let report = simes::verify::verify(&cfg)?;
        let s = CString::new(report.to_json())
            .map_err(|e| Failure(SimesStatus::Parse, e.to_string()))?;
        write(pass, report.pass, "pass")?;
        write(json, s.into_raw(), "json")
    })
}
