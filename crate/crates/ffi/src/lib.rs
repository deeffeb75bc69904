//! C ABI over `apsumma`.
//!
//! Functions and matrix rows are opaque handles created by `aps_*_new`-style
//! constructors and released with the matching `*_free`. Every call returns
//! an [`ApsStatus`]; on failure a message is kept per thread and can be copied
//! out with [`aps_last_error_message`]. Results are written through out
//! pointers only on success.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use apsumma::kernels::{geometric_sine_sum_closed, psi_k, QuadratureConfig};
use apsumma::moduli::best_approx_bracket;
use apsumma::strong_means::{starred_partial_sum, strong_mean, threshold_partial_sum};
use apsumma::summability::{gm2beta_constant, gm_constant, ms_check, rbvs_constant, generate_row, MatrixRow, RowFamily};
use apsumma::{ApFunction, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidFunction = 3,
    NotStochastic = 4,
    UnknownFamily = 5,
    Parse = 6,
    Panic = 7,
    Other = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApsClass {
    Ms = 0,
    Rbvs = 1,
    Gm = 2,
    Gm2Beta = 3,
}

/// Opaque almost periodic trigonometric sum.
pub struct ApsFunction(ApFunction);

/// Opaque row of a summability matrix.
pub struct ApsRow(MatrixRow);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ApsStatus {
    match e {
        Error::InvalidArgument { .. } => ApsStatus::InvalidArgument,
        Error::InvalidFunction(_) => ApsStatus::InvalidFunction,
        Error::NotStochastic { .. } => ApsStatus::NotStochastic,
        Error::UnknownFamily(_) => ApsStatus::UnknownFamily,
        Error::Json(_) | Error::Config { .. } => ApsStatus::Parse,
        _ => ApsStatus::Other,
    }
}

enum Fail {
    Null(&'static str),
    Api(Error),
    Text(ApsStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Api(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> ApsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ApsStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer passed for `{name}`"));
            ApsStatus::NullPointer
        }
        Ok(Err(Fail::Api(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Text(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            ApsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn write<T>(p: *mut T, v: T, name: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    p.write(v);
    Ok(())
}

unsafe fn c_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail::Text(ApsStatus::Parse, format!("`{name}` is not UTF-8: {e}")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn aps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a function from JSON (`{"alpha": .., "terms": [..]}`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_function_from_json(json: *const c_char, out: *mut *mut ApsFunction) -> ApsStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let f = ApFunction::from_json(text)?;
        write(out, Box::into_raw(Box::new(ApsFunction(f))), "out")
    })
}

/// Builds a function from parallel arrays of exponents and amplitudes.
///
/// # Safety
/// Each array must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn aps_function_new(
    alpha: f64,
    lambdas: *const f64,
    a_plus_re: *const f64,
    a_plus_im: *const f64,
    a_minus_re: *const f64,
    a_minus_im: *const f64,
    len: usize,
    out: *mut *mut ApsFunction,
) -> ApsStatus {
    guard(|| {
        let slice = |p: *const f64, name| -> Result<&[f64], Fail> {
            if p.is_null() {
                return Err(Fail::Null(name));
            }
            Ok(std::slice::from_raw_parts(p, len))
        };
        let (l, pr, pi, mr, mi) = (
            slice(lambdas, "lambdas")?,
            slice(a_plus_re, "a_plus_re")?,
            slice(a_plus_im, "a_plus_im")?,
            slice(a_minus_re, "a_minus_re")?,
            slice(a_minus_im, "a_minus_im")?,
        );
        let terms = (0..len)
            .map(|i| {
                apsumma::Term::new(
                    l[i],
                    num_complex::Complex64::new(pr[i], pi[i]),
                    num_complex::Complex64::new(mr[i], mi[i]),
                )
            })
            .collect();
        let f = ApFunction::new(alpha, terms)?;
        write(out, Box::into_raw(Box::new(ApsFunction(f))), "out")
    })
}

/// # Safety
/// `f` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn aps_function_free(f: *mut ApsFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_function_info(f: *const ApsFunction, alpha: *mut f64, lambda_max: *mut f64) -> ApsStatus {
    guard(|| {
        let f = &deref(f, "f")?.0;
        write(alpha, f.alpha(), "alpha")?;
        write(lambda_max, f.lambda_max(), "lambda_max")
    })
}

/// `f(x)`.
///
/// # Safety
/// `f` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_function_eval(f: *const ApsFunction, x: f64, re: *mut f64, im: *mut f64) -> ApsStatus {
    guard(|| {
        let v = deref(f, "f")?.0.evaluate(x);
        write(re, v.re, "re")?;
        write(im, v.im, "im")
    })
}

/// Sum of the terms with exponent at most `gamma`.
///
/// # Safety
/// `f` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_threshold_partial_sum(
    f: *const ApsFunction,
    x: f64,
    gamma: f64,
    re: *mut f64,
    im: *mut f64,
) -> ApsStatus {
    guard(|| {
        let v = threshold_partial_sum(&deref(f, "f")?.0, x, gamma);
        write(re, v.re, "re")?;
        write(im, v.im, "im")
    })
}

/// Kernel-integral partial sum of index `k` (adjusted when an exponent
/// falls strictly inside the step), with its tail bound.
///
/// # Safety
/// `f` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_kernel_partial_sum(
    f: *const ApsFunction,
    x: f64,
    k: usize,
    abs_tolerance: f64,
    re: *mut f64,
    im: *mut f64,
    tail_bound: *mut f64,
) -> ApsStatus {
    guard(|| {
        let cfg = QuadratureConfig {
            abs_tolerance,
            ..QuadratureConfig::default()
        };
        let s = starred_partial_sum(&deref(f, "f")?.0, x, k, &cfg)?;
        write(re, s.value.re, "re")?;
        write(im, s.value.im, "im")?;
        write(tail_bound, s.tail_bound, "tail_bound")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_psi_k(alpha: f64, k: usize, t: f64, out: *mut f64) -> ApsStatus {
    guard(|| {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Fail::Text(ApsStatus::InvalidArgument, format!("alpha must be positive, got {alpha}")));
        }
        write(out, psi_k(alpha, k, t), "out")
    })
}

/// `Σ_{k≥1} r^k sin(ky) sin(kz)` in closed form.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_geometric_sine_sum(r: f64, y: f64, z: f64, out: *mut f64) -> ApsStatus {
    guard(|| write(out, geometric_sine_sum_closed(r, y, z)?, "out"))
}

/// Lower and upper bounds on the best approximation of type `sigma` in S¹.
///
/// # Safety
/// `f` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_best_approx_bracket(
    f: *const ApsFunction,
    sigma: f64,
    lower: *mut f64,
    upper: *mut f64,
) -> ApsStatus {
    guard(|| {
        let b = best_approx_bracket(&deref(f, "f")?.0, sigma)?;
        write(lower, b.lower, "lower")?;
        write(upper, b.upper, "upper")
    })
}

/// Row `n` of a named family (`cesaro`, `riesz`, `abel`). `param` is the
/// Riesz exponent or the Abel radius; pass NaN for the default.
///
/// # Safety
/// `family` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_row_generate(
    family: *const c_char,
    n: usize,
    param: f64,
    out: *mut *mut ApsRow,
) -> ApsStatus {
    guard(|| {
        let name = c_str(family, "family")?;
        let mut params = BTreeMap::new();
        if !param.is_nan() {
            let key = match name {
                "riesz" => "exponent",
                "abel" => "r",
                _ => {
                    return Err(Fail::Text(
                        ApsStatus::InvalidArgument,
                        format!("family `{name}` takes no parameter"),
                    ))
                }
            };
            params.insert(key.to_string(), param);
        }
        let row = generate_row(&RowFamily::from_name(name, &params)?, n)?;
        write(out, Box::into_raw(Box::new(ApsRow(row))), "out")
    })
}

/// A finite row from `len` nonnegative entries.
///
/// # Safety
/// `entries` must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_row_explicit(
    n: usize,
    entries: *const f64,
    len: usize,
    out: *mut *mut ApsRow,
) -> ApsStatus {
    guard(|| {
        if entries.is_null() {
            return Err(Fail::Null("entries"));
        }
        let v = std::slice::from_raw_parts(entries, len).to_vec();
        let row = MatrixRow::explicit(n, v)?;
        write(out, Box::into_raw(Box::new(ApsRow(row))), "out")
    })
}

/// # Safety
/// `row` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn aps_row_free(row: *mut ApsRow) {
    if !row.is_null() {
        drop(Box::from_raw(row));
    }
}

/// Membership and smallest constant for one class. `k` is set to +inf for
/// non-members. `c` is used by `Gm2Beta` only.
///
/// # Safety
/// `row` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_row_class(
    row: *const ApsRow,
    class: ApsClass,
    c: f64,
    member: *mut bool,
    k: *mut f64,
) -> ApsStatus {
    guard(|| {
        let row = &deref(row, "row")?.0;
        let m = row.default_m_max();
        let rep = match class {
            ApsClass::Ms => ms_check(row),
            ApsClass::Rbvs => rbvs_constant(row, m)?,
            ApsClass::Gm => gm_constant(row, m)?,
            ApsClass::Gm2Beta => gm2beta_constant(row, c, m)?,
        };
        write(member, rep.member, "member")?;
        write(k, rep.k.unwrap_or(f64::INFINITY), "k")
    })
}

/// `{Σ_k a_k |S_{αk/2}f(x) − f(x)|^q}^{1/q}` over the given row.
///
/// # Safety
/// `f` and `row` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aps_strong_mean(
    f: *const ApsFunction,
    x: f64,
    row: *const ApsRow,
    q: f64,
    out: *mut f64,
) -> ApsStatus {
    guard(|| {
        let f = &deref(f, "f")?.0;
        let row = &deref(row, "row")?.0;
        write(out, strong_mean(f, x, row, q, f.alpha())?, "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { aps_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
        assert_eq!(s.len(), n.min(255));
        s
    }

    #[test]
    fn null_pointers_are_reported() {
        let mut out = 0.0;
        assert_eq!(unsafe { aps_function_eval(ptr::null(), 0.0, &mut out, &mut out) }, ApsStatus::NullPointer);
        assert!(last_error().contains("`f`"));
        assert_eq!(unsafe { aps_psi_k(1.0, 0, 0.0, ptr::null_mut()) }, ApsStatus::NullPointer);
    }

    #[test]
    fn errors_map_to_codes() {
        let close = CString::new(r#"{"alpha": 1, "terms": [{"lambda": 1, "a_plus": [1, 0]}, {"lambda": 1.5, "a_plus": [1, 0]}]}"#).unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(unsafe { aps_function_from_json(close.as_ptr(), &mut f) }, ApsStatus::InvalidFunction);
        assert!(f.is_null());
        assert!(last_error().contains("gap"));
        let garbage = CString::new("{").unwrap();
        assert_eq!(unsafe { aps_function_from_json(garbage.as_ptr(), &mut f) }, ApsStatus::Parse);
        let fam = CString::new("borel").unwrap();
        let mut row = ptr::null_mut();
        assert_eq!(unsafe { aps_row_generate(fam.as_ptr(), 3, f64::NAN, &mut row) }, ApsStatus::UnknownFamily);
        let mut v = 0.0;
        assert_eq!(unsafe { aps_geometric_sine_sum(1.0, 1.0, 1.0, &mut v) }, ApsStatus::InvalidArgument);
        assert!(!last_error().is_empty());
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(aps_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
