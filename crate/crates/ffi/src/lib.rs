//! C interface to `fdedim`.
//!
//! Every function returns an [`FdedimStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`fdedim_last_error`]. Handles and strings returned by the library
//! are released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fdedim::bounds::{self, SqueezeConstants};
use fdedim::charroots::{self, SpectrumTable};
use fdedim::commands::{self, Command, Outcome};
use fdedim::config::RunConfig;
use fdedim::{covering, Error, ErrorClass};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdedimStatus {
    Ok = 0,
    /// Bad argument, configuration or violated precondition.
    Usage = 1,
    /// A numerical routine could not deliver a trustworthy answer.
    Numerical = 2,
    /// Filesystem or serialization failure.
    Io = 3,
    /// The requested bound exists only under a contraction condition that
    /// fails for these constants.
    Infeasible = 4,
    /// The quantity does not exist, e.g. no real characteristic root.
    NotFound = 5,
    NullPointer = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Constants of the squeezing property.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FdedimConstants {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub rank: usize,
    pub t0: f64,
}

impl From<&FdedimConstants> for SqueezeConstants {
    fn from(c: &FdedimConstants) -> Self {
        SqueezeConstants {
            m1: c.m1,
            m2: c.m2,
            m3: c.m3,
            lambda0: c.lambda0,
            lambda1: c.lambda1,
            rank: c.rank,
            t0: c.t0,
        }
    }
}

/// Opaque ordered spectrum.
pub struct FdedimSpectrum(SpectrumTable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn fail(status: FdedimStatus, msg: impl Into<String>) -> FdedimStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> FdedimStatus {
    let status = match e.class() {
        ErrorClass::Usage => FdedimStatus::Usage,
        ErrorClass::Numerical => FdedimStatus::Numerical,
        ErrorClass::Io => FdedimStatus::Io,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`FdedimStatus::Internal`].
fn guard(f: impl FnOnce() -> FdedimStatus) -> FdedimStatus {
    set_error("");
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(FdedimStatus::Internal, "panic inside fdedim"))
}

fn write<T>(out: *mut T, value: T) -> FdedimStatus {
    if out.is_null() {
        return fail(FdedimStatus::NullPointer, "null output pointer");
    }
    // SAFETY: checked non-null; the caller guarantees it is writable.
    unsafe { out.write(value) };
    FdedimStatus::Ok
}

fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, FdedimStatus> {
    if p.is_null() {
        return Err(fail(FdedimStatus::NullPointer, format!("null {what}")));
    }
    // SAFETY: non-null and NUL-terminated by contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(FdedimStatus::Usage, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fdedim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Principal branch of the Lambert W function, `x >= -1/e`.
#[no_mangle]
pub extern "C" fn fdedim_lambert_w0(x: f64, out: *mut f64) -> FdedimStatus {
    guard(|| match charroots::lambert_w0(x) {
        Some(w) => write(out, w),
        None => fail(FdedimStatus::Usage, format!("lambert_w0 is undefined at {x}")),
    })
}

/// Rightmost real root of `lambda + c + b e^{-lambda r} = 0`.
#[no_mangle]
pub extern "C" fn fdedim_real_rightmost_root(c: f64, b: f64, r: f64, out: *mut f64) -> FdedimStatus {
    guard(|| match charroots::real_rightmost_root(c, b, r) {
        Some(x) => write(out, x),
        None => fail(FdedimStatus::NotFound, format!("no real root for c={c}, b={b}, r={r}")),
    })
}

/// Ordered spectrum of the reaction-diffusion equation over modes
/// `1..=max_mode` above `floor`. A NaN floor selects the lowest floor that
/// provably covers every omitted mode.
#[no_mangle]
pub extern "C" fn fdedim_spectrum_new(
    a: f64,
    b: f64,
    r: f64,
    max_mode: usize,
    floor: f64,
    out: *mut *mut FdedimSpectrum,
) -> FdedimStatus {
    guard(|| {
        let floor = if floor.is_nan() { charroots::coverage_floor(a, b, r, max_mode) } else { floor };
        match charroots::ordered_spectrum(a, b, r, max_mode, floor) {
            Ok(t) => write(out, Box::into_raw(Box::new(FdedimSpectrum(t)))),
            Err(e) => from_error(e),
        }
    })
}

/// Number of distinct real parts in the table.
#[no_mangle]
pub extern "C" fn fdedim_spectrum_len(spectrum: *const FdedimSpectrum, out: *mut usize) -> FdedimStatus {
    guard(|| match unsafe { spectrum.as_ref() } {
        Some(s) => write(out, s.0.len()),
        None => fail(FdedimStatus::NullPointer, "null spectrum"),
    })
}

/// Level `m` (1-based): real part, its multiplicity and the cumulative
/// dimension `k_m`.
#[no_mangle]
pub extern "C" fn fdedim_spectrum_level(
    spectrum: *const FdedimSpectrum,
    m: usize,
    rho: *mut f64,
    multiplicity: *mut usize,
    k: *mut usize,
) -> FdedimStatus {
    guard(|| {
        let Some(s) = (unsafe { spectrum.as_ref() }) else {
            return fail(FdedimStatus::NullPointer, "null spectrum");
        };
        let (Some(r), Some(km)) = (s.0.rho(m), s.0.k(m)) else {
            return fail(FdedimStatus::Usage, format!("level {m} outside 1..={}", s.0.len()));
        };
        [write(rho, r), write(multiplicity, s.0.multiplicities[m - 1]), write(k, km)]
            .into_iter()
            .find(|st| *st != FdedimStatus::Ok)
            .unwrap_or(FdedimStatus::Ok)
    })
}

#[no_mangle]
pub extern "C" fn fdedim_spectrum_free(spectrum: *mut FdedimSpectrum) {
    if !spectrum.is_null() {
        // SAFETY: produced by `fdedim_spectrum_new` and freed once.
        drop(unsafe { Box::from_raw(spectrum) });
    }
}

fn bound_call(
    constants: *const FdedimConstants,
    out: *mut f64,
    f: impl FnOnce(&SqueezeConstants) -> fdedim::Result<bounds::Bound>,
) -> FdedimStatus {
    guard(|| {
        let Some(c) = (unsafe { constants.as_ref() }) else {
            return fail(FdedimStatus::NullPointer, "null constants");
        };
        match f(&c.into()) {
            Ok(bounds::Bound::Feasible(v)) => write(out, v),
            Ok(bounds::Bound::Infeasible(why)) => {
                fail(FdedimStatus::Infeasible, format!("{} fails: value {}", why.constraint, why.value))
            }
            Err(e) => from_error(e),
        }
    })
}

/// Hausdorff dimension bound at `alpha` in (0, 2].
#[no_mangle]
pub extern "C" fn fdedim_hausdorff_bound(constants: *const FdedimConstants, alpha: f64, out: *mut f64) -> FdedimStatus {
    bound_call(constants, out, |c| bounds::hausdorff_bound(c, alpha))
}

/// Fractal dimension bound at `alpha` in (0, M1).
#[no_mangle]
pub extern "C" fn fdedim_fractal_bound(constants: *const FdedimConstants, alpha: f64, out: *mut f64) -> FdedimStatus {
    bound_call(constants, out, |c| bounds::fractal_bound(c, alpha))
}

/// Upper bound on the number of radius-`r2` balls covering a radius-`r1`
/// ball in dimension `m`.
#[no_mangle]
pub extern "C" fn fdedim_covering_bound(m: usize, r1: f64, r2: f64, out: *mut f64) -> FdedimStatus {
    guard(|| match covering::covering_bound(m, r1, r2) {
        Ok(n) => write(out, n),
        Err(e) => from_error(e),
    })
}

/// Radius of the absorbing ball for `||S(t)|| <= k0 e^{-gamma t}` and a
/// nonlinearity with Lipschitz constant `lipschitz` and `|f(0)| = f0`.
#[no_mangle]
pub extern "C" fn fdedim_absorbing_radius(k0: f64, gamma: f64, lipschitz: f64, f0: f64, out: *mut f64) -> FdedimStatus {
    guard(|| match bounds::absorbing_radius(k0, gamma, lipschitz, f0) {
        Ok(r) => write(out, r),
        Err(e) => from_error(e),
    })
}

fn command(verb: &str) -> Option<Command> {
    Some(match verb {
        "roots" => Command::Roots,
        "bounds" => Command::Bounds,
        "optimize" => Command::Optimize,
        "simulate" => Command::Simulate,
        "squeeze-check" => Command::SqueezeCheck,
        "absorbing-check" => Command::AbsorbingCheck,
        "boxdim" => Command::Boxdim,
        "cover-check" => Command::CoverCheck,
        "pipeline" => Command::Pipeline,
        _ => return None,
    })
}

/// Runs a CLI verb (`"pipeline"`, `"bounds"`, ...) on a JSON config string.
/// Output files go to the config's `output_dir`. On `Ok` or `Infeasible`
/// the one-line summary is returned in `summary`, to be released with
/// [`fdedim_string_free`].
#[no_mangle]
pub extern "C" fn fdedim_run(verb: *const c_char, config_json: *const c_char, summary: *mut *mut c_char) -> FdedimStatus {
    guard(|| {
        let verb = match read_str(verb, "verb") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let text = match read_str(config_json, "config") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let Some(cmd) = command(verb) else {
            return fail(FdedimStatus::Usage, format!("unknown verb `{verb}`"));
        };
        let result = RunConfig::parse_json(text).and_then(RunConfig::from_value).and_then(|cfg| commands::run(cmd, &cfg));
        match result {
            Ok(res) => {
                let line = CString::new(res.summary.replace('\0', " ")).unwrap_or_default();
                let status = write(summary, line.into_raw());
                match res.outcome {
                    Outcome::Success => status,
                    Outcome::Infeasible(why) => fail(FdedimStatus::Infeasible, why),
                }
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a string returned by the library.
#[no_mangle]
pub extern "C" fn fdedim_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw` in this crate.
        drop(unsafe { CString::from_raw(s) });
    }
}
